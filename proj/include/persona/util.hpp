#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace persona {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input files, malformed records, missing resources.
class DataError : public Error {
public:
    using Error::Error;
};

// Configuration that cannot be resolved (unknown keys, bad values).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite losses, dimension mismatches and friends.
class NumericError : public Error {
public:
    using Error::Error;
};

// FNV-1a, 64-bit. Stable across platforms; used as the content address
// for posts and cached generations.
std::uint64_t fnv1a64(std::string_view data);

// fnv1a64 rendered as 16 lowercase hex chars.
std::string content_hash(std::string_view data);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Splits on runs of whitespace; never returns empty tokens.
std::vector<std::string> split_whitespace(std::string_view s);

std::vector<std::string> split_on(std::string_view s, std::string_view delim);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::size_t count_words(std::string_view s);

// Reads a whole file into a string; throws DataError if unreadable.
std::string read_file(const std::string& path);

// Writes atomically: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, std::string_view content);

} // namespace persona
