#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace persona::corpus {

// The four MBTI dimensions, in fixed order. Pole 0 is the first letter of
// each pair (I, S, T, P), pole 1 the second (E, N, F, J).
inline constexpr int kNumDims = 4;
inline constexpr std::array<const char*, kNumDims> kDimNames = {"I/E", "S/N", "T/F", "P/J"};
inline constexpr std::array<std::array<char, 2>, kNumDims> kPoleLetters = {
    {{'I', 'E'}, {'S', 'N'}, {'T', 'F'}, {'P', 'J'}}};

const std::vector<std::string>& mbti_type_codes(); // the 16 four-letter codes

/// Four binary trait dimensions; poles[t] is 0 or 1.
struct TraitLabels {
    std::array<int, kNumDims> poles{};

    static TraitLabels from_code(const std::string& code); // throws DataError on bad code
    std::string to_code() const;
    std::array<double, 2> one_hot(int dim) const {
        return poles[static_cast<std::size_t>(dim)] == 0 ? std::array<double, 2>{1.0, 0.0}
                                                         : std::array<double, 2>{0.0, 1.0};
    }
    bool operator==(const TraitLabels&) const = default;
};

std::optional<TraitLabels> try_parse_code(const std::string& code);

struct UserRecord {
    std::string user_id;
    std::vector<std::string> posts;
    TraitLabels labels;
};

enum class DatasetFormat { kaggle_csv, pandora_dir, jsonl };

DatasetFormat parse_format(const std::string& name); // throws ConfigError

struct RowIssue {
    std::size_t row = 0;
    std::string message;
};

struct ParseResult {
    std::vector<UserRecord> records;
    std::vector<RowIssue> errors;   // malformed labels and similar; data is unusable
    std::vector<RowIssue> warnings; // rejected-but-recoverable rows (e.g. no posts)
};

// Reads raw records; no preprocessing is applied here.
//  - kaggle_csv: header with "type" and "posts" columns, posts "|||"-joined
//  - pandora_dir: directory with author_profiles.csv (author,mbti) and
//    comments.csv (author,body); posts grouped per author in file order
//  - jsonl: one {"user_id","posts","mbti"} object per line
ParseResult parse_dataset(const std::string& path, DatasetFormat format);

struct PreprocessOptions {
    int max_posts = 50;
    int max_words = 70;
    std::vector<std::string> extra_mask_words; // appended to the 16 type codes
};

// Replaces every word-bounded, case-insensitive lexicon match with the
// literal token "<type>". Everything else is preserved byte for byte.
std::string mask_label_words(const std::string& text, const std::vector<std::string>& lexicon);

// Word-bounded, case-insensitive match count; the leakage scan.
std::size_t count_lexicon_matches(const std::string& text, const std::vector<std::string>& lexicon);

// First max_words whitespace tokens, single-space joined. Text at or under
// the limit is returned unchanged.
std::string truncate_post(const std::string& text, int max_words = 70);

// Keeps the first max_posts posts in original order.
UserRecord limit_posts(UserRecord record, int max_posts = 50);

// mask -> truncate -> drop whitespace-only posts -> limit. Returns nullopt
// when no posts survive.
std::optional<UserRecord> preprocess_record(UserRecord record, const PreprocessOptions& opts = {});

std::vector<UserRecord> preprocess_records(std::vector<UserRecord> records, const PreprocessOptions& opts = {},
                                           std::vector<RowIssue>* warnings = nullptr);

struct SplitRatios {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

struct DatasetSplit {
    std::vector<UserRecord> train;
    std::vector<UserRecord> validation;
    std::vector<UserRecord> test;
    std::uint64_t seed = 0;
    SplitRatios ratios;
};

// One seeded whole-list shuffle, then slicing: floor(r_train*n) /
// floor(r_val*n) / rest. Throws DataError for fewer than 3 records or
// ratios not summing to 1.
DatasetSplit split_dataset(std::vector<UserRecord> records, SplitRatios ratios, std::uint64_t seed);

/// Per-dimension pole counts (Table-style statistics).
struct ClassStats {
    std::array<std::array<std::size_t, 2>, kNumDims> counts{};
    std::size_t total = 0;
};

ClassStats class_stats(const std::vector<UserRecord>& records);

std::string stats_table(const ClassStats& train, const ClassStats& validation, const ClassStats& test);
std::string stats_json(const ClassStats& train, const ClassStats& validation, const ClassStats& test);

// Canonical JSONL round-trip.
void write_jsonl(const std::string& path, const std::vector<UserRecord>& records);
std::vector<UserRecord> read_jsonl(const std::string& path);

} // namespace persona::corpus
