#include "persona/checkpoint.hpp"

#include "persona/util.hpp"

#include <cstring>
#include <fstream>

namespace persona::ckpt {

namespace {

constexpr char kMagic[8] = {'P', 'E', 'R', 'S', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void append_pod(std::string& blob, const auto& v) { blob.append(reinterpret_cast<const char*>(&v), sizeof v); }

void append_string(std::string& blob, const std::string& s) {
    append_pod(blob, static_cast<std::uint64_t>(s.size()));
    blob.append(s);
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError("checkpoint truncated: " + path);
    return v;
}

std::string read_string(std::ifstream& in, const std::string& path) {
    const auto len = read_pod<std::uint64_t>(in, path);
    if (len > (1ull << 32)) throw DataError("checkpoint has implausible string length: " + path);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint truncated: " + path);
    return s;
}

} // namespace

void Checkpoint::save(const std::string& path) const {
    std::string blob;
    blob.append(kMagic, sizeof kMagic);
    append_pod(blob, kVersion);
    append_string(blob, model_config_json);
    append_string(blob, run_config_json);
    append_pod(blob, static_cast<std::int32_t>(epoch));
    append_pod(blob, val_metric);
    append_pod(blob, static_cast<std::uint64_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        append_string(blob, name);
        append_pod(blob, static_cast<std::uint64_t>(m.rows()));
        append_pod(blob, static_cast<std::uint64_t>(m.cols()));
        blob.append(reinterpret_cast<const char*>(m.data()),
                    static_cast<std::size_t>(m.size()) * sizeof(double));
    }
    write_file_atomic(path, blob);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError("not a checkpoint file: " + path);
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kVersion)
        throw DataError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kVersion) + "): " + path);

    Checkpoint ckpt;
    ckpt.model_config_json = read_string(in, path);
    ckpt.run_config_json = read_string(in, path);
    ckpt.epoch = read_pod<std::int32_t>(in, path);
    ckpt.val_metric = read_pod<double>(in, path);
    const auto count = read_pod<std::uint64_t>(in, path);
    if (count > 1u << 20) throw DataError("checkpoint has implausible tensor count: " + path);
    ckpt.tensors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = read_string(in, path);
        const auto rows = read_pod<std::uint64_t>(in, path);
        const auto cols = read_pod<std::uint64_t>(in, path);
        if (rows > 1u << 24 || cols > 1u << 24) throw DataError("checkpoint tensor too large: " + path);
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!in) throw DataError("checkpoint truncated: " + path);
        ckpt.tensors.emplace_back(std::move(name), std::move(m));
    }
    return ckpt;
}

const Eigen::MatrixXd* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, m] : tensors) {
        if (n == name) return &m;
    }
    return nullptr;
}

} // namespace persona::ckpt
