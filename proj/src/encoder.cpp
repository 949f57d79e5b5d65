#include "persona/encoder.hpp"

#include "persona/log.hpp"
#include "persona/rng.hpp"
#include "persona/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace persona::enc {

namespace {

constexpr char kStoreMagic[8] = {'P', 'E', 'R', 'S', 'E', 'M', 'B', '1'};
constexpr std::uint32_t kStoreVersion = 1;

int bucket_of(const std::string& key, int buckets) {
    return static_cast<int>(fnv1a64(key) % static_cast<std::uint64_t>(buckets));
}

} // namespace

ad::SparseRows featurize(const std::vector<std::string>& texts, const FeaturizerOptions& opts) {
    if (opts.buckets < 2) throw ConfigError("featurize: need at least 2 buckets");
    if (opts.max_tokens < 1) throw ConfigError("featurize: max_tokens must be >= 1");
    ad::SparseRows out;
    out.cols = opts.buckets;
    out.rows.reserve(texts.size());
    const int bias_bucket = bucket_of("<bias>", opts.buckets);
    std::size_t truncated = 0;

    for (const auto& text : texts) {
        auto tokens = split_whitespace(to_lower(text));
        if (tokens.size() > static_cast<std::size_t>(opts.max_tokens)) {
            tokens.resize(static_cast<std::size_t>(opts.max_tokens));
            ++truncated;
        }
        std::unordered_map<int, double> counts;
        counts[bias_bucket] += 1.0;
        for (const auto& tok : tokens) {
            counts[bucket_of("t:" + tok, opts.buckets)] += 1.0;
            if (tok.size() >= 3) {
                for (std::size_t i = 0; i + 3 <= tok.size(); ++i) {
                    counts[bucket_of("3:" + tok.substr(i, 3), opts.buckets)] += 1.0;
                }
            }
        }
        std::vector<std::pair<int, double>> row(counts.begin(), counts.end());
        std::sort(row.begin(), row.end()); // fixed accumulation order downstream
        double sq = 0.0;
        for (const auto& [_, v] : row) sq += v * v;
        const double norm = std::sqrt(sq);
        for (auto& [_, v] : row) v /= norm;
        out.rows.push_back(std::move(row));
    }
    if (truncated > 0) {
        log::warn("featurize: truncated " + std::to_string(truncated) + " of " + std::to_string(texts.size()) +
                  " texts to " + std::to_string(opts.max_tokens) + " tokens");
    }
    return out;
}

TinyHashEncoder::TinyHashEncoder(const Options& opts) : opts_(opts) {
    if (opts.dim < 1) throw ConfigError("encoder dim must be >= 1");
    Rng rng(opts.seed);
    Eigen::MatrixXd W(opts.dim, opts.buckets);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.gaussian();
    }
    W_ = ad::param(std::move(W));
    b_ = ad::param(Eigen::MatrixXd::Zero(opts.dim, 1));
}

ad::TensorPtr TinyHashEncoder::encode_tape(const std::vector<std::string>& texts) {
    if (texts.empty()) throw DataError("encode: empty text batch");
    auto feats = featurize(texts, FeaturizerOptions{opts_.buckets, opts_.max_tokens});
    return ad::tanh(ad::sparse_linear(W_, b_, std::move(feats)));
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding store: " + path);
    char magic[8];
    std::uint32_t version = 0, dim = 0;
    std::uint64_t count = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || std::memcmp(magic, kStoreMagic, sizeof magic) != 0)
        throw DataError("not an embedding store: " + path);
    if (version != kStoreVersion)
        throw DataError("embedding store version " + std::to_string(version) + " unsupported: " + path);
    if (dim == 0 || dim > 1 << 16) throw DataError("embedding store has implausible dim: " + path);

    EmbeddingStore store;
    store.dim_ = static_cast<int>(dim);
    store.keys_.resize(count);
    store.values_.resize(count * dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(&store.keys_[i]), sizeof(std::uint64_t));
        in.read(reinterpret_cast<char*>(&store.values_[i * dim]), std::streamsize(sizeof(float)) * dim);
    }
    if (!in) throw DataError("embedding store truncated: " + path);
    if (!std::is_sorted(store.keys_.begin(), store.keys_.end()))
        throw DataError("embedding store keys not sorted: " + path);
    return store;
}

void EmbeddingStore::write(const std::string& path, int dim,
                           std::vector<std::pair<std::uint64_t, std::vector<float>>> entries) {
    if (dim < 1) throw ConfigError("embedding store dim must be >= 1");
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
        if (entries[i].first == entries[i + 1].first)
            throw DataError("embedding store: duplicate key " + std::to_string(entries[i].first));
    }
    std::string blob;
    blob.reserve(24 + entries.size() * (8 + static_cast<std::size_t>(dim) * 4));
    blob.append(kStoreMagic, sizeof kStoreMagic);
    auto append_pod = [&blob](const auto& v) { blob.append(reinterpret_cast<const char*>(&v), sizeof v); };
    append_pod(kStoreVersion);
    append_pod(static_cast<std::uint32_t>(dim));
    append_pod(static_cast<std::uint64_t>(entries.size()));
    for (const auto& [key, vec] : entries) {
        if (vec.size() != static_cast<std::size_t>(dim))
            throw DataError("embedding store: vector with wrong dim for key " + std::to_string(key));
        append_pod(key);
        blob.append(reinterpret_cast<const char*>(vec.data()), vec.size() * sizeof(float));
    }
    write_file_atomic(path, blob);
}

std::optional<Eigen::VectorXd> EmbeddingStore::find(const std::string& text) const {
    const std::uint64_t key = fnv1a64(text);
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return std::nullopt;
    const std::size_t row = static_cast<std::size_t>(it - keys_.begin());
    Eigen::VectorXd v(dim_);
    for (int j = 0; j < dim_; ++j) v(j) = static_cast<double>(values_[row * static_cast<std::size_t>(dim_) + j]);
    return v;
}

PrecomputedEncoder::PrecomputedEncoder(EmbeddingStore store, int max_tokens)
    : store_(std::move(store)), max_tokens_(max_tokens) {
    if (store_.size() == 0) throw DataError("embedding store is empty");
}

ad::TensorPtr PrecomputedEncoder::encode_tape(const std::vector<std::string>& texts) {
    if (texts.empty()) throw DataError("encode: empty text batch");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), store_.dim());
    std::size_t over_limit = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (count_words(texts[i]) > static_cast<std::size_t>(max_tokens_)) ++over_limit;
        auto v = store_.find(texts[i]);
        if (!v) {
            throw DataError("embedding store has no entry for text (hash " + content_hash(texts[i]) +
                            "): " + texts[i].substr(0, 60));
        }
        out.row(static_cast<Eigen::Index>(i)) = v->transpose();
    }
    if (over_limit > 0) {
        log::warn("encode: " + std::to_string(over_limit) +
                  " texts exceed max_tokens; the exported store is assumed to have truncated them");
    }
    return ad::constant(std::move(out));
}

Eigen::VectorXd mean_pool_user(const Eigen::MatrixXd& post_embeddings) {
    if (post_embeddings.rows() == 0) throw DataError("mean_pool_user: user has no post embeddings");
    return post_embeddings.colwise().mean().transpose();
}

std::unique_ptr<Encoder> make_encoder(const std::string& kind, const std::string& checkpoint_or_seed, int dim,
                                      int max_tokens) {
    if (kind == "deterministic_tiny") {
        TinyHashEncoder::Options opts;
        opts.dim = dim;
        opts.max_tokens = max_tokens;
        if (!checkpoint_or_seed.empty()) {
            try {
                opts.seed = std::stoull(checkpoint_or_seed);
            } catch (const std::exception&) {
                throw ConfigError("deterministic_tiny expects a numeric seed, got '" + checkpoint_or_seed + "'");
            }
        }
        return std::make_unique<TinyHashEncoder>(opts);
    }
    if (kind == "pretrained_transformer") {
        if (checkpoint_or_seed.empty())
            throw ConfigError("pretrained_transformer needs encoder.checkpoint pointing at an embedding store");
        return std::make_unique<PrecomputedEncoder>(EmbeddingStore::load(checkpoint_or_seed), max_tokens);
    }
    throw ConfigError("unknown encoder kind: '" + kind + "'");
}

} // namespace persona::enc
