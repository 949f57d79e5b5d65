#pragma once

#include "persona/autodiff.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace persona::enc {

/// Sparse text features: hashed character trigrams (within whitespace
/// tokens) plus a whole-token hash per token and one shared bias bucket,
/// L2-normalized. Texts longer than max_tokens are cut there first.
struct FeaturizerOptions {
    int buckets = 1 << 14;
    int max_tokens = 512;
};

ad::SparseRows featurize(const std::vector<std::string>& texts, const FeaturizerOptions& opts);

/// Text -> n x d embeddings. encode_tape() participates in gradient
/// computation; encode() is the plain inference path and returns the same
/// values bit for bit.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual int dim() const = 0;
    virtual std::string kind() const = 0;
    virtual ad::TensorPtr encode_tape(const std::vector<std::string>& texts) = 0;
    virtual std::vector<ad::TensorPtr> parameters() = 0;

    Eigen::MatrixXd encode(const std::vector<std::string>& texts) { return encode_tape(texts)->value; }
};

/// Seeded, trainable backend: hashed trigram features through one linear
/// layer and tanh. Same seed, same text, same vector — on any machine.
class TinyHashEncoder : public Encoder {
public:
    struct Options {
        int dim = 64;
        int buckets = 1 << 14;
        int max_tokens = 512;
        std::uint64_t seed = 7;
    };
    explicit TinyHashEncoder(const Options& opts);

    int dim() const override { return opts_.dim; }
    std::string kind() const override { return "deterministic_tiny"; }
    ad::TensorPtr encode_tape(const std::vector<std::string>& texts) override;
    std::vector<ad::TensorPtr> parameters() override { return {W_, b_}; }

private:
    Options opts_;
    ad::TensorPtr W_; // dim x buckets
    ad::TensorPtr b_; // dim x 1
};

/// Flat binary file of (text-hash, float32 vector) pairs, sorted by hash.
/// Holds embeddings exported offline by a real transformer encoder.
class EmbeddingStore {
public:
    static EmbeddingStore load(const std::string& path);
    static void write(const std::string& path, int dim,
                      std::vector<std::pair<std::uint64_t, std::vector<float>>> entries);

    int dim() const { return dim_; }
    std::size_t size() const { return keys_.size(); }
    /// Row of the embedding table for this exact text, if present.
    std::optional<Eigen::VectorXd> find(const std::string& text) const;

private:
    int dim_ = 0;
    std::vector<std::uint64_t> keys_;
    std::vector<float> values_; // keys_.size() * dim_, row-major
};

/// Frozen backend that serves embeddings from an EmbeddingStore. Carries no
/// trainable parameters; unknown text is a hard error.
class PrecomputedEncoder : public Encoder {
public:
    PrecomputedEncoder(EmbeddingStore store, int max_tokens);

    int dim() const override { return store_.dim(); }
    std::string kind() const override { return "pretrained_transformer"; }
    ad::TensorPtr encode_tape(const std::vector<std::string>& texts) override;
    std::vector<ad::TensorPtr> parameters() override { return {}; }

private:
    EmbeddingStore store_;
    int max_tokens_;
};

/// Mean over one user's post embeddings (rows).
Eigen::VectorXd mean_pool_user(const Eigen::MatrixXd& post_embeddings);

/// Backend factory. kind is "deterministic_tiny" or "pretrained_transformer";
/// checkpoint_or_seed is a decimal seed for the former and an embedding-store
/// path for the latter.
std::unique_ptr<Encoder> make_encoder(const std::string& kind, const std::string& checkpoint_or_seed, int dim,
                                      int max_tokens);

} // namespace persona::enc
