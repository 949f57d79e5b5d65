#pragma once

#include "persona/autodiff.hpp"
#include "persona/contrastive.hpp"
#include "persona/corpus.hpp"
#include "persona/encoder.hpp"

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace persona::model {

/// One softmax-normalized linear map per trait dimension.
struct ClassifierHeads {
    std::array<ad::TensorPtr, corpus::kNumDims> W; // 2 x d each
    std::array<ad::TensorPtr, corpus::kNumDims> b; // 2 x 1 each

    static ClassifierHeads create(int dim, std::uint64_t seed);
    std::vector<ad::TensorPtr> parameters() const;
};

/// Per-dimension class probabilities for one pooled user embedding.
Eigen::Matrix<double, corpus::kNumDims, 2> classify(const Eigen::VectorXd& u, const ClassifierHeads& heads);

struct ModelConfig {
    std::string encoder_kind = "deterministic_tiny";
    std::string encoder_checkpoint; // seed (tiny) or store path (pretrained)
    int dim = 64;
    int max_tokens = 512;
    std::uint64_t seed = 7; // head initialization

    std::string to_json() const;
    static ModelConfig from_json(const std::string& json);
};

/// Encoder + projection head + classifier heads: everything with weights.
struct Model {
    ModelConfig config;
    std::unique_ptr<enc::Encoder> encoder;
    cl::ProjectionHead head;
    ClassifierHeads heads;

    static Model create(const ModelConfig& config);

    int dim() const { return encoder->dim(); }
    std::vector<ad::TensorPtr> encoder_parameters() const { return encoder->parameters(); }
    std::vector<ad::TensorPtr> other_parameters() const;
    /// Stable names for checkpointing; covers both groups above.
    std::vector<std::pair<std::string, ad::TensorPtr>> named_parameters() const;
};

struct Prediction {
    corpus::TraitLabels labels;
    Eigen::Matrix<double, corpus::kNumDims, 2> probs;
};

/// posts must be preprocessed already; encodes, pools, classifies. Argmax
/// ties go to pole 0.
Prediction predict_user(Model& model, const std::vector<std::string>& posts);

} // namespace persona::model
