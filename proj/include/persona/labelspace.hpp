#pragma once

#include "persona/contrastive.hpp"
#include "persona/corpus.hpp"
#include "persona/encoder.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>

namespace persona::ls {

/// One description text per (dimension, pole, aspect): 4 x 2 x 3 = 24 texts.
struct LabelDescriptionSet {
    std::array<std::array<std::array<std::string, cl::kNumAspects>, 2>, corpus::kNumDims> texts;

    static LabelDescriptionSet from_json_file(const std::string& path);
    std::string to_json() const;
    void validate() const; // every slot non-empty

    const std::string& at(int dim, int pole, int aspect) const {
        return texts[static_cast<std::size_t>(dim)][static_cast<std::size_t>(pole)][static_cast<std::size_t>(aspect)];
    }
};

/// V[t][j]: mean of the three aspect-text embeddings for pole j of dim t.
struct LabelEmbeddings {
    std::array<std::array<Eigen::VectorXd, 2>, corpus::kNumDims> V;
    int dim() const { return static_cast<int>(V[0][0].size()); }
};

LabelEmbeddings embed_labels(const LabelDescriptionSet& descriptions, enc::Encoder& encoder);

struct SoftLabel {
    Eigen::Vector2d y_s; // similarity distribution
    Eigen::Vector2d y_c; // combined target, used detached
};

/// y_s = softmax(cos(u, v0), cos(u, v1)); y_c = softmax(alpha * y_t + y_s).
/// Pure value computation — gradients never flow through the target.
SoftLabel soft_label(const Eigen::VectorXd& u, const std::array<Eigen::VectorXd, 2>& V_t,
                     const std::array<double, 2>& y_t, double alpha);

/// Numerically safe softmax over a pair of logits.
Eigen::Vector2d softmax2(double a, double b);

} // namespace persona::ls
