#pragma once

#include "persona/autodiff.hpp"
#include "persona/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <vector>

namespace persona::cl {

constexpr int kNumAspects = 3;
inline constexpr std::array<const char*, kNumAspects> kAspectNames = {"semantic", "sentiment", "linguistic"};

/// z = tanh(W h + b), dimension-preserving.
struct ProjectionHead {
    ad::TensorPtr W; // d x d
    ad::TensorPtr b; // d x 1

    static ProjectionHead create(int dim, std::uint64_t seed);
    std::vector<ad::TensorPtr> parameters() const { return {W, b}; }
    int dim() const { return static_cast<int>(W->value.rows()); }
};

ad::TensorPtr project(const ad::TensorPtr& h, const ProjectionHead& head);

/// Plain cosine; rejects zero vectors.
double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Row bookkeeping for one contrastive pass over a projected matrix z_all:
/// anchor i sits at row anchor_rows[i], and its aspect-k analysis (when the
/// augmentation exists) at positive_rows[i][k]. Cross-anchor rows are never
/// listed as positives of i.
struct BatchLayout {
    std::vector<Eigen::Index> anchor_rows;
    std::vector<std::array<std::optional<Eigen::Index>, kNumAspects>> positive_rows;
};

struct NceResult {
    ad::TensorPtr loss;           // scalar
    Eigen::Index included_anchors = 0; // anchors with >= 1 valid positive
    Eigen::Index positive_count = 0;   // total columns in the softmax
};

/// Multi-positive in-batch InfoNCE over cosine similarities. Anchors without
/// any valid positive are dropped from the mean; if none remain the loss is
/// a constant 0 and a warning is logged.
NceResult info_nce_multi_positive(const ad::TensorPtr& z_all, const BatchLayout& layout, double tau,
                                  bool sum_of_logs = false);

/// Splits the anchor indices [0, n) into chunks of at most chunk_size, in a
/// seeded shuffled order, so big batches can run the loss piecewise while
/// keeping in-batch negatives within each chunk.
std::vector<std::vector<std::size_t>> chunk_indices(std::size_t n, std::size_t chunk_size, Rng& rng);

} // namespace persona::cl
