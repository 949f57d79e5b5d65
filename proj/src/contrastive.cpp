#include "persona/contrastive.hpp"

#include "persona/log.hpp"
#include "persona/util.hpp"

namespace persona::cl {

ProjectionHead ProjectionHead::create(int dim, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("projection head dim must be >= 1");
    Rng rng(seed);
    Eigen::MatrixXd W(dim, dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = scale * rng.gaussian();
    }
    ProjectionHead head;
    head.W = ad::param(std::move(W));
    head.b = ad::param(Eigen::MatrixXd::Zero(dim, 1));
    return head;
}

ad::TensorPtr project(const ad::TensorPtr& h, const ProjectionHead& head) {
    if (h->value.cols() != head.W->value.cols()) throw NumericError("project: dimension mismatch");
    return ad::tanh(ad::linear(h, head.W, head.b));
}

double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw NumericError("cosine_sim: dimension mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine_sim: zero vector");
    return a.dot(b) / (na * nb);
}

NceResult info_nce_multi_positive(const ad::TensorPtr& z_all, const BatchLayout& layout, double tau,
                                  bool sum_of_logs) {
    if (layout.anchor_rows.size() != layout.positive_rows.size())
        throw NumericError("info_nce: layout row counts disagree");

    // Keep only anchors that still have at least one analysis.
    std::vector<Eigen::Index> anchors;
    std::vector<Eigen::Index> positives;   // rows of z_all
    std::vector<Eigen::Index> owner;       // positive -> index into anchors
    for (std::size_t i = 0; i < layout.anchor_rows.size(); ++i) {
        std::vector<Eigen::Index> own;
        for (const auto& row : layout.positive_rows[i]) {
            if (row) own.push_back(*row);
        }
        if (own.empty()) continue;
        const Eigen::Index a = static_cast<Eigen::Index>(anchors.size());
        anchors.push_back(layout.anchor_rows[i]);
        for (Eigen::Index row : own) {
            positives.push_back(row);
            owner.push_back(a);
        }
    }

    NceResult result;
    result.included_anchors = static_cast<Eigen::Index>(anchors.size());
    result.positive_count = static_cast<Eigen::Index>(positives.size());
    if (anchors.empty()) {
        log::warn("info_nce: no anchor has a valid positive; contrastive term is 0");
        result.loss = ad::constant(Eigen::MatrixXd::Zero(1, 1));
        return result;
    }

    auto za = ad::l2_normalize_rows(ad::gather_rows(z_all, anchors));
    auto zp = ad::l2_normalize_rows(ad::gather_rows(z_all, positives));
    auto sims = ad::matmul_nt(za, zp); // cosine, rows anchors x cols positives
    result.loss = ad::multi_positive_nce(sims, owner, tau, sum_of_logs);
    return result;
}

std::vector<std::vector<std::size_t>> chunk_indices(std::size_t n, std::size_t chunk_size, Rng& rng) {
    if (chunk_size == 0) throw ConfigError("chunk_indices: chunk_size must be >= 1");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t start = 0; start < n; start += chunk_size) {
        const std::size_t end = std::min(n, start + chunk_size);
        chunks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return chunks;
}

} // namespace persona::cl
