#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <utility>
#include <vector>

// Minimal reverse-mode tape over Eigen matrices. Only the operations the
// training graph needs; every backward formula is covered by the
// finite-difference tests in tests/test_autodiff.cpp.
namespace persona::ad {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad; // allocated on first accumulate
    bool requires_grad = false;
    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> backward_fn;

    void accumulate(const Eigen::MatrixXd& g);
    bool has_grad() const { return grad.size() > 0; }
    double item() const { return value(0, 0); }
};

// One row of hashed features per input text: (bucket index, weight) pairs.
struct SparseRows {
    Eigen::Index cols = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;
    Eigen::Index size() const { return static_cast<Eigen::Index>(rows.size()); }
};

TensorPtr constant(Eigen::MatrixXd v);
TensorPtr param(Eigen::MatrixXd v);

// x:[n,din] W:[dout,din] b:[dout,1] -> x*W^T + 1*b^T : [n,dout]
TensorPtr linear(const TensorPtr& x, const TensorPtr& W, const TensorPtr& b);

// W:[dout,F] b:[dout,1], features: n sparse rows over F buckets -> [n,dout]
TensorPtr sparse_linear(const TensorPtr& W, const TensorPtr& b, SparseRows features);

TensorPtr tanh(const TensorPtr& x);

// a:[n,d] b:[m,d] -> a*b^T : [n,m]
TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);

// Rows scaled to unit L2 norm. Throws NumericError on an all-zero row.
TensorPtr l2_normalize_rows(const TensorPtr& x);

TensorPtr gather_rows(const TensorPtr& x, std::vector<Eigen::Index> rows);

// segments are (start,count) ranges of rows; output row s is the mean of
// segment s. Backs Eq.-style average pooling of one user's posts.
TensorPtr segment_mean_rows(const TensorPtr& x, std::vector<std::pair<Eigen::Index, Eigen::Index>> segments);

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);

// Sum over rows of KL(target_row || softmax(logit_row)) as a 1x1 tensor.
// `floor` guards the log of underflowed predictions only.
TensorPtr kl_simplex_loss(const TensorPtr& logits, const Eigen::MatrixXd& targets, double floor = 1e-12);

// Multi-positive InfoNCE over a similarity matrix. Row i of `sims` is an
// anchor; column k is a positive owned by anchor col_owner[k]. Every row
// must own at least one column. Returns the mean over rows of
//   -log( sum_{k owned} exp(s_ik/tau) / sum_{all k} exp(s_ik/tau) )
// or, with sum_of_logs, the per-positive -log ratios averaged first within
// each row.
TensorPtr multi_positive_nce(const TensorPtr& sims, std::vector<Eigen::Index> col_owner, double tau,
                             bool sum_of_logs = false);

// Reverse pass. Seeds d(loss)/d(loss) = 1; loss must be 1x1.
void backward(const TensorPtr& loss);

void zero_grad(const std::vector<TensorPtr>& params);

} // namespace persona::ad
