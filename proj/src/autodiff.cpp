#include "persona/autodiff.hpp"

#include "persona/util.hpp"

#include <cmath>
#include <unordered_set>

namespace persona::ad {

namespace {

bool any_requires_grad(const std::vector<TensorPtr>& parents) {
    for (const auto& p : parents) {
        if (p->requires_grad) return true;
    }
    return false;
}

TensorPtr make_node(Eigen::MatrixXd value, std::vector<TensorPtr> parents, std::function<void(Tensor&)> fn) {
    auto t = std::make_shared<Tensor>();
    t->value = std::move(value);
    t->requires_grad = any_requires_grad(parents);
    if (t->requires_grad) {
        t->parents = std::move(parents);
        t->backward_fn = std::move(fn);
    }
    return t;
}

} // namespace

void Tensor::accumulate(const Eigen::MatrixXd& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
    grad += g;
}

TensorPtr constant(Eigen::MatrixXd v) {
    auto t = std::make_shared<Tensor>();
    t->value = std::move(v);
    t->requires_grad = false;
    return t;
}

TensorPtr param(Eigen::MatrixXd v) {
    auto t = std::make_shared<Tensor>();
    t->value = std::move(v);
    t->requires_grad = true;
    return t;
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& W, const TensorPtr& b) {
    if (x->value.cols() != W->value.cols()) throw NumericError("linear: input width != weight width");
    if (W->value.rows() != b->value.rows() || b->value.cols() != 1)
        throw NumericError("linear: bias shape mismatch");
    Eigen::MatrixXd out = x->value * W->value.transpose();
    out.rowwise() += b->value.col(0).transpose();
    return make_node(std::move(out), {x, W, b}, [](Tensor& self) {
        const auto& g = self.grad;
        Tensor& x = *self.parents[0];
        Tensor& W = *self.parents[1];
        Tensor& b = *self.parents[2];
        if (x.requires_grad) x.accumulate(g * W.value);
        if (W.requires_grad) W.accumulate(g.transpose() * x.value);
        if (b.requires_grad) b.accumulate(g.colwise().sum().transpose());
    });
}

TensorPtr sparse_linear(const TensorPtr& W, const TensorPtr& b, SparseRows features) {
    const Eigen::Index n = features.size();
    const Eigen::Index dout = W->value.rows();
    if (W->value.cols() != features.cols) throw NumericError("sparse_linear: feature width mismatch");
    if (b->value.rows() != dout || b->value.cols() != 1) throw NumericError("sparse_linear: bias shape mismatch");
    Eigen::MatrixXd out(n, dout);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::VectorXd acc = b->value.col(0);
        for (const auto& [j, v] : features.rows[static_cast<std::size_t>(r)]) {
            acc += v * W->value.col(j);
        }
        out.row(r) = acc.transpose();
    }
    auto feats = std::make_shared<SparseRows>(std::move(features));
    return make_node(std::move(out), {W, b}, [feats](Tensor& self) {
        const auto& g = self.grad;
        Tensor& W = *self.parents[0];
        Tensor& b = *self.parents[1];
        if (W.requires_grad) {
            if (W.grad.size() == 0) W.grad = Eigen::MatrixXd::Zero(W.value.rows(), W.value.cols());
            for (Eigen::Index r = 0; r < feats->size(); ++r) {
                for (const auto& [j, v] : feats->rows[static_cast<std::size_t>(r)]) {
                    W.grad.col(j) += v * g.row(r).transpose();
                }
            }
        }
        if (b.requires_grad) b.accumulate(g.colwise().sum().transpose());
    });
}

TensorPtr tanh(const TensorPtr& x) {
    Eigen::MatrixXd out = x->value.array().tanh().matrix();
    return make_node(std::move(out), {x}, [](Tensor& self) {
        Tensor& x = *self.parents[0];
        if (!x.requires_grad) return;
        Eigen::MatrixXd dx = self.grad.array() * (1.0 - self.value.array().square());
        x.accumulate(dx);
    });
}

TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b) {
    if (a->value.cols() != b->value.cols()) throw NumericError("matmul_nt: inner dimension mismatch");
    Eigen::MatrixXd out = a->value * b->value.transpose();
    return make_node(std::move(out), {a, b}, [](Tensor& self) {
        const auto& g = self.grad;
        Tensor& a = *self.parents[0];
        Tensor& b = *self.parents[1];
        if (a.requires_grad) a.accumulate(g * b.value);
        if (b.requires_grad) b.accumulate(g.transpose() * a.value);
    });
}

TensorPtr l2_normalize_rows(const TensorPtr& x) {
    const Eigen::Index n = x->value.rows();
    Eigen::MatrixXd out(n, x->value.cols());
    Eigen::VectorXd norms(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double nrm = x->value.row(r).norm();
        if (nrm == 0.0) throw NumericError("l2_normalize_rows: zero vector at row " + std::to_string(r));
        norms(r) = nrm;
        out.row(r) = x->value.row(r) / nrm;
    }
    return make_node(std::move(out), {x}, [norms](Tensor& self) {
        Tensor& x = *self.parents[0];
        if (!x.requires_grad) return;
        Eigen::MatrixXd dx(self.value.rows(), self.value.cols());
        for (Eigen::Index r = 0; r < self.value.rows(); ++r) {
            const auto y = self.value.row(r);
            const auto g = self.grad.row(r);
            dx.row(r) = (g - y * (y.dot(g))) / norms(r);
        }
        x.accumulate(dx);
    });
}

TensorPtr gather_rows(const TensorPtr& x, std::vector<Eigen::Index> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x->value.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= x->value.rows()) throw NumericError("gather_rows: index out of range");
        out.row(static_cast<Eigen::Index>(r)) = x->value.row(rows[r]);
    }
    return make_node(std::move(out), {x}, [rows = std::move(rows)](Tensor& self) {
        Tensor& x = *self.parents[0];
        if (!x.requires_grad) return;
        Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(x.value.rows(), x.value.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            dx.row(rows[r]) += self.grad.row(static_cast<Eigen::Index>(r));
        }
        x.accumulate(dx);
    });
}

TensorPtr segment_mean_rows(const TensorPtr& x, std::vector<std::pair<Eigen::Index, Eigen::Index>> segments) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(segments.size()), x->value.cols());
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto [start, count] = segments[s];
        if (count <= 0 || start < 0 || start + count > x->value.rows())
            throw NumericError("segment_mean_rows: bad segment");
        out.row(static_cast<Eigen::Index>(s)) = x->value.middleRows(start, count).colwise().mean();
    }
    return make_node(std::move(out), {x}, [segments = std::move(segments)](Tensor& self) {
        Tensor& x = *self.parents[0];
        if (!x.requires_grad) return;
        Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(x.value.rows(), x.value.cols());
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto [start, count] = segments[s];
            const Eigen::RowVectorXd share = self.grad.row(static_cast<Eigen::Index>(s)) / static_cast<double>(count);
            for (Eigen::Index r = 0; r < count; ++r) dx.row(start + r) += share;
        }
        x.accumulate(dx);
    });
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
        throw NumericError("add: shape mismatch");
    Eigen::MatrixXd out = a->value + b->value;
    return make_node(std::move(out), {a, b}, [](Tensor& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(self.grad);
    });
}

TensorPtr scale(const TensorPtr& a, double c) {
    Eigen::MatrixXd out = c * a->value;
    return make_node(std::move(out), {a}, [c](Tensor& self) { self.parents[0]->accumulate(c * self.grad); });
}

TensorPtr kl_simplex_loss(const TensorPtr& logits, const Eigen::MatrixXd& targets, double floor) {
    if (logits->value.rows() != targets.rows() || logits->value.cols() != targets.cols())
        throw NumericError("kl_simplex_loss: shape mismatch");
    const Eigen::Index n = logits->value.rows();
    Eigen::MatrixXd probs(n, logits->value.cols());
    double total = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::RowVectorXd row = logits->value.row(r);
        const double m = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - m).exp();
        e /= e.sum();
        probs.row(r) = e;
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            const double p = targets(r, j);
            if (p > 0.0) total += p * (std::log(p) - std::log(std::max(e(j), floor)));
        }
    }
    Eigen::MatrixXd out(1, 1);
    out(0, 0) = total;
    return make_node(std::move(out), {logits}, [probs, targets](Tensor& self) {
        Tensor& logits = *self.parents[0];
        if (!logits.requires_grad) return;
        logits.accumulate(self.grad(0, 0) * (probs - targets));
    });
}

TensorPtr multi_positive_nce(const TensorPtr& sims, std::vector<Eigen::Index> col_owner, double tau,
                             bool sum_of_logs) {
    const Eigen::Index rows = sims->value.rows();
    const Eigen::Index cols = sims->value.cols();
    if (static_cast<Eigen::Index>(col_owner.size()) != cols)
        throw NumericError("multi_positive_nce: owner list does not match columns");
    if (tau <= 0.0) throw NumericError("multi_positive_nce: temperature must be positive");
    std::vector<Eigen::Index> own_count(static_cast<std::size_t>(rows), 0);
    for (Eigen::Index k = 0; k < cols; ++k) {
        if (col_owner[static_cast<std::size_t>(k)] < 0 || col_owner[static_cast<std::size_t>(k)] >= rows)
            throw NumericError("multi_positive_nce: owner out of range");
        ++own_count[static_cast<std::size_t>(col_owner[static_cast<std::size_t>(k)])];
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (own_count[static_cast<std::size_t>(r)] == 0)
            throw NumericError("multi_positive_nce: anchor row with no positives");
    }

    double total = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Eigen::RowVectorXd scaled = sims->value.row(i) / tau;
        const double m = scaled.maxCoeff();
        double den = 0.0;
        double num = 0.0;
        for (Eigen::Index k = 0; k < cols; ++k) {
            const double e = std::exp(scaled(k) - m);
            den += e;
            if (col_owner[static_cast<std::size_t>(k)] == i) num += e;
        }
        if (sum_of_logs) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < cols; ++k) {
                if (col_owner[static_cast<std::size_t>(k)] != i) continue;
                acc += std::log(den) - (scaled(k) - m);
            }
            total += acc / static_cast<double>(own_count[static_cast<std::size_t>(i)]);
        } else {
            total += std::log(den) - std::log(num);
        }
    }
    Eigen::MatrixXd out(1, 1);
    out(0, 0) = total / static_cast<double>(rows);

    return make_node(std::move(out), {sims},
                     [col_owner = std::move(col_owner), own_count = std::move(own_count), tau,
                      sum_of_logs](Tensor& self) {
                         Tensor& sims = *self.parents[0];
                         if (!sims.requires_grad) return;
                         const Eigen::Index rows = sims.value.rows();
                         const Eigen::Index cols = sims.value.cols();
                         const double gscale = self.grad(0, 0) / (static_cast<double>(rows) * tau);
                         Eigen::MatrixXd dS(rows, cols);
                         for (Eigen::Index i = 0; i < rows; ++i) {
                             const Eigen::RowVectorXd scaled = sims.value.row(i) / tau;
                             const double m = scaled.maxCoeff();
                             Eigen::RowVectorXd e = (scaled.array() - m).exp();
                             const double den = e.sum();
                             double num = 0.0;
                             for (Eigen::Index k = 0; k < cols; ++k) {
                                 if (col_owner[static_cast<std::size_t>(k)] == i) num += e(k);
                             }
                             for (Eigen::Index k = 0; k < cols; ++k) {
                                 const bool own = col_owner[static_cast<std::size_t>(k)] == i;
                                 const double soft_all = e(k) / den;
                                 double pos_term = 0.0;
                                 if (own) {
                                     pos_term = sum_of_logs
                                                    ? 1.0 / static_cast<double>(own_count[static_cast<std::size_t>(i)])
                                                    : e(k) / num;
                                 }
                                 dS(i, k) = gscale * (soft_all - pos_term);
                             }
                         }
                         sims.accumulate(dS);
                     });
}

void backward(const TensorPtr& loss) {
    if (loss->value.rows() != 1 || loss->value.cols() != 1) throw NumericError("backward: loss must be 1x1");
    // Iterative post-order DFS; reversed, it visits every node before its
    // parents.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    std::vector<std::pair<Tensor*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor* parent = node->parents[next].get();
            ++next;
            if (parent->requires_grad && seen.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->grad = Eigen::MatrixXd::Ones(1, 1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* node = *it;
        if (node->backward_fn && node->has_grad()) node->backward_fn(*node);
    }
}

void zero_grad(const std::vector<TensorPtr>& params) {
    for (const auto& p : params) {
        if (p->has_grad()) p->grad.setZero();
    }
}

} // namespace persona::ad
