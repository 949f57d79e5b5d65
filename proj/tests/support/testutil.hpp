#pragma once

#include "persona/autodiff.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace testutil {

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        auto base = std::filesystem::temp_directory_path();
        path_ = base / ("persona-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

    std::string write(const std::string& name, const std::string& content) const {
        auto p = file(name);
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p;
    }

private:
    std::filesystem::path path_;
};

// Central-difference check of every coefficient of every listed parameter.
// `build` must construct a fresh scalar graph from the params' current values.
inline void check_gradients(const std::function<persona::ad::TensorPtr()>& build,
                            const std::vector<persona::ad::TensorPtr>& params, double h = 1e-5, double tol = 1e-4) {
    using persona::ad::backward;
    using persona::ad::zero_grad;

    zero_grad(params);
    auto loss = build();
    backward(loss);

    std::vector<Eigen::MatrixXd> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        REQUIRE(p->has_grad());
        analytic.push_back(p->grad);
    }

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& value = params[pi]->value;
        for (Eigen::Index i = 0; i < value.rows(); ++i) {
            for (Eigen::Index j = 0; j < value.cols(); ++j) {
                const double saved = value(i, j);
                value(i, j) = saved + h;
                const double up = build()->item();
                value(i, j) = saved - h;
                const double down = build()->item();
                value(i, j) = saved;
                const double numeric = (up - down) / (2 * h);
                const double ana = analytic[pi](i, j);
                const double denom = std::max({1.0, std::abs(numeric), std::abs(ana)});
                INFO("param " << pi << " coeff (" << i << "," << j << "): numeric=" << numeric
                              << " analytic=" << ana);
                CHECK(std::abs(numeric - ana) <= tol * denom);
            }
        }
    }
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed, double scale = 1.0);

// Weighted scalar contraction sum_ij r_i c_j Y_ij, with distinct weights so
// row/column mix-ups change the result. Keeps grad-check losses scalar.
inline persona::ad::TensorPtr contract(const persona::ad::TensorPtr& y, unsigned seed) {
    using namespace persona::ad;
    auto colw = constant(random_matrix(1, y->value.cols(), seed * 2 + 1));
    auto roww = constant(random_matrix(1, y->value.rows(), seed * 2 + 2));
    return matmul_nt(matmul_nt(colw, y), roww);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed, double scale) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(gen);
    return m;
}

} // namespace testutil
