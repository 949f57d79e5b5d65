#pragma once

#include "persona/autodiff.hpp"

#include <string>
#include <utility>
#include <vector>

namespace persona::opt {

/// Adam with per-group learning rates (encoder vs everything else). Moments
/// live here, exported by stable index for checkpointing.
class Adam {
public:
    struct Group {
        std::vector<ad::TensorPtr> params;
        double lr;
    };
    struct Options {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    explicit Adam(std::vector<Group> groups) : Adam(std::move(groups), Options{}) {}
    Adam(std::vector<Group> groups, Options options);

    /// One update from the gradients currently on the parameters.
    void step();
    std::int64_t steps_taken() const { return t_; }

    /// Moment matrices plus the step counter, for checkpoints.
    std::vector<std::pair<std::string, Eigen::MatrixXd>> export_state() const;
    void import_state(const std::vector<std::pair<std::string, Eigen::MatrixXd>>& state);

private:
    struct Slot {
        ad::TensorPtr param;
        double lr;
        Eigen::MatrixXd m;
        Eigen::MatrixXd v;
    };
    std::vector<Slot> slots_;
    Options options_;
    std::int64_t t_ = 0;
};

} // namespace persona::opt
