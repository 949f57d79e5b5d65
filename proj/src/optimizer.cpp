#include "persona/optimizer.hpp"

#include "persona/util.hpp"

#include <cmath>

namespace persona::opt {

Adam::Adam(std::vector<Group> groups, Options options) : options_(options) {
    for (const auto& group : groups) {
        if (group.lr <= 0.0) throw ConfigError("Adam: learning rate must be > 0");
        for (const auto& p : group.params) {
            if (!p->requires_grad) throw ConfigError("Adam: parameter without requires_grad");
            Slot slot;
            slot.param = p;
            slot.lr = group.lr;
            slot.m = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
            slot.v = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
            slots_.push_back(std::move(slot));
        }
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    for (auto& slot : slots_) {
        if (!slot.param->has_grad()) continue; // parameter untouched this step
        const Eigen::MatrixXd& g = slot.param->grad;
        slot.m = options_.beta1 * slot.m + (1.0 - options_.beta1) * g;
        slot.v = options_.beta2 * slot.v + (1.0 - options_.beta2) * g.cwiseProduct(g);
        const Eigen::MatrixXd mhat = slot.m / bc1;
        const Eigen::MatrixXd vhat = slot.v / bc2;
        slot.param->value -=
            slot.lr * mhat.cwiseQuotient(vhat.cwiseSqrt() + Eigen::MatrixXd::Constant(g.rows(), g.cols(), options_.eps));
    }
}

std::vector<std::pair<std::string, Eigen::MatrixXd>> Adam::export_state() const {
    std::vector<std::pair<std::string, Eigen::MatrixXd>> state;
    Eigen::MatrixXd t(1, 1);
    t(0, 0) = static_cast<double>(t_);
    state.emplace_back("opt.t", t);
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        state.emplace_back("opt.m." + std::to_string(i), slots_[i].m);
        state.emplace_back("opt.v." + std::to_string(i), slots_[i].v);
    }
    return state;
}

void Adam::import_state(const std::vector<std::pair<std::string, Eigen::MatrixXd>>& state) {
    for (const auto& [name, value] : state) {
        if (name == "opt.t") {
            t_ = static_cast<std::int64_t>(value(0, 0));
            continue;
        }
        const bool is_m = name.rfind("opt.m.", 0) == 0;
        const bool is_v = name.rfind("opt.v.", 0) == 0;
        if (!is_m && !is_v) continue;
        const std::size_t idx = std::stoul(name.substr(6));
        if (idx >= slots_.size()) throw DataError("optimizer state has unknown slot " + name);
        Eigen::MatrixXd& target = is_m ? slots_[idx].m : slots_[idx].v;
        if (target.rows() != value.rows() || target.cols() != value.cols())
            throw DataError("optimizer state shape mismatch at " + name);
        target = value;
    }
}

} // namespace persona::opt
