#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace persona::ckpt {

/// Binary snapshot of everything needed to resume or serve a model: named
/// weight matrices, optimizer state, the config that built them, and the
/// best validation score seen.
struct Checkpoint {
    std::string model_config_json;
    std::string run_config_json; // full resolved config, provenance only
    int epoch = -1;
    double val_metric = 0.0;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

    void save(const std::string& path) const; // atomic: temp file + rename
    static Checkpoint load(const std::string& path);

    const Eigen::MatrixXd* find(const std::string& name) const;
};

} // namespace persona::ckpt
