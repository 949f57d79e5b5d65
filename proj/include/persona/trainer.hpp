#pragma once

#include "persona/augment.hpp"
#include "persona/checkpoint.hpp"
#include "persona/evaluation.hpp"
#include "persona/labelspace.hpp"
#include "persona/model.hpp"
#include "persona/optimizer.hpp"

#include <array>
#include <string>
#include <vector>

namespace persona::tr {

struct TrainerConfig {
    int batch_size_users = 8;
    double lr_encoder = 1e-5;
    double lr_other = 1e-3;
    double lambda = 1.0; // weight of the contrastive term
    int epochs = 30;
    int patience = 3; // consecutive non-improving epochs before stopping
    std::uint64_t seed = 7;
    double alpha = 4.0; // soft-label sharpening
    double tau = 0.07;  // contrastive temperature
    int chunk_size = 128;
    bool sum_of_logs = false;
    std::array<bool, cl::kNumAspects> use_aspects = {true, true, true};
    std::string label_refresh = "per_epoch"; // per_epoch | per_step | frozen
    bool soft_labels = true;                 // false: plain one-hot targets
    double kl_floor = 1e-12;
    corpus::PreprocessOptions preprocess; // masking/truncation for analysis texts

    void validate() const;
    std::string to_json() const;
};

struct EpochStats {
    int epoch = 0;
    double l_det = 0.0;
    double l_cl = 0.0;
    std::array<double, corpus::kNumDims> val_f1{};
    double val_avg = 0.0;
};

struct FitResult {
    int best_epoch = -1;
    double best_val_avg = 0.0;
    std::vector<EpochStats> history;
    std::string checkpoint_path;
};

/// L = L_det + lambda * L_cl.
double total_loss(double l_det, double l_cl, double lambda);

/// Mean-over-users KL(target || prediction), summed over the 4 dimensions.
/// Separate from the tape path so tests can cross-check both.
double detection_loss_value(const std::vector<Eigen::Matrix<double, corpus::kNumDims, 2>>& targets,
                            const std::vector<Eigen::Matrix<double, corpus::kNumDims, 2>>& preds,
                            double floor = 1e-12);

/// Full training loop: batches of users, soft-label KL plus the contrastive
/// term, Adam with two learning-rate groups, early stopping on validation
/// average Macro-F1, best checkpoint kept. Writes train_log.jsonl and
/// checkpoint.bin under out_dir.
FitResult fit(model::Model& model, const corpus::DatasetSplit& split, const aug::AugmentationStore& augmentations,
              const ls::LabelDescriptionSet& descriptions, const TrainerConfig& config, const std::string& out_dir,
              const std::string& run_config_json = "{}");

/// Checkpoint glue: weights + optimizer state + config provenance.
ckpt::Checkpoint snapshot_model(const model::Model& model, const opt::Adam* optimizer, int epoch, double val_metric,
                                const std::string& run_config_json);
/// Load weights into an existing, shape-compatible model.
void restore_model(model::Model& model, const ckpt::Checkpoint& checkpoint);
/// Rebuild the model a checkpoint describes, then restore its weights.
model::Model load_model(const ckpt::Checkpoint& checkpoint);

} // namespace persona::tr
