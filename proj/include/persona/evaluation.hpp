#pragma once

#include "persona/corpus.hpp"
#include "persona/model.hpp"

#include <array>
#include <string>
#include <vector>

namespace persona::ev {

/// confusion[gold][pred] counts for one binary dimension.
using DimConfusion = std::array<std::array<std::size_t, 2>, 2>;

struct EvalReport {
    std::array<double, corpus::kNumDims> per_dim_f1{};
    double average = 0.0;
    std::array<DimConfusion, corpus::kNumDims> confusion{};
    std::size_t n_users = 0;

    std::string to_json() const;
    /// Plain-text table: one row, columns I/E S/N T/F P/J Average, x100.
    std::string to_table() const;
};

/// Mean of the two per-class F1 scores; a class absent from both preds and
/// golds still counts, with F1 = 0.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& golds);

/// Assemble a report from per-user pole predictions vs gold labels.
EvalReport build_report(const std::vector<std::array<int, corpus::kNumDims>>& preds,
                        const std::vector<corpus::TraitLabels>& golds);

/// Run the model over preprocessed records. Pure: no weights change.
EvalReport evaluate(model::Model& model, const std::vector<corpus::UserRecord>& records);

/// Preprocess raw posts, then encode/pool/classify one user.
model::Prediction predict(model::Model& model, const std::vector<std::string>& raw_posts,
                          const corpus::PreprocessOptions& opts = {});

} // namespace persona::ev
