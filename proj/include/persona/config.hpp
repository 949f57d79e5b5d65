#pragma once

#include "persona/augment.hpp"
#include "persona/corpus.hpp"
#include "persona/model.hpp"
#include "persona/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace persona::cfg {

/// Everything the commands need, merged from defaults, then a JSON config
/// file, then command-line flags. The API key comes from the environment
/// only and never appears in serialized form.
struct RunConfig {
    // global
    std::string out_dir = "out";
    std::uint64_t seed = 7;
    bool offline = false;
    std::string log_level = "info";

    // ingest
    std::string input;
    std::string format = "kaggle_csv";
    corpus::SplitRatios ratios;
    corpus::PreprocessOptions preprocess;

    // artifact locations; empty entries are derived from out_dir
    std::string train_file;
    std::string validation_file;
    std::string test_file;
    std::string cache_file;
    std::string augmentations_file;
    std::string labels_file;
    std::string checkpoint_file;
    std::string split_file; // eval / baseline input, defaults to test_file
    std::string posts_file; // predict input, one post per line

    // model + trainer
    model::ModelConfig model;
    tr::TrainerConfig trainer;

    // augmenter / chat backend
    aug::AugmentOptions augment;
    std::vector<std::string> augment_splits = {"train"};
    std::string base_url = "https://api.openai.com";
    std::string model_id = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_response_tokens = 512;
    int timeout_seconds = 60;
    std::string api_key; // environment only

    // llm baseline
    std::string detect_mode = "zero_shot";
    int baseline_limit = 0; // 0 = every user in the split file

    // lambda sweep
    std::vector<double> sweep_lambdas = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};

    /// Overlay a flat JSON object; unknown keys are an error.
    void apply_json_file(const std::string& path);
    void apply_json(const std::string& json_text);

    /// Fill derived paths, propagate the seed, read the API key from the
    /// environment. Called once after all layers are merged.
    void finalize();

    /// Resolved snapshot for provenance; the API key is omitted.
    std::string to_json() const;
};

/// Name of the environment variable holding the chat API key.
inline constexpr const char* kApiKeyEnvVar = "PERSONA_API_KEY";

} // namespace persona::cfg
