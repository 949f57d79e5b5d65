#include "persona/config.hpp"

#include "persona/util.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>

namespace persona::cfg {

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

void RunConfig::apply_json_file(const std::string& path) { apply_json(read_file(path)); }

void RunConfig::apply_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");

    static const std::vector<std::string> known = {
        "out_dir", "seed", "offline", "log_level",
        "input", "format", "ratio_train", "ratio_validation", "ratio_test",
        "max_posts", "max_words", "extra_mask_words",
        "train_file", "validation_file", "test_file", "cache_file", "augmentations_file",
        "labels_file", "checkpoint_file", "split_file", "posts_file",
        "encoder", "encoder_checkpoint", "dim", "max_tokens",
        "batch_size_users", "lr_encoder", "lr_other", "lambda", "epochs", "patience",
        "alpha", "tau", "chunk_size", "sum_of_logs", "use_aspects", "label_refresh",
        "soft_labels", "kl_floor",
        "workers", "retries", "requests_per_second", "backoff_seconds", "augment_splits",
        "base_url", "model_id", "temperature", "max_response_tokens", "timeout_seconds",
        "detect_mode", "baseline_limit", "sweep_lambdas",
    };
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw ConfigError("unknown config key: '" + key + "'");
    }

    take(j, "out_dir", out_dir);
    take(j, "seed", seed);
    take(j, "offline", offline);
    take(j, "log_level", log_level);

    take(j, "input", input);
    take(j, "format", format);
    take(j, "ratio_train", ratios.train);
    take(j, "ratio_validation", ratios.validation);
    take(j, "ratio_test", ratios.test);
    take(j, "max_posts", preprocess.max_posts);
    take(j, "max_words", preprocess.max_words);
    take(j, "extra_mask_words", preprocess.extra_mask_words);

    take(j, "train_file", train_file);
    take(j, "validation_file", validation_file);
    take(j, "test_file", test_file);
    take(j, "cache_file", cache_file);
    take(j, "augmentations_file", augmentations_file);
    take(j, "labels_file", labels_file);
    take(j, "checkpoint_file", checkpoint_file);
    take(j, "split_file", split_file);
    take(j, "posts_file", posts_file);

    take(j, "encoder", model.encoder_kind);
    take(j, "encoder_checkpoint", model.encoder_checkpoint);
    take(j, "dim", model.dim);
    take(j, "max_tokens", model.max_tokens);

    take(j, "batch_size_users", trainer.batch_size_users);
    take(j, "lr_encoder", trainer.lr_encoder);
    take(j, "lr_other", trainer.lr_other);
    take(j, "lambda", trainer.lambda);
    take(j, "epochs", trainer.epochs);
    take(j, "patience", trainer.patience);
    take(j, "alpha", trainer.alpha);
    take(j, "tau", trainer.tau);
    take(j, "chunk_size", trainer.chunk_size);
    take(j, "sum_of_logs", trainer.sum_of_logs);
    if (j.contains("use_aspects")) {
        const auto& arr = j.at("use_aspects");
        if (!arr.is_array() || arr.size() != cl::kNumAspects)
            throw ConfigError("use_aspects must be an array of 3 booleans");
        for (int a = 0; a < cl::kNumAspects; ++a)
            trainer.use_aspects[static_cast<std::size_t>(a)] = arr[static_cast<std::size_t>(a)].get<bool>();
    }
    take(j, "label_refresh", trainer.label_refresh);
    take(j, "soft_labels", trainer.soft_labels);
    take(j, "kl_floor", trainer.kl_floor);

    take(j, "workers", augment.workers);
    take(j, "retries", augment.retries);
    take(j, "requests_per_second", augment.requests_per_second);
    take(j, "backoff_seconds", augment.backoff_seconds);
    take(j, "augment_splits", augment_splits);

    take(j, "base_url", base_url);
    take(j, "model_id", model_id);
    take(j, "temperature", temperature);
    take(j, "max_response_tokens", max_response_tokens);
    take(j, "timeout_seconds", timeout_seconds);

    take(j, "detect_mode", detect_mode);
    take(j, "baseline_limit", baseline_limit);
    take(j, "sweep_lambdas", sweep_lambdas);
}

void RunConfig::finalize() {
    namespace fs = std::filesystem;
    auto derive = [&](std::string& slot, const char* name) {
        if (slot.empty()) slot = (fs::path(out_dir) / name).string();
    };
    derive(train_file, "train.jsonl");
    derive(validation_file, "validation.jsonl");
    derive(test_file, "test.jsonl");
    derive(cache_file, "generation_cache.jsonl");
    derive(augmentations_file, "augmentations.train.jsonl");
    derive(labels_file, "label_descriptions.json");
    derive(checkpoint_file, "checkpoint.bin");
    if (split_file.empty()) split_file = test_file;

    // one seed drives the split, the weight init, and the batch order
    trainer.seed = seed;
    model.seed = seed;
    if (model.encoder_kind == "deterministic_tiny" && model.encoder_checkpoint.empty()) {
        model.encoder_checkpoint = std::to_string(seed);
    }
    trainer.preprocess = preprocess;

    augment.offline = offline;
    augment.model_id = model_id;

    if (const char* key = std::getenv(kApiKeyEnvVar)) api_key = key;
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["offline"] = offline;
    j["log_level"] = log_level;

    j["input"] = input;
    j["format"] = format;
    j["ratio_train"] = ratios.train;
    j["ratio_validation"] = ratios.validation;
    j["ratio_test"] = ratios.test;
    j["max_posts"] = preprocess.max_posts;
    j["max_words"] = preprocess.max_words;
    j["extra_mask_words"] = preprocess.extra_mask_words;

    j["train_file"] = train_file;
    j["validation_file"] = validation_file;
    j["test_file"] = test_file;
    j["cache_file"] = cache_file;
    j["augmentations_file"] = augmentations_file;
    j["labels_file"] = labels_file;
    j["checkpoint_file"] = checkpoint_file;
    j["split_file"] = split_file;
    j["posts_file"] = posts_file;

    j["encoder"] = model.encoder_kind;
    j["encoder_checkpoint"] = model.encoder_checkpoint;
    j["dim"] = model.dim;
    j["max_tokens"] = model.max_tokens;

    j["batch_size_users"] = trainer.batch_size_users;
    j["lr_encoder"] = trainer.lr_encoder;
    j["lr_other"] = trainer.lr_other;
    j["lambda"] = trainer.lambda;
    j["epochs"] = trainer.epochs;
    j["patience"] = trainer.patience;
    j["alpha"] = trainer.alpha;
    j["tau"] = trainer.tau;
    j["chunk_size"] = trainer.chunk_size;
    j["sum_of_logs"] = trainer.sum_of_logs;
    j["use_aspects"] = {trainer.use_aspects[0], trainer.use_aspects[1], trainer.use_aspects[2]};
    j["label_refresh"] = trainer.label_refresh;
    j["soft_labels"] = trainer.soft_labels;
    j["kl_floor"] = trainer.kl_floor;

    j["workers"] = augment.workers;
    j["retries"] = augment.retries;
    j["requests_per_second"] = augment.requests_per_second;
    j["backoff_seconds"] = augment.backoff_seconds;
    j["augment_splits"] = augment_splits;

    j["base_url"] = base_url;
    j["model_id"] = model_id;
    j["temperature"] = temperature;
    j["max_response_tokens"] = max_response_tokens;
    j["timeout_seconds"] = timeout_seconds;

    j["detect_mode"] = detect_mode;
    j["baseline_limit"] = baseline_limit;
    j["sweep_lambdas"] = sweep_lambdas;
    return j.dump(2);
}

} // namespace persona::cfg
