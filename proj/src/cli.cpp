#include "persona/cli.hpp"

#include "persona/evaluation.hpp"
#include "persona/log.hpp"
#include "persona/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>

namespace persona::cli {

namespace fs = std::filesystem;

namespace {

void write_snapshot(const cfg::RunConfig& config) {
    fs::create_directories(config.out_dir);
    write_file_atomic((fs::path(config.out_dir) / "run_config.json").string(), config.to_json());
}

std::vector<corpus::UserRecord> read_records(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw DataError(std::string(what) + " file not found: " + path + " (run ingest first?)");
    return corpus::read_jsonl(path);
}

std::unique_ptr<aug::ChatClient> make_client(const cfg::RunConfig& config) {
    aug::ChatOptions options;
    options.base_url = config.base_url;
    options.model_id = config.model_id;
    options.api_key = config.api_key;
    options.temperature = config.temperature;
    options.max_response_tokens = config.max_response_tokens;
    options.timeout_seconds = config.timeout_seconds;
    if (options.api_key.empty()) {
        throw ConfigError(std::string("no API key: set ") + cfg::kApiKeyEnvVar + " or pass --offline");
    }
    return aug::make_http_chat_client(options);
}

} // namespace

void cmd_ingest(const cfg::RunConfig& config) {
    if (config.input.empty()) throw ConfigError("ingest: --input is required");
    const auto format = corpus::parse_format(config.format);
    auto parsed = corpus::parse_dataset(config.input, format);
    for (const auto& w : parsed.warnings) log::warn("row ", w.row, ": ", w.message);
    if (!parsed.errors.empty()) {
        for (const auto& e : parsed.errors) log::error("row ", e.row, ": ", e.message);
        throw DataError(std::to_string(parsed.errors.size()) + " malformed rows in " + config.input);
    }
    log::info("parsed ", parsed.records.size(), " users from ", config.input);

    std::vector<corpus::RowIssue> warnings;
    auto records = corpus::preprocess_records(std::move(parsed.records), config.preprocess, &warnings);
    for (const auto& w : warnings) log::warn(w.message);

    auto split = corpus::split_dataset(std::move(records), config.ratios, config.seed);
    fs::create_directories(config.out_dir);
    corpus::write_jsonl(config.train_file, split.train);
    corpus::write_jsonl(config.validation_file, split.validation);
    corpus::write_jsonl(config.test_file, split.test);

    const auto stats_train = corpus::class_stats(split.train);
    const auto stats_val = corpus::class_stats(split.validation);
    const auto stats_test = corpus::class_stats(split.test);
    std::cout << corpus::stats_table(stats_train, stats_val, stats_test);
    write_file_atomic((fs::path(config.out_dir) / "stats.json").string(),
                      corpus::stats_json(stats_train, stats_val, stats_test));
    write_snapshot(config);
    log::info("wrote ", split.train.size(), "/", split.validation.size(), "/", split.test.size(), " users to ",
              config.out_dir);
}

void cmd_augment(const cfg::RunConfig& config, aug::ChatClient* client_override) {
    fs::create_directories(config.out_dir);
    aug::GenerationCache cache(config.cache_file);
    log::info("generation cache: ", cache.size(), " entries at ", config.cache_file);

    std::unique_ptr<aug::ChatClient> owned;
    aug::ChatClient* client = client_override;
    if (client == nullptr && !config.offline) {
        owned = make_client(config);
        client = owned.get();
    }

    // Label descriptions first: 8 requests, reused forever after.
    bool labels_ok = true;
    try {
        const auto labels = aug::generate_label_descriptions(client, cache, config.augment);
        write_file_atomic(config.labels_file, labels.to_json());
        log::info("label descriptions ready at ", config.labels_file);
    } catch (const aug::MissingAugmentation& e) {
        labels_ok = false;
        log::error("label descriptions unavailable: ", e.what());
    }

    for (const auto& split_name : config.augment_splits) {
        std::string path;
        if (split_name == "train") path = config.train_file;
        else if (split_name == "validation") path = config.validation_file;
        else if (split_name == "test") path = config.test_file;
        else throw ConfigError("augment: unknown split '" + split_name + "'");
        if (!fs::exists(path)) {
            log::warn("split file missing, skipping: ", path);
            continue;
        }
        const auto records = corpus::read_jsonl(path);
        aug::AugmentationStore store;
        const auto stats = aug::augment_posts(records, client, cache, store, config.augment);
        const std::string out_path = (fs::path(config.out_dir) / ("augmentations." + split_name + ".jsonl")).string();
        store.save_jsonl(out_path);
        log::info(split_name, ": ", stats.from_cache, " cached, ", stats.generated, " generated, ", stats.failed,
                  " failed; tokens prompt=", stats.prompt_tokens, " completion=", stats.completion_tokens);
        if (!stats.missing_hashes.empty()) {
            std::string missing;
            for (const auto& h : stats.missing_hashes) missing += h + "\n";
            const std::string missing_path = (fs::path(config.out_dir) / ("missing." + split_name + ".txt")).string();
            write_file_atomic(missing_path, missing);
            log::warn(stats.missing_hashes.size(), " posts lack analyses; hashes listed in ", missing_path);
        }
    }
    if (!labels_ok) log::warn("rerun augment with credentials to produce label descriptions");
    write_snapshot(config);
}

void cmd_train(const cfg::RunConfig& config) {
    corpus::DatasetSplit split;
    split.train = read_records(config.train_file, "train");
    split.validation = read_records(config.validation_file, "validation");

    aug::AugmentationStore store;
    if (fs::exists(config.augmentations_file)) {
        store = aug::AugmentationStore::load_jsonl(config.augmentations_file);
        log::info("loaded ", store.size(), " post analyses from ", config.augmentations_file);
    } else if (config.trainer.lambda > 0.0) {
        log::warn("no augmentation store at ", config.augmentations_file,
                  "; the contrastive term will have nothing to pull on");
    }
    if (!fs::exists(config.labels_file)) {
        throw DataError("label descriptions not found at " + config.labels_file +
                        " (run augment, or point --labels at a hand-written set)");
    }
    const auto labels = ls::LabelDescriptionSet::from_json_file(config.labels_file);

    auto model = model::Model::create(config.model);
    write_snapshot(config);
    const auto result = tr::fit(model, split, store, labels, config.trainer, config.out_dir, config.to_json());

    std::cout << "best epoch " << result.best_epoch << ", validation average Macro-F1 "
              << result.best_val_avg * 100.0 << "\n";
    std::cout << "checkpoint: " << result.checkpoint_path << "\n";
}

void cmd_eval(const cfg::RunConfig& config) {
    auto model = tr::load_model(ckpt::Checkpoint::load(config.checkpoint_file));
    const auto records = read_records(config.split_file, "evaluation split");
    const auto report = ev::evaluate(model, records);
    std::cout << report.to_table();
    fs::create_directories(config.out_dir);
    write_file_atomic((fs::path(config.out_dir) / "eval_report.json").string(), report.to_json());
    write_snapshot(config);
}

void cmd_predict(const cfg::RunConfig& config) {
    if (config.posts_file.empty()) throw ConfigError("predict: --posts-file is required");
    auto model = tr::load_model(ckpt::Checkpoint::load(config.checkpoint_file));
    std::vector<std::string> posts;
    for (const auto& line : split_on(read_file(config.posts_file), "\n")) {
        if (!trim(line).empty()) posts.push_back(line);
    }
    const auto pred = ev::predict(model, posts, config.preprocess);

    nlohmann::json out;
    out["type"] = pred.labels.to_code();
    for (int t = 0; t < corpus::kNumDims; ++t) {
        const auto dim = corpus::kDimNames[static_cast<std::size_t>(t)];
        out["probabilities"][dim][std::string(1, corpus::kPoleLetters[static_cast<std::size_t>(t)][0])] =
            pred.probs(t, 0);
        out["probabilities"][dim][std::string(1, corpus::kPoleLetters[static_cast<std::size_t>(t)][1])] =
            pred.probs(t, 1);
    }
    std::cout << out.dump(2) << "\n";
}

void cmd_llm_baseline(const cfg::RunConfig& config, aug::ChatClient* client_override) {
    if (config.offline && client_override == nullptr)
        throw ConfigError("llm-baseline queries the chat API and cannot run offline");
    std::unique_ptr<aug::ChatClient> owned;
    aug::ChatClient* client = client_override;
    if (client == nullptr) {
        owned = make_client(config);
        client = owned.get();
    }

    const auto mode = aug::parse_detect_mode(config.detect_mode);
    auto records = read_records(config.split_file, "baseline split");
    if (config.baseline_limit > 0 && records.size() > static_cast<std::size_t>(config.baseline_limit)) {
        records.resize(static_cast<std::size_t>(config.baseline_limit));
    }

    std::vector<aug::FewShotExample> shots;
    if (mode == aug::DetectMode::few_shot) {
        const auto train = read_records(config.train_file, "train (few-shot examples)");
        if (train.size() < 3) throw DataError("few-shot mode needs at least 3 training users");
        for (int i = 0; i < 3; ++i) {
            aug::FewShotExample shot;
            shot.posts = train[static_cast<std::size_t>(i)].posts;
            if (shot.posts.size() > 10) shot.posts.resize(10);
            shot.labels = train[static_cast<std::size_t>(i)].labels;
            shots.push_back(std::move(shot));
        }
    }

    std::vector<std::array<int, corpus::kNumDims>> preds;
    std::vector<corpus::TraitLabels> golds;
    std::size_t parse_failures = 0;
    for (const auto& rec : records) {
        try {
            const auto labels = aug::llm_direct_detect(rec.posts, mode, shots, *client);
            std::array<int, corpus::kNumDims> p{};
            for (int t = 0; t < corpus::kNumDims; ++t) p[static_cast<std::size_t>(t)] = labels.poles[static_cast<std::size_t>(t)];
            preds.push_back(p);
            golds.push_back(rec.labels);
        } catch (const aug::DetectionParseError& e) {
            ++parse_failures;
            log::warn("user ", rec.user_id, ": ", e.what());
        }
    }
    if (preds.empty()) throw DataError("llm-baseline: no parseable responses");
    const auto report = ev::build_report(preds, golds);
    std::cout << report.to_table();
    if (parse_failures > 0) std::cout << parse_failures << " users skipped (no type code in response)\n";
    fs::create_directories(config.out_dir);
    write_file_atomic((fs::path(config.out_dir) / "baseline_report.json").string(), report.to_json());
    write_snapshot(config);
}

void cmd_sweep_lambda(const cfg::RunConfig& config) {
    corpus::DatasetSplit split;
    split.train = read_records(config.train_file, "train");
    split.validation = read_records(config.validation_file, "validation");
    aug::AugmentationStore store;
    if (fs::exists(config.augmentations_file)) store = aug::AugmentationStore::load_jsonl(config.augmentations_file);
    const auto labels = ls::LabelDescriptionSet::from_json_file(config.labels_file);

    nlohmann::json rows = nlohmann::json::array();
    double best_lambda = 0.0, best_score = -1.0;
    std::cout << "lambda   val_avg   best_epoch\n";
    for (const double lambda : config.sweep_lambdas) {
        if (lambda < 0) throw ConfigError("sweep: lambda must be >= 0");
        auto trainer = config.trainer;
        trainer.lambda = lambda;
        auto model = model::Model::create(config.model);
        char dir_name[64];
        std::snprintf(dir_name, sizeof dir_name, "lambda_%g", lambda);
        const std::string run_dir = (fs::path(config.out_dir) / "sweep" / dir_name).string();
        const auto result = tr::fit(model, split, store, labels, trainer, run_dir, config.to_json());

        char line[128];
        std::snprintf(line, sizeof line, "%-8g %-9.2f %d\n", lambda, result.best_val_avg * 100.0, result.best_epoch);
        std::cout << line;
        nlohmann::json row;
        row["lambda"] = lambda;
        row["val_avg"] = result.best_val_avg;
        row["best_epoch"] = result.best_epoch;
        rows.push_back(row);
        if (result.best_val_avg > best_score) {
            best_score = result.best_val_avg;
            best_lambda = lambda;
        }
    }
    std::cout << "best lambda: " << best_lambda << "\n";
    nlohmann::json out;
    out["rows"] = rows;
    out["best_lambda"] = best_lambda;
    write_file_atomic((fs::path(config.out_dir) / "sweep.json").string(), out.dump(2));
    write_snapshot(config);
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("persona");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
    cfg::RunConfig config;

    // The config file forms the middle layer: defaults, then file, then
    // flags. Find it before CLI11 binds flag values over the struct.
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        try {
            if (arg == "--config" && i + 1 < argc) {
                config.apply_json_file(argv[i + 1]);
            } else if (arg.rfind("--config=", 0) == 0) {
                config.apply_json_file(arg.substr(9));
            } else {
                continue;
            }
        } catch (const Error& e) {
            log::error(e.what());
            return 2;
        }
    }

    CLI::App app{"MBTI personality detection from social media posts"};
    app.fallthrough(true);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    app.add_option("--out-dir", config.out_dir, "artifact directory");
    app.add_option("--seed", config.seed, "seed for split, init, and batching");
    app.add_flag("--offline", config.offline, "never touch the network; rely on caches");
    app.add_option("--log-level", config.log_level, "debug|info|warn|error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    auto* ingest = app.add_subcommand("ingest", "parse, preprocess, split, and write canonical JSONL");
    ingest->add_option("--input", config.input, "dataset file or directory");
    ingest->add_option("--format", config.format, "kaggle_csv|pandora_dir|jsonl");
    ingest->add_option("--max-posts", config.preprocess.max_posts, "posts kept per user");
    ingest->add_option("--max-words", config.preprocess.max_words, "words kept per post");
    ingest->add_option("--mask-word", config.preprocess.extra_mask_words, "extra word to mask (repeatable)");
    ingest->add_option("--ratio-train", config.ratios.train);
    ingest->add_option("--ratio-validation", config.ratios.validation);
    ingest->add_option("--ratio-test", config.ratios.test);

    auto* augment = app.add_subcommand("augment", "generate post analyses and label descriptions via the chat API");
    augment->add_option("--splits", config.augment_splits, "which splits to augment (default: train)");
    augment->add_option("--cache", config.cache_file, "generation cache JSONL");
    augment->add_option("--model-id", config.model_id, "chat model identifier");
    augment->add_option("--base-url", config.base_url, "chat API base URL");
    augment->add_option("--workers", config.augment.workers, "parallel request workers");
    augment->add_option("--retries", config.augment.retries, "attempts per request");
    augment->add_option("--rps", config.augment.requests_per_second, "request rate limit (0 = unlimited)");
    augment->add_option("--backoff", config.augment.backoff_seconds, "base retry backoff in seconds");

    bool flag_one_hot = false;
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--train-file", config.train_file);
        cmd->add_option("--validation-file", config.validation_file);
        cmd->add_option("--augmentations", config.augmentations_file, "post-analysis store JSONL");
        cmd->add_option("--labels", config.labels_file, "label description JSON");
        cmd->add_option("--encoder", config.model.encoder_kind, "deterministic_tiny|pretrained_transformer");
        cmd->add_option("--encoder-checkpoint", config.model.encoder_checkpoint,
                        "tiny: seed override; pretrained: embedding store path");
        cmd->add_option("--dim", config.model.dim, "embedding dimension (tiny backend)");
        cmd->add_option("--max-tokens", config.model.max_tokens, "encoder token limit");
        cmd->add_option("--batch", config.trainer.batch_size_users, "users per batch");
        cmd->add_option("--epochs", config.trainer.epochs);
        cmd->add_option("--patience", config.trainer.patience, "early-stopping patience");
        cmd->add_option("--lr-encoder", config.trainer.lr_encoder);
        cmd->add_option("--lr-other", config.trainer.lr_other);
        cmd->add_option("--alpha", config.trainer.alpha, "soft-label sharpening");
        cmd->add_option("--tau", config.trainer.tau, "contrastive temperature");
        cmd->add_option("--chunk-size", config.trainer.chunk_size, "contrastive chunk size");
        cmd->add_option("--label-refresh", config.trainer.label_refresh, "per_epoch|per_step|frozen");
        cmd->add_flag("--sum-of-logs", config.trainer.sum_of_logs, "average per-positive log ratios");
        cmd->add_flag("--one-hot", flag_one_hot, "train on hard labels (no soft targets)");
    };
    auto* train = app.add_subcommand("train", "fit the detector");
    add_train_flags(train);
    train->add_option("--lambda", config.trainer.lambda, "contrastive loss weight");

    auto* eval = app.add_subcommand("eval", "score a checkpoint on a split");
    eval->add_option("--checkpoint", config.checkpoint_file);
    eval->add_option("--split-file", config.split_file, "JSONL of users to score");

    auto* predict = app.add_subcommand("predict", "classify one user's posts");
    predict->add_option("--checkpoint", config.checkpoint_file);
    predict->add_option("--posts-file", config.posts_file, "text file, one post per line");
    predict->add_option("--max-posts", config.preprocess.max_posts);
    predict->add_option("--max-words", config.preprocess.max_words);

    auto* baseline = app.add_subcommand("llm-baseline", "ask the chat model for types directly");
    baseline->add_option("--split-file", config.split_file);
    baseline->add_option("--train-file", config.train_file, "source of few-shot examples");
    baseline->add_option("--mode", config.detect_mode, "zero_shot|cot|few_shot");
    baseline->add_option("--limit", config.baseline_limit, "max users to query (0 = all)");
    baseline->add_option("--model-id", config.model_id);
    baseline->add_option("--base-url", config.base_url);

    auto* sweep = app.add_subcommand("sweep-lambda", "train across lambda values and tabulate the curve");
    add_train_flags(sweep);
    sweep->add_option("--lambdas", config.sweep_lambdas, "lambda values to sweep");

    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (flag_one_hot) config.trainer.soft_labels = false;
    {
        using log::Level;
        if (config.log_level == "debug") log::threshold() = Level::debug;
        else if (config.log_level == "warn") log::threshold() = Level::warn;
        else if (config.log_level == "error") log::threshold() = Level::error;
        else log::threshold() = Level::info;
    }

    try {
        config.finalize();
        if (app.got_subcommand(ingest)) cmd_ingest(config);
        else if (app.got_subcommand(augment)) cmd_augment(config);
        else if (app.got_subcommand(train)) cmd_train(config);
        else if (app.got_subcommand(eval)) cmd_eval(config);
        else if (app.got_subcommand(predict)) cmd_predict(config);
        else if (app.got_subcommand(baseline)) cmd_llm_baseline(config);
        else if (app.got_subcommand(sweep)) cmd_sweep_lambda(config);
    } catch (const ConfigError& e) {
        log::error(e.what());
        return 2;
    } catch (const DataError& e) {
        log::error(e.what());
        return 2;
    } catch (const NumericError& e) {
        log::error(e.what());
        return 3;
    } catch (const Error& e) {
        log::error(e.what());
        return 3;
    } catch (const std::exception& e) {
        log::error("unexpected: ", e.what());
        return 3;
    }
    return 0;
}

} // namespace persona::cli
