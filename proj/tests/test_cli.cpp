#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "persona/cli.hpp"
#include "persona/evaluation.hpp"
#include "persona/util.hpp"
#include "support/testutil.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace persona;
namespace fs = std::filesystem;

namespace {

const char* kSampleUsers = R"({"user_id": "u1", "mbti": "INTP", "posts": ["stayed home reading all weekend", "skipped the party again"]}
{"user_id": "u2", "mbti": "ENFJ", "posts": ["organized the team dinner tonight", "love meeting new people"]}
{"user_id": "u3", "mbti": "ISTJ", "posts": ["budget spreadsheet balanced today", "the schedule is final"]}
{"user_id": "u4", "mbti": "ESFP", "posts": ["no plan tonight lets go", "festival was amazing"]}
{"user_id": "u5", "mbti": "INFJ", "posts": ["walked home alone to think", "journaling before bed"]}
{"user_id": "u6", "mbti": "ESTJ", "posts": ["action items are assigned", "five minutes early is on time"]}
{"user_id": "u7", "mbti": "ENTP", "posts": ["two hour debate no regrets", "started three new side projects"]}
{"user_id": "u8", "mbti": "ISFP", "posts": ["repainted the window frame sage", "quiet good day in the garden"]}
)";

std::string repo_labels_path() {
#ifdef PERSONA_DATA_DIR
    auto pinned = fs::path(PERSONA_DATA_DIR) / "label_descriptions.json";
    if (fs::exists(pinned)) return pinned.string();
#endif
    // fallback when run outside the build tree
    for (auto p : {"data/label_descriptions.json", "../data/label_descriptions.json",
                   "../../data/label_descriptions.json"}) {
        if (fs::exists(p)) return fs::absolute(p).string();
    }
    return {};
}

class ScriptedClient : public aug::ChatClient {
public:
    explicit ScriptedClient(std::string response) : response_(std::move(response)) {}
    aug::ChatResult complete(const std::string&) override {
        ++calls;
        return {response_, 7, 3};
    }
    std::string model_id() const override { return "scripted"; }
    std::atomic<int> calls{0};

private:
    std::string response_;
};

// A client that must never be reached; poses as the scripted model so
// cache keys line up.
class ExplodingClient : public aug::ChatClient {
public:
    aug::ChatResult complete(const std::string&) override {
        ++calls;
        throw aug::ApiError("network touched during an offline test");
    }
    std::string model_id() const override { return "scripted"; }
    std::atomic<int> calls{0};
};

struct IngestedFixture {
    testutil::TempDir tmp;
    std::string out;

    IngestedFixture() {
        auto input = tmp.write("users.jsonl", kSampleUsers);
        out = tmp.file("out");
        REQUIRE(cli::run({"--out-dir", out, "--seed", "5", "ingest", "--input", input, "--format", "jsonl"}) == 0);
    }
};

} // namespace

TEST_CASE("config file overlays defaults and flags beat the file") {
    testutil::TempDir tmp;
    cfg::RunConfig base;
    CHECK(base.trainer.lambda == 1.0);
    CHECK(base.format == "kaggle_csv");

    base.apply_json(R"({"lambda": 2.5, "dim": 32, "format": "jsonl", "use_aspects": [true, false, true]})");
    CHECK(base.trainer.lambda == 2.5);
    CHECK(base.model.dim == 32);
    CHECK(base.trainer.use_aspects[1] == false);

    CHECK_THROWS_AS(base.apply_json(R"({"lambdaa": 1})"), ConfigError);
    CHECK_THROWS_AS(base.apply_json("not json"), ConfigError);
    CHECK_THROWS_AS(base.apply_json(R"({"use_aspects": [true]})"), ConfigError);
    CHECK_THROWS_AS(base.apply_json(R"([1,2])"), ConfigError);

    // flag overrides file: ingest writes under the flag's out_dir
    auto config_path = tmp.write("config.json", std::string(R"({"out_dir": ")") + tmp.file("from-file") + R"("})");
    auto input = tmp.write("users.jsonl", kSampleUsers);
    auto flag_dir = tmp.file("from-flag");
    REQUIRE(cli::run({"--config", config_path, "--out-dir", flag_dir, "ingest", "--input", input, "--format",
                      "jsonl"}) == 0);
    CHECK(fs::exists(fs::path(flag_dir) / "train.jsonl"));
    CHECK(!fs::exists(fs::path(tmp.file("from-file")) / "train.jsonl"));
}

TEST_CASE("finalize derives paths and propagates the seed") {
    cfg::RunConfig config;
    config.out_dir = "/tmp/somewhere";
    config.seed = 99;
    config.finalize();
    CHECK(config.train_file == "/tmp/somewhere/train.jsonl");
    CHECK(config.cache_file == "/tmp/somewhere/generation_cache.jsonl");
    CHECK(config.checkpoint_file == "/tmp/somewhere/checkpoint.bin");
    CHECK(config.split_file == config.test_file);
    CHECK(config.trainer.seed == 99);
    CHECK(config.model.seed == 99);
    CHECK(config.model.encoder_checkpoint == "99"); // tiny backend seed string

    // explicit paths survive
    cfg::RunConfig custom;
    custom.train_file = "/data/custom.jsonl";
    custom.finalize();
    CHECK(custom.train_file == "/data/custom.jsonl");
}

TEST_CASE("api key is read from the environment and never serialized") {
    ::setenv(cfg::kApiKeyEnvVar, "sk-super-secret-value", 1);
    cfg::RunConfig config;
    config.finalize();
    CHECK(config.api_key == "sk-super-secret-value");
    CHECK(config.to_json().find("sk-super-secret-value") == std::string::npos);
    ::unsetenv(cfg::kApiKeyEnvVar);
}

TEST_CASE("ingest is deterministic and rejects malformed rows") {
    IngestedFixture fx;
    for (const char* name : {"train.jsonl", "validation.jsonl", "test.jsonl", "stats.json", "run_config.json"}) {
        CHECK(fs::exists(fs::path(fx.out) / name));
    }
    // 8 users -> floor(.6*8)=4 / floor(.2*8)=1 / 3
    CHECK(corpus::read_jsonl(fx.out + "/train.jsonl").size() == 4);
    CHECK(corpus::read_jsonl(fx.out + "/validation.jsonl").size() == 1);
    CHECK(corpus::read_jsonl(fx.out + "/test.jsonl").size() == 3);

    // rerun with the same seed: byte-identical split files
    auto before = read_file(fx.out + "/train.jsonl");
    auto input2 = fx.tmp.write("users2.jsonl", kSampleUsers);
    REQUIRE(cli::run({"--out-dir", fx.out, "--seed", "5", "ingest", "--input", input2, "--format", "jsonl"}) == 0);
    CHECK(read_file(fx.out + "/train.jsonl") == before);

    // a bad MBTI code is a hard error with exit code 2
    auto bad = fx.tmp.write("bad.jsonl", R"({"user_id": "x", "mbti": "ABCD", "posts": ["hi"]})"
                                         "\n");
    CHECK(cli::run({"--out-dir", fx.tmp.file("bad-out"), "ingest", "--input", bad, "--format", "jsonl"}) == 2);

    // missing required input
    CHECK(cli::run({"ingest"}) == 2);
    CHECK(cli::run({"--out-dir", fx.tmp.file("x"), "ingest", "--input", "/does/not/exist", "--format", "jsonl"}) == 2);
}

TEST_CASE("augment against a scripted backend, then fully offline") {
    IngestedFixture fx;
    cfg::RunConfig config;
    config.out_dir = fx.out;
    config.augment.backoff_seconds = 0.0;
    config.augment.requests_per_second = 0.0;
    config.finalize();

    ScriptedClient scripted(R"({"semantic": "about daily life", "sentiment": "steady", "linguistic": "plain"})");
    cli::cmd_augment(config, &scripted);
    CHECK(fs::exists(fs::path(fx.out) / "augmentations.train.jsonl"));
    CHECK(fs::exists(fs::path(fx.out) / "label_descriptions.json"));
    const int calls_after_first = scripted.calls.load();
    CHECK(calls_after_first == 8 + 8); // 8 distinct train posts + 8 poles

    // the store holds an analysis for every distinct train post
    auto store = aug::AugmentationStore::load_jsonl(fx.out + "/augmentations.train.jsonl");
    CHECK(store.size() == 8);

    // offline rerun with a warm cache: identical artifacts, zero calls
    auto before = read_file(fx.out + "/augmentations.train.jsonl");
    cfg::RunConfig offline;
    offline.out_dir = fx.out;
    offline.offline = true;
    offline.finalize();
    ExplodingClient guard;
    cli::cmd_augment(offline, &guard);
    CHECK(guard.calls == 0);
    CHECK(read_file(fx.out + "/augmentations.train.jsonl") == before);

    // offline with a cold cache: exit 0 but a missing list appears
    cfg::RunConfig cold;
    cold.out_dir = fx.tmp.file("cold");
    cold.train_file = fx.out + "/train.jsonl";
    cold.offline = true;
    cold.finalize();
    CHECK_NOTHROW(cli::cmd_augment(cold, nullptr));
    CHECK(fs::exists(fs::path(cold.out_dir) / "missing.train.txt"));
}

TEST_CASE("train, eval, and sweep run from the command surface") {
    IngestedFixture fx;
    const std::string labels = repo_labels_path();
    REQUIRE(!labels.empty());

    REQUIRE(cli::run({"--out-dir", fx.out, "--seed", "5", "train", "--labels", labels, "--epochs", "2", "--dim",
                      "16", "--batch", "4"}) == 0);
    CHECK(fs::exists(fs::path(fx.out) / "checkpoint.bin"));
    CHECK(fs::exists(fs::path(fx.out) / "train_log.jsonl"));

    CHECK(cli::run({"--out-dir", fx.out, "eval"}) == 0);
    CHECK(fs::exists(fs::path(fx.out) / "eval_report.json"));
    auto report = nlohmann::json::parse(read_file(fx.out + "/eval_report.json"));
    CHECK(report["n_users"] == 3);

    // eval an explicit split file
    CHECK(cli::run({"--out-dir", fx.out, "eval", "--split-file", fx.out + "/validation.jsonl"}) == 0);

    // predict from a posts file
    auto posts = fx.tmp.write("posts.txt", "stayed in with a book tonight\nquiet market morning\n");
    CHECK(cli::run({"--out-dir", fx.out, "predict", "--posts-file", posts}) == 0);
    CHECK(cli::run({"--out-dir", fx.out, "predict"}) == 2); // no posts file

    // two-point sweep writes the curve table
    CHECK(cli::run({"--out-dir", fx.out, "--seed", "5", "sweep-lambda", "--labels", labels, "--epochs", "1",
                    "--dim", "16", "--batch", "4", "--lambdas", "0", "1"}) == 0);
    auto sweep = nlohmann::json::parse(read_file(fx.out + "/sweep.json"));
    CHECK(sweep["rows"].size() == 2);
    CHECK(sweep.contains("best_lambda"));

    // training without label descriptions is a clear data error
    CHECK(cli::run({"--out-dir", fx.tmp.file("no-labels"), "train", "--train-file", fx.out + "/train.jsonl",
                    "--validation-file", fx.out + "/validation.jsonl"}) == 2);
}

TEST_CASE("llm baseline scores scripted responses and tolerates junk") {
    IngestedFixture fx;
    cfg::RunConfig config;
    config.out_dir = fx.out;
    config.detect_mode = "zero_shot";
    config.finalize();

    ScriptedClient intp("Based on the posts, INTP.");
    cli::cmd_llm_baseline(config, &intp);
    CHECK(intp.calls == 3); // one per test user
    CHECK(fs::exists(fs::path(fx.out) / "baseline_report.json"));

    ScriptedClient useless("cannot tell, sorry");
    CHECK_THROWS_AS(cli::cmd_llm_baseline(config, &useless), DataError);

    // few-shot pulls 3 example users from the train file
    cfg::RunConfig few = config;
    few.detect_mode = "few_shot";
    ScriptedClient counted("ENTJ all the way");
    cli::cmd_llm_baseline(few, &counted);
    CHECK(counted.calls == 3);

    // offline mode refuses to run without an injected client
    cfg::RunConfig offline = config;
    offline.offline = true;
    CHECK_THROWS_AS(cli::cmd_llm_baseline(offline, nullptr), ConfigError);
}

TEST_CASE("the installed binary survives a subprocess round trip") {
#ifdef PERSONA_BIN
    testutil::TempDir tmp;
    auto input = tmp.write("users.jsonl", kSampleUsers);
    const std::string out = tmp.file("out");
    const std::string cmd = std::string(PERSONA_BIN) + " --out-dir " + out + " --seed 3 ingest --input " + input +
                            " --format jsonl > " + tmp.file("stdout.txt") + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(fs::path(out) / "train.jsonl"));
    auto table = read_file(tmp.file("stdout.txt"));
    CHECK(table.find("Users") != std::string::npos);

    const std::string bad = std::string(PERSONA_BIN) + " eval --checkpoint /definitely/missing.bin > /dev/null 2>&1";
    const int status = std::system(bad.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 2);
#else
    MESSAGE("PERSONA_BIN not defined; subprocess smoke skipped");
#endif
}
