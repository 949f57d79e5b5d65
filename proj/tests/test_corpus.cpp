#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support/testutil.hpp"

#include "persona/corpus.hpp"
#include "persona/util.hpp"

#include <algorithm>
#include <set>

using namespace persona;
using namespace persona::corpus;

namespace {

UserRecord make_record(const std::string& id, std::vector<std::string> posts, const std::string& code) {
    UserRecord rec;
    rec.user_id = id;
    rec.posts = std::move(posts);
    rec.labels = TraitLabels::from_code(code);
    return rec;
}

std::vector<UserRecord> dummy_records(std::size_t n) {
    const auto& codes = mbti_type_codes();
    std::vector<UserRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        records.push_back(make_record("u" + std::to_string(i), {"post " + std::to_string(i)}, codes[i % 16]));
    }
    return records;
}

std::vector<std::string> ids_of(const std::vector<UserRecord>& recs) {
    std::vector<std::string> ids;
    for (const auto& r : recs) ids.push_back(r.user_id);
    return ids;
}

} // namespace

TEST_CASE("sixteen distinct type codes, all parseable") {
    const auto& codes = mbti_type_codes();
    CHECK(codes.size() == 16);
    std::set<std::string> unique(codes.begin(), codes.end());
    CHECK(unique.size() == 16);
    for (const auto& code : codes) {
        auto labels = try_parse_code(code);
        REQUIRE(labels.has_value());
        CHECK(labels->to_code() == code);
    }
}

TEST_CASE("code parsing maps letters to pole indices") {
    auto intj = TraitLabels::from_code("INTJ");
    CHECK(intj.poles == std::array<int, 4>{0, 1, 0, 1});
    auto esfp = TraitLabels::from_code("ESFP");
    CHECK(esfp.poles == std::array<int, 4>{1, 0, 1, 0});
    // case-insensitive
    CHECK(TraitLabels::from_code("enfp").to_code() == "ENFP");
    CHECK(TraitLabels::from_code("EnFp").to_code() == "ENFP");

    CHECK_FALSE(try_parse_code("ABCD").has_value());
    CHECK_FALSE(try_parse_code("INT").has_value());
    CHECK_FALSE(try_parse_code("INTJX").has_value());
    CHECK_FALSE(try_parse_code("").has_value());
    CHECK_THROWS_AS(TraitLabels::from_code("XXXX"), DataError);

    auto hot = intj.one_hot(0);
    CHECK(hot[0] == 1.0);
    CHECK(hot[1] == 0.0);
    hot = intj.one_hot(1);
    CHECK(hot[0] == 0.0);
    CHECK(hot[1] == 1.0);
}

TEST_CASE("kaggle CSV parsing splits posts on the triple-pipe delimiter") {
    testutil::TempDir tmp;
    auto path = tmp.write("mbti.csv",
                          "type,posts\n"
                          "INFJ,\"first post|||second, with a comma|||third has \"\"quotes\"\"\"\n"
                          "ENTP,\"one\nline-broken post|||another\"\n"
                          "NOPE,\"bad row\"\n"
                          "ISTP,\"||| |||only survivor|||\"\n");
    auto result = parse_dataset(path, DatasetFormat::kaggle_csv);
    REQUIRE(result.records.size() == 3);
    CHECK(result.errors.size() == 1); // the NOPE row
    CHECK(result.errors[0].row == 3);

    CHECK(result.records[0].labels.to_code() == "INFJ");
    REQUIRE(result.records[0].posts.size() == 3);
    CHECK(result.records[0].posts[1] == "second, with a comma");
    CHECK(result.records[0].posts[2] == "third has \"quotes\"");

    CHECK(result.records[1].posts[0] == "one\nline-broken post");

    // empty/whitespace segments between delimiters are dropped
    REQUIRE(result.records[2].posts.size() == 1);
    CHECK(result.records[2].posts[0] == "only survivor");
}

TEST_CASE("kaggle CSV requires type and posts columns") {
    testutil::TempDir tmp;
    auto path = tmp.write("bad.csv", "kind,stuff\nINFJ,hello\n");
    CHECK_THROWS_AS(parse_dataset(path, DatasetFormat::kaggle_csv), DataError);
    CHECK_THROWS_AS(parse_dataset(tmp.file("missing.csv"), DatasetFormat::kaggle_csv), DataError);
}

TEST_CASE("pandora directory joins profiles with comments") {
    testutil::TempDir tmp;
    tmp.write("author_profiles.csv",
              "author,mbti\n"
              "alice,INTJ\n"
              "bob,enfp\n"
              "carol,????\n"
              "dave,ISTJ\n");
    tmp.write("comments.csv",
              "author,body\n"
              "alice,\"hello world\"\n"
              "bob,first\n"
              "alice,\"second, longer comment\"\n"
              "mallory,\"unlabeled author, skipped\"\n");
    auto result = parse_dataset(tmp.path().string(), DatasetFormat::pandora_dir);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].user_id == "alice");
    CHECK(result.records[0].posts.size() == 2);
    CHECK(result.records[1].user_id == "bob");
    CHECK(result.errors.size() == 1);    // carol's malformed code
    CHECK(result.warnings.size() == 1);  // dave has no comments
}

TEST_CASE("jsonl round trip preserves records") {
    testutil::TempDir tmp;
    auto records = dummy_records(5);
    records[2].posts = {"multi word post", "another\nwith newline", "unicode: caf\xc3\xa9"};
    auto path = tmp.file("users.jsonl");
    write_jsonl(path, records);
    auto loaded = read_jsonl(path);
    REQUIRE(loaded.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(loaded[i].user_id == records[i].user_id);
        CHECK(loaded[i].posts == records[i].posts);
        CHECK(loaded[i].labels == records[i].labels);
    }
}

TEST_CASE("jsonl loader reports malformed rows") {
    testutil::TempDir tmp;
    auto path = tmp.write("bad.jsonl",
                          R"({"user_id":"a","posts":["x"],"mbti":"INTJ"})"
                          "\nnot json\n"
                          R"({"user_id":"b","posts":["y"],"mbti":"WXYZ"})"
                          "\n"
                          R"({"posts":["z"],"mbti":"ENFP"})"
                          "\n");
    auto result = parse_dataset(path, DatasetFormat::jsonl);
    CHECK(result.records.size() == 1);
    CHECK(result.errors.size() == 3);
    CHECK_THROWS_AS(read_jsonl(path), DataError); // strict reader refuses bad rows
}

TEST_CASE("format names parse and bad ones are rejected") {
    CHECK(parse_format("kaggle_csv") == DatasetFormat::kaggle_csv);
    CHECK(parse_format("pandora_dir") == DatasetFormat::pandora_dir);
    CHECK(parse_format("jsonl") == DatasetFormat::jsonl);
    CHECK_THROWS_AS(parse_format("tsv"), ConfigError);
}

TEST_CASE("type-code masking hits word-bounded matches only") {
    const auto& lexicon = mbti_type_codes();
    CHECK(mask_label_words("I am INTJ and proud", lexicon) == "I am <type> and proud");
    CHECK(mask_label_words("intjoke is not a code", lexicon) == "intjoke is not a code"); // substring, no match
    CHECK(mask_label_words("enfp ENFP EnFp", lexicon) == "<type> <type> <type>");         // case-insensitive
    CHECK(mask_label_words("INTJ.", lexicon) == "<type>.");                               // punctuation boundary
    CHECK(mask_label_words("(ISTP|ESTP)", lexicon) == "(<type>|<type>)");
    CHECK(mask_label_words("INTJs are fine", lexicon) == "INTJs are fine"); // plural form is a different word
    CHECK(mask_label_words("", lexicon).empty());

    // extra lexicon entries
    std::vector<std::string> extended = lexicon;
    extended.push_back("myers");
    CHECK(mask_label_words("Myers briggs INFP", extended) == "<type> briggs <type>");
}

TEST_CASE("masking is idempotent and leaves zero lexicon matches") {
    const auto& lexicon = mbti_type_codes();
    // hyphen is a word boundary, so "intj-land" contributes a match too
    const std::string text = "An ENTJ, an istj and an \"INFP\" walk into intj-land";
    const auto masked = mask_label_words(text, lexicon);
    CHECK(count_lexicon_matches(text, lexicon) == 4);
    CHECK(count_lexicon_matches(masked, lexicon) == 0);
    CHECK(mask_label_words(masked, lexicon) == masked);
}

TEST_CASE("post truncation keeps the first N words") {
    std::string exact, over;
    for (int i = 0; i < 70; ++i) exact += (i ? " w" : "w") + std::to_string(i);
    over = exact + " w70 w71";
    CHECK(truncate_post(exact, 70) == exact);
    CHECK(truncate_post("short post", 70) == "short post");
    auto truncated = truncate_post(over, 70);
    CHECK(count_words(truncated) == 70);
    CHECK(truncated == exact);
    // runs of whitespace collapse only when truncation rewrites the text
    CHECK(truncate_post("a  b", 70) == "a  b");
    CHECK(truncate_post("a  b  c", 2) == "a b");
    CHECK_THROWS_AS(truncate_post("x", 0), ConfigError);
}

TEST_CASE("preprocessing masks, truncates, and drops empty posts") {
    std::string longpost;
    for (int i = 0; i < 80; ++i) longpost += "word ";
    auto rec = make_record("u", {"I am an INTJ truly", longpost, "   ", "ok"}, "INTJ");
    auto processed = preprocess_record(rec, PreprocessOptions{});
    REQUIRE(processed.has_value());
    REQUIRE(processed->posts.size() == 3); // whitespace-only post dropped
    CHECK(processed->posts[0] == "I am an <type> truly");
    CHECK(count_words(processed->posts[1]) == 70);
    CHECK(processed->posts[2] == "ok");
    CHECK(processed->labels == rec.labels);
}

TEST_CASE("preprocessing caps the number of posts per user") {
    std::vector<std::string> posts;
    for (int i = 0; i < 60; ++i) posts.push_back("post " + std::to_string(i));
    auto rec = make_record("u", posts, "ENFP");
    auto processed = preprocess_record(rec, PreprocessOptions{});
    REQUIRE(processed.has_value());
    CHECK(processed->posts.size() == 50);
    CHECK(processed->posts.front() == "post 0");
    CHECK(processed->posts.back() == "post 49");
}

TEST_CASE("records with nothing left after cleaning are removed") {
    std::vector<UserRecord> records;
    records.push_back(make_record("keep", {"hello"}, "INTJ"));
    records.push_back(make_record("drop", {"   ", "\t"}, "ENFP"));
    std::vector<RowIssue> warnings;
    auto out = preprocess_records(std::move(records), PreprocessOptions{}, &warnings);
    REQUIRE(out.size() == 1);
    CHECK(out[0].user_id == "keep");
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].message.find("drop") != std::string::npos);
}

TEST_CASE("split sizes follow floor arithmetic") {
    auto split = split_dataset(dummy_records(8675), SplitRatios{}, 7);
    CHECK(split.train.size() == 5205);
    CHECK(split.validation.size() == 1735);
    CHECK(split.test.size() == 1735);

    auto small = split_dataset(dummy_records(10), SplitRatios{}, 7);
    CHECK(small.train.size() == 6);
    CHECK(small.validation.size() == 2);
    CHECK(small.test.size() == 2);

    auto tiny = split_dataset(dummy_records(3), SplitRatios{}, 7);
    CHECK(tiny.train.size() == 1);
    CHECK(tiny.test.size() >= 1);
}

TEST_CASE("split is exhaustive, disjoint, and seed-deterministic") {
    auto records = dummy_records(101);
    auto a = split_dataset(records, SplitRatios{}, 42);
    auto b = split_dataset(records, SplitRatios{}, 42);
    CHECK(ids_of(a.train) == ids_of(b.train));
    CHECK(ids_of(a.validation) == ids_of(b.validation));
    CHECK(ids_of(a.test) == ids_of(b.test));

    auto c = split_dataset(records, SplitRatios{}, 43);
    CHECK(ids_of(a.train) != ids_of(c.train)); // different seed, different shuffle

    std::vector<std::string> all = ids_of(a.train);
    auto va = ids_of(a.validation), te = ids_of(a.test);
    all.insert(all.end(), va.begin(), va.end());
    all.insert(all.end(), te.begin(), te.end());
    CHECK(all.size() == records.size());
    std::set<std::string> unique(all.begin(), all.end());
    CHECK(unique.size() == records.size()); // disjoint and exhaustive
}

TEST_CASE("split rejects bad inputs") {
    CHECK_THROWS_AS(split_dataset(dummy_records(2), SplitRatios{}, 1), DataError);
    CHECK_THROWS_AS(split_dataset(dummy_records(10), SplitRatios{0.5, 0.2, 0.2}, 1), DataError);
    CHECK_THROWS_AS(split_dataset(dummy_records(10), SplitRatios{1.2, -0.1, -0.1}, 1), DataError);
}

TEST_CASE("class stats count poles per dimension") {
    std::vector<UserRecord> records;
    records.push_back(make_record("a", {"x"}, "INTJ"));
    records.push_back(make_record("b", {"x"}, "INTP"));
    records.push_back(make_record("c", {"x"}, "ENFJ"));
    auto stats = class_stats(records);
    CHECK(stats.total == 3);
    CHECK(stats.counts[0][0] == 2); // I
    CHECK(stats.counts[0][1] == 1); // E
    CHECK(stats.counts[1][0] == 0); // S
    CHECK(stats.counts[1][1] == 3); // N
    CHECK(stats.counts[2][0] == 2); // T
    CHECK(stats.counts[2][1] == 1); // F
    CHECK(stats.counts[3][0] == 1); // P
    CHECK(stats.counts[3][1] == 2); // J

    auto table = stats_table(stats, stats, stats);
    CHECK(table.find("I/E") != std::string::npos);
    CHECK(table.find("2 / 1") != std::string::npos);
    auto json = stats_json(stats, stats, stats);
    CHECK(json.find("\"users\": 3") != std::string::npos);
}
