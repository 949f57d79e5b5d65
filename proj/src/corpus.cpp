#include "persona/corpus.hpp"

#include "persona/log.hpp"
#include "persona/rng.hpp"
#include "persona/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace persona::corpus {

namespace {

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::unordered_set<std::string> lexicon_set(const std::vector<std::string>& lexicon) {
    std::unordered_set<std::string> set;
    for (const auto& w : lexicon) set.insert(to_lower(w));
    return set;
}

// Shared scanner for masking and the leakage scan: walks word-character
// runs and reports those whose lowercase form is in the lexicon.
template <typename OnMatch, typename OnOther>
void scan_words(const std::string& text, const std::unordered_set<std::string>& lexicon, OnMatch on_match,
                OnOther on_other) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_char(text[i])) {
            std::size_t start = i;
            while (i < text.size() && !is_word_char(text[i])) ++i;
            on_other(text.substr(start, i - start));
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && is_word_char(text[i])) ++i;
        std::string word = text.substr(start, i - start);
        if (lexicon.count(to_lower(word)) > 0) {
            on_match(word);
        } else {
            on_other(word);
        }
    }
}

// Minimal RFC4180 reader: quoted fields, doubled quotes, embedded newlines.
std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    const std::string data = read_file(path);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    std::size_t i = 0;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
        row_has_content = false;
    };
    while (i < data.size()) {
        char c = data[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < data.size() && data[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                in_quotes = false;
                ++i;
                continue;
            }
            field += c;
            ++i;
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_has_content = true;
                ++i;
                break;
            case ',':
                end_field();
                row_has_content = true;
                ++i;
                break;
            case '\r':
                ++i;
                break;
            case '\n':
                if (row_has_content || !field.empty() || !row.empty()) end_row();
                ++i;
                break;
            default:
                field += c;
                row_has_content = true;
                ++i;
                break;
        }
    }
    if (row_has_content || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name, const std::string& path) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (to_lower(trim(header[i])) == name) return i;
    }
    throw DataError("missing column '" + name + "' in " + path);
}

ParseResult parse_kaggle_csv(const std::string& path) {
    ParseResult result;
    auto rows = read_csv(path);
    if (rows.empty()) throw DataError("empty CSV: " + path);
    const std::size_t type_col = find_column(rows[0], "type", path);
    const std::size_t posts_col = find_column(rows[0], "posts", path);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() <= std::max(type_col, posts_col)) {
            result.errors.push_back({r, "row has too few columns"});
            continue;
        }
        auto labels = try_parse_code(trim(row[type_col]));
        if (!labels) {
            result.errors.push_back({r, "malformed type string: '" + row[type_col] + "'"});
            continue;
        }
        std::vector<std::string> posts;
        for (auto& p : split_on(row[posts_col], "|||")) {
            if (!trim(p).empty()) posts.push_back(std::move(p));
        }
        if (posts.empty()) {
            result.warnings.push_back({r, "record rejected: empty post list"});
            continue;
        }
        UserRecord rec;
        rec.user_id = "kaggle-" + std::to_string(r);
        rec.posts = std::move(posts);
        rec.labels = *labels;
        result.records.push_back(std::move(rec));
    }
    return result;
}

ParseResult parse_pandora_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string profiles_path = (fs::path(dir) / "author_profiles.csv").string();
    const std::string comments_path = (fs::path(dir) / "comments.csv").string();
    ParseResult result;

    auto profile_rows = read_csv(profiles_path);
    if (profile_rows.empty()) throw DataError("empty CSV: " + profiles_path);
    const std::size_t author_col = find_column(profile_rows[0], "author", profiles_path);
    const std::size_t mbti_col = find_column(profile_rows[0], "mbti", profiles_path);

    std::vector<std::pair<std::string, TraitLabels>> authors; // keep file order
    std::unordered_map<std::string, std::size_t> author_index;
    for (std::size_t r = 1; r < profile_rows.size(); ++r) {
        const auto& row = profile_rows[r];
        if (row.size() <= std::max(author_col, mbti_col)) {
            result.errors.push_back({r, "profile row has too few columns"});
            continue;
        }
        const std::string author = trim(row[author_col]);
        auto labels = try_parse_code(trim(row[mbti_col]));
        if (!labels) {
            result.errors.push_back({r, "malformed type string for author '" + author + "'"});
            continue;
        }
        author_index[author] = authors.size();
        authors.emplace_back(author, *labels);
    }

    std::vector<std::vector<std::string>> posts_per_author(authors.size());
    auto comment_rows = read_csv(comments_path);
    if (comment_rows.empty()) throw DataError("empty CSV: " + comments_path);
    const std::size_t c_author_col = find_column(comment_rows[0], "author", comments_path);
    const std::size_t body_col = find_column(comment_rows[0], "body", comments_path);
    for (std::size_t r = 1; r < comment_rows.size(); ++r) {
        const auto& row = comment_rows[r];
        if (row.size() <= std::max(c_author_col, body_col)) continue;
        auto it = author_index.find(trim(row[c_author_col]));
        if (it == author_index.end()) continue; // comment from an unlabeled author
        if (!trim(row[body_col]).empty()) posts_per_author[it->second].push_back(row[body_col]);
    }

    for (std::size_t a = 0; a < authors.size(); ++a) {
        if (posts_per_author[a].empty()) {
            result.warnings.push_back({a, "record rejected: no posts for author '" + authors[a].first + "'"});
            continue;
        }
        UserRecord rec;
        rec.user_id = authors[a].first;
        rec.posts = std::move(posts_per_author[a]);
        rec.labels = authors[a].second;
        result.records.push_back(std::move(rec));
    }
    return result;
}

ParseResult parse_jsonl(const std::string& path) {
    ParseResult result;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            result.errors.push_back({row, std::string("bad JSON: ") + e.what()});
            continue;
        }
        if (!j.contains("user_id") || !j.contains("posts") || !j.contains("mbti")) {
            result.errors.push_back({row, "missing user_id/posts/mbti"});
            continue;
        }
        auto labels = try_parse_code(j["mbti"].get<std::string>());
        if (!labels) {
            result.errors.push_back({row, "malformed type string: '" + j["mbti"].get<std::string>() + "'"});
            continue;
        }
        std::vector<std::string> posts;
        for (const auto& p : j["posts"]) {
            if (!trim(p.get<std::string>()).empty()) posts.push_back(p.get<std::string>());
        }
        if (posts.empty()) {
            result.warnings.push_back({row, "record rejected: empty post list"});
            continue;
        }
        UserRecord rec;
        rec.user_id = j["user_id"].get<std::string>();
        rec.posts = std::move(posts);
        rec.labels = *labels;
        result.records.push_back(std::move(rec));
    }
    return result;
}

} // namespace

const std::vector<std::string>& mbti_type_codes() {
    static const std::vector<std::string> codes = [] {
        std::vector<std::string> out;
        for (char a : {'I', 'E'})
            for (char b : {'S', 'N'})
                for (char c : {'T', 'F'})
                    for (char d : {'P', 'J'}) out.push_back(std::string{a, b, c, d});
        return out;
    }();
    return codes;
}

std::optional<TraitLabels> try_parse_code(const std::string& code) {
    if (code.size() != 4) return std::nullopt;
    const std::string upper = [&] {
        std::string s = code;
        for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return s;
    }();
    TraitLabels labels;
    for (int t = 0; t < kNumDims; ++t) {
        const auto& pair = kPoleLetters[static_cast<std::size_t>(t)];
        if (upper[static_cast<std::size_t>(t)] == pair[0]) {
            labels.poles[static_cast<std::size_t>(t)] = 0;
        } else if (upper[static_cast<std::size_t>(t)] == pair[1]) {
            labels.poles[static_cast<std::size_t>(t)] = 1;
        } else {
            return std::nullopt;
        }
    }
    return labels;
}

TraitLabels TraitLabels::from_code(const std::string& code) {
    auto labels = try_parse_code(code);
    if (!labels) throw DataError("malformed MBTI code: '" + code + "'");
    return *labels;
}

std::string TraitLabels::to_code() const {
    std::string out(4, '?');
    for (int t = 0; t < kNumDims; ++t) {
        out[static_cast<std::size_t>(t)] =
            kPoleLetters[static_cast<std::size_t>(t)][static_cast<std::size_t>(poles[static_cast<std::size_t>(t)])];
    }
    return out;
}

DatasetFormat parse_format(const std::string& name) {
    if (name == "kaggle_csv") return DatasetFormat::kaggle_csv;
    if (name == "pandora_dir") return DatasetFormat::pandora_dir;
    if (name == "jsonl") return DatasetFormat::jsonl;
    throw ConfigError("unknown dataset format: '" + name + "'");
}

ParseResult parse_dataset(const std::string& path, DatasetFormat format) {
    switch (format) {
        case DatasetFormat::kaggle_csv: return parse_kaggle_csv(path);
        case DatasetFormat::pandora_dir: return parse_pandora_dir(path);
        case DatasetFormat::jsonl: return parse_jsonl(path);
    }
    throw ConfigError("unreachable dataset format");
}

std::string mask_label_words(const std::string& text, const std::vector<std::string>& lexicon) {
    const auto set = lexicon_set(lexicon);
    std::string out;
    out.reserve(text.size());
    scan_words(
        text, set, [&](const std::string&) { out += "<type>"; }, [&](const std::string& other) { out += other; });
    return out;
}

std::size_t count_lexicon_matches(const std::string& text, const std::vector<std::string>& lexicon) {
    const auto set = lexicon_set(lexicon);
    std::size_t n = 0;
    scan_words(
        text, set, [&](const std::string&) { ++n; }, [](const std::string&) {});
    return n;
}

std::string truncate_post(const std::string& text, int max_words) {
    if (max_words < 1) throw ConfigError("truncate_post: max_words must be >= 1");
    const auto words = split_whitespace(text);
    if (words.size() <= static_cast<std::size_t>(max_words)) return text;
    std::vector<std::string> kept(words.begin(), words.begin() + max_words);
    return join(kept, " ");
}

UserRecord limit_posts(UserRecord record, int max_posts) {
    if (max_posts < 1) throw ConfigError("limit_posts: max_posts must be >= 1");
    if (record.posts.empty()) throw DataError("limit_posts: record has no posts");
    if (record.posts.size() > static_cast<std::size_t>(max_posts)) {
        record.posts.resize(static_cast<std::size_t>(max_posts));
    }
    return record;
}

std::optional<UserRecord> preprocess_record(UserRecord record, const PreprocessOptions& opts) {
    std::vector<std::string> lexicon = mbti_type_codes();
    lexicon.insert(lexicon.end(), opts.extra_mask_words.begin(), opts.extra_mask_words.end());
    std::vector<std::string> posts;
    posts.reserve(record.posts.size());
    for (auto& post : record.posts) {
        std::string masked = mask_label_words(post, lexicon);
        std::string truncated = truncate_post(masked, opts.max_words);
        if (!trim(truncated).empty()) posts.push_back(std::move(truncated));
    }
    if (posts.empty()) return std::nullopt;
    record.posts = std::move(posts);
    return limit_posts(std::move(record), opts.max_posts);
}

std::vector<UserRecord> preprocess_records(std::vector<UserRecord> records, const PreprocessOptions& opts,
                                           std::vector<RowIssue>* warnings) {
    std::vector<UserRecord> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::string user_id = records[i].user_id;
        auto processed = preprocess_record(std::move(records[i]), opts);
        if (!processed) {
            if (warnings) warnings->push_back({i, "user '" + user_id + "' dropped: no posts left"});
            continue;
        }
        out.push_back(std::move(*processed));
    }
    return out;
}

DatasetSplit split_dataset(std::vector<UserRecord> records, SplitRatios ratios, std::uint64_t seed) {
    const double sum = ratios.train + ratios.validation + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");
    if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0) throw DataError("split ratios must be >= 0");
    if (records.size() < 3) throw DataError("need at least 3 records to split");

    Rng rng(seed);
    rng.shuffle(records);

    const std::size_t n = records.size();
    const std::size_t n_train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n)));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(ratios.validation * static_cast<double>(n)));

    DatasetSplit split;
    split.seed = seed;
    split.ratios = ratios;
    split.train.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train),
                            records.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), records.end());
    return split;
}

ClassStats class_stats(const std::vector<UserRecord>& records) {
    ClassStats stats;
    stats.total = records.size();
    for (const auto& rec : records) {
        for (int t = 0; t < kNumDims; ++t) {
            ++stats.counts[static_cast<std::size_t>(t)]
                          [static_cast<std::size_t>(rec.labels.poles[static_cast<std::size_t>(t)])];
        }
    }
    return stats;
}

std::string stats_table(const ClassStats& train, const ClassStats& validation, const ClassStats& test) {
    std::ostringstream out;
    auto cell = [](const ClassStats& s, int t) {
        std::ostringstream c;
        c << s.counts[static_cast<std::size_t>(t)][0] << " / " << s.counts[static_cast<std::size_t>(t)][1];
        return c.str();
    };
    out << "Dim    Train            Validation       Test\n";
    for (int t = 0; t < kNumDims; ++t) {
        std::string a = cell(train, t), b = cell(validation, t), c = cell(test, t);
        a.resize(17, ' ');
        b.resize(17, ' ');
        out << kDimNames[static_cast<std::size_t>(t)] << "    " << a << b << c << "\n";
    }
    std::string a = std::to_string(train.total), b = std::to_string(validation.total);
    a.resize(17, ' ');
    b.resize(17, ' ');
    out << "Users  " << a << b << test.total << "\n";
    return out.str();
}

std::string stats_json(const ClassStats& train, const ClassStats& validation, const ClassStats& test) {
    auto one = [](const ClassStats& s) {
        nlohmann::json j;
        for (int t = 0; t < kNumDims; ++t) {
            j[kDimNames[static_cast<std::size_t>(t)]] = {s.counts[static_cast<std::size_t>(t)][0],
                                                         s.counts[static_cast<std::size_t>(t)][1]};
        }
        j["users"] = s.total;
        return j;
    };
    nlohmann::json j;
    j["train"] = one(train);
    j["validation"] = one(validation);
    j["test"] = one(test);
    return j.dump(2);
}

void write_jsonl(const std::string& path, const std::vector<UserRecord>& records) {
    std::ostringstream out;
    for (const auto& rec : records) {
        nlohmann::json j;
        j["user_id"] = rec.user_id;
        j["posts"] = rec.posts;
        j["mbti"] = rec.labels.to_code();
        out << j.dump() << "\n";
    }
    write_file_atomic(path, out.str());
}

std::vector<UserRecord> read_jsonl(const std::string& path) {
    auto result = parse_jsonl(path);
    if (!result.errors.empty()) {
        throw DataError(path + ": " + std::to_string(result.errors.size()) +
                        " malformed rows (first: " + result.errors.front().message + ")");
    }
    return std::move(result.records);
}

} // namespace persona::corpus
