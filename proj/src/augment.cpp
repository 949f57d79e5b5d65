#include "persona/augment.hpp"

#include "persona/log.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

namespace persona::aug {

namespace {

// The generation instruction, kept word-for-word stable: cached responses
// are keyed by prompt_version, so any edit here must bump kPromptVersion.
constexpr const char* kAnalysisInstruction =
    "Your task is to analyze the characteristics of a user based on a piece of text published by the user on "
    "the Internet. You are required to analyze it from the perspectives of semantic, sentiments, and "
    "linguistics. Note that if the text is incomplete and ends with an ellipsis, it may have been truncated "
    "due to external reasons, in which case you should ignore it.";

constexpr const char* kLabelInstruction =
    "Your task is to analyze the characteristics of the MBTI personality trait named below. You are required "
    "to analyze it from the perspectives of semantic, sentiments, and linguistics.";

constexpr const char* kFormatClause =
    "Respond with a JSON object containing exactly three string fields: \"semantic\", \"sentiment\", and "
    "\"linguistic\".";

std::string to_lower_copy(const std::string& s) { return to_lower(s); }

// Accepted spellings per aspect, checked in order.
const std::vector<std::string>& aspect_aliases(int aspect) {
    static const std::array<std::vector<std::string>, cl::kNumAspects> aliases = {{
        {"semantics", "semantic"},
        {"sentiments", "sentiment", "emotions", "emotion"},
        {"linguistics", "linguistic"},
    }};
    return aliases[static_cast<std::size_t>(aspect)];
}

std::optional<std::array<std::string, cl::kNumAspects>> try_parse_json_aspects(const std::string& raw) {
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close <= open) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw.substr(open, close - open + 1));
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    if (!j.is_object()) return std::nullopt;
    std::array<std::string, cl::kNumAspects> out;
    for (int a = 0; a < cl::kNumAspects; ++a) {
        bool found = false;
        for (const auto& [key, value] : j.items()) {
            const std::string lower = to_lower_copy(key);
            for (const auto& alias : aspect_aliases(a)) {
                if (lower == alias && value.is_string()) {
                    out[static_cast<std::size_t>(a)] = trim(value.get<std::string>());
                    found = true;
                    break;
                }
            }
            if (found) break;
        }
        if (!found || out[static_cast<std::size_t>(a)].empty()) return std::nullopt;
    }
    return out;
}

bool is_word_boundary(const std::string& s, std::size_t pos) {
    if (pos == 0 || pos >= s.size()) return true;
    return std::isalnum(static_cast<unsigned char>(s[pos])) == 0;
}

struct HeaderHit {
    std::size_t start = std::string::npos; // where the header word begins
    std::size_t body = std::string::npos;  // first char after header + separators
};

HeaderHit find_header(const std::string& lower, int aspect) {
    HeaderHit best;
    for (const auto& alias : aspect_aliases(aspect)) {
        std::size_t pos = 0;
        while ((pos = lower.find(alias, pos)) != std::string::npos) {
            if (is_word_boundary(lower, pos == 0 ? 0 : pos - 1) && is_word_boundary(lower, pos + alias.size())) {
                if (pos < best.start) {
                    best.start = pos;
                    std::size_t b = pos + alias.size();
                    while (b < lower.size() &&
                           (lower[b] == ':' || lower[b] == '-' || lower[b] == '*' || lower[b] == ')' ||
                            std::isspace(static_cast<unsigned char>(lower[b])))) {
                        ++b;
                    }
                    best.body = b;
                }
                break; // earliest hit for this alias found
            }
            ++pos;
        }
    }
    return best;
}

} // namespace

std::array<std::string, cl::kNumAspects> parse_aspects(const std::string& raw) {
    if (trim(raw).empty()) throw ParseError("empty model response");
    if (auto structured = try_parse_json_aspects(raw)) return *structured;

    const std::string lower = to_lower_copy(raw);
    std::array<HeaderHit, cl::kNumAspects> hits;
    for (int a = 0; a < cl::kNumAspects; ++a) {
        hits[static_cast<std::size_t>(a)] = find_header(lower, a);
        if (hits[static_cast<std::size_t>(a)].start == std::string::npos) {
            throw ParseError("cannot find all three aspect sections in response: " + raw.substr(0, 200));
        }
    }
    std::array<std::string, cl::kNumAspects> out;
    for (int a = 0; a < cl::kNumAspects; ++a) {
        const std::size_t body = hits[static_cast<std::size_t>(a)].body;
        std::size_t end = raw.size();
        for (int other = 0; other < cl::kNumAspects; ++other) {
            const std::size_t start = hits[static_cast<std::size_t>(other)].start;
            if (start > body && start < end) end = start;
        }
        // the cut lands on the next header word, which may carry leading
        // markdown decoration ("**Sentiment**"); peel it off the tail
        std::string section = trim(raw.substr(body, end - body));
        while (!section.empty() &&
               (section.back() == '*' || section.back() == '_' || section.back() == '#')) {
            section.pop_back();
            section = trim(section);
        }
        out[static_cast<std::size_t>(a)] = std::move(section);
        if (out[static_cast<std::size_t>(a)].empty()) {
            throw ParseError("aspect section '" + std::string(cl::kAspectNames[static_cast<std::size_t>(a)]) +
                             "' is empty in response: " + raw.substr(0, 200));
        }
    }
    return out;
}

std::string build_post_prompt(const std::string& post) {
    if (post.empty()) throw DataError("build_post_prompt: empty post");
    return std::string(kAnalysisInstruction) + " post: " + post + "\n\n" + kFormatClause;
}

std::string build_label_prompt(const std::string& pole_word) {
    return std::string(kLabelInstruction) + " trait: " + pole_word + "\n\n" + kFormatClause;
}

DetectMode parse_detect_mode(const std::string& name) {
    if (name == "zero_shot" || name == "zero-shot") return DetectMode::zero_shot;
    if (name == "cot") return DetectMode::cot;
    if (name == "few_shot" || name == "few-shot") return DetectMode::few_shot;
    throw ConfigError("unknown detection mode: '" + name + "'");
}

std::string build_detect_prompt(const std::vector<std::string>& posts, DetectMode mode,
                                const std::vector<FewShotExample>& shots) {
    if (posts.empty()) throw DataError("build_detect_prompt: no posts");
    std::string prompt;
    if (mode == DetectMode::few_shot) {
        if (shots.size() != 3) throw ConfigError("few_shot mode needs exactly 3 example users");
        prompt += "Here are some examples of users and their MBTI personality types.\n\n";
        for (const auto& shot : shots) {
            prompt += "Posts:\n";
            for (const auto& p : shot.posts) prompt += "- " + p + "\n";
            prompt += "Type: " + shot.labels.to_code() + "\n\n";
        }
    }
    prompt += "The following are posts published by a user on the Internet.\n";
    for (const auto& p : posts) prompt += "- " + p + "\n";
    prompt += "\nWhat is this user's MBTI personality type?";
    if (mode == DetectMode::cot) {
        prompt += " Think step by step about the evidence in the posts, then finish with the four-letter type code.";
    } else {
        prompt += " Answer with the four-letter type code.";
    }
    return prompt;
}

std::optional<corpus::TraitLabels> scan_for_type_code(const std::string& response) {
    std::size_t i = 0;
    while (i < response.size()) {
        if (std::isalnum(static_cast<unsigned char>(response[i])) == 0) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < response.size() && std::isalnum(static_cast<unsigned char>(response[i])) != 0) ++i;
        if (i - start == 4) {
            if (auto labels = corpus::try_parse_code(response.substr(start, 4))) return labels;
        }
    }
    return std::nullopt;
}

corpus::TraitLabels llm_direct_detect(const std::vector<std::string>& posts, DetectMode mode,
                                      const std::vector<FewShotExample>& shots, ChatClient& client) {
    const auto result = client.complete(build_detect_prompt(posts, mode, shots));
    if (auto labels = scan_for_type_code(result.text)) return *labels;
    throw DetectionParseError("no type code in response: " + result.text.substr(0, 200));
}

const std::array<std::array<const char*, 2>, corpus::kNumDims>& pole_words() {
    static const std::array<std::array<const char*, 2>, corpus::kNumDims> words = {{
        {"Introversion", "Extroversion"},
        {"Sensing", "iNtuition"},
        {"Thinking", "Feeling"},
        {"Perception", "Judging"},
    }};
    return words;
}

// ---- AugmentationStore ------------------------------------------------------

AugmentationStore AugmentationStore::load_jsonl(const std::string& path) {
    AugmentationStore store;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open augmentation store: " + path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + " row " + std::to_string(row) + ": " + e.what());
        }
        AspectAnalyses a;
        a.source_post_hash = j.at("post_hash").get<std::string>();
        a.model_id = j.value("model_id", "");
        a.prompt_version = j.value("prompt_version", "");
        for (int i = 0; i < cl::kNumAspects; ++i) {
            a.texts[static_cast<std::size_t>(i)] = j.at(cl::kAspectNames[static_cast<std::size_t>(i)]).get<std::string>();
        }
        store.insert(std::move(a));
    }
    return store;
}

void AugmentationStore::save_jsonl(const std::string& path) const {
    std::vector<const AspectAnalyses*> sorted;
    sorted.reserve(by_hash_.size());
    for (const auto& [_, a] : by_hash_) sorted.push_back(&a);
    std::sort(sorted.begin(), sorted.end(),
              [](const AspectAnalyses* a, const AspectAnalyses* b) { return a->source_post_hash < b->source_post_hash; });
    std::string blob;
    for (const AspectAnalyses* a : sorted) {
        nlohmann::json j;
        j["post_hash"] = a->source_post_hash;
        j["model_id"] = a->model_id;
        j["prompt_version"] = a->prompt_version;
        for (int i = 0; i < cl::kNumAspects; ++i) {
            j[cl::kAspectNames[static_cast<std::size_t>(i)]] = a->texts[static_cast<std::size_t>(i)];
        }
        blob += j.dump();
        blob += "\n";
    }
    write_file_atomic(path, blob);
}

void AugmentationStore::insert(AspectAnalyses analyses) {
    by_hash_[analyses.source_post_hash] = std::move(analyses);
}

const AspectAnalyses* AugmentationStore::find_by_hash(const std::string& post_hash) const {
    auto it = by_hash_.find(post_hash);
    return it == by_hash_.end() ? nullptr : &it->second;
}

const AspectAnalyses* AugmentationStore::find(const std::string& post_text) const {
    return find_by_hash(content_hash(post_text));
}

// ---- GenerationCache --------------------------------------------------------

GenerationCache::GenerationCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return; // fresh cache
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path_ + " row " + std::to_string(row) + ": " + e.what());
        }
        Key key;
        key.prompt_version = j.at("key").at("prompt_version").get<std::string>();
        key.model_id = j.at("key").at("model_id").get<std::string>();
        key.post_hash = j.at("key").at("post_hash").get<std::string>();
        Entry entry;
        entry.response = j.at("response").get<std::string>();
        if (j.contains("parsed")) {
            for (int i = 0; i < cl::kNumAspects; ++i) {
                entry.parsed[static_cast<std::size_t>(i)] =
                    j["parsed"].value(cl::kAspectNames[static_cast<std::size_t>(i)], "");
            }
        }
        if (!entries_.emplace(key.flat(), std::move(entry)).second) {
            throw DataError(path_ + " row " + std::to_string(row) + ": duplicate cache key");
        }
    }
}

std::optional<GenerationCache::Entry> GenerationCache::lookup(const Key& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key.flat());
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void GenerationCache::store(const Key& key, const Entry& entry) {
    std::lock_guard<std::mutex> lock(mu_);
    if (entries_.count(key.flat()) > 0) throw DataError("cache already has an entry for this key");

    nlohmann::json j;
    j["key"] = {{"prompt_version", key.prompt_version}, {"model_id", key.model_id}, {"post_hash", key.post_hash}};
    j["response"] = entry.response;
    nlohmann::json parsed;
    for (int i = 0; i < cl::kNumAspects; ++i) {
        parsed[cl::kAspectNames[static_cast<std::size_t>(i)]] = entry.parsed[static_cast<std::size_t>(i)];
    }
    j["parsed"] = parsed;
    j["timestamp"] = static_cast<std::int64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
            .count());

    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to cache: " + path_);
    out << j.dump() << "\n";
    out.flush();
    if (!out) throw DataError("cache write failed: " + path_);
    entries_.emplace(key.flat(), entry);
}

std::size_t GenerationCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

std::map<std::string, GenerationCache::Entry> GenerationCache::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_;
}

// ---- generation -------------------------------------------------------------

namespace {

AspectAnalyses analyses_from_entry(const GenerationCache::Entry& entry, const GenerationCache::Key& key) {
    for (const auto& text : entry.parsed) {
        if (text.empty()) {
            // A recorded response that never parsed; replay the failure
            // instead of re-spending tokens on a deterministic model.
            throw ParseError("cached response is unparseable (post " + key.post_hash + ")");
        }
    }
    AspectAnalyses a;
    a.texts = entry.parsed;
    a.source_post_hash = key.post_hash;
    a.model_id = key.model_id;
    a.prompt_version = key.prompt_version;
    return a;
}

// Simple token bucket: refills continuously, burst capped at `burst`.
class RateLimiter {
public:
    RateLimiter(double per_second, double burst) : rate_(per_second), tokens_(burst), burst_(burst) {
        last_ = std::chrono::steady_clock::now();
    }
    void acquire() {
        if (rate_ <= 0.0) return; // unlimited
        for (;;) {
            double wait = 0.0;
            {
                std::lock_guard<std::mutex> lock(mu_);
                const auto now = std::chrono::steady_clock::now();
                tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
                last_ = now;
                if (tokens_ >= 1.0) {
                    tokens_ -= 1.0;
                    return;
                }
                wait = (1.0 - tokens_) / rate_;
            }
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
    }

private:
    std::mutex mu_;
    double rate_;
    double tokens_;
    double burst_;
    std::chrono::steady_clock::time_point last_;
};

// Counts tokens across threads on top of any ChatClient.
class CountingClient : public ChatClient {
public:
    explicit CountingClient(ChatClient* inner) : inner_(inner) {}
    ChatResult complete(const std::string& prompt) override {
        auto result = inner_->complete(prompt);
        prompt_tokens_ += result.prompt_tokens;
        completion_tokens_ += result.completion_tokens;
        return result;
    }
    std::string model_id() const override { return inner_->model_id(); }
    long prompt_tokens() const { return prompt_tokens_.load(); }
    long completion_tokens() const { return completion_tokens_.load(); }

private:
    ChatClient* inner_;
    std::atomic<long> prompt_tokens_{0};
    std::atomic<long> completion_tokens_{0};
};

AspectAnalyses generate_with_prompt(const std::string& prompt, const GenerationCache::Key& key, ChatClient* client,
                                    GenerationCache& cache, const AugmentOptions& options) {
    if (auto hit = cache.lookup(key)) return analyses_from_entry(*hit, key);
    if (options.offline || client == nullptr) {
        throw MissingAugmentation("offline and not cached: " + key.post_hash);
    }

    std::string last_error;
    for (int attempt = 1; attempt <= std::max(1, options.retries); ++attempt) {
        try {
            const auto result = client->complete(prompt);
            GenerationCache::Entry entry;
            entry.response = result.text;
            try {
                entry.parsed = parse_aspects(result.text);
            } catch (const ParseError&) {
                cache.store(key, entry); // keep the raw response; replay the failure
                throw;
            }
            cache.store(key, entry);
            return analyses_from_entry(entry, key);
        } catch (const ApiError& e) {
            last_error = e.what();
            if (attempt < options.retries) {
                const double delay = options.backoff_seconds * std::pow(2.0, attempt - 1);
                log::warn("chat request failed (attempt " + std::to_string(attempt) + "): " + last_error);
                if (delay > 0) std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            }
        }
    }
    throw MissingAugmentation("gave up after " + std::to_string(options.retries) + " attempts: " + last_error);
}

} // namespace

AspectAnalyses generate_post_augmentation(const std::string& preprocessed_post, ChatClient* client,
                                          GenerationCache& cache, const AugmentOptions& options) {
    GenerationCache::Key key;
    key.prompt_version = kPromptVersion;
    key.model_id = client != nullptr ? client->model_id() : options.model_id;
    key.post_hash = content_hash(preprocessed_post);
    return generate_with_prompt(build_post_prompt(preprocessed_post), key, client, cache, options);
}

AugmentRunStats augment_posts(const std::vector<corpus::UserRecord>& records, ChatClient* client,
                              GenerationCache& cache, AugmentationStore& out, const AugmentOptions& options) {
    if (options.workers < 1) throw ConfigError("augment: workers must be >= 1");

    // Distinct posts, hash-ordered so runs are reproducible.
    std::map<std::string, std::string> posts_by_hash;
    for (const auto& rec : records) {
        for (const auto& post : rec.posts) posts_by_hash.emplace(content_hash(post), post);
    }

    AugmentRunStats stats;
    CountingClient counting(client);
    ChatClient* effective = client != nullptr ? &counting : nullptr;

    // Cache hits and offline handling first, single-threaded.
    const auto snapshot = cache.snapshot();
    std::vector<std::pair<std::string, std::string>> todo; // (hash, post)
    for (const auto& [hash, post] : posts_by_hash) {
        GenerationCache::Key key{kPromptVersion, client != nullptr ? client->model_id() : options.model_id, hash};
        auto it = snapshot.find(key.flat());
        if (it != snapshot.end()) {
            try {
                out.insert(analyses_from_entry(it->second, key));
                ++stats.from_cache;
            } catch (const ParseError&) {
                ++stats.failed;
                stats.missing_hashes.push_back(hash);
            }
            continue;
        }
        if (options.offline || effective == nullptr) {
            ++stats.failed;
            stats.missing_hashes.push_back(hash);
            continue;
        }
        todo.emplace_back(hash, post);
    }

    if (!todo.empty()) {
        RateLimiter limiter(options.requests_per_second, static_cast<double>(options.workers));
        std::mutex results_mu;
        std::atomic<std::size_t> next{0};
        std::exception_ptr fatal;

        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= todo.size()) return;
                const auto& [hash, post] = todo[i];
                limiter.acquire();
                try {
                    auto analyses = generate_post_augmentation(post, effective, cache, options);
                    std::lock_guard<std::mutex> lock(results_mu);
                    out.insert(std::move(analyses));
                    ++stats.generated;
                } catch (const MissingAugmentation& e) {
                    log::warn(std::string("augmentation missing: ") + e.what());
                    std::lock_guard<std::mutex> lock(results_mu);
                    ++stats.failed;
                    stats.missing_hashes.push_back(hash);
                } catch (const ParseError& e) {
                    log::warn(std::string("augmentation unparseable: ") + e.what());
                    std::lock_guard<std::mutex> lock(results_mu);
                    ++stats.failed;
                    stats.missing_hashes.push_back(hash);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(results_mu);
                    if (!fatal) fatal = std::current_exception();
                    next.store(todo.size()); // stop handing out work
                    return;
                }
            }
        };

        std::vector<std::thread> threads;
        const int n_workers = std::min<std::size_t>(static_cast<std::size_t>(options.workers), todo.size());
        threads.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        if (fatal) std::rethrow_exception(fatal);
    }

    std::sort(stats.missing_hashes.begin(), stats.missing_hashes.end());
    stats.prompt_tokens = counting.prompt_tokens();
    stats.completion_tokens = counting.completion_tokens();
    return stats;
}

ls::LabelDescriptionSet generate_label_descriptions(ChatClient* client, GenerationCache& cache,
                                                    const AugmentOptions& options) {
    ls::LabelDescriptionSet set;
    for (int t = 0; t < corpus::kNumDims; ++t) {
        for (int p = 0; p < 2; ++p) {
            const std::string word = pole_words()[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
            GenerationCache::Key key;
            key.prompt_version = kPromptVersion;
            key.model_id = client != nullptr ? client->model_id() : options.model_id;
            key.post_hash = content_hash("label:" + word);
            const auto analyses = generate_with_prompt(build_label_prompt(word), key, client, cache, options);
            for (int a = 0; a < cl::kNumAspects; ++a) {
                set.texts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)][static_cast<std::size_t>(a)] =
                    analyses.texts[static_cast<std::size_t>(a)];
            }
        }
    }
    set.validate();
    return set;
}

} // namespace persona::aug
