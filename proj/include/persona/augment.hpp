#pragma once

#include "persona/chat_client.hpp"
#include "persona/contrastive.hpp"
#include "persona/corpus.hpp"
#include "persona/labelspace.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace persona::aug {

inline constexpr const char* kPromptVersion = "v1";

/// Response text that could not be split into the three aspects.
struct ParseError : DataError {
    using DataError::DataError;
};
/// Generation gave up after all retries; the post trains without positives.
struct MissingAugmentation : Error {
    using Error::Error;
};

/// The three analysis texts generated for one post.
struct AspectAnalyses {
    std::array<std::string, cl::kNumAspects> texts; // semantic, sentiment, linguistic
    std::string source_post_hash;
    std::string model_id;
    std::string prompt_version;
};

/// All analyses for a corpus, keyed by the preprocessed post's content hash.
class AugmentationStore {
public:
    static AugmentationStore load_jsonl(const std::string& path);
    void save_jsonl(const std::string& path) const; // hash-sorted, atomic

    void insert(AspectAnalyses analyses); // replaces an existing entry
    const AspectAnalyses* find_by_hash(const std::string& post_hash) const;
    const AspectAnalyses* find(const std::string& post_text) const;
    std::size_t size() const { return by_hash_.size(); }

private:
    std::unordered_map<std::string, AspectAnalyses> by_hash_;
};

// ---- prompts --------------------------------------------------------------

std::string build_post_prompt(const std::string& post);
std::string build_label_prompt(const std::string& pole_word);

enum class DetectMode { zero_shot, cot, few_shot };
DetectMode parse_detect_mode(const std::string& name);

struct FewShotExample {
    std::vector<std::string> posts;
    corpus::TraitLabels labels;
};

std::string build_detect_prompt(const std::vector<std::string>& posts, DetectMode mode,
                                const std::vector<FewShotExample>& shots);

/// Splits a model response into the three aspect texts: structured JSON
/// first, labeled-section fallback second.
std::array<std::string, cl::kNumAspects> parse_aspects(const std::string& raw);

// ---- cache ----------------------------------------------------------------

/// Append-only JSONL of raw responses keyed by (prompt_version, model_id,
/// post_hash). A key is written at most once.
class GenerationCache {
public:
    struct Key {
        std::string prompt_version;
        std::string model_id;
        std::string post_hash;
        std::string flat() const { return prompt_version + "\x1f" + model_id + "\x1f" + post_hash; }
    };
    struct Entry {
        std::string response;
        std::array<std::string, cl::kNumAspects> parsed;
    };

    explicit GenerationCache(std::string path); // loads the file if present

    std::optional<Entry> lookup(const Key& key) const;
    void store(const Key& key, const Entry& entry); // throws DataError on duplicate
    std::size_t size() const;
    /// Immutable copy for lock-free reads during a parallel run.
    std::map<std::string, Entry> snapshot() const;

private:
    mutable std::mutex mu_;
    std::string path_;
    std::map<std::string, Entry> entries_;
};

// ---- generation -----------------------------------------------------------

struct AugmentOptions {
    int workers = 4;
    int retries = 3;
    double requests_per_second = 2.0; // token-bucket rate limit
    double backoff_seconds = 0.5;     // doubled per retry
    bool offline = false;             // cache only, never call the client
    std::string model_id = "gpt-3.5-turbo"; // cache key when no client is live
};

/// One post: cache first, then (unless offline) generate, parse, store.
AspectAnalyses generate_post_augmentation(const std::string& preprocessed_post, ChatClient* client,
                                          GenerationCache& cache, const AugmentOptions& options);

struct AugmentRunStats {
    std::size_t from_cache = 0;
    std::size_t generated = 0;
    std::size_t failed = 0;
    std::vector<std::string> missing_hashes; // hash-sorted
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

/// Augment every distinct post across records, K workers under the rate
/// limit. Failures are recorded, not fatal.
AugmentRunStats augment_posts(const std::vector<corpus::UserRecord>& records, ChatClient* client,
                              GenerationCache& cache, AugmentationStore& out, const AugmentOptions& options);

/// 24 label-description texts, one request per pole. Deterministic given the
/// cache.
ls::LabelDescriptionSet generate_label_descriptions(ChatClient* client, GenerationCache& cache,
                                                    const AugmentOptions& options);

/// The eight pole words, indexed [dim][pole].
const std::array<std::array<const char*, 2>, corpus::kNumDims>& pole_words();

// ---- direct-detection baseline ---------------------------------------------

/// Model response had no recognizable 4-letter type code.
struct DetectionParseError : DataError {
    using DataError::DataError;
};

/// Ask the LLM for the user's type directly (the no-training baseline).
corpus::TraitLabels llm_direct_detect(const std::vector<std::string>& posts, DetectMode mode,
                                      const std::vector<FewShotExample>& shots, ChatClient& client);

/// First word-bounded 4-letter type code in a response, if any.
std::optional<corpus::TraitLabels> scan_for_type_code(const std::string& response);

} // namespace persona::aug
