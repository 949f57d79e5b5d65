#pragma once

// Synthetic persona corpus with planted stylistic markers.
//
// Every user gets one pole per trait dimension. Posts are filler words plus
// occasional "marker" tokens drawn from the pole's variant pool; the variants
// are unrelated pseudo-words on purpose (no shared stems, so the trigram
// featurizer can't align them by surface overlap — alignment has to come
// from training). The synthetic analyses paraphrase whatever markers a post
// actually contains into a small canonical vocabulary, one word per
// (pole, aspect), shared across all users. That mirrors the real pipeline:
// the model can only discover that "ruvoki" and "lazemu" mean the same thing
// by pulling both posts toward analyses that each say "solitude".

#include "persona/augment.hpp"
#include "persona/corpus.hpp"
#include "persona/labelspace.hpp"
#include "persona/rng.hpp"
#include "persona/util.hpp"

#include <array>
#include <set>
#include <string>
#include <vector>

namespace testutil::synth {

namespace pc = persona::corpus;

struct Options {
    int n_users = 200;
    int posts_per_user = 8;
    int variants_per_pole = 24; // marker vocabulary size per pole
    int variants_per_user = 2;  // how many of those one user actually writes
    double marker_prob = 0.5;   // chance a post shows a marker for a dimension
    double style_flip = 0.12;   // chance a shown marker contradicts the label
    int fillers_per_post = 7;
    std::uint64_t seed = 1;
};

// canonical paraphrase vocabulary: [dim][pole][aspect]
inline const std::array<std::array<std::array<const char*, 3>, 2>, 4>& canonical_tokens() {
    static const std::array<std::array<std::array<const char*, 3>, 2>, 4> kTokens = {{
        {{{"solitude", "reserved", "measured"}, {"gatherings", "exuberant", "chatty"}}},
        {{{"practical", "grounded", "literal"}, {"speculative", "wandering", "metaphorical"}}},
        {{{"analytical", "detached", "precise"}, {"empathetic", "heartfelt", "effusive"}}},
        {{{"improvised", "easygoing", "meandering"}, {"scheduled", "resolute", "tidy"}}},
    }};
    return kTokens;
}

inline const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> kFillers = {
        "today",  "about",   "really", "thing",  "week",   "again",  "maybe", "around", "still",  "though",
        "pretty", "kind",    "sort",   "going",  "little", "always", "never", "often",  "moment", "morning",
        "coffee", "weather", "street", "friend", "music",  "movie",  "book",  "lunch",  "phone",  "window",
        "slow",   "fast",    "small",  "large",  "early",  "late",   "soft",  "loud",   "warm",   "cold",
    };
    return kFillers;
}

// Pronounceable 3-syllable pseudo-words, globally unique, fixed generator
// seed so the marker vocabulary is identical for every corpus seed.
inline std::vector<std::vector<std::string>> variant_pools(int per_pole) {
    static const char* kCons[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
    static const char* kVow[] = {"a", "e", "i", "o", "u"};
    persona::Rng rng(0xC0FFEEULL);
    std::set<std::string> used(filler_words().begin(), filler_words().end());
    for (const auto& dim : canonical_tokens()) {
        for (const auto& pole : dim) {
            for (const char* word : pole) used.insert(word);
        }
    }
    std::vector<std::vector<std::string>> pools(8);
    for (auto& pool : pools) {
        while (static_cast<int>(pool.size()) < per_pole) {
            std::string word;
            for (int s = 0; s < 3; ++s) {
                word += kCons[rng.index(std::size(kCons))];
                word += kVow[rng.index(std::size(kVow))];
            }
            if (used.insert(word).second) pool.push_back(word);
        }
    }
    return pools;
}

struct Corpus {
    std::vector<pc::UserRecord> users;
    persona::aug::AugmentationStore augmentations;
    persona::ls::LabelDescriptionSet descriptions;
};

inline persona::ls::LabelDescriptionSet make_descriptions() {
    static const std::array<const char*, 3> kTemplates = {
        "writing that keeps coming back to %s subject matter",
        "an overall %s emotional register",
        "%s phrasing and sentence habits",
    };
    persona::ls::LabelDescriptionSet set;
    for (int dim = 0; dim < pc::kNumDims; ++dim) {
        for (int pole = 0; pole < 2; ++pole) {
            for (int aspect = 0; aspect < 3; ++aspect) {
                const char* token = canonical_tokens()[dim][pole][aspect];
                std::string text = kTemplates[aspect];
                text.replace(text.find("%s"), 2, token);
                set.texts[dim][pole][aspect] = text;
            }
        }
    }
    return set;
}

inline Corpus make_corpus(const Options& opts) {
    const auto pools = variant_pools(opts.variants_per_pole);
    const auto& canon = canonical_tokens();
    const auto& fillers = filler_words();
    persona::Rng rng(opts.seed);

    Corpus corpus;
    corpus.descriptions = make_descriptions();

    for (int uidx = 0; uidx < opts.n_users; ++uidx) {
        pc::UserRecord user;
        user.user_id = "synth-" + std::to_string(uidx);
        for (int dim = 0; dim < pc::kNumDims; ++dim) {
            user.labels.poles[static_cast<std::size_t>(dim)] = rng.bernoulli(0.5) ? 1 : 0;
        }

        // the personal subset of marker words this user writes with
        std::array<std::vector<std::string>, 4> own;
        for (int dim = 0; dim < pc::kNumDims; ++dim) {
            const auto& pool = pools[static_cast<std::size_t>(dim * 2 + user.labels.poles[dim])];
            std::vector<std::size_t> idx(pool.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            rng.shuffle(idx);
            for (int k = 0; k < opts.variants_per_user; ++k) own[dim].push_back(pool[idx[k]]);
        }

        for (int p = 0; p < opts.posts_per_user; ++p) {
            std::vector<std::string> words;
            for (int f = 0; f < opts.fillers_per_post; ++f) words.push_back(rng.pick(fillers));

            // (dim, effective pole, word) for everything planted in this post
            std::vector<std::array<int, 2>> planted;
            std::vector<std::string> planted_words;
            for (int dim = 0; dim < pc::kNumDims; ++dim) {
                if (!rng.bernoulli(opts.marker_prob)) continue;
                int pole = user.labels.poles[static_cast<std::size_t>(dim)];
                std::string word;
                if (rng.bernoulli(opts.style_flip)) {
                    pole = 1 - pole;
                    word = rng.pick(pools[static_cast<std::size_t>(dim * 2 + pole)]);
                } else {
                    word = rng.pick(own[dim]);
                }
                planted.push_back({dim, pole});
                planted_words.push_back(word);
                words.push_back(word);
            }
            rng.shuffle(words);

            std::string post;
            for (const auto& w : words) {
                if (!post.empty()) post += ' ';
                post += w;
            }
            user.posts.push_back(post);

            // Analyses paraphrase the markers that actually appear, in the
            // canonical vocabulary only — deliberately zero lexical overlap
            // with the post itself, or the contrastive task would be solvable
            // by token matching without ever aligning marker words with the
            // canonical ones. Hedge fragments keep the strings from being
            // byte-identical across posts (duplicate rows would act as
            // cos = 1 in-batch negatives and shred the shared vocabulary).
            static const std::array<std::array<const char*, 3>, 3> kOpeners = {{
                {"the writer keeps circling", "recurring focus on", "subject matter leans"},
                {"the emotional tone reads", "affect throughout feels", "mood registers as"},
                {"the phrasing comes across", "sentence style runs", "diction here is"},
            }};
            static const std::array<const char*, 12> kHedges = {
                "on balance",     "for the most part", "by and large", "taken together",
                "more or less",   "in the main",       "overall here", "at first glance",
                "reading closely", "throughout",       "in places",    "fairly clearly",
            };
            persona::aug::AspectAnalyses analyses;
            analyses.source_post_hash = persona::content_hash(post);
            analyses.model_id = "synthetic";
            analyses.prompt_version = persona::aug::kPromptVersion;
            for (int aspect = 0; aspect < 3; ++aspect) {
                std::string joined;
                for (const auto& [dim, pole] : planted) {
                    if (!joined.empty()) joined += " and ";
                    joined += canon[dim][pole][aspect];
                }
                if (joined.empty()) joined = "unremarkable";
                const char* opener = kOpeners[static_cast<std::size_t>(aspect)][rng.index(3)];
                analyses.texts[static_cast<std::size_t>(aspect)] = std::string(opener) + " " + joined + ", " +
                                                                   kHedges[rng.index(kHedges.size())] + " " +
                                                                   kHedges[rng.index(kHedges.size())];
            }
            corpus.augmentations.insert(std::move(analyses));
        }
        corpus.users.push_back(std::move(user));
    }
    return corpus;
}

} // namespace testutil::synth
