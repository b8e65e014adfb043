#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/unicode.hpp"

namespace curator::filters {

// Add-k smoothed character n-gram model over code points. Contexts are
// BOS-padded so every position conditions on exactly n-1 symbols.
// Out-of-vocabulary query symbols receive the zero-count probability
// k / (total + k*V); distributions over the vocabulary itself sum to 1.
class CharNGramModel {
public:
    CharNGramModel() = default;

    static CharNGramModel fit(std::span<const Document> corpus, int order = 5,
                              double smoothing = 0.1);
    static CharNGramModel fit_texts(std::span<const std::string> texts, int order = 5,
                                    double smoothing = 0.1);
    // No counts at all: every conditional is uniform 1/|vocabulary|.
    static CharNGramModel uniform(const std::u32string& vocabulary, int order = 5,
                                  double smoothing = 0.1);

    double prob(std::u32string_view context, char32_t next) const;
    double sequence_log_prob(std::u32string_view cps) const;
    // exp(-(1/T) * sum log P(c_t | context)), T = code-point count. >= 1.
    double perplexity(std::string_view text) const;

    int order() const { return order_; }
    double smoothing() const { return smoothing_; }
    std::size_t vocab_size() const { return vocabulary_.size(); }
    bool contains(char32_t cp) const { return vocabulary_.count(cp) > 0; }

    static constexpr char32_t kBos = 0xFFFFFFFE;

private:
    struct ContextCounts {
        std::uint64_t total = 0;
        std::unordered_map<char32_t, std::uint64_t> next;
    };

    static std::string context_key(std::u32string_view context);
    void observe(std::u32string_view cps);

    int order_ = 5;
    double smoothing_ = 0.1;
    std::unordered_map<std::string, ContextCounts> counts_;
    std::unordered_set<char32_t> vocabulary_;
};

struct LangScore {
    std::string language;
    double score = 0.0;  // in [0, 1]; scores over the supported set sum to 1
};

// Language identification from per-language character n-gram likelihood
// ratios. Languages compete per writing script (zh vs ja on CJK runs, en vs
// de vs fr on Latin runs); a language's score is its script share weighted by
// the within-script likelihood-ratio softmax, so a 50/50 bilingual text
// scores both languages near 0.5. Scores over the supported set sum to at
// most 1.
class LanguageScorer {
public:
    static LanguageScorer builtin();  // embedded seed profiles (en, zh, ...)
    static LanguageScorer fit(const std::map<std::string, std::vector<std::string>>& corpora,
                              int order = 3, double smoothing = 0.1);

    std::vector<LangScore> detect(std::string_view text) const;  // EmptyText on empty input
    std::vector<std::string> languages() const;

private:
    struct Profile {
        CharNGramModel ngram;            // order-n model
        CharNGramModel unigram;          // order-1 backoff
        std::set<uni::Script> scripts;   // inferred from the seed corpus
    };
    double char_log_prob(const Profile& profile, std::u32string_view context,
                         char32_t cp) const;

    std::map<std::string, Profile> profiles_;
    int order_ = 3;
};

// The pre-training language list: en, zh, and the multilingual selection.
const std::vector<std::string>& default_target_languages();

}  // namespace curator::filters

namespace curator::model {
class ModelClient;
}

namespace curator::filters {

// External classifier plugged over the provider protocol: op
// "detect_language", payload {"text"}, result {"scores": [{language, score}]}.
std::vector<LangScore> detect_language_via_provider(const model::ModelClient& provider,
                                                    std::string_view text);

}  // namespace curator::filters
