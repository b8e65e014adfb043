#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/ngram.hpp"

namespace curator::filters {

// Thresholds for every registered rule chain. Defaults are the documented
// values; everything is overridable from the pipeline config.
struct RuleConfig {
    // web, stage 1
    std::size_t web_min_length = 512;
    double web_short_sentence_ratio = 0.5;
    std::size_t web_short_sentence_chars = 16;
    double web_symbol_ratio = 0.1;   // '#' and ellipsis
    double web_bullet_line_ratio = 0.9;
    double web_ellipsis_line_ratio = 0.3;
    // web, stage 2
    double web_max_perplexity = 1000.0;
    double web_min_lang_score = 0.6;  // reject at or below
    std::vector<std::string> target_languages = default_target_languages();
    // web, stage 3
    std::size_t web_stage3_min_length = 500;
    std::size_t web_min_paragraphs = 3;
    double web_paragraph_expansion_max = 5.0;

    // code
    std::size_t code_min_length = 100;
    std::size_t code_max_length = 200000;
    std::size_t code_min_line_chars = 20;
    std::size_t code_max_line_chars = 1000;
    double code_numeric_ratio = 0.7;
    double code_alpha_ratio = 0.3;
    double code_flagged_line_ratio = 0.1;

    // encyclopedia
    std::size_t encyclopedia_min_length = 50;
    double encyclopedia_zh_ratio = 0.70;

    // books
    std::size_t cbook_min_length = 3000;
    double cbook_short_line_ratio = 0.60;
    double cbook_zh_ratio = 0.45;
    std::size_t bestseller_min_length = 170;
    double bestseller_short_line_ratio = 0.29;
    double bestseller_zh_ratio = 0.79;
    std::size_t book_short_line_words = 6;

    // news (CICG profile; other news sources reuse web stage 1)
    std::size_t news_min_length = 170;
    double news_short_line_ratio = 0.25;
    double news_zh_ratio = 0.40;

    // stack exchange
    long long se_min_score = 4;
    std::size_t se_max_answers = 5;

    // zhihu
    std::size_t zhihu_min_chars = 200;
    std::size_t zhihu_hq_min_chars = 100;
    long long zhihu_editor_max_mentions = 2;
    long long zhihu_hq_engagement = 10000;
    long long zhihu_min_upvotes = 100;

    std::unordered_set<std::string> dirty_words;  // lowercase, whole-token match
    std::u32string terminal_punctuation = U".!?。！？…";
    std::vector<std::string> bullet_markers = {"•", "-", "*", "◦", "·"};
    std::vector<std::string> encyclopedia_strip_patterns;  // regex, matching lines dropped
    std::vector<std::string> news_strip_patterns;

    RuleConfig();

    void load_dirty_words(const std::filesystem::path& path);
    void validate() const;  // throws ConfigInvalid
};

// --- web ---------------------------------------------------------------
FilterVerdict filter_web_stage1(const Document& doc, const RuleConfig& cfg);
FilterVerdict filter_web_stage2(const Document& doc, const RuleConfig& cfg,
                                const CharNGramModel& lm, const LanguageScorer& lid);
FilterVerdict filter_web_stage3(const Document& doc, const RuleConfig& cfg);
// Dispatcher; stage 2 requires lm and lid (ModelRequired otherwise), stage 3
// requires meta.original_paragraph_count (MissingMeta).
FilterVerdict filter_web(const Document& doc, int stage, const RuleConfig& cfg,
                         const CharNGramModel* lm = nullptr,
                         const LanguageScorer* lid = nullptr);

// --- code ----------------------------------------------------------------
FilterVerdict filter_code(const Document& doc, const RuleConfig& cfg);

// --- encyclopedia ----------------------------------------------------------
Document clean_encyclopedia(const Document& doc, const RuleConfig& cfg);
FilterVerdict filter_encyclopedia(const Document& doc, const RuleConfig& cfg);

// --- books -----------------------------------------------------------------
enum class BookProfile { cbook, bestseller };
BookProfile book_profile_from_string(std::string_view name);  // UnknownProfile
FilterVerdict filter_book(const Document& doc, BookProfile profile, const RuleConfig& cfg);

// --- news ------------------------------------------------------------------
Document clean_news(const Document& doc, const RuleConfig& cfg);
FilterVerdict filter_news(const Document& doc, const RuleConfig& cfg);

// --- stack exchange ----------------------------------------------------------
struct Answer {
    std::string answer_id;
    std::string text;
    long long score = 0;
    bool accepted = false;
};
struct QaThread {
    std::string question_id;
    std::string question;
    std::vector<Answer> answers;
};
// Keeps answers scored at or above the floor plus the accepted one, accepted
// first, then score descending, id ascending; at most se_max_answers.
std::vector<Answer> select_stackexchange_answers(const QaThread& thread, const RuleConfig& cfg);

// --- zhihu -------------------------------------------------------------------
struct AuthorStats {
    long long engagement = 0;  // upvotes + thanks + bookmarks + followers
    bool high_quality(const RuleConfig& cfg) const { return engagement >= cfg.zhihu_hq_engagement; }
};
// Drops sentences that open with an image-source credit.
Document clean_zhihu(const Document& doc, const RuleConfig& cfg);
FilterVerdict filter_zhihu(const Document& doc, const std::optional<AuthorStats>& author,
                           const RuleConfig& cfg);

// --- chain registry ------------------------------------------------------------
struct FilterEnv {
    const RuleConfig& cfg;
    const CharNGramModel* lm = nullptr;
    const LanguageScorer* lid = nullptr;
};

struct ChainResult {
    FilterVerdict verdict;
    std::optional<Document> cleaned;  // set when the chain rewrites the text
};

// Every Table-2 source category maps to exactly one chain.
std::string_view chain_name(SourceKind source);
ChainResult apply_source_chain(const Document& doc, const FilterEnv& env);

// Registered rule ids of a chain; every verdict hit is drawn from the
// catalog of the chain that produced it.
const std::vector<std::string>& rule_catalog(SourceKind source);

}  // namespace curator::filters
