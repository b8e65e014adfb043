#include "curator/filters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>

#include "curator/unicode.hpp"

namespace curator::filters {

namespace {

void hit(FilterVerdict& v, std::string rule_id, double measured, double threshold) {
    v.passed = false;
    v.rule_hits.push_back({std::move(rule_id), measured, threshold});
}

bool contains_ci(const std::string& lower_text, std::string_view needle) {
    return lower_text.find(needle) != std::string::npos;
}

// Whole-token scan over lowercased alphanumeric runs.
std::size_t dirty_word_hits(const std::string& text,
                            const std::unordered_set<std::string>& words) {
    if (words.empty()) return 0;
    std::size_t hits = 0;
    std::string token;
    auto flush = [&] {
        if (!token.empty() && words.count(token)) ++hits;
        token.clear();
    };
    for (char c : uni::to_lower_ascii(text)) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return hits;
}

bool is_bullet_line(std::string_view line, const std::vector<std::string>& markers) {
    const auto trimmed = uni::trim(line);
    if (trimmed.empty()) return false;
    for (const auto& m : markers) {
        if (trimmed.rfind(m, 0) == 0) return true;
    }
    // Enumerations: digits followed by '.' or ')' or the CJK list comma.
    std::size_t i = 0;
    while (i < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[i]))) ++i;
    if (i > 0 && i < trimmed.size() &&
        (trimmed[i] == '.' || trimmed[i] == ')' || trimmed.compare(i, 3, "、") == 0)) {
        return true;
    }
    return false;
}

bool ends_with_ellipsis(std::string_view line) {
    const auto trimmed = uni::trim(line);
    if (trimmed.size() >= 3 && trimmed.compare(trimmed.size() - 3, 3, "...") == 0) return true;
    const std::string ell = uni::encode(U'…');
    return trimmed.size() >= ell.size() &&
           trimmed.compare(trimmed.size() - ell.size(), ell.size(), ell) == 0;
}

// '#' and single-char ellipsis count one each; a maximal run of >= 3 dots
// counts as one ellipsis occurrence.
std::size_t symbol_occurrences(const std::u32string& cps) {
    std::size_t count = 0;
    std::size_t dot_run = 0;
    for (char32_t cp : cps) {
        if (cp == U'.') {
            ++dot_run;
            continue;
        }
        if (dot_run >= 3) ++count;
        dot_run = 0;
        if (cp == U'#' || cp == U'…') ++count;
    }
    if (dot_run >= 3) ++count;
    return count;
}

std::vector<std::string_view> drop_matching_lines(std::string_view text,
                                                  const std::vector<std::string>& patterns) {
    std::vector<std::regex> regexes;
    regexes.reserve(patterns.size());
    for (const auto& p : patterns) regexes.emplace_back(p);
    std::vector<std::string_view> kept;
    for (auto line : uni::split_lines(text)) {
        const std::string owned(line);
        bool drop = false;
        for (const auto& re : regexes) {
            if (std::regex_search(owned, re)) {
                drop = true;
                break;
            }
        }
        if (!drop) kept.push_back(line);
    }
    return kept;
}

std::string join_lines(const std::vector<std::string_view>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += std::string(lines[i]);
    }
    return out;
}

double short_line_ratio(std::string_view text, std::size_t word_floor) {
    const auto lines = uni::split_lines(text);
    if (lines.empty()) return 0.0;
    std::size_t short_lines = 0;
    for (auto line : lines) {
        if (uni::word_count(line) < word_floor) ++short_lines;
    }
    return static_cast<double>(short_lines) / static_cast<double>(lines.size());
}

std::size_t cjk_count(std::string_view text) {
    std::size_t n = 0;
    for (char32_t cp : uni::decode(text)) {
        if (uni::is_cjk(cp)) ++n;
    }
    return n;
}

}  // namespace

RuleConfig::RuleConfig() {
    // Multibyte literals are grouped or alternated explicitly; a bare UTF-8
    // char inside [] or before ? would be treated bytewise by std::regex.
    encyclopedia_strip_patterns = {
        "^\\s*(目录|参考资料|外部链接|词条图册)\\s*$",
        "^\\s*(References|External links|See also|Contents)\\s*$",
    };
    news_strip_patterns = {
        "^\\s*(来源|责任编辑|编辑|记者)(：|:).*$",
        "^\\s*(Source|Editor|Reporter)\\s*(:|：).*$",
        "^\\s*\\d{4}(-|年)\\d{1,2}(-|月)\\d{1,2}(日)?\\s*$",
    };
}

void RuleConfig::load_dirty_words(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open dirty word list: " + path.string());
    std::string word;
    while (std::getline(in, word)) {
        const auto trimmed = uni::trim(word);
        if (!trimmed.empty()) dirty_words.insert(uni::to_lower_ascii(trimmed));
    }
}

void RuleConfig::validate() const {
    auto check_ratio = [](const char* key, double value) {
        if (!(value >= 0.0 && value <= 1.0) || !std::isfinite(value))
            throw ConfigInvalid(key, "ratio must be within [0, 1]");
    };
    check_ratio("web_short_sentence_ratio", web_short_sentence_ratio);
    check_ratio("web_symbol_ratio", web_symbol_ratio);
    check_ratio("web_bullet_line_ratio", web_bullet_line_ratio);
    check_ratio("web_ellipsis_line_ratio", web_ellipsis_line_ratio);
    check_ratio("web_min_lang_score", web_min_lang_score);
    check_ratio("code_numeric_ratio", code_numeric_ratio);
    check_ratio("code_alpha_ratio", code_alpha_ratio);
    check_ratio("code_flagged_line_ratio", code_flagged_line_ratio);
    check_ratio("encyclopedia_zh_ratio", encyclopedia_zh_ratio);
    check_ratio("cbook_short_line_ratio", cbook_short_line_ratio);
    check_ratio("cbook_zh_ratio", cbook_zh_ratio);
    check_ratio("bestseller_short_line_ratio", bestseller_short_line_ratio);
    check_ratio("bestseller_zh_ratio", bestseller_zh_ratio);
    check_ratio("news_short_line_ratio", news_short_line_ratio);
    check_ratio("news_zh_ratio", news_zh_ratio);
    if (!(web_max_perplexity > 0) || !std::isfinite(web_max_perplexity))
        throw ConfigInvalid("web_max_perplexity", "must be positive and finite");
    if (web_paragraph_expansion_max <= 0 || !std::isfinite(web_paragraph_expansion_max))
        throw ConfigInvalid("web_paragraph_expansion_max", "must be positive and finite");
    if (code_min_length > code_max_length)
        throw ConfigInvalid("code_min_length", "exceeds code_max_length");
    if (code_min_line_chars > code_max_line_chars)
        throw ConfigInvalid("code_min_line_chars", "exceeds code_max_line_chars");
    if (terminal_punctuation.empty())
        throw ConfigInvalid("terminal_punctuation", "must not be empty");
    if (zhihu_min_upvotes < 0) throw ConfigInvalid("zhihu_min_upvotes", "must be >= 0");
    if (zhihu_hq_engagement < 0) throw ConfigInvalid("zhihu_hq_engagement", "must be >= 0");
}

FilterVerdict filter_web_stage1(const Document& doc, const RuleConfig& cfg) {
    FilterVerdict v;
    v.stage = 1;
    const auto cps = uni::decode(doc.text);
    const auto length = cps.size();

    if (length < cfg.web_min_length)
        hit(v, "min_length", static_cast<double>(length),
            static_cast<double>(cfg.web_min_length));

    const auto sentences = uni::split_sentences(doc.text, cfg.terminal_punctuation);
    if (!sentences.empty()) {
        std::size_t short_sentences = 0;
        for (const auto& s : sentences) {
            if (uni::codepoint_count(s) < cfg.web_short_sentence_chars) ++short_sentences;
        }
        const double ratio =
            static_cast<double>(short_sentences) / static_cast<double>(sentences.size());
        if (ratio > cfg.web_short_sentence_ratio)
            hit(v, "short_sentence_ratio", ratio, cfg.web_short_sentence_ratio);
    }

    const auto lower = uni::to_lower_ascii(doc.text);
    std::size_t banned = uni::count_occurrences(lower, "javascript") +
                         uni::count_occurrences(lower, "lorem ipsum") +
                         uni::count_occurrences(doc.text, "{");
    if (banned > 0) hit(v, "banned_term", static_cast<double>(banned), 0.0);

    const std::size_t dirty = dirty_word_hits(doc.text, cfg.dirty_words);
    if (dirty > 0) hit(v, "dirty_word", static_cast<double>(dirty), 0.0);

    if (length > 0) {
        const double symbol_ratio =
            static_cast<double>(symbol_occurrences(cps)) / static_cast<double>(length);
        if (symbol_ratio > cfg.web_symbol_ratio)
            hit(v, "symbol_ratio", symbol_ratio, cfg.web_symbol_ratio);
    }

    const auto lines = uni::split_lines(doc.text);
    if (!lines.empty()) {
        std::size_t bullets = 0;
        std::size_t ellipsis_ends = 0;
        for (auto line : lines) {
            if (is_bullet_line(line, cfg.bullet_markers)) ++bullets;
            if (ends_with_ellipsis(line)) ++ellipsis_ends;
        }
        const double n = static_cast<double>(lines.size());
        if (bullets / n > cfg.web_bullet_line_ratio)
            hit(v, "bullet_line_ratio", bullets / n, cfg.web_bullet_line_ratio);
        if (ellipsis_ends / n > cfg.web_ellipsis_line_ratio)
            hit(v, "ellipsis_line_ratio", ellipsis_ends / n, cfg.web_ellipsis_line_ratio);
    }

    char32_t last = 0;
    for (auto it = cps.rbegin(); it != cps.rend(); ++it) {
        if (!uni::is_space(*it)) {
            last = *it;
            break;
        }
    }
    if (last == 0 || cfg.terminal_punctuation.find(last) == std::u32string::npos)
        hit(v, "terminal_punctuation", 1.0, 0.0);

    const auto replacement_chars =
        static_cast<double>(std::count(cps.begin(), cps.end(), uni::kReplacementChar));
    if (replacement_chars > 0) hit(v, "replacement_char", replacement_chars, 0.0);

    return v;
}

FilterVerdict filter_web_stage2(const Document& doc, const RuleConfig& cfg,
                                const CharNGramModel& lm, const LanguageScorer& lid) {
    FilterVerdict v;
    v.stage = 2;
    if (doc.text.empty()) {
        hit(v, "perplexity", std::numeric_limits<double>::infinity(), cfg.web_max_perplexity);
        return v;
    }
    const double pp = lm.perplexity(doc.text);
    if (pp > cfg.web_max_perplexity) hit(v, "perplexity", pp, cfg.web_max_perplexity);

    const auto scores = lid.detect(doc.text);
    const auto& best = scores.front();
    if (best.score <= cfg.web_min_lang_score)
        hit(v, "lang_score", best.score, cfg.web_min_lang_score);
    if (std::find(cfg.target_languages.begin(), cfg.target_languages.end(), best.language) ==
        cfg.target_languages.end())
        hit(v, "lang_target", 1.0, 0.0);
    return v;
}

FilterVerdict filter_web_stage3(const Document& doc, const RuleConfig& cfg) {
    FilterVerdict v;
    v.stage = 3;
    if (!doc.meta.contains("original_paragraph_count"))
        throw MissingMeta("original_paragraph_count");
    const auto original = doc.meta["original_paragraph_count"].get<double>();

    const auto length = doc.length();
    if (length < cfg.web_stage3_min_length)
        hit(v, "min_length", static_cast<double>(length),
            static_cast<double>(cfg.web_stage3_min_length));

    const auto retained = uni::split_paragraphs(doc.text).size();
    if (retained < cfg.web_min_paragraphs)
        hit(v, "min_paragraphs", static_cast<double>(retained),
            static_cast<double>(cfg.web_min_paragraphs));

    const double expansion = retained == 0
                                 ? (original > 0 ? std::numeric_limits<double>::infinity() : 0.0)
                                 : original / static_cast<double>(retained);
    if (expansion > cfg.web_paragraph_expansion_max)
        hit(v, "paragraph_expansion", expansion, cfg.web_paragraph_expansion_max);
    return v;
}

FilterVerdict filter_web(const Document& doc, int stage, const RuleConfig& cfg,
                         const CharNGramModel* lm, const LanguageScorer* lid) {
    switch (stage) {
        case 1:
            return filter_web_stage1(doc, cfg);
        case 2:
            if (!lm || !lid)
                throw ModelRequired("web stage 2 requires a language model and language scorer");
            return filter_web_stage2(doc, cfg, *lm, *lid);
        case 3:
            return filter_web_stage3(doc, cfg);
        default:
            throw ConfigInvalid("stage", "web stage must be 1, 2, or 3");
    }
}

FilterVerdict filter_code(const Document& doc, const RuleConfig& cfg) {
    FilterVerdict v;
    const auto length = doc.length();

    std::string extension;
    if (doc.meta.contains("extension") && doc.meta["extension"].is_string())
        extension = doc.meta["extension"].get<std::string>();
    else if (doc.meta.contains("filename") && doc.meta["filename"].is_string()) {
        const auto filename = doc.meta["filename"].get<std::string>();
        const auto dot = filename.rfind('.');
        if (dot != std::string::npos) extension = filename.substr(dot);
    }
    const bool sql = extension == ".sql";

    if (!sql && length < cfg.code_min_length)
        hit(v, "min_length", static_cast<double>(length),
            static_cast<double>(cfg.code_min_length));
    if (length > cfg.code_max_length)
        hit(v, "max_length", static_cast<double>(length),
            static_cast<double>(cfg.code_max_length));

    const auto lines = uni::split_lines(doc.text);
    if (!lines.empty()) {
        std::size_t shortest = std::numeric_limits<std::size_t>::max();
        std::size_t longest = 0;
        std::size_t flagged = 0;
        for (auto line : lines) {
            const auto chars = uni::codepoint_count(line);
            shortest = std::min(shortest, chars);
            longest = std::max(longest, chars);
            const auto lower = uni::to_lower_ascii(line);
            if (contains_ci(lower, "config") || contains_ci(lower, "test")) ++flagged;
        }
        if (shortest < cfg.code_min_line_chars)
            hit(v, "line_too_short", static_cast<double>(shortest),
                static_cast<double>(cfg.code_min_line_chars));
        if (longest > cfg.code_max_line_chars)
            hit(v, "line_too_long", static_cast<double>(longest),
                static_cast<double>(cfg.code_max_line_chars));
        const double flagged_ratio =
            static_cast<double>(flagged) / static_cast<double>(lines.size());
        if (flagged_ratio > cfg.code_flagged_line_ratio)
            hit(v, "flagged_line_ratio", flagged_ratio, cfg.code_flagged_line_ratio);
    }

    if (length > 0) {
        std::size_t digits = 0;
        std::size_t alpha = 0;
        for (char32_t cp : uni::decode(doc.text)) {
            if (uni::is_ascii_digit(cp)) ++digits;
            if (uni::is_ascii_alpha(cp)) ++alpha;
        }
        const double n = static_cast<double>(length);
        if (digits / n > cfg.code_numeric_ratio)
            hit(v, "numeric_ratio", digits / n, cfg.code_numeric_ratio);
        if (alpha / n < cfg.code_alpha_ratio)
            hit(v, "alpha_ratio", alpha / n, cfg.code_alpha_ratio);
    }

    const std::size_t phrases = uni::count_occurrences(doc.text, "configuration file") +
                                uni::count_occurrences(doc.text, "test file");
    if (phrases > 0) hit(v, "banned_phrase", static_cast<double>(phrases), 0.0);

    return v;
}

Document clean_encyclopedia(const Document& doc, const RuleConfig& cfg) {
    Document cleaned = doc;
    auto kept = drop_matching_lines(doc.text, cfg.encyclopedia_strip_patterns);
    std::string body = join_lines(kept);
    if (doc.meta.contains("title") && doc.meta["title"].is_string()) {
        const auto title = doc.meta["title"].get<std::string>();
        if (!title.empty() && body.rfind(title, 0) != 0) body = title + "\n" + body;
    }
    cleaned.text = std::move(body);
    return cleaned;
}

FilterVerdict filter_encyclopedia(const Document& doc, const RuleConfig& cfg) {
    FilterVerdict v;
    const auto length = doc.length();
    if (length < cfg.encyclopedia_min_length)
        hit(v, "min_length", static_cast<double>(length),
            static_cast<double>(cfg.encyclopedia_min_length));
    const double zh = uni::cjk_fraction(doc.text);
    if (zh < cfg.encyclopedia_zh_ratio) hit(v, "zh_ratio", zh, cfg.encyclopedia_zh_ratio);
    return v;
}

BookProfile book_profile_from_string(std::string_view name) {
    if (name == "cbook") return BookProfile::cbook;
    if (name == "bestseller") return BookProfile::bestseller;
    throw UnknownProfile(std::string(name));
}

FilterVerdict filter_book(const Document& doc, BookProfile profile, const RuleConfig& cfg) {
    FilterVerdict v;
    const bool cbook = profile == BookProfile::cbook;
    const std::size_t min_length = cbook ? cfg.cbook_min_length : cfg.bestseller_min_length;
    const double line_ratio = cbook ? cfg.cbook_short_line_ratio : cfg.bestseller_short_line_ratio;
    const double zh_ratio = cbook ? cfg.cbook_zh_ratio : cfg.bestseller_zh_ratio;

    const auto length = doc.length();
    if (length < min_length)
        hit(v, "min_length", static_cast<double>(length), static_cast<double>(min_length));
    const double short_lines = short_line_ratio(doc.text, cfg.book_short_line_words);
    if (short_lines > line_ratio) hit(v, "short_line_ratio", short_lines, line_ratio);
    const double zh = uni::cjk_fraction(doc.text);
    if (zh < zh_ratio) hit(v, "zh_ratio", zh, zh_ratio);
    return v;
}

Document clean_news(const Document& doc, const RuleConfig& cfg) {
    Document cleaned = doc;
    cleaned.text = join_lines(drop_matching_lines(doc.text, cfg.news_strip_patterns));
    return cleaned;
}

FilterVerdict filter_news(const Document& doc, const RuleConfig& cfg) {
    const Document cleaned = clean_news(doc, cfg);
    FilterVerdict v;
    const auto length = cleaned.length();
    if (length < cfg.news_min_length)
        hit(v, "min_length", static_cast<double>(length),
            static_cast<double>(cfg.news_min_length));
    const double short_lines = short_line_ratio(cleaned.text, cfg.book_short_line_words);
    if (short_lines > cfg.news_short_line_ratio)
        hit(v, "short_line_ratio", short_lines, cfg.news_short_line_ratio);
    const double zh = uni::cjk_fraction(cleaned.text);
    if (zh < cfg.news_zh_ratio) hit(v, "zh_ratio", zh, cfg.news_zh_ratio);
    return v;
}

std::vector<Answer> select_stackexchange_answers(const QaThread& thread, const RuleConfig& cfg) {
    std::vector<Answer> kept;
    for (const auto& answer : thread.answers) {
        if (answer.accepted || answer.score >= cfg.se_min_score) kept.push_back(answer);
    }
    std::sort(kept.begin(), kept.end(), [](const Answer& a, const Answer& b) {
        if (a.accepted != b.accepted) return a.accepted;  // accepted first
        if (a.score != b.score) return a.score > b.score;
        return a.answer_id < b.answer_id;
    });
    if (kept.size() > cfg.se_max_answers) kept.resize(cfg.se_max_answers);
    return kept;
}

Document clean_zhihu(const Document& doc, const RuleConfig& cfg) {
    Document cleaned = doc;
    std::string out;
    for (const auto& sentence : uni::split_sentences(doc.text, cfg.terminal_punctuation)) {
        const auto lower = uni::to_lower_ascii(sentence);
        if (sentence.rfind("图片来源", 0) == 0 ||
            lower.rfind("image source", 0) == 0) {
            continue;
        }
        out += sentence;
    }
    cleaned.text = std::move(out);
    return cleaned;
}

FilterVerdict filter_zhihu(const Document& doc, const std::optional<AuthorStats>& author,
                           const RuleConfig& cfg) {
    if (!author) throw MissingAuthorStats();
    const Document cleaned = clean_zhihu(doc, cfg);
    FilterVerdict v;

    const auto zh_chars = cjk_count(cleaned.text);
    const std::size_t floor =
        author->high_quality(cfg) ? cfg.zhihu_hq_min_chars : cfg.zhihu_min_chars;
    if (zh_chars < floor)
        hit(v, "min_length", static_cast<double>(zh_chars), static_cast<double>(floor));

    const auto mentions =
        static_cast<long long>(uni::count_occurrences(cleaned.text, "编辑") +
                               uni::count_occurrences(uni::to_lower_ascii(cleaned.text), "editor"));
    if (mentions > cfg.zhihu_editor_max_mentions)
        hit(v, "editor_mentions", static_cast<double>(mentions),
            static_cast<double>(cfg.zhihu_editor_max_mentions));

    long long upvotes = 0;
    if (doc.meta.contains("upvotes") && doc.meta["upvotes"].is_number())
        upvotes = doc.meta["upvotes"].get<long long>();
    if (upvotes < cfg.zhihu_min_upvotes)
        hit(v, "upvotes", static_cast<double>(upvotes),
            static_cast<double>(cfg.zhihu_min_upvotes));
    return v;
}

std::string_view chain_name(SourceKind source) {
    switch (source) {
        case SourceKind::web: return "web";
        case SourceKind::code: return "code";
        case SourceKind::encyclopedia: return "encyclopedia";
        case SourceKind::academic: return "academic";
        case SourceKind::qa_forum: return "qa_forum";
        case SourceKind::book: return "book";
        case SourceKind::news: return "news";
        case SourceKind::legal: return "legal";
        case SourceKind::patent: return "patent";
        case SourceKind::edu_assessment: return "edu_assessment";
    }
    return "unknown";
}

namespace {

// Collapses runs of blank lines to one; the only cleanup academic sources need
// here, their upstream conversion is out of scope.
Document normalize_blank_lines(const Document& doc) {
    Document cleaned = doc;
    std::string out;
    bool last_blank = false;
    for (auto line : uni::split_lines(doc.text)) {
        const bool blank = uni::trim(line).empty();
        if (blank && last_blank) continue;
        if (!out.empty()) out.push_back('\n');
        out += std::string(line);
        last_blank = blank;
    }
    cleaned.text = std::move(out);
    return cleaned;
}

}  // namespace

const std::vector<std::string>& rule_catalog(SourceKind source) {
    static const std::vector<std::string> web = {
        "min_length",       "short_sentence_ratio", "banned_term",
        "dirty_word",       "symbol_ratio",         "bullet_line_ratio",
        "ellipsis_line_ratio", "terminal_punctuation", "replacement_char",
        "perplexity",       "lang_score",           "lang_target",
        "min_paragraphs",   "paragraph_expansion"};
    static const std::vector<std::string> code = {
        "min_length",  "max_length",  "line_too_short",     "line_too_long",
        "numeric_ratio", "alpha_ratio", "banned_phrase", "flagged_line_ratio"};
    static const std::vector<std::string> length_and_zh = {"min_length", "short_line_ratio",
                                                           "zh_ratio"};
    static const std::vector<std::string> encyclopedia = {"min_length", "zh_ratio"};
    static const std::vector<std::string> zhihu = {"min_length", "editor_mentions", "upvotes"};
    static const std::vector<std::string> news = {
        "min_length",       "short_line_ratio",     "zh_ratio",
        "short_sentence_ratio", "banned_term",      "dirty_word",
        "symbol_ratio",     "bullet_line_ratio",    "ellipsis_line_ratio",
        "terminal_punctuation", "replacement_char"};
    static const std::vector<std::string> none = {};
    switch (source) {
        case SourceKind::web: return web;
        case SourceKind::code: return code;
        case SourceKind::encyclopedia: return encyclopedia;
        case SourceKind::qa_forum: return zhihu;
        case SourceKind::book: return length_and_zh;
        case SourceKind::news: return news;  // non-zh news reuses web stage 1
        case SourceKind::academic:
        case SourceKind::legal:
        case SourceKind::patent:
        case SourceKind::edu_assessment: return none;
    }
    return none;
}

ChainResult apply_source_chain(const Document& doc, const FilterEnv& env) {
    ChainResult result;
    switch (doc.source) {
        case SourceKind::web:
            result.verdict = filter_web_stage1(doc, env.cfg);
            break;
        case SourceKind::code:
            result.verdict = filter_code(doc, env.cfg);
            break;
        case SourceKind::encyclopedia: {
            result.cleaned = clean_encyclopedia(doc, env.cfg);
            result.verdict = filter_encyclopedia(*result.cleaned, env.cfg);
            break;
        }
        case SourceKind::academic:
            result.cleaned = normalize_blank_lines(doc);
            break;
        case SourceKind::qa_forum: {
            if (doc.language == "zh") {
                std::optional<AuthorStats> stats;
                if (doc.meta.contains("author_engagement") &&
                    doc.meta["author_engagement"].is_number()) {
                    stats = AuthorStats{doc.meta["author_engagement"].get<long long>()};
                }
                result.cleaned = clean_zhihu(doc, env.cfg);
                result.verdict = filter_zhihu(doc, stats, env.cfg);
            }
            // English threads are selected at ingestion (answer ranking);
            // flattened docs pass through.
            break;
        }
        case SourceKind::book: {
            auto profile = BookProfile::cbook;
            if (doc.meta.contains("profile") && doc.meta["profile"].is_string())
                profile = book_profile_from_string(doc.meta["profile"].get<std::string>());
            result.verdict = filter_book(doc, profile, env.cfg);
            break;
        }
        case SourceKind::news:
            if (doc.language == "zh") {
                result.cleaned = clean_news(doc, env.cfg);
                result.verdict = filter_news(doc, env.cfg);
            } else {
                result.verdict = filter_web_stage1(doc, env.cfg);
            }
            break;
        case SourceKind::legal:
        case SourceKind::patent:
        case SourceKind::edu_assessment:
            // Pre-cleaned upstream; pass through.
            break;
    }
    return result;
}

}  // namespace curator::filters
