#include "curator/config.hpp"

#include <algorithm>
#include <fstream>

#include "curator/hashing.hpp"
#include "curator/unicode.hpp"

namespace curator::config {

namespace {

// Reads known keys from a section, rejecting anything unrecognized.
class Section {
public:
    Section(const nlohmann::json& j, std::string name) : json_(j), name_(std::move(name)) {
        for (const auto& [key, _] : json_.items()) pending_.insert(key);
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (!json_.contains(key)) return;
        try {
            out = json_[key].get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigInvalid(name_ + "." + key, "wrong type");
        }
        pending_.erase(key);
    }

    void finish() const {
        if (!pending_.empty())
            throw ConfigInvalid(name_ + "." + *pending_.begin(), "unknown key");
    }

private:
    const nlohmann::json& json_;
    std::string name_;
    std::set<std::string> pending_;
};

}  // namespace

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoFailure("cannot parse config " + path.string() + ": " + e.what());
    }
    PipelineConfig cfg;
    cfg.apply(j);
    cfg.validate();
    return cfg;
}

void PipelineConfig::apply(const nlohmann::json& overlay) {
    if (!overlay.is_object()) throw ConfigInvalid("config", "root must be an object");
    std::set<std::string> sections;
    for (const auto& [key, _] : overlay.items()) sections.insert(key);
    auto take = [&](const char* name) { sections.erase(name); };

    if (overlay.contains("global")) {
        Section s(overlay["global"], "global");
        s.get("seed", seed);
        s.get("workers", workers);
        s.get("run_id", run_id);
        s.finish();
        take("global");
    }
    if (overlay.contains("filters")) {
        Section s(overlay["filters"], "filters");
        auto& f = filters;
        s.get("web_min_length", f.web_min_length);
        s.get("web_short_sentence_ratio", f.web_short_sentence_ratio);
        s.get("web_short_sentence_chars", f.web_short_sentence_chars);
        s.get("web_symbol_ratio", f.web_symbol_ratio);
        s.get("web_bullet_line_ratio", f.web_bullet_line_ratio);
        s.get("web_ellipsis_line_ratio", f.web_ellipsis_line_ratio);
        s.get("web_max_perplexity", f.web_max_perplexity);
        s.get("web_min_lang_score", f.web_min_lang_score);
        s.get("target_languages", f.target_languages);
        s.get("web_stage3_min_length", f.web_stage3_min_length);
        s.get("web_min_paragraphs", f.web_min_paragraphs);
        s.get("web_paragraph_expansion_max", f.web_paragraph_expansion_max);
        s.get("code_min_length", f.code_min_length);
        s.get("code_max_length", f.code_max_length);
        s.get("code_min_line_chars", f.code_min_line_chars);
        s.get("code_max_line_chars", f.code_max_line_chars);
        s.get("code_numeric_ratio", f.code_numeric_ratio);
        s.get("code_alpha_ratio", f.code_alpha_ratio);
        s.get("code_flagged_line_ratio", f.code_flagged_line_ratio);
        s.get("encyclopedia_min_length", f.encyclopedia_min_length);
        s.get("encyclopedia_zh_ratio", f.encyclopedia_zh_ratio);
        s.get("cbook_min_length", f.cbook_min_length);
        s.get("cbook_short_line_ratio", f.cbook_short_line_ratio);
        s.get("cbook_zh_ratio", f.cbook_zh_ratio);
        s.get("bestseller_min_length", f.bestseller_min_length);
        s.get("bestseller_short_line_ratio", f.bestseller_short_line_ratio);
        s.get("bestseller_zh_ratio", f.bestseller_zh_ratio);
        s.get("book_short_line_words", f.book_short_line_words);
        s.get("news_min_length", f.news_min_length);
        s.get("news_short_line_ratio", f.news_short_line_ratio);
        s.get("news_zh_ratio", f.news_zh_ratio);
        s.get("se_min_score", f.se_min_score);
        s.get("se_max_answers", f.se_max_answers);
        s.get("zhihu_min_chars", f.zhihu_min_chars);
        s.get("zhihu_hq_min_chars", f.zhihu_hq_min_chars);
        s.get("zhihu_editor_max_mentions", f.zhihu_editor_max_mentions);
        s.get("zhihu_hq_engagement", f.zhihu_hq_engagement);
        s.get("zhihu_min_upvotes", f.zhihu_min_upvotes);
        s.get("bullet_markers", f.bullet_markers);
        s.get("encyclopedia_strip_patterns", f.encyclopedia_strip_patterns);
        s.get("news_strip_patterns", f.news_strip_patterns);
        std::string terminal;
        s.get("terminal_punctuation", terminal);
        if (!terminal.empty()) f.terminal_punctuation = uni::decode(terminal);
        std::string dirty_words_file;
        s.get("dirty_words_file", dirty_words_file);
        if (!dirty_words_file.empty()) f.load_dirty_words(dirty_words_file);
        std::vector<std::string> dirty_words;
        s.get("dirty_words", dirty_words);
        for (const auto& word : dirty_words) f.dirty_words.insert(uni::to_lower_ascii(word));
        s.finish();
        take("filters");
    }
    if (overlay.contains("dedup")) {
        Section s(overlay["dedup"], "dedup");
        s.get("shingle_n", dedup.shingle_n);
        s.get("num_hashes", dedup.num_hashes);
        s.get("bands", dedup.bands);
        s.get("rows", dedup.rows);
        s.get("verify_threshold", dedup.verify_threshold);
        s.get("seed", dedup.seed);
        s.get("slice_size", dedup.slice_size);
        s.get("cross_language", dedup.cross_language);
        s.finish();
        take("dedup");
    }
    if (overlay.contains("mixture")) {
        Section s(overlay["mixture"], "mixture");
        s.get("use_separator", mixture.use_separator);
        s.get("separator_token", mixture.separator_token);
        s.finish();
        take("mixture");
    }
    if (overlay.contains("tokenizer")) {
        Section s(overlay["tokenizer"], "tokenizer");
        s.get("extension_unit", tokenizer.extension_unit);
        s.get("pad_to", tokenizer.pad_to);
        s.finish();
        take("tokenizer");
    }
    if (overlay.contains("model")) {
        Section s(overlay["model"], "model");
        s.get("order", model.order);
        s.get("smoothing", model.smoothing);
        s.get("judge_f1_cut", model.judge_f1_cut);
        s.get("provider_command", model.provider_command);
        s.get("cache_dir", model.cache_dir);
        s.get("timeout_ms", model.timeout_ms);
        s.finish();
        take("model");
    }
    if (overlay.contains("longtail")) {
        Section s(overlay["longtail"], "longtail");
        s.get("epsilon", longtail.probe.epsilon);
        s.get("top_k", longtail.probe.top_k);
        s.get("max_rounds", longtail.probe.max_rounds);
        s.get("stop_tol", longtail.probe.stop_tol);
        s.get("questions_per_entity", longtail.probe.questions_per_entity);
        s.get("answer_tokens", longtail.probe.answer_tokens);
        s.get("min_description_chars", longtail.entities.min_description_chars);
        s.get("min_mentions", longtail.entities.min_mentions);
        s.get("min_cooccur", longtail.min_cooccur);
        s.get("zh_remedial_fraction", longtail.remedial.zh_fraction);
        s.get("en_remedial_fraction", longtail.remedial.en_fraction);
        s.finish();
        take("longtail");
    }
    if (overlay.contains("sft")) {
        Section s(overlay["sft"], "sft");
        s.get("lambda_turn", sft.lambda_turn);
        s.get("lambda_length", sft.lambda_length);
        s.get("lambda_loss", sft.lambda_loss);
        s.get("quantile", sft.quantile);
        s.get("similarity_floor", sft.similarity_floor);
        s.finish();
        take("sft");
    }
    if (overlay.contains("align")) {
        Section s(overlay["align"], "align");
        s.get("delta0", align.rounds.delta0);
        s.get("decay", align.rounds.decay);
        s.get("beta", align.rounds.beta);
        s.get("min_dataset_size", align.rounds.min_dataset_size);
        s.get("min_gap", align.min_gap);
        s.finish();
        take("align");
    }
    if (!sections.empty()) throw ConfigInvalid(*sections.begin(), "unknown section");
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json j;
    j["global"] = {{"seed", seed}, {"workers", workers}, {"run_id", run_id}};
    const auto& f = filters;
    j["filters"] = {
        {"web_min_length", f.web_min_length},
        {"web_short_sentence_ratio", f.web_short_sentence_ratio},
        {"web_short_sentence_chars", f.web_short_sentence_chars},
        {"web_symbol_ratio", f.web_symbol_ratio},
        {"web_bullet_line_ratio", f.web_bullet_line_ratio},
        {"web_ellipsis_line_ratio", f.web_ellipsis_line_ratio},
        {"web_max_perplexity", f.web_max_perplexity},
        {"web_min_lang_score", f.web_min_lang_score},
        {"target_languages", f.target_languages},
        {"web_stage3_min_length", f.web_stage3_min_length},
        {"web_min_paragraphs", f.web_min_paragraphs},
        {"web_paragraph_expansion_max", f.web_paragraph_expansion_max},
        {"code_min_length", f.code_min_length},
        {"code_max_length", f.code_max_length},
        {"code_min_line_chars", f.code_min_line_chars},
        {"code_max_line_chars", f.code_max_line_chars},
        {"code_numeric_ratio", f.code_numeric_ratio},
        {"code_alpha_ratio", f.code_alpha_ratio},
        {"code_flagged_line_ratio", f.code_flagged_line_ratio},
        {"encyclopedia_min_length", f.encyclopedia_min_length},
        {"encyclopedia_zh_ratio", f.encyclopedia_zh_ratio},
        {"cbook_min_length", f.cbook_min_length},
        {"cbook_short_line_ratio", f.cbook_short_line_ratio},
        {"cbook_zh_ratio", f.cbook_zh_ratio},
        {"bestseller_min_length", f.bestseller_min_length},
        {"bestseller_short_line_ratio", f.bestseller_short_line_ratio},
        {"bestseller_zh_ratio", f.bestseller_zh_ratio},
        {"book_short_line_words", f.book_short_line_words},
        {"news_min_length", f.news_min_length},
        {"news_short_line_ratio", f.news_short_line_ratio},
        {"news_zh_ratio", f.news_zh_ratio},
        {"se_min_score", f.se_min_score},
        {"se_max_answers", f.se_max_answers},
        {"zhihu_min_chars", f.zhihu_min_chars},
        {"zhihu_hq_min_chars", f.zhihu_hq_min_chars},
        {"zhihu_editor_max_mentions", f.zhihu_editor_max_mentions},
        {"zhihu_hq_engagement", f.zhihu_hq_engagement},
        {"zhihu_min_upvotes", f.zhihu_min_upvotes},
        {"terminal_punctuation", uni::encode(f.terminal_punctuation)},
        {"bullet_markers", f.bullet_markers},
        {"encyclopedia_strip_patterns", f.encyclopedia_strip_patterns},
        {"news_strip_patterns", f.news_strip_patterns},
    };
    std::vector<std::string> dirty_words(f.dirty_words.begin(), f.dirty_words.end());
    std::sort(dirty_words.begin(), dirty_words.end());
    j["filters"]["dirty_words"] = dirty_words;
    j["dedup"] = {
        {"shingle_n", dedup.shingle_n},       {"num_hashes", dedup.num_hashes},
        {"bands", dedup.bands},               {"rows", dedup.rows},
        {"verify_threshold", dedup.verify_threshold},
        {"seed", dedup.seed},                 {"slice_size", dedup.slice_size},
        {"cross_language", dedup.cross_language},
    };
    j["mixture"] = {{"use_separator", mixture.use_separator},
                    {"separator_token", mixture.separator_token}};
    j["tokenizer"] = {{"extension_unit", tokenizer.extension_unit},
                      {"pad_to", tokenizer.pad_to}};
    j["model"] = {{"order", model.order},
                  {"smoothing", model.smoothing},
                  {"judge_f1_cut", model.judge_f1_cut},
                  {"provider_command", model.provider_command},
                  {"cache_dir", model.cache_dir},
                  {"timeout_ms", model.timeout_ms}};
    j["longtail"] = {{"epsilon", longtail.probe.epsilon},
                     {"top_k", longtail.probe.top_k},
                     {"max_rounds", longtail.probe.max_rounds},
                     {"stop_tol", longtail.probe.stop_tol},
                     {"questions_per_entity", longtail.probe.questions_per_entity},
                     {"answer_tokens", longtail.probe.answer_tokens},
                     {"min_description_chars", longtail.entities.min_description_chars},
                     {"min_mentions", longtail.entities.min_mentions},
                     {"min_cooccur", longtail.min_cooccur},
                     {"zh_remedial_fraction", longtail.remedial.zh_fraction},
                     {"en_remedial_fraction", longtail.remedial.en_fraction}};
    j["sft"] = {{"lambda_turn", sft.lambda_turn},
                {"lambda_length", sft.lambda_length},
                {"lambda_loss", sft.lambda_loss},
                {"quantile", sft.quantile},
                {"similarity_floor", sft.similarity_floor}};
    j["align"] = {{"delta0", align.rounds.delta0},
                  {"decay", align.rounds.decay},
                  {"beta", align.rounds.beta},
                  {"min_dataset_size", align.rounds.min_dataset_size},
                  {"min_gap", align.min_gap}};
    return j;
}

std::string PipelineConfig::digest() const {
    return hashing::hex(hashing::hash128(to_json().dump()));
}

void PipelineConfig::validate() const {
    filters.validate();
    if (workers < 1) throw ConfigInvalid("global.workers", "must be >= 1");
    if (dedup.shingle_n < 1) throw ConfigInvalid("dedup.shingle_n", "must be >= 1");
    if (dedup.bands * dedup.rows == 0)
        throw ConfigInvalid("dedup.bands", "bands and rows must be positive");
    if (dedup.num_hashes != dedup.bands * dedup.rows)
        throw ConfigInvalid("dedup.num_hashes", "must equal bands * rows");
    if (dedup.verify_threshold < 0 || dedup.verify_threshold > 1)
        throw ConfigInvalid("dedup.verify_threshold", "must be within [0, 1]");
    if (tokenizer.extension_unit != "subword" && tokenizer.extension_unit != "whole_word")
        throw ConfigInvalid("tokenizer.extension_unit", "must be subword or whole_word");
    if (model.order < 1) throw ConfigInvalid("model.order", "must be >= 1");
    if (model.smoothing <= 0) throw ConfigInvalid("model.smoothing", "must be positive");
    if (sft.quantile < 0 || sft.quantile > 1)
        throw ConfigInvalid("sft.quantile", "must be within [0, 1]");
    if (longtail.probe.epsilon < 0 || longtail.probe.epsilon > 1)
        throw ConfigInvalid("longtail.epsilon", "must be within [0, 1]");
    if (longtail.probe.max_rounds < 1)
        throw ConfigInvalid("longtail.max_rounds", "must be >= 1");
    if (align.rounds.decay <= 0 || align.rounds.decay >= 1)
        throw ConfigInvalid("align.decay", "must be within (0, 1)");
}

}  // namespace curator::config
