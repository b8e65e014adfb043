#include "curator/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "curator/model.hpp"
#include "curator/unicode.hpp"

namespace curator::filters {

std::string CharNGramModel::context_key(std::u32string_view context) {
    std::string key(context.size() * sizeof(char32_t), '\0');
    if (!context.empty()) std::memcpy(key.data(), context.data(), key.size());
    return key;
}

void CharNGramModel::observe(std::u32string_view cps) {
    std::u32string window(static_cast<std::size_t>(order_ - 1), kBos);
    for (char32_t cp : cps) {
        auto& ctx = counts_[context_key(window)];
        ++ctx.total;
        ++ctx.next[cp];
        vocabulary_.insert(cp);
        if (order_ > 1) {
            window.erase(window.begin());
            window.push_back(cp);
        }
    }
}

CharNGramModel CharNGramModel::fit(std::span<const Document> corpus, int order, double smoothing) {
    std::vector<std::string> texts;
    texts.reserve(corpus.size());
    for (const auto& doc : corpus) texts.push_back(doc.text);
    return fit_texts(texts, order, smoothing);
}

CharNGramModel CharNGramModel::fit_texts(std::span<const std::string> texts, int order,
                                         double smoothing) {
    if (order < 1) throw ConfigInvalid("ngram_order", "must be >= 1");
    if (smoothing <= 0) throw ConfigInvalid("ngram_smoothing", "must be positive");
    CharNGramModel model;
    model.order_ = order;
    model.smoothing_ = smoothing;
    for (const auto& text : texts) {
        const auto cps = uni::decode(text);
        if (!cps.empty()) model.observe(cps);
    }
    if (model.vocabulary_.empty()) throw EmptyCorpus();
    return model;
}

CharNGramModel CharNGramModel::uniform(const std::u32string& vocabulary, int order,
                                       double smoothing) {
    if (vocabulary.empty()) throw EmptyCorpus();
    CharNGramModel model;
    model.order_ = order;
    model.smoothing_ = smoothing;
    model.vocabulary_.insert(vocabulary.begin(), vocabulary.end());
    return model;
}

double CharNGramModel::prob(std::u32string_view context, char32_t next) const {
    const double v = static_cast<double>(vocabulary_.size());
    double total = 0.0;
    double count = 0.0;
    const auto it = counts_.find(context_key(context));
    if (it != counts_.end()) {
        total = static_cast<double>(it->second.total);
        const auto nit = it->second.next.find(next);
        if (nit != it->second.next.end()) count = static_cast<double>(nit->second);
    }
    return (count + smoothing_) / (total + smoothing_ * v);
}

double CharNGramModel::sequence_log_prob(std::u32string_view cps) const {
    std::u32string window(static_cast<std::size_t>(order_ - 1), kBos);
    double sum = 0.0;
    for (char32_t cp : cps) {
        sum += std::log(prob(window, cp));
        if (order_ > 1) {
            window.erase(window.begin());
            window.push_back(cp);
        }
    }
    return sum;
}

double CharNGramModel::perplexity(std::string_view text) const {
    const auto cps = uni::decode(text);
    if (cps.empty()) throw EmptyText();
    const double ll = sequence_log_prob(cps);
    return std::exp(-ll / static_cast<double>(cps.size()));
}

namespace {

// Seed corpora for the builtin profiles. Short but representative; anything
// bigger should be fit from reference files via LanguageScorer::fit.
const std::map<std::string, std::vector<std::string>>& builtin_seeds() {
    static const std::map<std::string, std::vector<std::string>> seeds = {
        {"en",
         {"The quick brown fox jumps over the lazy dog.",
          "This is a sentence written in plain English about the world and its history.",
          "We describe the training of the model and the data that it was trained on.",
          "It is important that the text is clear and that the words are common ones.",
          "What do you think about this? I think that it is a good idea for everyone."}},
        {"zh",
         {"你好，世界。这是一段用中文写的文字。",
          "我们介绍模型的训练过程以及使用的数据，这是中文的说明。",
          "中国的历史悠久，文化丰富多彩，语言文字源远流长。",
          "今天天气很好，我们一起去公园散步，看看美丽的风景。",
          "这是一个关于知识和学习的问题，大家都可以参与讨论。"}},
        {"de",
         {"Der schnelle braune Fuchs springt über den faulen Hund.",
          "Dies ist ein Satz, der auf Deutsch über die Welt und ihre Geschichte geschrieben wurde.",
          "Wir beschreiben das Training des Modells und die Daten, die verwendet wurden."}},
        {"fr",
         {"Le renard brun rapide saute par-dessus le chien paresseux.",
          "Ceci est une phrase écrite en français sur le monde et son histoire.",
          "Nous décrivons l'entraînement du modèle et les données utilisées."}},
        {"es",
         {"El rápido zorro marrón salta sobre el perro perezoso.",
          "Esta es una frase escrita en español sobre el mundo y su historia.",
          "Describimos el entrenamiento del modelo y los datos que se utilizaron."}},
        {"ru",
         {"Быстрая коричневая лиса прыгает через ленивую собаку.",
          "Это предложение написано по-русски о мире и его истории.",
          "Мы описываем обучение модели и данные, которые использовались."}},
        {"ja",
         {"これは日本語で書かれた文章です。世界とその歴史について述べます。",
          "モデルの学習と使用したデータについて説明します。",
          "今日はいい天気ですね。公園へ散歩に行きましょう。"}},
        {"ko",
         {"이것은 한국어로 작성된 문장입니다. 세계와 그 역사에 대해 설명합니다.",
          "모델의 학습과 사용된 데이터에 대해 설명합니다.",
          "오늘은 날씨가 좋네요. 공원에 산책하러 갑시다."}},
    };
    return seeds;
}

constexpr double kNgramWeight = 0.7;
constexpr double kScriptShareFloor = 0.05;  // seed scripts below this are noise

}  // namespace

LanguageScorer LanguageScorer::builtin() { return fit(builtin_seeds()); }

LanguageScorer LanguageScorer::fit(const std::map<std::string, std::vector<std::string>>& corpora,
                                   int order, double smoothing) {
    if (corpora.empty()) throw EmptyCorpus();
    LanguageScorer scorer;
    scorer.order_ = order;
    for (const auto& [lang, texts] : corpora) {
        Profile profile;
        profile.ngram = CharNGramModel::fit_texts(texts, order, smoothing);
        profile.unigram = CharNGramModel::fit_texts(texts, 1, smoothing);
        // Script coverage comes from the seed corpus itself.
        std::map<uni::Script, std::size_t> counts;
        std::size_t total = 0;
        for (const auto& text : texts) {
            for (char32_t cp : uni::decode(text)) {
                const auto script = uni::script_of(cp);
                if (script == uni::Script::common) continue;
                ++counts[script];
                ++total;
            }
        }
        for (const auto& [script, count] : counts) {
            if (static_cast<double>(count) >= kScriptShareFloor * static_cast<double>(total))
                profile.scripts.insert(script);
        }
        scorer.profiles_.emplace(lang, std::move(profile));
    }
    return scorer;
}

double LanguageScorer::char_log_prob(const Profile& profile, std::u32string_view context,
                                     char32_t cp) const {
    const double p = kNgramWeight * profile.ngram.prob(context, cp) +
                     (1.0 - kNgramWeight) * profile.unigram.prob({}, cp);
    return std::log(p);
}

std::vector<LangScore> LanguageScorer::detect(std::string_view text) const {
    const auto cps = uni::decode(text);
    if (cps.empty()) throw EmptyText();

    // Per-script likelihoods for the languages covering each script, plus
    // script character shares.
    std::map<uni::Script, std::size_t> script_counts;
    std::map<uni::Script, std::map<std::string, double>> script_lls;
    std::u32string window(static_cast<std::size_t>(order_ - 1), CharNGramModel::kBos);
    for (char32_t cp : cps) {
        const auto script = uni::script_of(cp);
        if (script != uni::Script::common) {
            ++script_counts[script];
            auto& lls = script_lls[script];
            for (const auto& [lang, profile] : profiles_) {
                if (profile.scripts.count(script))
                    lls[lang] += char_log_prob(profile, window, cp);
            }
        }
        if (order_ > 1) {
            window.erase(window.begin());
            window.push_back(cp);
        }
    }

    std::size_t total = 0;
    for (const auto& [_, count] : script_counts) total += count;

    std::map<std::string, double> score_by_lang;
    for (const auto& [lang, _] : profiles_) score_by_lang[lang] = 0.0;
    if (total == 0) {
        // Only common-script characters: no evidence either way.
        for (auto& [_, score] : score_by_lang)
            score = 1.0 / static_cast<double>(profiles_.size());
    } else {
        for (const auto& [script, lls] : script_lls) {
            if (lls.empty()) continue;  // script no profile covers
            const double share = static_cast<double>(script_counts.at(script)) /
                                 static_cast<double>(total);
            double max_ll = -std::numeric_limits<double>::infinity();
            for (const auto& [_, ll] : lls) max_ll = std::max(max_ll, ll);
            double z = 0.0;
            for (const auto& [_, ll] : lls) z += std::exp(ll - max_ll);
            for (const auto& [lang, ll] : lls)
                score_by_lang[lang] += share * std::exp(ll - max_ll) / z;
        }
    }

    std::vector<LangScore> scores;
    scores.reserve(score_by_lang.size());
    for (const auto& [lang, score] : score_by_lang) scores.push_back({lang, score});
    std::sort(scores.begin(), scores.end(), [](const LangScore& a, const LangScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.language < b.language;
    });
    return scores;
}

std::vector<std::string> LanguageScorer::languages() const {
    std::vector<std::string> out;
    out.reserve(profiles_.size());
    for (const auto& [lang, _] : profiles_) out.push_back(lang);
    return out;
}

const std::vector<std::string>& default_target_languages() {
    static const std::vector<std::string> langs = {
        "en", "zh", "de", "fr", "es", "pl", "it", "nl", "tr", "pt",
        "ru", "fi", "cs", "ja", "no", "ko", "da", "id", "ar", "uk",
        "ca", "hu", "ro", "fa", "bg", "el", "he", "hi", "hr",
    };
    return langs;
}

std::vector<LangScore> detect_language_via_provider(const model::ModelClient& provider,
                                                    std::string_view text) {
    if (text.empty()) throw EmptyText();
    const auto result =
        provider.invoke("detect_language", nlohmann::json{{"text", std::string(text)}});
    if (!result.contains("scores") || !result["scores"].is_array())
        throw ProtocolViolation("detect_language result lacks a scores array");
    std::vector<LangScore> scores;
    double sum = 0.0;
    for (const auto& row : result["scores"]) {
        LangScore score;
        score.language = row.at("language").get<std::string>();
        score.score = row.at("score").get<double>();
        if (score.score < 0.0 || score.score > 1.0)
            throw ProtocolViolation("language score outside [0, 1]");
        sum += score.score;
        scores.push_back(std::move(score));
    }
    if (sum > 1.0 + 1e-9) throw ProtocolViolation("language scores sum above 1");
    std::sort(scores.begin(), scores.end(), [](const LangScore& a, const LangScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.language < b.language;
    });
    return scores;
}

}  // namespace curator::filters
