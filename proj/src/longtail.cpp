#include "curator/longtail.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "curator/hashing.hpp"
#include "curator/unicode.hpp"

namespace curator::longtail {

namespace {

std::pair<std::string, std::string> title_and_body(const Document& doc) {
    if (doc.meta.contains("title") && doc.meta["title"].is_string()) {
        return {doc.meta["title"].get<std::string>(), doc.text};
    }
    const auto newline = doc.text.find('\n');
    if (newline == std::string::npos) return {uni::trim(doc.text), std::string{}};
    return {uni::trim(doc.text.substr(0, newline)), doc.text.substr(newline + 1)};
}

}  // namespace

std::vector<EntityRecord> build_entity_list(std::span<const Document> encyclopedia,
                                            const EntityListOptions& options,
                                            std::span<const Document> mention_sample) {
    if (encyclopedia.empty()) throw EmptyCorpus();
    std::vector<EntityRecord> entities;
    for (const auto& doc : encyclopedia) {
        auto [title, body] = title_and_body(doc);
        if (title.empty()) continue;
        if (uni::codepoint_count(body) < options.min_description_chars) continue;
        std::uint64_t mentions = 0;
        for (const auto& sample : mention_sample) {
            mentions += uni::count_occurrences(sample.text, title);
        }
        if (mentions < options.min_mentions) continue;
        EntityRecord entity;
        entity.name = std::move(title);
        entity.description = std::move(body);
        entity.mention_count = mentions;
        entities.push_back(std::move(entity));
    }
    return entities;
}

std::set<std::string> related_entities(const std::string& name, const std::string& description,
                                       std::span<const std::string> entity_names,
                                       std::uint64_t min_cooccur) {
    // Longest names first; every match is masked out so names nested inside
    // longer ones are not double counted. The entity's own name takes part in
    // the masking but never joins the related set.
    std::vector<std::string> ordered(entity_names.begin(), entity_names.end());
    if (std::find(ordered.begin(), ordered.end(), name) == ordered.end())
        ordered.push_back(name);
    std::sort(ordered.begin(), ordered.end(), [](const std::string& a, const std::string& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a < b;
    });

    std::string masked = description;
    auto mask_matches = [&masked](const std::string& needle) {
        std::uint64_t found = 0;
        std::size_t pos = 0;
        while ((pos = masked.find(needle, pos)) != std::string::npos) {
            std::fill(masked.begin() + static_cast<long>(pos),
                      masked.begin() + static_cast<long>(pos + needle.size()), '\x01');
            pos += needle.size();
            ++found;
        }
        return found;
    };

    std::set<std::string> related;
    for (const auto& candidate : ordered) {
        if (candidate.empty()) continue;
        const auto found = mask_matches(candidate);
        if (candidate != name && found >= min_cooccur) related.insert(candidate);
    }
    return related;
}

std::vector<std::string> load_templates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open templates: " + path.string());
    std::vector<std::string> templates;
    std::string line;
    while (std::getline(in, line)) {
        const auto trimmed = uni::trim(line);
        if (!trimmed.empty()) templates.push_back(trimmed);
    }
    return templates;
}

namespace {

std::string instantiate(const std::string& tmpl, const std::string& v, const std::string& u) {
    std::string out = tmpl;
    auto replace_all = [&out](const std::string& slot, const std::string& value) {
        std::size_t pos = 0;
        while ((pos = out.find(slot, pos)) != std::string::npos) {
            out.replace(pos, slot.size(), value);
            pos += value.size();
        }
    };
    replace_all("{v}", v);
    replace_all("{u}", u);
    return out;
}

bool needs_related(const std::string& tmpl) {
    return tmpl.find("{u}") != std::string::npos;
}

}  // namespace

std::vector<QaPair> synthesize_qa(const EntityRecord& entity, const model::ModelClient& generator,
                                  std::span<const std::string> templates, std::size_t m,
                                  std::uint64_t seed) {
    if (m == 0) throw Error("at least one question per entity is required");
    if (templates.empty()) throw Error("question templates are empty");

    std::vector<std::string> usable;
    for (const auto& tmpl : templates) {
        if (needs_related(tmpl) && entity.related.empty()) continue;  // fall back to v-only
        usable.push_back(tmpl);
    }
    if (usable.empty()) throw Error("no usable templates for entity \"" + entity.name + "\"");

    const std::vector<std::string> related(entity.related.begin(), entity.related.end());
    std::vector<QaPair> pairs;
    pairs.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& tmpl = usable[i % usable.size()];
        const std::string& u = related.empty() ? entity.name : related[i % related.size()];
        QaPair pair;
        pair.question = instantiate(tmpl, entity.name, u);
        const std::string prompt = "Answer the question using the description.\nDescription: " +
                                   entity.description + "\nQuestion: " + pair.question +
                                   "\nAnswer:";
        try {
            pair.answer = generator.generate(prompt, 64, hashing::mix(seed, i));
        } catch (const Error& e) {
            throw GeneratorFailure("reference answer " + std::to_string(i) + " for \"" +
                                   entity.name + "\": " + e.what());
        }
        if (pair.answer.empty())
            throw GeneratorFailure("empty reference answer " + std::to_string(i) + " for \"" +
                                   entity.name + "\"");
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

double score_entity(const EntityRecord& entity, const model::ModelClient& model_under_test,
                    const model::ModelClient& judge, std::size_t answer_tokens) {
    if (entity.qa_pairs.empty()) throw Error("entity \"" + entity.name + "\" has no qa pairs");
    double sum = 0.0;
    for (std::size_t i = 0; i < entity.qa_pairs.size(); ++i) {
        const auto& pair = entity.qa_pairs[i];
        std::string answer;
        try {
            answer = model_under_test.generate(pair.question, answer_tokens, i);
        } catch (const Error& e) {
            throw GeneratorFailure("pair " + std::to_string(i) + ": " + e.what());
        }
        int verdict = 0;
        if (!answer.empty()) {
            try {
                verdict = judge.judge(pair.question, pair.answer, answer);
            } catch (const Error& e) {
                throw ScorerFailure("pair " + std::to_string(i) + ": " + e.what());
            }
        }
        sum += verdict;
    }
    return sum / static_cast<double>(entity.qa_pairs.size());
}

std::vector<std::string> select_weak(std::span<const EntityRecord> entities, double epsilon) {
    std::vector<std::string> weak;
    for (const auto& entity : entities) {
        if (!entity.score) throw UnscoredEntity(entity.name);
        if (*entity.score < epsilon) weak.push_back(entity.name);
    }
    return weak;
}

TfidfIndex TfidfIndex::build(std::span<const Document> docs) {
    TfidfIndex index;
    for (const auto& doc : docs) {
        std::map<std::string, std::uint64_t> counts;
        std::uint64_t total = 0;
        std::string token;
        auto flush = [&] {
            if (!token.empty()) {
                ++counts[token];
                ++total;
                token.clear();
            }
        };
        for (char c : uni::to_lower_ascii(doc.text)) {
            if (std::isalnum(static_cast<unsigned char>(c)) ||
                static_cast<unsigned char>(c) >= 0x80) {
                token.push_back(c);
            } else {
                flush();
            }
        }
        flush();

        std::map<std::string, double> weights;
        for (const auto& [term, count] : counts) {
            weights[term] = total == 0 ? 0.0
                                       : static_cast<double>(count) / static_cast<double>(total);
            ++index.doc_frequency_[term];
        }
        index.doc_ids_.push_back(doc.id);
        index.doc_weights_.push_back(std::move(weights));
    }

    // Scale tf by idf and precompute norms + postings.
    for (std::size_t d = 0; d < index.doc_weights_.size(); ++d) {
        double norm = 0.0;
        for (auto& [term, weight] : index.doc_weights_[d]) {
            weight *= index.idf(term);
            norm += weight * weight;
            index.postings_[term].emplace_back(d, weight);
        }
        index.doc_norms_.push_back(std::sqrt(norm));
    }
    return index;
}

double TfidfIndex::idf(const std::string& term) const {
    const auto it = doc_frequency_.find(term);
    const auto df = it == doc_frequency_.end() ? 0 : it->second;
    const double value =
        std::log(static_cast<double>(doc_ids_.size()) / (1.0 + static_cast<double>(df))) + 1.0;
    return std::max(value, 0.0);
}

std::map<std::string, double> TfidfIndex::query_vector(const std::string& query) const {
    std::map<std::string, std::uint64_t> counts;
    std::uint64_t total = 0;
    std::string token;
    auto flush = [&] {
        if (!token.empty()) {
            ++counts[token];
            ++total;
            token.clear();
        }
    };
    for (char c : uni::to_lower_ascii(query)) {
        if (std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80) {
            token.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    std::map<std::string, double> vec;
    for (const auto& [term, count] : counts) {
        if (total == 0) continue;
        vec[term] = static_cast<double>(count) / static_cast<double>(total) * idf(term);
    }
    return vec;
}

std::vector<std::string> TfidfIndex::retrieve(const std::string& query, std::size_t k) const {
    if (doc_ids_.empty()) throw EmptyIndex();
    if (k < 1) throw Error("k must be >= 1");
    const auto qvec = query_vector(query);
    double qnorm = 0.0;
    for (const auto& [_, w] : qvec) qnorm += w * w;
    qnorm = std::sqrt(qnorm);

    std::vector<double> scores(doc_ids_.size(), 0.0);
    if (qnorm > 0) {
        for (const auto& [term, qw] : qvec) {
            const auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            for (const auto& [d, dw] : it->second) scores[d] += qw * dw;
        }
        for (std::size_t d = 0; d < scores.size(); ++d) {
            if (doc_norms_[d] > 0) scores[d] /= qnorm * doc_norms_[d];
        }
    }

    std::vector<std::size_t> order(doc_ids_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return doc_ids_[a] < doc_ids_[b];
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < order.size() && i < k; ++i) out.push_back(doc_ids_[order[i]]);
    return out;
}

double TfidfIndex::doc_cosine(std::size_t a, std::size_t b) const {
    if (a >= doc_ids_.size() || b >= doc_ids_.size()) throw Error("doc index out of range");
    if (doc_norms_[a] == 0 || doc_norms_[b] == 0) return 0.0;
    const auto& wa = doc_weights_[a];
    const auto& wb = doc_weights_[b];
    double dot = 0.0;
    for (const auto& [term, weight] : wa) {
        const auto it = wb.find(term);
        if (it != wb.end()) dot += weight * it->second;
    }
    return dot / (doc_norms_[a] * doc_norms_[b]);
}

double TfidfIndex::cosine(const std::string& query, const std::string& doc_id) const {
    const auto it = std::find(doc_ids_.begin(), doc_ids_.end(), doc_id);
    if (it == doc_ids_.end()) throw Error("unknown doc id \"" + doc_id + "\"");
    const auto d = static_cast<std::size_t>(it - doc_ids_.begin());
    const auto qvec = query_vector(query);
    double qnorm = 0.0;
    double dot = 0.0;
    for (const auto& [term, qw] : qvec) {
        qnorm += qw * qw;
        const auto wit = doc_weights_[d].find(term);
        if (wit != doc_weights_[d].end()) dot += qw * wit->second;
    }
    qnorm = std::sqrt(qnorm);
    if (qnorm == 0 || doc_norms_[d] == 0) return 0.0;
    return dot / (qnorm * doc_norms_[d]);
}

std::vector<std::string> tfidf_retrieve(std::span<const EntityRecord> weak_entities,
                                        const TfidfIndex& index, std::size_t k) {
    if (index.num_docs() == 0) throw EmptyIndex();
    std::set<std::string> unique;
    for (const auto& entity : weak_entities) {
        std::string query;
        for (const auto& pair : entity.qa_pairs) {
            if (!query.empty()) query.push_back(' ');
            query += pair.question;
        }
        if (query.empty()) continue;
        for (auto& id : index.retrieve(query, k)) unique.insert(std::move(id));
    }
    return {unique.begin(), unique.end()};
}

std::vector<ProbeRound> run_probe_loop(const ProbeWorld& world, const TfidfIndex& index,
                                       std::span<const std::string> templates,
                                       const ProbeConfig& config) {
    std::vector<ProbeRound> rounds;
    for (int r = 1; r <= config.max_rounds; ++r) {
        ProbeRound round;
        round.round = r;
        round.epsilon = config.epsilon;

        auto entities = world.sample_entities(r);
        const auto round_seed = hashing::mix(config.seed, static_cast<std::uint64_t>(r));
        for (auto& entity : entities) {
            if (entity.qa_pairs.empty()) {
                entity.qa_pairs =
                    synthesize_qa(entity, world.generator(), templates,
                                  config.questions_per_entity,
                                  hashing::mix(round_seed, hashing::hash64(entity.name)));
            }
            entity.score = score_entity(entity, world.model_under_test(), world.judge(),
                                        config.answer_tokens);
            round.entity_scores.emplace_back(entity.name, *entity.score);
        }
        double mean = 0.0;
        for (const auto& e : entities) mean += *e.score;
        if (!entities.empty()) mean /= static_cast<double>(entities.size());
        round.mean_score_before = mean;

        round.weak = select_weak(entities, config.epsilon);

        std::vector<EntityRecord> weak_records;
        for (const auto& e : entities) {
            if (std::find(round.weak.begin(), round.weak.end(), e.name) != round.weak.end())
                weak_records.push_back(e);
        }
        if (!weak_records.empty()) {
            round.retrieved = tfidf_retrieve(weak_records, index, config.top_k);
            if (world.train) world.train(round.weak, round.retrieved);
        }

        // Re-score the same sample to measure the round's training effect.
        double mean_after = 0.0;
        for (auto& entity : entities) {
            entity.score = score_entity(entity, world.model_under_test(), world.judge(),
                                        config.answer_tokens);
            mean_after += *entity.score;
        }
        if (!entities.empty()) mean_after /= static_cast<double>(entities.size());
        round.mean_score_after = mean_after;

        const bool no_weak = round.weak.empty();
        const bool stalled = (round.mean_score_after - round.mean_score_before) < config.stop_tol;
        if (world.on_round) world.on_round(round);
        rounds.push_back(std::move(round));
        if (no_weak || stalled) break;
    }
    return rounds;
}

RemedialSplit remedial_mix(std::uint64_t zh_budget, std::uint64_t en_budget,
                           const RemedialMixPolicy& policy) {
    if (policy.zh_fraction < 0 || policy.zh_fraction > 1 || policy.en_fraction < 0 ||
        policy.en_fraction > 1) {
        throw ConfigInvalid("remedial_fraction", "fractions must be within [0, 1]");
    }
    RemedialSplit split;
    split.zh_remedial = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(zh_budget) * policy.zh_fraction));
    split.zh_standard = zh_budget - split.zh_remedial;
    split.en_remedial = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(en_budget) * policy.en_fraction));
    split.en_standard = en_budget - split.en_remedial;
    return split;
}

}  // namespace curator::longtail
