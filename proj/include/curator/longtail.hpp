#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/model.hpp"

namespace curator::longtail {

struct QaPair {
    std::string question;
    std::string answer;
};

struct EntityRecord {
    std::string name;                    // v
    std::string description;            // d_v
    std::uint64_t mention_count = 0;
    std::set<std::string> related;      // V, never contains name
    std::vector<QaPair> qa_pairs;       // M_v = qa_pairs.size()
    std::optional<double> score;        // s_v in [0, 1]
};

struct EntityListOptions {
    std::size_t min_description_chars = 500;  // code points
    std::uint64_t min_mentions = 5;
};

// Harvests entities from encyclopedia docs (title = name, body = d_v) and
// keeps the ones with long enough descriptions that are mentioned often
// enough in the sample corpus.
std::vector<EntityRecord> build_entity_list(std::span<const Document> encyclopedia,
                                            const EntityListOptions& options,
                                            std::span<const Document> mention_sample);

// Names (other than v) that occur in d_v at least min_cooccur times. Matching
// masks longer names first so nested names are not double counted.
std::set<std::string> related_entities(const std::string& name, const std::string& description,
                                       std::span<const std::string> entity_names,
                                       std::uint64_t min_cooccur = 2);

// Question templates with {v} / {u} slots; {u}-templates need a related set.
std::vector<std::string> load_templates(const std::filesystem::path& path);

// Instantiates M questions over v and its related entities and asks the
// generator for reference answers (question paired with d_v).
std::vector<QaPair> synthesize_qa(const EntityRecord& entity, const model::ModelClient& generator,
                                  std::span<const std::string> templates, std::size_t m,
                                  std::uint64_t seed = 0);

// s_v = mean over qa pairs of judge(q, a, model_answer(q)).
double score_entity(const EntityRecord& entity, const model::ModelClient& model_under_test,
                    const model::ModelClient& judge, std::size_t answer_tokens = 32);

// V' = { v : s_v < epsilon }, strict.
std::vector<std::string> select_weak(std::span<const EntityRecord> entities, double epsilon);

class TfidfIndex {
public:
    // tf = raw count / doc length; idf = ln(N / (1 + df)) + 1; cosine.
    static TfidfIndex build(std::span<const Document> docs);

    // Top-k doc ids by cosine similarity, ties by id ascending. Equals
    // exhaustive ranking over all indexed docs by construction.
    std::vector<std::string> retrieve(const std::string& query, std::size_t k) const;
    double cosine(const std::string& query, const std::string& doc_id) const;
    double doc_cosine(std::size_t a, std::size_t b) const;

    std::size_t num_docs() const { return doc_ids_.size(); }

private:
    std::vector<std::string> doc_ids_;
    std::map<std::string, std::uint64_t> doc_frequency_;
    std::vector<std::map<std::string, double>> doc_weights_;  // tf*idf
    std::vector<double> doc_norms_;
    std::map<std::string, std::vector<std::pair<std::size_t, double>>> postings_;

    std::map<std::string, double> query_vector(const std::string& query) const;
    double idf(const std::string& term) const;
};

// Per entity, top-k docs by similarity to the concatenated entity questions;
// union across entities, deduplicated, sorted by id.
std::vector<std::string> tfidf_retrieve(std::span<const EntityRecord> weak_entities,
                                        const TfidfIndex& index, std::size_t k);

struct ProbeRound {
    int round = 1;
    double epsilon = 0.5;
    std::vector<std::pair<std::string, double>> entity_scores;  // (v, s_v) this round
    std::vector<std::string> weak;       // V'
    std::vector<std::string> retrieved;  // D'_pre ids, deduplicated
    double mean_score_before = 0;
    double mean_score_after = 0;
};

struct ProbeConfig {
    double epsilon = 0.5;
    std::size_t top_k = 100;
    int max_rounds = 5;
    double stop_tol = 0.01;  // stop when a round improves mean s_v by less
    std::size_t questions_per_entity = 5;
    std::size_t answer_tokens = 32;
    std::uint64_t seed = 0;
};

struct ProbeWorld {
    // Fresh entity sample for a round (a new entity set is synthesized each
    // iteration).
    std::function<std::vector<EntityRecord>(int round)> sample_entities;
    std::function<const model::ModelClient&()> model_under_test;
    std::function<const model::ModelClient&()> judge;
    std::function<const model::ModelClient&()> generator;
    // Training effect: at desk scale a scripted callback; in production an
    // external training step over the retrieved docs.
    std::function<void(std::span<const std::string> weak,
                       std::span<const std::string> retrieved)>
        train;
    // Invoked after each completed round, so callers can persist partial
    // progress even when a later round fails.
    std::function<void(const ProbeRound&)> on_round;
};

std::vector<ProbeRound> run_probe_loop(const ProbeWorld& world, const TfidfIndex& index,
                                       std::span<const std::string> templates,
                                       const ProbeConfig& config);

// Stage-3 remedial mixing: the configured fraction of each language budget is
// drawn from the retrieved set, the rest from the standard plan.
struct RemedialMixPolicy {
    double zh_fraction = 1.0;
    double en_fraction = 0.5;
};

struct RemedialSplit {
    std::uint64_t zh_remedial = 0, zh_standard = 0;
    std::uint64_t en_remedial = 0, en_standard = 0;
};

RemedialSplit remedial_mix(std::uint64_t zh_budget, std::uint64_t en_budget,
                           const RemedialMixPolicy& policy);

}  // namespace curator::longtail
