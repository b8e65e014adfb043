#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/model.hpp"

namespace curator::align {

struct PreferencePair {
    std::string id;
    std::string prompt;
    std::string chosen;    // y+
    std::string rejected;  // y-
    std::optional<long long> votes_chosen;
    std::optional<long long> votes_rejected;

    // sum log pi(y|p) for (policy, reference) x (chosen, rejected); all four
    // must be present before the reward is computed and stay on the pair for
    // audit.
    std::optional<double> lp_policy_chosen;
    std::optional<double> lp_policy_rejected;
    std::optional<double> lp_ref_chosen;
    std::optional<double> lp_ref_rejected;
    std::optional<double> reward;

    void validate() const;  // chosen != rejected
    double recompute_reward() const;
};

// Drops pairs whose vote gap (chosen - rejected) is below min_gap; pairs
// without vote counts pass through unchanged.
std::vector<PreferencePair> filter_by_agreement(std::span<const PreferencePair> pairs,
                                                long long min_gap);

// R = [log pi(y+) - log pi_o(y+)] - [log pi(y-) - log pi_o(y-)], components
// stored on the pair.
double dpo_reward(PreferencePair& pair, const model::ModelClient& policy,
                  const model::ModelClient& reference);

// Toy softmax policy over a small response vocabulary; exact gradients for
// verifying the DPO objective.
struct ToyPolicy {
    std::vector<double> logits;

    std::vector<double> log_probs() const;
    double log_prob(std::size_t index) const;
};

struct ToyPair {
    std::size_t chosen = 0;
    std::size_t rejected = 0;
};

struct LossGrad {
    double loss = 0;                // -mean log sigmoid(beta * R)
    std::vector<double> gradient;   // d loss / d policy logits
};

LossGrad dpo_loss_and_grad(std::span<const ToyPair> pairs, const ToyPolicy& policy,
                           const ToyPolicy& reference, double beta);

// Central finite differences over the policy logits; the built-in
// verification mode for the analytic gradient.
std::vector<double> dpo_grad_finite_diff(std::span<const ToyPair> pairs, const ToyPolicy& policy,
                                         const ToyPolicy& reference, double beta,
                                         double step = 1e-5);

// retained = { pair : R < delta }, strict.
std::vector<PreferencePair> select_hard(std::span<const PreferencePair> pairs, double delta);

struct RoundReport {
    int round = 1;
    double delta = 0;
    std::size_t evaluated = 0;
    std::size_t retained = 0;
    std::vector<double> reward_deciles;  // 0%, 10%, ..., 100%
    std::vector<std::string> retained_ids;
};

struct RoundsConfig {
    double delta0 = 1.0;
    double decay = 0.25;  // delta_{t+1} = delta_t - |delta0| * decay
    double beta = 0.1;
    std::size_t min_dataset_size = 8;
};

// Round t scores the current working set under snapshot t against the fixed
// reference, keeps the hard pairs, and passes them to the next round; stops
// when the retained set is too small or snapshots run out.
std::vector<RoundReport> run_alignment_rounds(std::vector<PreferencePair> pairs,
                                              const model::ModelClient& reference,
                                              std::span<const model::ModelClient> snapshots,
                                              const RoundsConfig& config);

// Preference stream codec (prompt/chosen/rejected/votes records).
nlohmann::json to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const nlohmann::json& record);
std::vector<PreferencePair> read_pair_stream(const std::filesystem::path& path);
void write_pair_stream(std::span<const PreferencePair> pairs, const std::filesystem::path& path);

}  // namespace curator::align
