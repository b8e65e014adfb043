#include "curator/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace curator::align {

void PreferencePair::validate() const {
    if (chosen == rejected)
        throw Error("pair \"" + id + "\" has identical chosen and rejected responses");
}

double PreferencePair::recompute_reward() const {
    if (!lp_policy_chosen || !lp_policy_rejected || !lp_ref_chosen || !lp_ref_rejected)
        throw MissingReward(id);
    return (*lp_policy_chosen - *lp_ref_chosen) - (*lp_policy_rejected - *lp_ref_rejected);
}

std::vector<PreferencePair> filter_by_agreement(std::span<const PreferencePair> pairs,
                                                long long min_gap) {
    std::vector<PreferencePair> kept;
    for (const auto& pair : pairs) {
        if (pair.votes_chosen && pair.votes_rejected) {
            if (*pair.votes_chosen - *pair.votes_rejected < min_gap) continue;
        }
        kept.push_back(pair);
    }
    return kept;
}

double dpo_reward(PreferencePair& pair, const model::ModelClient& policy,
                  const model::ModelClient& reference) {
    pair.validate();
    // Both scorers must segment the texts identically or the log-probs are
    // not comparable.
    for (const auto* text : {&pair.prompt, &pair.chosen, &pair.rejected}) {
        if (policy.encode_text(*text).size() != reference.encode_text(*text).size())
            throw TokenizationMismatch();
    }
    try {
        pair.lp_policy_chosen = policy.text_logprob(pair.prompt, pair.chosen);
        pair.lp_policy_rejected = policy.text_logprob(pair.prompt, pair.rejected);
        pair.lp_ref_chosen = reference.text_logprob(pair.prompt, pair.chosen);
        pair.lp_ref_rejected = reference.text_logprob(pair.prompt, pair.rejected);
    } catch (const Error& e) {
        throw ScorerFailure(e.what());
    }
    pair.reward = pair.recompute_reward();
    return *pair.reward;
}

std::vector<double> ToyPolicy::log_probs() const {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - max_logit);
    const double log_z = max_logit + std::log(z);
    std::vector<double> out;
    out.reserve(logits.size());
    for (double l : logits) out.push_back(l - log_z);
    return out;
}

double ToyPolicy::log_prob(std::size_t index) const { return log_probs()[index]; }

namespace {

double log_sigmoid(double x) {
    // Stable for both signs.
    if (x >= 0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

LossGrad dpo_loss_and_grad(std::span<const ToyPair> pairs, const ToyPolicy& policy,
                           const ToyPolicy& reference, double beta) {
    if (pairs.empty()) throw Error("no preference pairs");
    if (!(beta > 0) || !std::isfinite(beta)) throw Error("beta must be positive and finite");
    const auto policy_lp = policy.log_probs();
    const auto reference_lp = reference.log_probs();
    if (policy_lp.size() != reference_lp.size())
        throw Error("policy and reference vocabularies differ");

    std::vector<double> probs(policy_lp.size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(policy_lp[i]);

    LossGrad out;
    out.gradient.assign(policy.logits.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (const auto& pair : pairs) {
        if (pair.chosen >= policy_lp.size() || pair.rejected >= policy_lp.size())
            throw Error("toy pair index outside the response vocabulary");
        const double reward = (policy_lp[pair.chosen] - reference_lp[pair.chosen]) -
                              (policy_lp[pair.rejected] - reference_lp[pair.rejected]);
        out.loss += -log_sigmoid(beta * reward) * inv_n;

        // d loss / d z_k = -beta (1 - sigma(beta R)) (d log pi(y+) - d log pi(y-)),
        // with d log pi(y)/d z_k = [k == y] - softmax(z)_k; the softmax terms
        // cancel between the two responses.
        const double factor = -beta * (1.0 - sigmoid(beta * reward)) * inv_n;
        out.gradient[pair.chosen] += factor;
        out.gradient[pair.rejected] -= factor;
    }
    if (!std::isfinite(out.loss)) throw NonFiniteLoss();
    return out;
}

std::vector<double> dpo_grad_finite_diff(std::span<const ToyPair> pairs, const ToyPolicy& policy,
                                         const ToyPolicy& reference, double beta, double step) {
    std::vector<double> grad(policy.logits.size(), 0.0);
    for (std::size_t k = 0; k < policy.logits.size(); ++k) {
        ToyPolicy plus = policy;
        ToyPolicy minus = policy;
        plus.logits[k] += step;
        minus.logits[k] -= step;
        const double f_plus = dpo_loss_and_grad(pairs, plus, reference, beta).loss;
        const double f_minus = dpo_loss_and_grad(pairs, minus, reference, beta).loss;
        grad[k] = (f_plus - f_minus) / (2.0 * step);
    }
    return grad;
}

std::vector<PreferencePair> select_hard(std::span<const PreferencePair> pairs, double delta) {
    std::vector<PreferencePair> retained;
    for (const auto& pair : pairs) {
        if (!pair.reward) throw MissingReward(pair.id);
        if (*pair.reward < delta) retained.push_back(pair);
    }
    return retained;
}

namespace {

std::vector<double> deciles(std::vector<double> values) {
    std::vector<double> out;
    if (values.empty()) return out;
    std::sort(values.begin(), values.end());
    for (int d = 0; d <= 10; ++d) {
        const auto index = std::min(values.size() - 1,
                                    static_cast<std::size_t>(std::floor(
                                        static_cast<double>(d) / 10.0 *
                                        static_cast<double>(values.size()))));
        out.push_back(values[index]);
    }
    return out;
}

}  // namespace

std::vector<RoundReport> run_alignment_rounds(std::vector<PreferencePair> pairs,
                                              const model::ModelClient& reference,
                                              std::span<const model::ModelClient> snapshots,
                                              const RoundsConfig& config) {
    if (!std::isfinite(config.delta0)) throw Error("delta0 must be finite");
    if (!(config.decay > 0) || config.decay >= 1)
        throw Error("decay must be within (0, 1)");

    std::vector<RoundReport> reports;
    double delta = config.delta0;
    for (std::size_t round = 0; round < snapshots.size(); ++round) {
        RoundReport report;
        report.round = static_cast<int>(round) + 1;
        report.delta = delta;
        report.evaluated = pairs.size();

        std::vector<double> rewards;
        rewards.reserve(pairs.size());
        for (auto& pair : pairs) {
            rewards.push_back(dpo_reward(pair, snapshots[round], reference));
        }
        report.reward_deciles = deciles(rewards);

        auto retained = select_hard(pairs, delta);
        report.retained = retained.size();
        for (const auto& pair : retained) report.retained_ids.push_back(pair.id);
        reports.push_back(std::move(report));

        pairs = std::move(retained);
        if (pairs.size() < config.min_dataset_size) break;
        delta -= std::fabs(config.delta0) * config.decay;
    }
    return reports;
}

nlohmann::json to_json(const PreferencePair& pair) {
    nlohmann::json j{{"id", pair.id},
                     {"prompt", pair.prompt},
                     {"chosen", pair.chosen},
                     {"rejected", pair.rejected}};
    if (pair.votes_chosen) j["votes_chosen"] = *pair.votes_chosen;
    if (pair.votes_rejected) j["votes_rejected"] = *pair.votes_rejected;
    if (pair.lp_policy_chosen) j["lp_policy_chosen"] = *pair.lp_policy_chosen;
    if (pair.lp_policy_rejected) j["lp_policy_rejected"] = *pair.lp_policy_rejected;
    if (pair.lp_ref_chosen) j["lp_ref_chosen"] = *pair.lp_ref_chosen;
    if (pair.lp_ref_rejected) j["lp_ref_rejected"] = *pair.lp_ref_rejected;
    if (pair.reward) j["reward"] = *pair.reward;
    return j;
}

PreferencePair pair_from_json(const nlohmann::json& record) {
    PreferencePair pair;
    pair.id = record.at("id").get<std::string>();
    pair.prompt = record.at("prompt").get<std::string>();
    pair.chosen = record.at("chosen").get<std::string>();
    pair.rejected = record.at("rejected").get<std::string>();
    if (record.contains("votes_chosen")) pair.votes_chosen = record["votes_chosen"].get<long long>();
    if (record.contains("votes_rejected"))
        pair.votes_rejected = record["votes_rejected"].get<long long>();
    if (record.contains("reward")) pair.reward = record["reward"].get<double>();
    if (record.contains("lp_policy_chosen"))
        pair.lp_policy_chosen = record["lp_policy_chosen"].get<double>();
    if (record.contains("lp_policy_rejected"))
        pair.lp_policy_rejected = record["lp_policy_rejected"].get<double>();
    if (record.contains("lp_ref_chosen")) pair.lp_ref_chosen = record["lp_ref_chosen"].get<double>();
    if (record.contains("lp_ref_rejected"))
        pair.lp_ref_rejected = record["lp_ref_rejected"].get<double>();
    pair.validate();
    return pair;
}

std::vector<PreferencePair> read_pair_stream(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open preference stream: " + path.string());
    std::vector<PreferencePair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            pairs.push_back(pair_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(line_no, 0, e.what());
        }
    }
    return pairs;
}

void write_pair_stream(std::span<const PreferencePair> pairs,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open preference stream for writing: " + path.string());
    for (const auto& pair : pairs) out << to_json(pair).dump() << '\n';
}

}  // namespace curator::align
