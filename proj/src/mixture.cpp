#include "curator/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "curator/hashing.hpp"

namespace curator::mixture {

MixturePlan build_mixture_plan(std::span<const SourceSpec> specs) {
    if (specs.empty()) throw Error("mixture spec list is empty");
    MixturePlan plan;
    for (const auto& spec : specs) {
        if (!(spec.raw_tokens > 0)) throw Error("non-positive raw size for " + spec.name);
        if (!(spec.epochs > 0)) throw Error("non-positive epoch count for " + spec.name);
        MixtureEntry entry;
        entry.name = spec.name;
        entry.raw_tokens = spec.raw_tokens;
        entry.epochs = spec.epochs;
        entry.weighted_tokens = spec.raw_tokens * spec.epochs;
        plan.entries.push_back(entry);
        plan.total_weighted_tokens += entry.weighted_tokens;
    }
    for (auto& entry : plan.entries) {
        entry.weight = entry.weighted_tokens / plan.total_weighted_tokens;
    }
    return plan;
}

std::vector<SourceSpec> reference_mixture_specs() {
    return {
        {"web", 1220e9, 1},  {"code", 101e9, 1},          {"encyclopedia", 18e9, 3},
        {"academic", 50e9, 1}, {"qa_forum", 26e9, 1},      {"book", 43.75e9, 2},
        {"news", 134e9, 1},  {"legal", 3e9, 1},           {"patent", 2e9, 1},
        {"edu_assessment", 1.25e9, 2},
    };
}

std::vector<StageSettings> reference_stage_settings() {
    return {
        {1, 76, 22, 2, 2048, 600e9, 3e-4, 3e-5, 4e6},
        {2, 90, 10, 0, 4096, 900e9, 2e-5, 2e-5, 4e6},
        {3, 62, 33, 5, 4096, 180e9, 2e-5, 2e-5, 4e6},
    };
}

namespace {

// Largest-remainder apportionment of total over percentage ratios; ties
// broken by larger ratio, then position.
std::array<std::uint64_t, 3> largest_remainder(std::uint64_t total,
                                               const std::array<double, 3>& ratios) {
    std::array<std::uint64_t, 3> out{};
    std::array<double, 3> exact{};
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        exact[i] = static_cast<double>(total) * ratios[i] / 100.0;
        out[i] = static_cast<std::uint64_t>(std::floor(exact[i]));
        assigned += out[i];
    }
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ra = exact[a] - std::floor(exact[a]);
        const double rb = exact[b] - std::floor(exact[b]);
        if (ra != rb) return ra > rb;
        if (ratios[a] != ratios[b]) return ratios[a] > ratios[b];
        return a < b;
    });
    for (std::size_t i = 0; assigned < total; ++i) {
        ++out[order[i % 3]];
        ++assigned;
    }
    return out;
}

}  // namespace

StagePlan plan_stages(std::span<const StageSettings> settings, double scale) {
    if (!(scale > 0)) throw Error("scale must be positive");
    StagePlan plan;
    for (const auto& s : settings) {
        StageBudget budget;
        budget.stage = s.stage;
        budget.context_length = s.context_length;
        budget.total_tokens = static_cast<std::uint64_t>(std::llround(s.token_budget * scale));
        const auto split =
            largest_remainder(budget.total_tokens, {s.ratio_en, s.ratio_zh, s.ratio_ml});
        budget.en_tokens = split[0];
        budget.zh_tokens = split[1];
        budget.ml_tokens = split[2];
        budget.initial_lr = s.initial_lr;
        budget.min_lr = s.min_lr;
        budget.batch_size_tokens = s.batch_size_tokens;
        plan.stages.push_back(budget);
    }
    return plan;
}

std::vector<std::string> sample_schedule(const MixturePlan& plan, std::size_t num_draws,
                                         std::uint64_t seed) {
    if (plan.entries.empty()) throw Error("empty mixture plan");
    if (num_draws < 1) throw Error("num_draws must be >= 1");
    std::vector<double> cumulative;
    cumulative.reserve(plan.entries.size());
    double acc = 0;
    for (const auto& entry : plan.entries) {
        acc += entry.weight;
        cumulative.push_back(acc);
    }
    cumulative.back() = 1.0;  // absorb fp drift

    // Inverse-CDF over mt19937_64 draws keeps the sequence identical across
    // platforms (std::discrete_distribution would not).
    std::mt19937_64 rng(hashing::splitmix64(seed));
    std::vector<std::string> draws;
    draws.reserve(num_draws);
    constexpr double kInv = 1.0 / 9007199254740992.0;  // 2^-53
    for (std::size_t i = 0; i < num_draws; ++i) {
        const double u = static_cast<double>(rng() >> 11) * kInv;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const auto idx = std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
        draws.push_back(plan.entries[idx].name);
    }
    return draws;
}

void LrSchedule::validate() const {
    if (!(min_lr > 0) || min_lr > max_lr) throw Error("require 0 < min_lr <= max_lr");
    if (warmup_steps >= total_steps) throw Error("warmup_steps must be < total_steps");
}

double lr_at(std::uint64_t step, const LrSchedule& sched) {
    sched.validate();
    if (step > sched.total_steps) throw StepOutOfRange(step, sched.total_steps);
    if (sched.min_lr == sched.max_lr) return sched.max_lr;
    if (step < sched.warmup_steps) {
        return sched.max_lr * static_cast<double>(step) /
               static_cast<double>(sched.warmup_steps);
    }
    const double progress = static_cast<double>(step - sched.warmup_steps) /
                            static_cast<double>(sched.total_steps - sched.warmup_steps);
    return sched.min_lr +
           (sched.max_lr - sched.min_lr) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

PackResult pack_stream(std::span<const std::vector<TokenId>> docs, const PackOptions& options) {
    if (options.context_length < 2) throw Error("context_length must be >= 2");
    PackResult result;
    std::vector<TokenId> buffer;
    buffer.reserve(options.context_length * 2);
    bool first = true;
    auto flush = [&] {
        while (buffer.size() >= options.context_length) {
            PackedSample sample;
            sample.source = options.source;
            sample.token_ids.assign(buffer.begin(),
                                    buffer.begin() + static_cast<long>(options.context_length));
            buffer.erase(buffer.begin(),
                         buffer.begin() + static_cast<long>(options.context_length));
            result.samples.push_back(std::move(sample));
        }
    };
    for (const auto& doc : docs) {
        if (!first && options.use_separator) {
            buffer.push_back(options.separator_token);
            ++result.separator_tokens;
        }
        first = false;
        buffer.insert(buffer.end(), doc.begin(), doc.end());
        result.input_tokens += doc.size();
        flush();
    }
    result.dropped_tail = buffer.size();
    return result;
}

nlohmann::json to_json(const MixturePlan& plan) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : plan.entries) {
        entries.push_back({
            {"source", e.name},
            {"raw_tokens", e.raw_tokens},
            {"epochs", e.epochs},
            {"weighted_tokens", e.weighted_tokens},
            {"weight", e.weight},
        });
    }
    return nlohmann::json{{"entries", entries},
                          {"total_weighted_tokens", plan.total_weighted_tokens}};
}

nlohmann::json to_json(const StagePlan& plan) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : plan.stages) {
        stages.push_back({
            {"stage", s.stage},
            {"context_length", s.context_length},
            {"total_tokens", s.total_tokens},
            {"en_tokens", s.en_tokens},
            {"zh_tokens", s.zh_tokens},
            {"ml_tokens", s.ml_tokens},
            {"initial_lr", s.initial_lr},
            {"min_lr", s.min_lr},
            {"batch_size_tokens", s.batch_size_tokens},
            // Optimizer settings recorded for the plan file; training itself
            // is out of scope here.
            {"optimizer",
             {{"name", "AdamW"}, {"beta1", 0.9}, {"beta2", 0.95}, {"weight_decay", 0.1},
              {"grad_clip", 1.0}, {"warmup_fraction", 0.001}}},
        });
    }
    return nlohmann::json{{"stages", stages}};
}

namespace {

std::string format_tokens(double tokens) {
    char buf[64];
    if (tokens >= 1e9) {
        std::snprintf(buf, sizeof(buf), "%.4gB", tokens / 1e9);
    } else if (tokens >= 1e6) {
        std::snprintf(buf, sizeof(buf), "%.4gM", tokens / 1e6);
    } else {
        std::snprintf(buf, sizeof(buf), "%.0f", tokens);
    }
    return buf;
}

}  // namespace

std::string render_mixture_table(const MixturePlan& plan) {
    std::string out = "source           raw        epochs  weighted   weight\n";
    char line[160];
    for (const auto& e : plan.entries) {
        std::snprintf(line, sizeof(line), "%-16s %-10s %-7.4g %-10s %.1f%%\n", e.name.c_str(),
                      format_tokens(e.raw_tokens).c_str(), e.epochs,
                      format_tokens(e.weighted_tokens).c_str(), e.weight * 100.0);
        out += line;
    }
    std::snprintf(line, sizeof(line), "%-16s %-10s %-7s %-10s %s\n", "total", "-", "-",
                  format_tokens(plan.total_weighted_tokens).c_str(), "100.0%");
    out += line;
    return out;
}

std::string render_stage_table(const StagePlan& plan) {
    std::string out = "stage  context  tokens      en          zh          ml          lr\n";
    char line[200];
    for (const auto& s : plan.stages) {
        std::snprintf(line, sizeof(line), "%-6d %-8llu %-11s %-11s %-11s %-11s %g/%g\n", s.stage,
                      static_cast<unsigned long long>(s.context_length),
                      format_tokens(static_cast<double>(s.total_tokens)).c_str(),
                      format_tokens(static_cast<double>(s.en_tokens)).c_str(),
                      format_tokens(static_cast<double>(s.zh_tokens)).c_str(),
                      format_tokens(static_cast<double>(s.ml_tokens)).c_str(), s.initial_lr,
                      s.min_lr);
        out += line;
    }
    return out;
}

}  // namespace curator::mixture
