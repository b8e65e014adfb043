#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curator/corpus.hpp"

namespace curator::mixture {

struct SourceSpec {
    std::string name;
    double raw_tokens = 0;  // tokens before repetition
    double epochs = 1;      // passes over the source
};

struct MixtureEntry {
    std::string name;
    double raw_tokens = 0;
    double epochs = 1;
    double weighted_tokens = 0;  // raw * epochs, exact
    double weight = 0;           // weighted / total
};

struct MixturePlan {
    std::vector<MixtureEntry> entries;
    double total_weighted_tokens = 0;
};

MixturePlan build_mixture_plan(std::span<const SourceSpec> specs);

// The published mixture rows (raw tokens in billions, epochs).
std::vector<SourceSpec> reference_mixture_specs();

struct StageSettings {
    int stage = 1;
    double ratio_en = 0, ratio_zh = 0, ratio_ml = 0;  // percent, sums to 100
    std::uint64_t context_length = 2048;
    double token_budget = 0;  // tokens at scale 1
    double initial_lr = 0;
    double min_lr = 0;
    double batch_size_tokens = 0;
};

struct StageBudget {
    int stage = 1;
    std::uint64_t context_length = 2048;
    std::uint64_t total_tokens = 0;
    std::uint64_t en_tokens = 0, zh_tokens = 0, ml_tokens = 0;
    double initial_lr = 0, min_lr = 0;
    double batch_size_tokens = 0;
};

struct StagePlan {
    std::vector<StageBudget> stages;
};

// The published three-stage schedule (ratios, context lengths, budgets, LRs).
std::vector<StageSettings> reference_stage_settings();

// Scales stage budgets and splits them per language with largest-remainder
// rounding so the per-language counts sum to the stage total exactly.
StagePlan plan_stages(std::span<const StageSettings> settings, double scale);

// Seeded i.i.d. categorical sampling by plan weight.
std::vector<std::string> sample_schedule(const MixturePlan& plan, std::size_t num_draws,
                                         std::uint64_t seed);

struct LrSchedule {
    double max_lr = 3e-4;
    double min_lr = 3e-5;
    std::uint64_t total_steps = 0;
    std::uint64_t warmup_steps = 0;

    void validate() const;
};

// Linear warmup to max_lr, then cosine decay to min_lr; lr(total) == min_lr
// exactly. Constant when min_lr == max_lr.
double lr_at(std::uint64_t step, const LrSchedule& sched);

using TokenId = std::uint32_t;

struct PackedSample {
    std::vector<TokenId> token_ids;  // exactly the context length
    std::string source;
};

struct PackResult {
    std::vector<PackedSample> samples;
    std::uint64_t input_tokens = 0;
    std::uint64_t separator_tokens = 0;
    std::uint64_t dropped_tail = 0;  // < context_length
};

struct PackOptions {
    std::uint64_t context_length = 2048;
    bool use_separator = true;
    TokenId separator_token = 0;
    std::string source;
};

// Concatenates same-source documents (one separator between them when
// enabled) and slices samples of exactly context_length; the final partial
// chunk is dropped, never padded.
PackResult pack_stream(std::span<const std::vector<TokenId>> docs, const PackOptions& options);

nlohmann::json to_json(const MixturePlan& plan);
nlohmann::json to_json(const StagePlan& plan);
std::string render_mixture_table(const MixturePlan& plan);
std::string render_stage_table(const StagePlan& plan);

}  // namespace curator::mixture
