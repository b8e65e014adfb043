#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "curator/align.hpp"
#include "curator/dedup.hpp"
#include "curator/filters.hpp"
#include "curator/longtail.hpp"

namespace curator::config {

struct ModelConfig {
    int order = 3;
    double smoothing = 0.1;
    double judge_f1_cut = 0.5;
    std::string provider_command;            // empty -> builtin models
    std::string cache_dir;                   // provider reply cache
    long long timeout_ms = 30000;
};

struct MixtureConfig {
    bool use_separator = true;
    std::uint32_t separator_token = 0;
};

struct TokenizerConfig {
    std::string extension_unit = "subword";  // or "whole_word"
    std::size_t pad_to = 0;                  // 0 -> no padding
};

struct SftConfig {
    double lambda_turn = 1.0;
    double lambda_length = 0.01;
    double lambda_loss = 1.0;
    double quantile = 0.5;
    double similarity_floor = 0.5;
};

struct AlignConfig {
    align::RoundsConfig rounds;
    long long min_gap = 2;
};

struct LongtailConfig {
    longtail::ProbeConfig probe;
    longtail::EntityListOptions entities;
    std::uint64_t min_cooccur = 2;
    longtail::RemedialMixPolicy remedial;
};

// One config file with per-module sections; flags override file values;
// unknown keys are rejected so typos cannot silently fall back to defaults.
struct PipelineConfig {
    std::uint64_t seed = 0;
    int workers = 1;
    std::string run_id = "run";

    filters::RuleConfig filters;
    dedup::LshParams dedup;
    MixtureConfig mixture;
    TokenizerConfig tokenizer;
    ModelConfig model;
    LongtailConfig longtail;
    SftConfig sft;
    AlignConfig align;

    static PipelineConfig load(const std::filesystem::path& path);
    void apply(const nlohmann::json& overlay);  // throws ConfigInvalid on unknown keys
    nlohmann::json to_json() const;             // canonical form, stable key order
    std::string digest() const;                 // changes iff any effective value changes
    void validate() const;
};

}  // namespace curator::config
