#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/model.hpp"
#include "curator/tokenizer.hpp"

namespace curator::sft {

enum class Role { user, assistant };

struct Turn {
    Role role = Role::user;
    std::string text;
};

struct Instruction {
    std::string id;
    std::vector<Turn> turns;  // alternating roles, starting with user
    std::string source_tag;
    bool force_complex = false;
    std::map<std::string, std::string> meta;  // provenance chain, topic, ...

    void validate() const;  // throws on empty / non-alternating turns
    std::size_t user_turn_count() const;
    std::string user_text() const;  // user turns joined with newlines
};

// The three synthesis prompts, keyed {merge, multiturn, enhance}; the
// multiturn prompt carries a {topic} slot.
struct PromptSet {
    std::string merge;
    std::string multiturn;
    std::string enhance;

    static PromptSet load(const std::filesystem::path& path);
};

std::vector<std::string> load_topics(const std::filesystem::path& path);

// Greedy max-similarity matching over tf-idf cosine; every instruction joins
// at most one pair, pairs below the floor are dropped.
std::vector<std::pair<std::size_t, std::size_t>> select_similar_pairs(
    std::span<const Instruction> instructions, double similarity_floor);

Instruction merge_instructions(const Instruction& a, const Instruction& b,
                               const model::ModelClient& generator, const PromptSet& prompts);

Instruction to_multiturn(const Instruction& instr, std::span<const std::string> topics,
                         std::uint64_t seed, const model::ModelClient& generator,
                         const PromptSet& prompts);

// Rewrites the final user turn and regenerates its response; rejects
// rewrites shorter than the original question.
Instruction enhance_complexity(const Instruction& instr, const model::ModelClient& generator,
                               const PromptSet& prompts);

struct ComplexityScore {
    double turn_count = 0;     // user turns
    double length_tokens = 0;  // tokens over user turns
    double loss = 0;           // mean NLL per assistant token, >= 0
    double comp = 0;
    std::array<double, 3> lambdas{1.0, 0.01, 1.0};
};

ComplexityScore comp_score(const Instruction& instr, const model::ModelClient& scorer,
                           const std::array<double, 3>& lambdas,
                           const tokenizer::TokenizerSpec& spec);

struct CurriculumItem {
    Instruction instruction;
    std::optional<double> comp;
};

struct CurriculumSplit {
    std::vector<CurriculumItem> simple;   // trained first
    std::vector<CurriculumItem> complex;  // trained second
    double threshold = 0;
    double quantile = 0.5;
};

// threshold = q-quantile of the comp values (index floor(q*n), clamped)
// unless given explicitly; simple = {comp < threshold, not forced}.
CurriculumSplit split_curriculum(std::span<const CurriculumItem> items,
                                 std::optional<double> explicit_threshold,
                                 double quantile = 0.5);

// Instruction stream codec: document records whose meta carries the turns.
Document to_document(const Instruction& instr);
Instruction instruction_from_document(const Document& doc);

}  // namespace curator::sft
