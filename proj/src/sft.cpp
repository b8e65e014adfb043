#include "curator/sft.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "curator/hashing.hpp"
#include "curator/longtail.hpp"
#include "curator/unicode.hpp"

namespace curator::sft {

void Instruction::validate() const {
    if (turns.empty()) throw Error("instruction \"" + id + "\" has no turns");
    if (turns.front().role != Role::user)
        throw Error("instruction \"" + id + "\" must start with a user turn");
    for (std::size_t i = 1; i < turns.size(); ++i) {
        if (turns[i].role == turns[i - 1].role)
            throw Error("instruction \"" + id + "\" has non-alternating turns");
    }
}

std::size_t Instruction::user_turn_count() const {
    return static_cast<std::size_t>(
        std::count_if(turns.begin(), turns.end(),
                      [](const Turn& t) { return t.role == Role::user; }));
}

std::string Instruction::user_text() const {
    std::string out;
    for (const auto& turn : turns) {
        if (turn.role != Role::user) continue;
        if (!out.empty()) out.push_back('\n');
        out += turn.text;
    }
    return out;
}

PromptSet PromptSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open prompts file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoFailure("cannot parse prompts file: " + std::string(e.what()));
    }
    PromptSet prompts;
    prompts.merge = j.at("merge").get<std::string>();
    prompts.multiturn = j.at("multiturn").get<std::string>();
    prompts.enhance = j.at("enhance").get<std::string>();
    return prompts;
}

std::vector<std::string> load_topics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open topics file: " + path.string());
    std::vector<std::string> topics;
    std::string line;
    while (std::getline(in, line)) {
        const auto trimmed = uni::trim(line);
        if (!trimmed.empty()) topics.push_back(trimmed);
    }
    return topics;
}

std::vector<std::pair<std::size_t, std::size_t>> select_similar_pairs(
    std::span<const Instruction> instructions, double similarity_floor) {
    if (instructions.size() < 2) return {};
    std::vector<Document> docs;
    docs.reserve(instructions.size());
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        Document doc;
        doc.id = std::to_string(i);
        doc.text = instructions[i].user_text();
        docs.push_back(std::move(doc));
    }
    const auto index = longtail::TfidfIndex::build(docs);

    struct Candidate {
        double similarity;
        std::size_t a, b;
    };
    std::vector<Candidate> candidates;
    for (std::size_t a = 0; a < instructions.size(); ++a) {
        for (std::size_t b = a + 1; b < instructions.size(); ++b) {
            const double sim = index.doc_cosine(a, b);
            if (sim >= similarity_floor) candidates.push_back({sim, a, b});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        if (x.similarity != y.similarity) return x.similarity > y.similarity;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });

    std::vector<bool> used(instructions.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& c : candidates) {
        if (used[c.a] || used[c.b]) continue;
        used[c.a] = used[c.b] = true;
        pairs.emplace_back(c.a, c.b);
    }
    return pairs;
}

namespace {

std::string generate_with_retry(const model::ModelClient& generator, const std::string& prompt,
                                std::size_t max_tokens, std::uint64_t seed,
                                const std::string& what) {
    std::string out;
    for (int attempt = 0; attempt < 2; ++attempt) {
        out = generator.generate(prompt, max_tokens, hashing::mix(seed, attempt));
        if (!uni::trim(out).empty()) return out;
    }
    throw GeneratorFailure("empty reply for " + what);
}

std::string ancestry_of(const Instruction& instr) {
    const auto it = instr.meta.find("ancestry");
    return it == instr.meta.end() ? instr.id : it->second;
}

}  // namespace

Instruction merge_instructions(const Instruction& a, const Instruction& b,
                               const model::ModelClient& generator, const PromptSet& prompts) {
    const std::string prompt = prompts.merge + "\nInstruction 1: " + a.user_text() +
                               "\nInstruction 2: " + b.user_text();
    const auto seed = hashing::hash64(a.id + "+" + b.id);
    const auto merged_text = generate_with_retry(generator, prompt, 96, seed,
                                                 "merge of " + a.id + " and " + b.id);
    const auto response = generate_with_retry(generator, merged_text, 96,
                                              hashing::mix(seed, 1), "merged response");
    Instruction merged;
    merged.id = "merged:" + a.id + "+" + b.id;
    merged.source_tag = a.id + "+" + b.id;
    merged.turns = {{Role::user, merged_text}, {Role::assistant, response}};
    merged.meta["ancestry"] = ancestry_of(a) + "," + ancestry_of(b);
    merged.meta["stage"] = "merge";
    return merged;
}

Instruction to_multiturn(const Instruction& instr, std::span<const std::string> topics,
                         std::uint64_t seed, const model::ModelClient& generator,
                         const PromptSet& prompts) {
    if (topics.empty()) throw Error("topics list is empty");
    std::mt19937_64 rng(hashing::splitmix64(seed));
    const auto& topic = topics[rng() % topics.size()];

    std::string context;
    for (const auto& turn : instr.turns) {
        context += (turn.role == Role::user ? "User: " : "Assistant: ") + turn.text + "\n";
    }
    std::string prompt = prompts.multiturn;
    const auto slot = prompt.find("{topic}");
    if (slot != std::string::npos) prompt.replace(slot, 7, topic);
    prompt += "\n" + context;

    const auto question =
        generate_with_retry(generator, prompt, 64, seed, "next-turn question");
    const auto answer = generate_with_retry(generator, context + "User: " + question, 96,
                                            hashing::mix(seed, 1), "next-turn answer");

    Instruction out = instr;
    out.turns.push_back({Role::user, question});
    out.turns.push_back({Role::assistant, answer});
    out.meta["topic"] = topic;
    out.meta["ancestry"] = ancestry_of(instr);
    out.meta["stage"] = "multiturn";
    return out;
}

Instruction enhance_complexity(const Instruction& instr, const model::ModelClient& generator,
                               const PromptSet& prompts) {
    std::size_t last_user = instr.turns.size();
    for (std::size_t i = instr.turns.size(); i-- > 0;) {
        if (instr.turns[i].role == Role::user) {
            last_user = i;
            break;
        }
    }
    if (last_user == instr.turns.size()) throw Error("instruction has no user turn");
    const auto& question = instr.turns[last_user].text;
    const auto seed = hashing::hash64(instr.id + ":enhance");

    const auto rewritten = generate_with_retry(generator, prompts.enhance + "\n" + question, 96,
                                               seed, "enhanced question");
    // Stand-in quality gate: an enhancement is not allowed to shrink the
    // question.
    if (uni::codepoint_count(rewritten) < uni::codepoint_count(question))
        throw QualityRejected("enhanced question shorter than the original");

    Instruction out = instr;
    out.turns[last_user].text = rewritten;
    if (last_user + 1 < out.turns.size() && out.turns[last_user + 1].role == Role::assistant) {
        out.turns[last_user + 1].text = generate_with_retry(
            generator, rewritten, 96, hashing::mix(seed, 1), "enhanced response");
    }
    out.meta["ancestry"] = ancestry_of(instr);
    out.meta["stage"] = "enhance";
    return out;
}

ComplexityScore comp_score(const Instruction& instr, const model::ModelClient& scorer,
                           const std::array<double, 3>& lambdas,
                           const tokenizer::TokenizerSpec& spec) {
    instr.validate();
    ComplexityScore score;
    score.lambdas = lambdas;
    score.turn_count = static_cast<double>(instr.user_turn_count());

    std::uint64_t user_tokens = 0;
    for (const auto& turn : instr.turns) {
        if (turn.role == Role::user) user_tokens += tokenizer::tokenize(spec, turn.text).size();
    }
    score.length_tokens = static_cast<double>(user_tokens);

    // Length-normalized NLL of assistant turns given their full context.
    double total_logprob = 0.0;
    std::size_t total_target_tokens = 0;
    std::string context;
    bool has_assistant = false;
    for (const auto& turn : instr.turns) {
        if (turn.role == Role::assistant) {
            has_assistant = true;
            std::size_t target_tokens = 0;
            try {
                total_logprob += scorer.text_logprob(context, turn.text, &target_tokens);
            } catch (const Error& e) {
                throw ScorerFailure(e.what());
            }
            total_target_tokens += target_tokens;
        }
        context += turn.text + "\n";
    }
    if (!has_assistant) throw Error("instruction \"" + instr.id + "\" has no assistant turn");
    score.loss = total_target_tokens == 0
                     ? 0.0
                     : -total_logprob / static_cast<double>(total_target_tokens);

    score.comp = lambdas[0] * score.turn_count + lambdas[1] * score.length_tokens +
                 lambdas[2] * score.loss;
    return score;
}

CurriculumSplit split_curriculum(std::span<const CurriculumItem> items,
                                 std::optional<double> explicit_threshold, double quantile) {
    CurriculumSplit split;
    split.quantile = quantile;

    std::vector<double> comps;
    for (const auto& item : items) {
        if (!item.comp && !item.instruction.force_complex)
            throw Error("instruction \"" + item.instruction.id + "\" is neither scored nor forced");
        if (item.comp) comps.push_back(*item.comp);
    }
    if (explicit_threshold) {
        split.threshold = *explicit_threshold;
    } else if (!comps.empty()) {
        std::sort(comps.begin(), comps.end());
        auto index = static_cast<std::size_t>(
            std::floor(quantile * static_cast<double>(comps.size())));
        index = std::min(index, comps.size() - 1);
        split.threshold = comps[index];
    }

    for (const auto& item : items) {
        const bool simple =
            !item.instruction.force_complex && item.comp && *item.comp < split.threshold;
        (simple ? split.simple : split.complex).push_back(item);
    }
    return split;
}

Document to_document(const Instruction& instr) {
    Document doc;
    doc.id = instr.id;
    doc.text = instr.user_text();
    doc.source = SourceKind::qa_forum;
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& turn : instr.turns) {
        turns.push_back({{"role", turn.role == Role::user ? "user" : "assistant"},
                         {"text", turn.text}});
    }
    doc.meta["turns"] = turns;
    doc.meta["source_tag"] = instr.source_tag;
    doc.meta["force_complex"] = instr.force_complex;
    for (const auto& [key, value] : instr.meta) doc.meta["x_" + key] = value;
    return doc;
}

Instruction instruction_from_document(const Document& doc) {
    Instruction instr;
    instr.id = doc.id;
    if (!doc.meta.contains("turns")) throw MissingMeta("turns");
    for (const auto& turn : doc.meta["turns"]) {
        const auto role = turn.at("role").get<std::string>();
        instr.turns.push_back({role == "user" ? Role::user : Role::assistant,
                               turn.at("text").get<std::string>()});
    }
    instr.source_tag = doc.meta.value("source_tag", std::string{});
    instr.force_complex = doc.meta.value("force_complex", false);
    for (const auto& [key, value] : doc.meta.items()) {
        if (key.rfind("x_", 0) == 0 && value.is_string())
            instr.meta[key.substr(2)] = value.get<std::string>();
    }
    instr.validate();
    return instr;
}

}  // namespace curator::sft
