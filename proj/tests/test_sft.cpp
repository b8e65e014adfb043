#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "curator/longtail.hpp"
#include "curator/sft.hpp"

using namespace curator;
using namespace curator::sft;

namespace {

Instruction single(const std::string& id, const std::string& question,
                   const std::string& answer = "a reply") {
    Instruction instr;
    instr.id = id;
    instr.turns = {{Role::user, question}, {Role::assistant, answer}};
    instr.source_tag = id;
    return instr;
}

PromptSet test_prompts() {
    PromptSet prompts;
    prompts.merge = "MERGE-PROMPT";
    prompts.multiturn = "NEXT-TURN-PROMPT topic={topic}";
    prompts.enhance = "ENHANCE-PROMPT";
    return prompts;
}

// One scripted generator covering all three synthesis stages.
model::ModelClient synth_generator() {
    return model::ModelClient::scripted(
        [](const nlohmann::json& request) -> nlohmann::json {
            if (request.at("op") != "generate")
                return {{"ok", false}, {"error", "unsupported"}};
            const auto prompt = request.at("payload").at("prompt").get<std::string>();
            std::string reply;
            if (prompt.rfind("MERGE-PROMPT", 0) == 0) {
                reply = "MERGED(" + prompt.substr(prompt.find("Instruction 1: ")) + ")";
            } else if (prompt.rfind("NEXT-TURN-PROMPT", 0) == 0) {
                reply = "FOLLOWUP about " +
                        prompt.substr(prompt.find("topic=") + 6,
                                      prompt.find('\n') - prompt.find("topic=") - 6);
            } else if (prompt.rfind("ENHANCE-PROMPT", 0) == 0) {
                reply = "HARDER(" + prompt.substr(prompt.find('\n') + 1) + ")";
            } else {
                reply = "RESPONSE to " + prompt.substr(0, 24);
            }
            return {{"ok", true}, {"result", {{"text", reply}}}};
        },
        "synth");
}

}  // namespace

TEST_CASE("instruction validation") {
    Instruction instr = single("i1", "q");
    CHECK_NOTHROW(instr.validate());
    instr.turns.push_back({Role::assistant, "again"});
    CHECK_THROWS(instr.validate());
    Instruction empty;
    empty.id = "e";
    CHECK_THROWS(empty.validate());
}

TEST_CASE("similar pair selection") {
    SUBCASE("near-identical instructions pair up") {
        std::vector<Instruction> instrs = {
            single("a", "please sort this list of numbers quickly"),
            single("b", "please sort this list of numbers fast"),
            single("c", "write a poem about dawn light"),
        };
        const auto pairs = select_similar_pairs(instrs, 0.5);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0] == std::pair<std::size_t, std::size_t>{0, 1});
    }
    SUBCASE("disjoint vocabularies produce no pairs") {
        std::vector<Instruction> instrs = {
            single("a", "alpha beta gamma"),
            single("b", "delta epsilon zeta"),
        };
        CHECK(select_similar_pairs(instrs, 0.1).empty());
    }
    SUBCASE("greedy matching equals the brute-force oracle on four instructions") {
        std::vector<Instruction> instrs = {
            single("a", "sort the numbers ascending order"),
            single("b", "sort the numbers descending order"),
            single("c", "sort all the numbers ascending"),
            single("d", "bake a cake with chocolate"),
        };
        // Oracle: enumerate all pairings greedily by cosine computed through
        // the same public index type used directly.
        std::vector<Document> docs;
        for (std::size_t i = 0; i < instrs.size(); ++i) {
            Document d;
            d.id = std::to_string(i);
            d.text = instrs[i].user_text();
            docs.push_back(d);
        }
        const auto index = longtail::TfidfIndex::build(docs);
        struct Edge {
            double sim;
            std::size_t a, b;
        };
        std::vector<Edge> edges;
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = a + 1; b < 4; ++b) {
                const auto sim = index.doc_cosine(a, b);
                if (sim >= 0.3) edges.push_back({sim, a, b});
            }
        std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
            if (x.sim != y.sim) return x.sim > y.sim;
            return std::tie(x.a, x.b) < std::tie(y.a, y.b);
        });
        std::vector<bool> used(4, false);
        std::vector<std::pair<std::size_t, std::size_t>> expected;
        for (const auto& e : edges) {
            if (used[e.a] || used[e.b]) continue;
            used[e.a] = used[e.b] = true;
            expected.emplace_back(e.a, e.b);
        }
        CHECK(select_similar_pairs(instrs, 0.3) == expected);
    }
}

TEST_CASE("instruction merging via the generator") {
    const auto prompts = test_prompts();
    const auto generator = synth_generator();
    const auto a = single("src1", "sort the numbers ascending");
    const auto b = single("src2", "sort the numbers descending");

    const auto merged = merge_instructions(a, b, generator, prompts);
    REQUIRE(merged.turns.size() == 2);
    CHECK(merged.turns[0].role == Role::user);
    CHECK(merged.turns[0].text.rfind("MERGED(", 0) == 0);
    CHECK(merged.turns[1].role == Role::assistant);
    CHECK(merged.source_tag == "src1+src2");
    CHECK(merged.meta.at("ancestry") == "src1,src2");

    SUBCASE("empty generator replies raise GeneratorFailure after one retry") {
        int calls = 0;
        auto empty_gen = model::ModelClient::scripted(
            [&calls](const nlohmann::json&) -> nlohmann::json {
                ++calls;
                return {{"ok", true}, {"result", {{"text", ""}}}};
            },
            "empty");
        CHECK_THROWS_AS(merge_instructions(a, b, empty_gen, prompts), GeneratorFailure);
        CHECK(calls == 2);  // first try plus one requeue
    }
}

TEST_CASE("multi-turn conversion") {
    const auto prompts = test_prompts();
    const auto generator = synth_generator();
    std::vector<std::string> topics = {"modern history", "cooking", "astronomy"};
    const auto base = single("m1", "describe a sorting algorithm");

    SUBCASE("fixed seed picks the same topic; turn count grows by two") {
        const auto once = to_multiturn(base, topics, 99, generator, prompts);
        const auto again = to_multiturn(base, topics, 99, generator, prompts);
        CHECK(once.meta.at("topic") == again.meta.at("topic"));
        CHECK(once.turns.size() == base.turns.size() + 2);
        CHECK(once.turns[2].role == Role::user);
        CHECK(once.turns[3].role == Role::assistant);
    }
    SUBCASE("the chosen topic reaches the generator prompt verbatim") {
        std::vector<std::string> only = {"modern history"};
        const auto converted = to_multiturn(base, only, 1, generator, prompts);
        CHECK(converted.meta.at("topic") == "modern history");
        CHECK(converted.turns[2].text.find("modern history") != std::string::npos);
    }
    SUBCASE("empty topics list is an error") {
        CHECK_THROWS(to_multiturn(base, {}, 1, generator, prompts));
    }
}

TEST_CASE("complexity enhancement") {
    const auto prompts = test_prompts();
    const auto generator = synth_generator();
    const auto base = single("e1", "what is two plus two");

    SUBCASE("final user turn is rewritten, turn count unchanged") {
        const auto enhanced = enhance_complexity(base, generator, prompts);
        CHECK(enhanced.turns.size() == base.turns.size());
        CHECK(enhanced.turns[0].text.rfind("HARDER(", 0) == 0);
        CHECK(enhanced.meta.at("stage") == "enhance");
    }
    SUBCASE("a one-character rewrite is rejected by the quality gate") {
        auto tiny_gen = model::ModelClient::scripted(
            [](const nlohmann::json&) -> nlohmann::json {
                return {{"ok", true}, {"result", {{"text", "x"}}}};
            },
            "tiny");
        CHECK_THROWS_AS(enhance_complexity(base, tiny_gen, prompts), QualityRejected);
    }
    SUBCASE("provenance chain survives merge, multiturn, enhance") {
        const auto a = single("p1", "sort the numbers ascending");
        const auto b = single("p2", "sort the numbers descending");
        const auto merged = merge_instructions(a, b, generator, prompts);
        const auto multi =
            to_multiturn(merged, std::vector<std::string>{"modern history"}, 3, generator,
                         prompts);
        const auto enhanced = enhance_complexity(multi, generator, prompts);
        CHECK(enhanced.meta.at("ancestry") == "p1,p2");
    }
}

namespace {

// Scorer stub: every target token costs exactly `nll` nats.
model::ModelClient constant_scorer(double nll) {
    return model::ModelClient::scripted(
        [nll](const nlohmann::json& request) -> nlohmann::json {
            const auto& payload = request.at("payload");
            if (request.at("op") == "encode") {
                // Whitespace token count, ids are positions.
                const auto text = payload.at("text").get<std::string>();
                std::vector<long long> ids;
                bool in_token = false;
                long long next = 0;
                for (char c : text) {
                    if (std::isspace(static_cast<unsigned char>(c))) {
                        in_token = false;
                    } else if (!in_token) {
                        ids.push_back(next++);
                        in_token = true;
                    }
                }
                return {{"ok", true}, {"result", {{"tokens", ids}}}};
            }
            if (request.at("op") == "sequence_logprob") {
                const auto n = payload.at("tokens").size();
                return {{"ok", true},
                        {"result", {{"logprobs", std::vector<double>(n, -nll)}}}};
            }
            return {{"ok", false}, {"error", "unsupported"}};
        },
        "const" + std::to_string(nll));
}

tokenizer::TokenizerSpec char_spec_for(const Instruction& instr) {
    std::vector<std::string> texts;
    for (const auto& turn : instr.turns) texts.push_back(turn.text);
    return tokenizer::char_base_spec(texts);
}

}  // namespace

TEST_CASE("complexity score formula") {
    SUBCASE("3 turns, 120 tokens, loss 2.5 with lambda (1, 0.01, 1) gives 6.7") {
        Instruction instr;
        instr.id = "f1";
        // Three user turns of 40 single-char tokens each under a char-level
        // tokenizer spec; the stub scorer prices every target token at 2.5.
        const std::string forty(40, 'a');
        instr.turns = {{Role::user, forty},     {Role::assistant, "r one"},
                       {Role::user, forty},     {Role::assistant, "r two"},
                       {Role::user, forty},     {Role::assistant, "r three"}};
        const auto spec = char_spec_for(instr);
        REQUIRE(tokenizer::tokenize(spec, forty).size() == 40);

        const auto score =
            comp_score(instr, constant_scorer(2.5), {1.0, 0.01, 1.0}, spec);
        CHECK(score.turn_count == 3);
        CHECK(score.length_tokens == 120);
        CHECK(score.loss == doctest::Approx(2.5));
        CHECK(score.comp == doctest::Approx(3.0 + 1.2 + 2.5));
    }
    SUBCASE("lambda (0,0,1) projects the loss") {
        auto instr = single("f2", "question text", "answer text");
        const auto spec = char_spec_for(instr);
        const auto score = comp_score(instr, constant_scorer(1.75), {0, 0, 1}, spec);
        CHECK(score.comp == doctest::Approx(1.75));
    }
    SUBCASE("uniform scorer gives loss log V in closed form") {
        auto instr = single("f3", "question here", "four token answer text");
        const auto spec = char_spec_for(instr);
        const auto scorer =
            model::ModelClient::builtin(model::TokenNgramModel::uniform(16), "u16");
        const auto score = comp_score(instr, scorer, {0, 0, 1}, spec);
        CHECK(score.loss == doctest::Approx(std::log(16.0)));
    }
    SUBCASE("monotone in each component with positive lambdas") {
        auto base = single("f4", "short question", "reply");
        const auto spec = char_spec_for(base);
        const auto s0 = comp_score(base, constant_scorer(1.0), {1, 0.01, 1}, spec);

        auto more_turns = base;
        more_turns.turns.push_back({Role::user, "more"});
        more_turns.turns.push_back({Role::assistant, "ok"});
        const auto spec2 = char_spec_for(more_turns);
        const auto s1 = comp_score(more_turns, constant_scorer(1.0), {1, 0.01, 1}, spec2);
        CHECK(s1.comp > s0.comp);

        const auto s2 = comp_score(base, constant_scorer(2.0), {1, 0.01, 1}, spec);
        CHECK(s2.comp > s0.comp);
    }
}

TEST_CASE("curriculum split") {
    auto item = [](const std::string& id, double comp, bool force = false) {
        CurriculumItem it;
        it.instruction = single(id, "q " + id);
        it.instruction.force_complex = force;
        it.comp = comp;
        return it;
    };

    SUBCASE("quantile 0.5 over {1,2,3,4} splits at the upper median") {
        std::vector<CurriculumItem> items = {item("a", 1), item("b", 2), item("c", 3),
                                             item("d", 4)};
        const auto split = split_curriculum(items, std::nullopt, 0.5);
        CHECK(split.threshold == 3);
        REQUIRE(split.simple.size() == 2);
        CHECK(split.simple[0].instruction.id == "a");
        CHECK(split.simple[1].instruction.id == "b");
        CHECK(split.complex.size() == 2);
    }
    SUBCASE("forced item with the lowest score is still complex") {
        std::vector<CurriculumItem> items = {item("a", 0.1, true), item("b", 2), item("c", 3),
                                             item("d", 4)};
        const auto split = split_curriculum(items, std::nullopt, 0.5);
        for (const auto& it : split.simple) CHECK_FALSE(it.instruction.force_complex);
        bool forced_in_complex = false;
        for (const auto& it : split.complex)
            if (it.instruction.id == "a") forced_in_complex = true;
        CHECK(forced_in_complex);
    }
    SUBCASE("a single item lands in the complex set") {
        std::vector<CurriculumItem> items = {item("only", 5)};
        const auto split = split_curriculum(items, std::nullopt, 0.5);
        CHECK(split.simple.empty());
        CHECK(split.complex.size() == 1);
    }
    SUBCASE("unscored unforced item is an error") {
        std::vector<CurriculumItem> items = {item("a", 1)};
        items.push_back({single("b", "q"), std::nullopt});
        CHECK_THROWS(split_curriculum(items, std::nullopt, 0.5));
    }
    SUBCASE("property: order, force, and scale invariance over random datasets") {
        std::mt19937_64 rng(71);
        for (int trial = 0; trial < 1000; ++trial) {
            const auto n = 1 + rng() % 12;
            std::vector<CurriculumItem> items;
            for (std::size_t i = 0; i < n; ++i) {
                const double comp = static_cast<double>(rng() % 1000) / 100.0;
                items.push_back(item("i" + std::to_string(i), comp, rng() % 5 == 0));
            }
            const double q = static_cast<double>(rng() % 101) / 100.0;
            const auto split = split_curriculum(items, std::nullopt, q);

            CHECK(split.simple.size() + split.complex.size() == items.size());
            double max_simple = -1e300;
            for (const auto& it : split.simple) {
                CHECK_FALSE(it.instruction.force_complex);
                max_simple = std::max(max_simple, *it.comp);
            }
            for (const auto& it : split.complex) {
                if (!it.instruction.force_complex) CHECK(*it.comp >= max_simple);
            }

            // Rescaling all comp values by c > 0 leaves the split unchanged.
            const double c = 0.25 + static_cast<double>(rng() % 100) / 10.0;
            auto scaled = items;
            for (auto& it : scaled) it.comp = *it.comp * c;
            const auto split2 = split_curriculum(scaled, std::nullopt, q);
            REQUIRE(split2.simple.size() == split.simple.size());
            for (std::size_t i = 0; i < split.simple.size(); ++i) {
                CHECK(split2.simple[i].instruction.id == split.simple[i].instruction.id);
            }
        }
    }
}

TEST_CASE("instruction stream codec round trip") {
    auto instr = single("codec1", "the question", "the answer");
    instr.force_complex = true;
    instr.meta["topic"] = "astronomy";
    const auto doc = to_document(instr);
    const auto back = instruction_from_document(doc);
    CHECK(back.id == instr.id);
    REQUIRE(back.turns.size() == 2);
    CHECK(back.turns[0].text == "the question");
    CHECK(back.turns[1].text == "the answer");
    CHECK(back.force_complex);
    CHECK(back.meta.at("topic") == "astronomy");
}
