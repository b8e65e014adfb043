#include <doctest.h>

#include <cmath>
#include <vector>

#include "curator/model.hpp"

using namespace curator;
using namespace curator::model;

TEST_CASE("uniform builtin model scores every token at -log V") {
    const auto client = ModelClient::builtin(TokenNgramModel::uniform(16), "uniform16");
    const std::vector<long long> tokens = {0, 3, 7, 11, 15};
    const auto scored = client.sequence_logprob(tokens);
    REQUIRE(scored.logprobs.size() == 5);
    for (double lp : scored.logprobs) CHECK(lp == doctest::Approx(-std::log(16.0)));
    CHECK(scored.total() == doctest::Approx(-5.0 * std::log(16.0)));
}

TEST_CASE("fitted model approaches determinism as smoothing vanishes") {
    std::vector<std::string> corpus = {"a b a b a b a b a b"};
    const auto model = TokenNgramModel::fit(corpus, 2, 1e-6);
    const auto a = model.encode_text("a")[0];
    const auto b = model.encode_text("b")[0];
    const std::vector<long long> context = {a};
    CHECK(std::exp(model.logprob(context, b)) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("hand-built bigram counts with add-1 smoothing give P(b|a) = 4/7") {
    auto model = TokenNgramModel::from_vocab({"a", "b", "c"}, 2, 1.0);
    const long long a = 0, b = 1, c = 2;
    for (int i = 0; i < 3; ++i) model.observe(std::vector<long long>{a, b});
    model.observe(std::vector<long long>{a, c});
    const std::vector<long long> context = {a};
    CHECK(std::exp(model.logprob(context, b)) == doctest::Approx(4.0 / 7.0));
}

TEST_CASE("builtin conditional distributions sum to one") {
    std::vector<std::string> corpus = {"x y z x y z x y"};
    const auto model = TokenNgramModel::fit(corpus, 3, 0.1);
    const auto ids = model.encode_text("x y");
    double sum = 0.0;
    for (long long t = 0; t < static_cast<long long>(model.vocab_size()); ++t) {
        sum += std::exp(model.logprob(ids, t));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("causality: prefix logprobs equal the prefix of the full scoring") {
    std::vector<std::string> corpus = {"the cat sat on the mat", "the dog sat on the rug"};
    const auto client = ModelClient::builtin(TokenNgramModel::fit(corpus, 3, 0.1), "causal");
    const auto full_ids = client.encode_text("the cat sat on");
    const auto full = client.sequence_logprob(full_ids);
    const std::vector<long long> prefix_ids(full_ids.begin(), full_ids.begin() + 2);
    const auto prefix = client.sequence_logprob(prefix_ids);
    for (std::size_t i = 0; i < prefix_ids.size(); ++i) {
        CHECK(prefix.logprobs[i] == doctest::Approx(full.logprobs[i]));
    }
}

TEST_CASE("generation") {
    std::vector<std::string> corpus = {"one two three four five six seven eight"};
    const auto client = ModelClient::builtin(TokenNgramModel::fit(corpus, 2, 0.1), "gen");
    SUBCASE("deterministic for a fixed seed") {
        CHECK(client.generate("one two", 8, 42) == client.generate("one two", 8, 42));
    }
    SUBCASE("max_tokens zero yields the empty string") {
        CHECK(client.generate("one", 0, 1).empty());
    }
    SUBCASE("empty prompt is an error") {
        CHECK_THROWS(client.generate("", 4, 1));
    }
}

TEST_CASE("builtin judge by token F1") {
    const auto client = ModelClient::builtin(TokenNgramModel::uniform(4), "judge");
    SUBCASE("identical candidate scores 1") {
        CHECK(client.judge("q", "the right answer", "the right answer") == 1);
    }
    SUBCASE("disjoint candidate scores 0") {
        CHECK(client.judge("q", "alpha beta gamma", "delta epsilon zeta") == 0);
    }
    SUBCASE("F1 exactly at the cut is accepted") {
        // ref {a, b}, cand {a, c}: overlap 1, F1 = 2/(2+2) = 0.5, inclusive.
        CHECK(token_f1("a b", "a c") == doctest::Approx(0.5));
        CHECK(client.judge("q", "a b", "a c") == 1);
    }
}

TEST_CASE("scripted provider: canned replies pass through verbatim") {
    auto client = ModelClient::scripted(
        [](const nlohmann::json& request) -> nlohmann::json {
            if (request["op"] == "generate")
                return {{"ok", true}, {"result", {{"text", "canned reply"}}}};
            return {{"ok", false}, {"error", "unsupported"}};
        },
        "canned");
    CHECK(client.generate("any prompt", 10, 0) == "canned reply");
    CHECK_THROWS_AS(client.judge("q", "r", "c"), ProviderUnavailable);
}

TEST_CASE("protocol violations surface") {
    SUBCASE("reply without ok") {
        auto client = ModelClient::scripted(
            [](const nlohmann::json&) -> nlohmann::json { return {{"weird", 1}}; }, "bad1");
        CHECK_THROWS_AS(client.generate("p", 1, 0), ProtocolViolation);
    }
    SUBCASE("logprob count mismatch") {
        auto client = ModelClient::scripted(
            [](const nlohmann::json&) -> nlohmann::json {
                return {{"ok", true}, {"result", {{"logprobs", {-1.0}}}}};
            },
            "bad2");
        CHECK_THROWS_AS(client.sequence_logprob(std::vector<long long>{1, 2}),
                        ProtocolViolation);
    }
    SUBCASE("positive logprob rejected") {
        auto client = ModelClient::scripted(
            [](const nlohmann::json&) -> nlohmann::json {
                return {{"ok", true}, {"result", {{"logprobs", {0.5}}}}};
            },
            "bad3");
        CHECK_THROWS_AS(client.sequence_logprob(std::vector<long long>{1}), ProtocolViolation);
    }
}

TEST_CASE("loopback provider is indistinguishable from the builtin") {
    std::vector<std::string> corpus = {"alpha beta gamma delta alpha beta"};
    const auto direct = ModelClient::builtin(TokenNgramModel::fit(corpus, 3, 0.1), "inner");

    // A provider that answers by forwarding to its own builtin over the
    // serialized protocol shapes.
    auto loopback = ModelClient::scripted(
        [inner = ModelClient::builtin(TokenNgramModel::fit(corpus, 3, 0.1), "inner")](
            const nlohmann::json& request) -> nlohmann::json {
            const auto& payload = request.at("payload");
            if (request.at("op") == "sequence_logprob") {
                const auto scored =
                    inner.sequence_logprob(payload.at("tokens").get<std::vector<long long>>());
                return {{"ok", true}, {"result", {{"logprobs", scored.logprobs}}}};
            }
            if (request.at("op") == "encode") {
                return {{"ok", true},
                        {"result",
                         {{"tokens", inner.encode_text(payload.at("text").get<std::string>())}}}};
            }
            if (request.at("op") == "generate") {
                return {{"ok", true},
                        {"result",
                         {{"text", inner.generate(payload.at("prompt").get<std::string>(),
                                                  payload.at("max_tokens").get<std::size_t>(),
                                                  payload.at("seed").get<std::uint64_t>())}}}};
            }
            if (request.at("op") == "judge") {
                return {{"ok", true},
                        {"result",
                         {{"verdict", inner.judge(payload.at("question").get<std::string>(),
                                                  payload.at("reference").get<std::string>(),
                                                  payload.at("candidate").get<std::string>())}}}};
            }
            return {{"ok", false}, {"error", "unknown op"}};
        },
        "loopback");

    const auto ids = direct.encode_text("alpha beta gamma");
    CHECK(loopback.encode_text("alpha beta gamma") == ids);
    const auto a = direct.sequence_logprob(ids);
    const auto b = loopback.sequence_logprob(ids);
    REQUIRE(a.logprobs.size() == b.logprobs.size());
    for (std::size_t i = 0; i < a.logprobs.size(); ++i)
        CHECK(a.logprobs[i] == doctest::Approx(b.logprobs[i]));
    CHECK(direct.judge("q", "alpha beta", "alpha beta") ==
          loopback.judge("q", "alpha beta", "alpha beta"));
}

TEST_CASE("conditional logprob slices the target positions") {
    std::vector<std::string> corpus = {"a b c d e f g"};
    const auto client = ModelClient::builtin(TokenNgramModel::fit(corpus, 3, 0.1), "cond");
    const auto context = client.encode_text("a b c");
    const auto target = client.encode_text("d e");
    const auto conditional = client.conditional_logprob(context, target);
    REQUIRE(conditional.logprobs.size() == 2);

    std::vector<long long> full(context);
    full.insert(full.end(), target.begin(), target.end());
    const auto whole = client.sequence_logprob(full);
    CHECK(conditional.logprobs[0] == doctest::Approx(whole.logprobs[3]));
    CHECK(conditional.logprobs[1] == doctest::Approx(whole.logprobs[4]));
}
