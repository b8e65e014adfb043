#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "curator/mixture.hpp"

using namespace curator;
using namespace curator::mixture;

TEST_CASE("mixture plan: published rows reproduce exactly") {
    const auto specs = reference_mixture_specs();
    const auto plan = build_mixture_plan(specs);
    REQUIRE(plan.entries.size() == 10);

    std::map<std::string, const MixtureEntry*> by_name;
    for (const auto& e : plan.entries) by_name[e.name] = &e;

    CHECK(by_name["encyclopedia"]->weighted_tokens == 54e9);
    CHECK(by_name["book"]->weighted_tokens == 87.5e9);
    CHECK(by_name["edu_assessment"]->weighted_tokens == 2.5e9);
    CHECK(plan.total_weighted_tokens == 1680e9);

    // Published weight column, percent; tolerance 0.1pp absorbs upstream
    // rounding (books: 5.3 published vs 5.21 computed).
    const std::map<std::string, double> published = {
        {"web", 72.6},  {"code", 6.0},   {"encyclopedia", 3.2}, {"academic", 3.0},
        {"qa_forum", 1.5}, {"book", 5.3}, {"news", 8.0},        {"legal", 0.2},
        {"patent", 0.1},  {"edu_assessment", 0.1},
    };
    for (const auto& [name, pct] : published) {
        CHECK(std::abs(by_name[name]->weight * 100.0 - pct) <= 0.1);
    }

    double weight_sum = 0.0;
    for (const auto& e : plan.entries) weight_sum += e.weight;
    CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mixture plan errors") {
    CHECK_THROWS(build_mixture_plan(std::vector<SourceSpec>{}));
    std::vector<SourceSpec> bad = {{"x", 0, 1}};
    CHECK_THROWS(build_mixture_plan(bad));
}

TEST_CASE("stage plan: scaled budgets and language splits") {
    const auto settings = reference_stage_settings();
    SUBCASE("scale 1e-6 reproduces the published ratios in tokens") {
        const auto plan = plan_stages(settings, 1e-6);
        REQUIRE(plan.stages.size() == 3);
        CHECK(plan.stages[0].total_tokens == 600000);
        CHECK(plan.stages[0].en_tokens == 456000);
        CHECK(plan.stages[0].zh_tokens == 132000);
        CHECK(plan.stages[0].ml_tokens == 12000);
        CHECK(plan.stages[0].context_length == 2048);

        CHECK(plan.stages[1].total_tokens == 900000);
        CHECK(plan.stages[1].ml_tokens == 0);
        CHECK(plan.stages[1].context_length == 4096);

        CHECK(plan.stages[2].total_tokens == 180000);
        CHECK(plan.stages[2].context_length == 4096);
    }
    SUBCASE("stage 2 ml budget is zero at any scale") {
        for (double scale : {1e-9, 1e-6, 0.5, 1.0}) {
            const auto plan = plan_stages(settings, scale);
            CHECK(plan.stages[1].ml_tokens == 0);
        }
    }
    SUBCASE("scale 1 totals 1680B across stages") {
        const auto plan = plan_stages(settings, 1.0);
        std::uint64_t total = 0;
        for (const auto& s : plan.stages) total += s.total_tokens;
        CHECK(total == 1680000000000ULL);
    }
    SUBCASE("per-language budgets always sum to the stage budget exactly") {
        // Largest-remainder check over awkward scales.
        for (double scale : {1e-9, 3.7e-8, 1.1e-7, 7.77e-7}) {
            const auto plan = plan_stages(settings, scale);
            for (const auto& s : plan.stages) {
                CHECK(s.en_tokens + s.zh_tokens + s.ml_tokens == s.total_tokens);
            }
        }
    }
}

TEST_CASE("sample schedule") {
    SUBCASE("single source draws only that source") {
        std::vector<SourceSpec> specs = {{"only", 10, 1}};
        const auto plan = build_mixture_plan(specs);
        for (const auto& name : sample_schedule(plan, 100, 3)) CHECK(name == "only");
    }
    SUBCASE("two equal weights converge to 0.5 within 0.01 at 100k draws") {
        std::vector<SourceSpec> specs = {{"a", 10, 1}, {"b", 10, 1}};
        const auto plan = build_mixture_plan(specs);
        const auto draws = sample_schedule(plan, 100000, 17);
        const auto a_count = std::count(draws.begin(), draws.end(), "a");
        const double freq = static_cast<double>(a_count) / 100000.0;
        CHECK(std::abs(freq - 0.5) <= 0.01);
    }
    SUBCASE("same seed reproduces the sequence, different seed varies it") {
        std::vector<SourceSpec> specs = {{"a", 10, 1}, {"b", 30, 1}};
        const auto plan = build_mixture_plan(specs);
        CHECK(sample_schedule(plan, 1000, 5) == sample_schedule(plan, 1000, 5));
        CHECK(sample_schedule(plan, 1000, 5) != sample_schedule(plan, 1000, 6));
    }
}

TEST_CASE("lr schedule") {
    LrSchedule sched;
    sched.max_lr = 3e-4;
    sched.min_lr = 3e-5;
    sched.total_steps = 100000;
    sched.warmup_steps = 100;  // 0.1% of total

    SUBCASE("warmup end hits max, total hits min exactly") {
        CHECK(lr_at(100, sched) == doctest::Approx(3e-4).epsilon(1e-12));
        CHECK(lr_at(100000, sched) == doctest::Approx(3e-5).epsilon(1e-12));
        CHECK(lr_at(0, sched) == 0.0);
    }
    SUBCASE("cosine midpoint is the arithmetic mean of max and min") {
        const auto mid = sched.warmup_steps + (sched.total_steps - sched.warmup_steps) / 2;
        CHECK(lr_at(mid, sched) == doctest::Approx(1.65e-4).epsilon(1e-9));
    }
    SUBCASE("continuous at the warmup junction") {
        const double before = lr_at(sched.warmup_steps - 1, sched);
        const double at = lr_at(sched.warmup_steps, sched);
        CHECK(std::abs(at - before) < 2.0 * sched.max_lr / sched.warmup_steps);
        CHECK(std::abs(at - 3e-4) < 1e-9);
    }
    SUBCASE("monotone non-increasing after warmup") {
        double prev = lr_at(sched.warmup_steps, sched);
        for (std::uint64_t step = sched.warmup_steps + 1; step <= sched.total_steps;
             step += 997) {
            const double lr = lr_at(step, sched);
            CHECK(lr <= prev + 1e-18);
            prev = lr;
        }
    }
    SUBCASE("constant schedule when min equals max") {
        LrSchedule flat;
        flat.max_lr = 2e-5;
        flat.min_lr = 2e-5;
        flat.total_steps = 1000;
        flat.warmup_steps = 10;
        CHECK(lr_at(0, flat) == 2e-5);
        CHECK(lr_at(500, flat) == 2e-5);
        CHECK(lr_at(1000, flat) == 2e-5);
    }
    SUBCASE("out-of-range step throws") {
        CHECK_THROWS_AS(lr_at(100001, sched), StepOutOfRange);
    }
}

TEST_CASE("packing") {
    PackOptions options;
    options.context_length = 4;
    options.separator_token = 9;

    SUBCASE("docs of 3 and 4 tokens with one separator pack into 2 samples, no tail") {
        std::vector<std::vector<TokenId>> docs = {{1, 2, 3}, {4, 5, 6, 7}};
        const auto result = pack_stream(docs, options);
        REQUIRE(result.samples.size() == 2);
        CHECK(result.dropped_tail == 0);
        CHECK(result.separator_tokens == 1);
        CHECK(result.samples[0].token_ids == std::vector<TokenId>{1, 2, 3, 9});
        CHECK(result.samples[1].token_ids == std::vector<TokenId>{4, 5, 6, 7});
    }
    SUBCASE("single doc of exactly L gives one sample and empty tail") {
        std::vector<std::vector<TokenId>> docs = {{1, 2, 3, 4}};
        const auto result = pack_stream(docs, options);
        CHECK(result.samples.size() == 1);
        CHECK(result.dropped_tail == 0);
    }
    SUBCASE("doc shorter than L alone in the stream is dropped") {
        std::vector<std::vector<TokenId>> docs = {{1, 2}};
        const auto result = pack_stream(docs, options);
        CHECK(result.samples.empty());
        CHECK(result.dropped_tail == 2);
    }
    SUBCASE("conservation holds over random streams at both context lengths") {
        std::mt19937_64 rng(23);
        for (const std::uint64_t length : {2048ULL, 4096ULL}) {
            PackOptions opt;
            opt.context_length = length;
            opt.separator_token = 0;
            for (int trial = 0; trial < 10; ++trial) {
                std::vector<std::vector<TokenId>> docs(1 + rng() % 30);
                for (auto& doc : docs) {
                    doc.resize(1 + rng() % 3000);
                    for (auto& t : doc) t = static_cast<TokenId>(1 + rng() % 50000);
                }
                const auto result = pack_stream(docs, opt);
                CHECK(result.input_tokens + result.separator_tokens ==
                      length * result.samples.size() + result.dropped_tail);
                CHECK(result.dropped_tail < length);
                for (const auto& sample : result.samples)
                    CHECK(sample.token_ids.size() == length);
            }
        }
    }
    SUBCASE("separator can be disabled") {
        PackOptions plain;
        plain.context_length = 4;
        plain.use_separator = false;
        std::vector<std::vector<TokenId>> docs = {{1, 2}, {3, 4}};
        const auto result = pack_stream(docs, plain);
        REQUIRE(result.samples.size() == 1);
        CHECK(result.samples[0].token_ids == std::vector<TokenId>{1, 2, 3, 4});
        CHECK(result.separator_tokens == 0);
    }
}
