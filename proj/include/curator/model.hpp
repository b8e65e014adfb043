#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curator/corpus.hpp"

namespace curator::model {

struct Timeout : Error {
    explicit Timeout(long long budget_ms)
        : Error("provider timed out after " + std::to_string(budget_ms) + " ms"),
          budget(budget_ms) {}
    long long budget;
};

using TokenIdSeq = std::vector<long long>;

struct TokenLogProbs {
    TokenIdSeq tokens;
    std::vector<double> logprobs;  // natural log, each <= 0

    double total() const;
};

// Add-k smoothed token-level n-gram model; the deterministic builtin scorer
// and generator behind every model role when no external provider is wired.
class TokenNgramModel {
public:
    TokenNgramModel() = default;

    static TokenNgramModel uniform(std::size_t vocab_size, int order = 3, double smoothing = 0.1);
    static TokenNgramModel fit(std::span<const std::string> texts, int order = 3,
                               double smoothing = 0.1);
    static TokenNgramModel from_vocab(std::vector<std::string> vocab, int order = 3,
                                      double smoothing = 0.1);

    // Count hook for hand-built fixtures.
    void observe(std::span<const long long> ids);
    void observe_text(const std::string& text);

    double logprob(std::span<const long long> context, long long next) const;
    std::vector<double> sequence_logprobs(std::span<const long long> ids) const;

    // Whitespace tokens; OOV maps to "<unk>" when the vocabulary has one and
    // throws otherwise.
    TokenIdSeq encode_text(std::string_view text) const;
    const std::string& token(long long id) const;
    long long unk_id() const { return unk_id_; }  // -1 when absent
    std::size_t vocab_size() const { return vocab_.size(); }
    int order() const { return order_; }

    long long sample_next(std::span<const long long> context, std::mt19937_64& rng) const;

private:
    static constexpr long long kBos = -1;

    int order_ = 3;
    double smoothing_ = 0.1;
    long long unk_id_ = -1;
    std::vector<std::string> vocab_;
    std::map<std::string, long long, std::less<>> vocab_index_;
    std::map<TokenIdSeq, std::map<long long, std::uint64_t>> counts_;
    std::map<TokenIdSeq, std::uint64_t> context_totals_;

    TokenIdSeq context_window(std::span<const long long> ids, std::size_t pos) const;
};

enum class HandleKind { builtin_ngram, external, scripted };

// One model role (policy, reference, generator, judge). Scoring the same
// input twice through the same handle yields identical results: the builtin
// is pure and external replies are cached by request digest.
class ModelClient {
public:
    static ModelClient builtin(TokenNgramModel model, std::string label = "builtin");
    // command is spawned once and spoken to over a line protocol:
    // {"op": ..., "payload": ...} -> {"ok": true, "result": ...}.
    static ModelClient external(std::string command,
                                std::optional<std::filesystem::path> cache_dir = std::nullopt,
                                long long timeout_ms = 30000);
    // In-process responder with the same request/reply shape; used to script
    // providers in tests.
    static ModelClient scripted(std::function<nlohmann::json(const nlohmann::json&)> responder,
                                std::string label = "scripted");

    HandleKind kind() const { return kind_; }
    const std::string& digest() const { return digest_; }

    TokenLogProbs sequence_logprob(std::span<const long long> tokens) const;
    // Log-probs of target positions given the context prefix.
    TokenLogProbs conditional_logprob(std::span<const long long> context,
                                      std::span<const long long> target) const;
    TokenIdSeq encode_text(const std::string& text) const;

    std::string generate(const std::string& prompt, std::size_t max_tokens,
                         std::uint64_t seed) const;
    int judge(const std::string& question, const std::string& reference,
              const std::string& candidate) const;

    // Sum log P over the target text tokens given the context text.
    double text_logprob(const std::string& context, const std::string& target,
                        std::size_t* target_tokens = nullptr) const;

    // Raw protocol escape hatch for extension ops (e.g. external language
    // identification); returns the reply's result object.
    nlohmann::json invoke(const std::string& op, nlohmann::json payload) const;

    double judge_f1_cut = 0.5;  // builtin judge accepts at or above

private:
    ModelClient() = default;

    nlohmann::json call(const std::string& op, nlohmann::json payload) const;
    nlohmann::json dispatch_builtin(const std::string& op, const nlohmann::json& payload) const;

    HandleKind kind_ = HandleKind::builtin_ngram;
    std::string digest_;
    std::shared_ptr<TokenNgramModel> builtin_;
    std::function<nlohmann::json(const nlohmann::json&)> responder_;
    std::shared_ptr<class Subprocess> subprocess_;
    std::optional<std::filesystem::path> cache_dir_;
    std::shared_ptr<std::map<std::string, nlohmann::json>> memory_cache_;
    std::shared_ptr<std::mutex> mutex_;
};

// Normalized token-overlap F1 in [0, 1]; whitespace tokens, lowercased.
double token_f1(const std::string& reference, const std::string& candidate);

}  // namespace curator::model
