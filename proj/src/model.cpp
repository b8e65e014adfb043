#include "curator/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "curator/hashing.hpp"
#include "curator/unicode.hpp"

namespace curator::model {

double TokenLogProbs::total() const {
    double sum = 0.0;
    for (double lp : logprobs) sum += lp;
    return sum;
}

TokenNgramModel TokenNgramModel::uniform(std::size_t vocab_size, int order, double smoothing) {
    if (vocab_size == 0) throw EmptyCorpus();
    // "<unk>" is one of the vocab_size symbols so arbitrary text stays
    // encodable and every conditional is exactly 1/vocab_size.
    std::vector<std::string> vocab = {"<unk>"};
    for (std::size_t i = 1; i < vocab_size; ++i) vocab.push_back("t" + std::to_string(i));
    return from_vocab(std::move(vocab), order, smoothing);
}

TokenNgramModel TokenNgramModel::from_vocab(std::vector<std::string> vocab, int order,
                                            double smoothing) {
    if (order < 1) throw ConfigInvalid("order", "must be >= 1");
    if (smoothing <= 0) throw ConfigInvalid("smoothing", "must be positive");
    if (vocab.empty()) throw EmptyCorpus();
    TokenNgramModel m;
    m.order_ = order;
    m.smoothing_ = smoothing;
    m.vocab_ = std::move(vocab);
    for (std::size_t i = 0; i < m.vocab_.size(); ++i) {
        if (!m.vocab_index_.emplace(m.vocab_[i], static_cast<long long>(i)).second)
            throw ConfigInvalid("vocab", "duplicate token \"" + m.vocab_[i] + "\"");
        if (m.vocab_[i] == "<unk>") m.unk_id_ = static_cast<long long>(i);
    }
    return m;
}

TokenNgramModel TokenNgramModel::fit(std::span<const std::string> texts, int order,
                                     double smoothing) {
    if (texts.empty()) throw EmptyCorpus();
    std::map<std::string, std::uint64_t> frequency{{"<unk>", 0}};
    std::vector<std::vector<std::string>> tokenized;
    for (const auto& text : texts) {
        std::vector<std::string> tokens;
        std::string token;
        for (char c : text) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!token.empty()) tokens.push_back(std::exchange(token, {}));
            } else {
                token.push_back(c);
            }
        }
        if (!token.empty()) tokens.push_back(std::move(token));
        for (const auto& t : tokens) ++frequency[t];
        if (!tokens.empty()) tokenized.push_back(std::move(tokens));
    }
    if (tokenized.empty()) throw EmptyCorpus();

    std::vector<std::string> vocab;
    vocab.reserve(frequency.size());
    for (const auto& [token, _] : frequency) vocab.push_back(token);
    auto m = from_vocab(std::move(vocab), order, smoothing);
    for (const auto& tokens : tokenized) {
        TokenIdSeq ids;
        ids.reserve(tokens.size());
        for (const auto& t : tokens) ids.push_back(m.vocab_index_.at(t));
        m.observe(ids);
    }
    return m;
}

TokenIdSeq TokenNgramModel::context_window(std::span<const long long> ids,
                                           std::size_t pos) const {
    const auto width = static_cast<std::size_t>(order_ - 1);
    TokenIdSeq context(width, kBos);
    for (std::size_t j = 0; j < width; ++j) {
        const auto offset = static_cast<long long>(pos) - static_cast<long long>(width - j);
        if (offset >= 0) context[j] = ids[static_cast<std::size_t>(offset)];
    }
    return context;
}

void TokenNgramModel::observe(std::span<const long long> ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= static_cast<long long>(vocab_.size()))
            throw TokenOutOfVocab(ids[i]);
        const auto context = context_window(ids, i);
        ++counts_[context][ids[i]];
        ++context_totals_[context];
    }
}

void TokenNgramModel::observe_text(const std::string& text) { observe(encode_text(text)); }

double TokenNgramModel::logprob(std::span<const long long> context, long long next) const {
    if (next < 0 || next >= static_cast<long long>(vocab_.size())) throw TokenOutOfVocab(next);
    TokenIdSeq key(context.begin(), context.end());
    const double v = static_cast<double>(vocab_.size());
    double total = 0.0;
    double count = 0.0;
    if (const auto it = context_totals_.find(key); it != context_totals_.end()) {
        total = static_cast<double>(it->second);
        const auto& next_counts = counts_.at(key);
        if (const auto nit = next_counts.find(next); nit != next_counts.end())
            count = static_cast<double>(nit->second);
    }
    return std::log((count + smoothing_) / (total + smoothing_ * v));
}

std::vector<double> TokenNgramModel::sequence_logprobs(std::span<const long long> ids) const {
    std::vector<double> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.push_back(logprob(context_window(ids, i), ids[i]));
    }
    return out;
}

TokenIdSeq TokenNgramModel::encode_text(std::string_view text) const {
    TokenIdSeq ids;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const auto it = vocab_index_.find(token);
        if (it != vocab_index_.end()) {
            ids.push_back(it->second);
        } else if (unk_id_ >= 0) {
            ids.push_back(unk_id_);
        } else {
            throw TokenOutOfVocab(-1);
        }
        token.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            token.push_back(c);
        }
    }
    flush();
    return ids;
}

const std::string& TokenNgramModel::token(long long id) const {
    if (id < 0 || id >= static_cast<long long>(vocab_.size())) throw TokenOutOfVocab(id);
    return vocab_[static_cast<std::size_t>(id)];
}

long long TokenNgramModel::sample_next(std::span<const long long> context,
                                       std::mt19937_64& rng) const {
    constexpr double kInv = 1.0 / 9007199254740992.0;  // 2^-53
    double u = static_cast<double>(rng() >> 11) * kInv;
    double acc = 0.0;
    for (long long id = 0; id < static_cast<long long>(vocab_.size()); ++id) {
        acc += std::exp(logprob(context, id));
        if (u < acc) return id;
    }
    return static_cast<long long>(vocab_.size()) - 1;
}

// ---------------------------------------------------------------------------
// External provider subprocess with a line-delimited request/reply protocol.

class Subprocess {
public:
    Subprocess(const std::string& command, long long timeout_ms) : timeout_ms_(timeout_ms) {
        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw ProviderUnavailable("cannot create provider pipes");
        pid_ = fork();
        if (pid_ < 0) throw ProviderUnavailable("cannot fork provider process");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
    }

    ~Subprocess() {
        if (in_fd_ >= 0) close(in_fd_);
        if (out_fd_ >= 0) close(out_fd_);
        if (pid_ > 0) {
            int status = 0;
            waitpid(pid_, &status, WNOHANG);
            kill(pid_, SIGTERM);
            waitpid(pid_, &status, 0);
        }
    }

    std::string round_trip(const std::string& line) {
        std::string payload = line;
        payload.push_back('\n');
        std::size_t written = 0;
        while (written < payload.size()) {
            const auto n = write(in_fd_, payload.data() + written, payload.size() - written);
            if (n <= 0) throw ProviderUnavailable("provider stdin closed");
            written += static_cast<std::size_t>(n);
        }
        std::string reply;
        char buf[4096];
        while (true) {
            const auto newline = buffer_.find('\n');
            if (newline != std::string::npos) {
                reply = buffer_.substr(0, newline);
                buffer_.erase(0, newline + 1);
                return reply;
            }
            pollfd pfd{out_fd_, POLLIN, 0};
            const int ready = poll(&pfd, 1, static_cast<int>(timeout_ms_));
            if (ready == 0) throw Timeout(timeout_ms_);
            if (ready < 0) throw ProviderUnavailable("poll on provider failed");
            const auto n = read(out_fd_, buf, sizeof(buf));
            if (n <= 0) throw ProviderUnavailable("provider stdout closed");
            buffer_.append(buf, static_cast<std::size_t>(n));
        }
    }

private:
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    long long timeout_ms_;
    std::string buffer_;
};

ModelClient ModelClient::builtin(TokenNgramModel model, std::string label) {
    ModelClient c;
    c.kind_ = HandleKind::builtin_ngram;
    c.builtin_ = std::make_shared<TokenNgramModel>(std::move(model));
    c.digest_ = "builtin:" + label + ":" +
                std::to_string(hashing::hash64(label + std::to_string(c.builtin_->vocab_size()) +
                                               std::to_string(c.builtin_->order())));
    c.mutex_ = std::make_shared<std::mutex>();
    c.memory_cache_ = std::make_shared<std::map<std::string, nlohmann::json>>();
    return c;
}

ModelClient ModelClient::external(std::string command,
                                  std::optional<std::filesystem::path> cache_dir,
                                  long long timeout_ms) {
    ModelClient c;
    c.kind_ = HandleKind::external;
    c.digest_ = "external:" + std::to_string(hashing::hash64(command));
    c.subprocess_ = std::make_shared<Subprocess>(command, timeout_ms);
    c.cache_dir_ = std::move(cache_dir);
    if (c.cache_dir_) std::filesystem::create_directories(*c.cache_dir_);
    c.mutex_ = std::make_shared<std::mutex>();
    c.memory_cache_ = std::make_shared<std::map<std::string, nlohmann::json>>();
    return c;
}

ModelClient ModelClient::scripted(std::function<nlohmann::json(const nlohmann::json&)> responder,
                                  std::string label) {
    ModelClient c;
    c.kind_ = HandleKind::scripted;
    c.digest_ = "scripted:" + label;
    c.responder_ = std::move(responder);
    c.mutex_ = std::make_shared<std::mutex>();
    c.memory_cache_ = std::make_shared<std::map<std::string, nlohmann::json>>();
    return c;
}

nlohmann::json ModelClient::dispatch_builtin(const std::string& op,
                                             const nlohmann::json& payload) const {
    const auto& m = *builtin_;
    if (op == "sequence_logprob") {
        const auto ids = payload.at("tokens").get<TokenIdSeq>();
        return nlohmann::json{{"logprobs", m.sequence_logprobs(ids)}};
    }
    if (op == "encode") {
        return nlohmann::json{{"tokens", m.encode_text(payload.at("text").get<std::string>())}};
    }
    if (op == "generate") {
        const auto prompt = payload.at("prompt").get<std::string>();
        const auto max_tokens = payload.at("max_tokens").get<std::size_t>();
        const auto seed = payload.at("seed").get<std::uint64_t>();
        auto context = m.encode_text(prompt);
        std::mt19937_64 rng(hashing::mix(hashing::hash64(digest_),
                                         hashing::mix(hashing::hash64(prompt), seed)));
        std::vector<std::string> out;
        const auto width = static_cast<std::size_t>(m.order() - 1);
        for (std::size_t i = 0; i < max_tokens; ++i) {
            std::span<const long long> window(context);
            if (window.size() > width) window = window.subspan(window.size() - width);
            const auto next = m.sample_next(window, rng);
            out.push_back(m.token(next));
            context.push_back(next);
        }
        std::string text;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (i > 0) text.push_back(' ');
            text += out[i];
        }
        return nlohmann::json{{"text", text}};
    }
    if (op == "judge") {
        const double f1 = token_f1(payload.at("reference").get<std::string>(),
                                   payload.at("candidate").get<std::string>());
        return nlohmann::json{{"verdict", f1 >= judge_f1_cut ? 1 : 0}};
    }
    throw ProtocolViolation("unknown builtin op \"" + op + "\"");
}

nlohmann::json ModelClient::call(const std::string& op, nlohmann::json payload) const {
    const nlohmann::json request = {{"op", op}, {"payload", std::move(payload)}};

    // Only external calls are cached: the builtin is pure, and scripted
    // responders may simulate a changing world.
    std::string key;
    if (kind_ == HandleKind::external) {
        key = hashing::hex(hashing::hash128(digest_ + "\x1f" + request.dump()));
        std::lock_guard lock(*mutex_);
        if (const auto it = memory_cache_->find(key); it != memory_cache_->end())
            return it->second;
        if (cache_dir_) {
            const auto path = *cache_dir_ / (key + ".json");
            if (std::filesystem::exists(path)) {
                std::ifstream in(path);
                nlohmann::json cached;
                in >> cached;
                memory_cache_->emplace(key, cached);
                return cached;
            }
        }
    }

    nlohmann::json reply;
    switch (kind_) {
        case HandleKind::builtin_ngram:
            reply = {{"ok", true}, {"result", dispatch_builtin(op, request.at("payload"))}};
            break;
        case HandleKind::scripted:
            reply = responder_(request);
            break;
        case HandleKind::external: {
            std::lock_guard lock(*mutex_);  // one in-flight request per pipe
            const auto raw = subprocess_->round_trip(request.dump());
            try {
                reply = nlohmann::json::parse(raw);
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolViolation(std::string("unparseable provider reply: ") + e.what());
            }
            break;
        }
    }
    if (!reply.is_object() || !reply.contains("ok"))
        throw ProtocolViolation("provider reply lacks \"ok\"");
    if (!reply["ok"].get<bool>()) {
        throw ProviderUnavailable("provider error: " +
                                  reply.value("error", std::string("unspecified")));
    }
    if (!reply.contains("result")) throw ProtocolViolation("provider reply lacks \"result\"");
    const auto result = reply["result"];

    if (kind_ == HandleKind::external) {
        std::lock_guard lock(*mutex_);
        memory_cache_->emplace(key, result);
        if (cache_dir_) {
            const auto path = *cache_dir_ / (key + ".json");
            const auto tmp = *cache_dir_ / (key + ".tmp");
            std::ofstream out(tmp);
            out << result.dump();
            out.close();
            std::filesystem::rename(tmp, path);  // last write wins, value identical
        }
    }
    return result;
}

TokenLogProbs ModelClient::sequence_logprob(std::span<const long long> tokens) const {
    if (tokens.empty()) throw Error("token sequence is empty");
    const auto result =
        call("sequence_logprob", nlohmann::json{{"tokens", TokenIdSeq(tokens.begin(),
                                                                      tokens.end())}});
    TokenLogProbs out;
    out.tokens.assign(tokens.begin(), tokens.end());
    if (!result.contains("logprobs") || !result["logprobs"].is_array())
        throw ProtocolViolation("sequence_logprob result lacks logprobs array");
    out.logprobs = result["logprobs"].get<std::vector<double>>();
    if (out.logprobs.size() != out.tokens.size())
        throw ProtocolViolation("logprob count does not match token count");
    for (double lp : out.logprobs) {
        if (lp > 1e-12) throw ProtocolViolation("log-probability above zero");
    }
    return out;
}

TokenLogProbs ModelClient::conditional_logprob(std::span<const long long> context,
                                               std::span<const long long> target) const {
    if (target.empty()) throw Error("target token sequence is empty");
    TokenIdSeq full(context.begin(), context.end());
    full.insert(full.end(), target.begin(), target.end());
    const auto scored = sequence_logprob(full);
    TokenLogProbs out;
    out.tokens.assign(target.begin(), target.end());
    out.logprobs.assign(scored.logprobs.begin() + static_cast<long>(context.size()),
                        scored.logprobs.end());
    return out;
}

TokenIdSeq ModelClient::encode_text(const std::string& text) const {
    const auto result = call("encode", nlohmann::json{{"text", text}});
    if (!result.contains("tokens")) throw ProtocolViolation("encode result lacks tokens");
    return result["tokens"].get<TokenIdSeq>();
}

std::string ModelClient::generate(const std::string& prompt, std::size_t max_tokens,
                                  std::uint64_t seed) const {
    if (prompt.empty()) throw Error("prompt is empty");
    if (max_tokens == 0) return "";
    const auto result = call("generate", nlohmann::json{{"prompt", prompt},
                                                        {"max_tokens", max_tokens},
                                                        {"seed", seed}});
    if (!result.contains("text")) throw ProtocolViolation("generate result lacks text");
    return result["text"].get<std::string>();
}

int ModelClient::judge(const std::string& question, const std::string& reference,
                       const std::string& candidate) const {
    if (question.empty() || reference.empty() || candidate.empty())
        throw Error("judge inputs must be non-empty");
    const auto result = call("judge", nlohmann::json{{"question", question},
                                                     {"reference", reference},
                                                     {"candidate", candidate}});
    if (!result.contains("verdict")) throw ProtocolViolation("judge result lacks verdict");
    const int verdict = result["verdict"].get<int>();
    if (verdict != 0 && verdict != 1) throw ProtocolViolation("judge verdict must be 0 or 1");
    return verdict;
}

nlohmann::json ModelClient::invoke(const std::string& op, nlohmann::json payload) const {
    return call(op, std::move(payload));
}

double ModelClient::text_logprob(const std::string& context, const std::string& target,
                                 std::size_t* target_tokens) const {
    const auto context_ids = encode_text(context);
    const auto target_ids = encode_text(target);
    if (target_ids.empty()) {
        if (target_tokens) *target_tokens = 0;
        return 0.0;
    }
    const auto scored = conditional_logprob(context_ids, target_ids);
    if (target_tokens) *target_tokens = scored.tokens.size();
    return scored.total();
}

double token_f1(const std::string& reference, const std::string& candidate) {
    auto tokens = [](const std::string& text) {
        std::map<std::string, std::size_t> counts;
        std::string token;
        std::size_t total = 0;
        for (char c : uni::to_lower_ascii(text)) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!token.empty()) {
                    ++counts[token];
                    ++total;
                    token.clear();
                }
            } else {
                token.push_back(c);
            }
        }
        if (!token.empty()) {
            ++counts[token];
            ++total;
        }
        return std::make_pair(counts, total);
    };
    const auto [ref_counts, ref_total] = tokens(reference);
    const auto [cand_counts, cand_total] = tokens(candidate);
    if (ref_total == 0 || cand_total == 0) return 0.0;
    std::size_t overlap = 0;
    for (const auto& [token, count] : ref_counts) {
        const auto it = cand_counts.find(token);
        if (it != cand_counts.end()) overlap += std::min(count, it->second);
    }
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(ref_total + cand_total);
}

}  // namespace curator::model
