#include "curator/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "curator/unicode.hpp"

namespace curator::tokenizer {

TokenizerSpec::TokenizerSpec(std::vector<std::string> tokens, std::size_t base_size,
                             std::size_t extension_size, std::string unknown_token)
    : tokens_(std::move(tokens)),
      base_size_(base_size),
      extension_size_(extension_size),
      unknown_token_(std::move(unknown_token)) {
    rebuild_index();
}

void TokenizerSpec::rebuild_index() {
    index_.clear();
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
            throw ConfigInvalid("vocabulary", "duplicate token \"" + tokens_[i] + "\"");
    }
    const auto it = index_.find(unknown_token_);
    if (it == index_.end()) {
        tokens_.insert(tokens_.begin(), unknown_token_);
        rebuild_index();
        return;
    }
    unknown_id_ = it->second;
}

TokenizerSpec TokenizerSpec::from_tokens(std::vector<std::string> tokens,
                                         std::string unknown_token) {
    const auto n = tokens.size();
    return TokenizerSpec(std::move(tokens), n, 0, std::move(unknown_token));
}

TokenizerSpec TokenizerSpec::load(const std::filesystem::path& path, std::string unknown_token) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open vocabulary: " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
    return from_tokens(std::move(tokens), std::move(unknown_token));
}

void TokenizerSpec::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write vocabulary: " + path.string());
    for (const auto& token : tokens_) out << token << '\n';
}

bool TokenizerSpec::contains(std::string_view token) const {
    return index_.find(std::string(token)) != index_.end();
}

std::optional<TokenId> TokenizerSpec::id_of(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

namespace {

std::string strip_continuation(std::string_view symbol) {
    if (symbol.rfind("##", 0) == 0) return std::string(symbol.substr(2));
    return std::string(symbol);
}

struct WordCounts {
    std::vector<std::vector<std::string>> words;  // symbol sequences
    std::vector<std::uint64_t> freq;
};

// CJK runs become words; the first symbol is bare, the rest carry the
// continuation prefix.
WordCounts collect_cjk_words(std::span<const Document> corpus) {
    std::map<std::u32string, std::uint64_t> runs;
    for (const auto& doc : corpus) {
        const auto cps = uni::decode(doc.text);
        std::u32string run;
        auto flush = [&] {
            if (!run.empty()) {
                ++runs[run];
                run.clear();
            }
        };
        for (char32_t cp : cps) {
            if (uni::is_cjk(cp)) {
                run.push_back(cp);
            } else {
                flush();
            }
        }
        flush();
    }
    WordCounts out;
    for (const auto& [run, count] : runs) {
        std::vector<std::string> symbols;
        symbols.reserve(run.size());
        for (std::size_t i = 0; i < run.size(); ++i) {
            symbols.push_back((i == 0 ? "" : "##") + uni::encode(run[i]));
        }
        out.words.push_back(std::move(symbols));
        out.freq.push_back(count);
    }
    return out;
}

std::vector<std::string> train_subword(WordCounts& wc, std::size_t target,
                                       const TokenizerSpec& base) {
    std::vector<std::string> emitted;
    std::unordered_set<std::string> seen;
    while (emitted.size() < target) {
        std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts;
        std::map<std::string, std::uint64_t> symbol_counts;
        for (std::size_t w = 0; w < wc.words.size(); ++w) {
            const auto& word = wc.words[w];
            const auto f = wc.freq[w];
            for (std::size_t i = 0; i < word.size(); ++i) {
                symbol_counts[word[i]] += f;
                if (i + 1 < word.size()) pair_counts[{word[i], word[i + 1]}] += f;
            }
        }
        if (pair_counts.empty()) break;

        // score = count(ab) / (count(a) * count(b)); ties -> higher pair
        // count, then lexicographically smaller merged string.
        double best_score = -1;
        std::uint64_t best_count = 0;
        std::pair<std::string, std::string> best_pair;
        std::string best_merged;
        for (const auto& [pair, count] : pair_counts) {
            const double score =
                static_cast<double>(count) /
                (static_cast<double>(symbol_counts[pair.first]) *
                 static_cast<double>(symbol_counts[pair.second]));
            std::string merged = pair.first + strip_continuation(pair.second);
            const bool better =
                score > best_score ||
                (score == best_score &&
                 (count > best_count || (count == best_count && merged < best_merged)));
            if (better) {
                best_score = score;
                best_count = count;
                best_pair = pair;
                best_merged = std::move(merged);
            }
        }

        for (auto& word : wc.words) {
            for (std::size_t i = 0; i + 1 < word.size();) {
                if (word[i] == best_pair.first && word[i + 1] == best_pair.second) {
                    word[i] = word[i] + strip_continuation(word[i + 1]);
                    word.erase(word.begin() + static_cast<long>(i) + 1);
                } else {
                    ++i;
                }
            }
        }

        if (!base.contains(best_merged) && seen.insert(best_merged).second)
            emitted.push_back(best_merged);
    }
    return emitted;
}

std::vector<std::string> train_whole_word(const WordCounts& wc, std::size_t target,
                                          const TokenizerSpec& base) {
    std::vector<std::pair<std::string, std::uint64_t>> candidates;
    for (std::size_t w = 0; w < wc.words.size(); ++w) {
        std::string whole;
        for (const auto& s : wc.words[w]) whole += strip_continuation(s);
        candidates.emplace_back(std::move(whole), wc.freq[w]);
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> emitted;
    std::unordered_set<std::string> seen;
    for (const auto& [token, _] : candidates) {
        if (emitted.size() >= target) break;
        if (!base.contains(token) && seen.insert(token).second) emitted.push_back(token);
    }
    return emitted;
}

}  // namespace

std::vector<std::string> train_wordpiece_extension(std::span<const Document> corpus,
                                                   const WordPieceOptions& options,
                                                   const TokenizerSpec& base) {
    if (corpus.empty()) throw EmptyCorpus();
    if (options.target_new_tokens == 0) {
        if (options.strict) throw ConfigInvalid("target_new_tokens", "must be >= 1");
        return {};
    }
    auto words = collect_cjk_words(corpus);
    if (options.unit == ExtensionUnit::whole_word)
        return train_whole_word(words, options.target_new_tokens, base);
    return train_subword(words, options.target_new_tokens, base);
}

TokenizerSpec merge_and_pad(const TokenizerSpec& base, std::span<const std::string> extension,
                            std::size_t pad_to) {
    if (pad_to < base.size() + extension.size())
        throw PadTooSmall(pad_to, base.size() + extension.size());
    std::vector<std::string> tokens = base.tokens();
    std::unordered_set<std::string> used(tokens.begin(), tokens.end());
    for (const auto& token : extension) {
        if (!used.insert(token).second)
            throw ConfigInvalid("extension", "token \"" + token + "\" already in vocabulary");
        tokens.push_back(token);
    }
    std::size_t pad_index = 0;
    while (tokens.size() < pad_to) {
        std::string name = "<pad_" + std::to_string(pad_index++) + ">";
        if (!used.insert(name).second) continue;
        tokens.push_back(std::move(name));
    }
    return TokenizerSpec(std::move(tokens), base.size(), extension.size(),
                         base.unknown_token());
}

namespace {

// Longest-prefix match at cps[pos..end); continuation pieces first inside a
// word, bare tokens as fallback.
std::optional<std::pair<TokenId, std::size_t>> match_longest(const TokenizerSpec& spec,
                                                             std::u32string_view cps,
                                                             std::size_t pos, std::size_t end,
                                                             bool continuation) {
    const std::size_t remaining = end - pos;
    if (continuation) {
        for (std::size_t len = remaining; len >= 1; --len) {
            const auto piece = "##" + uni::encode(cps.substr(pos, len));
            if (const auto id = spec.id_of(piece)) return std::make_pair(*id, len);
        }
    }
    for (std::size_t len = remaining; len >= 1; --len) {
        const auto piece = uni::encode(cps.substr(pos, len));
        if (const auto id = spec.id_of(piece)) return std::make_pair(*id, len);
    }
    return std::nullopt;
}

}  // namespace

std::vector<TokenId> tokenize(const TokenizerSpec& spec, std::string_view text) {
    std::vector<TokenId> ids;
    const auto cps = uni::decode(text);
    std::size_t i = 0;
    while (i < cps.size()) {
        if (uni::is_space(cps[i])) {
            const auto id = spec.id_of(uni::encode(cps[i]));
            ids.push_back(id ? *id : spec.unknown_id());
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < cps.size() && !uni::is_space(cps[end])) ++end;
        bool continuation = false;
        while (i < end) {
            if (const auto m = match_longest(spec, cps, i, end, continuation)) {
                ids.push_back(m->first);
                i += m->second;
            } else {
                ids.push_back(spec.unknown_id());
                ++i;
            }
            continuation = true;
        }
        i = end;
    }
    return ids;
}

std::string detokenize(const TokenizerSpec& spec, std::span<const TokenId> ids) {
    std::string out;
    for (TokenId id : ids) {
        if (id >= spec.size()) throw TokenOutOfVocab(static_cast<long long>(id));
        const auto& token = spec.tokens()[id];
        if (token.rfind("##", 0) == 0) {
            out += token.substr(2);
        } else {
            out += token;
        }
    }
    return out;
}

CompressionReport compression_ratio(const TokenizerSpec& spec,
                                    const std::map<std::string, std::vector<Document>>& corpora) {
    if (corpora.empty()) throw EmptyCorpus();
    CompressionReport report;
    report.aggregate.name = "aggregate";
    for (const auto& [name, docs] : corpora) {
        CorpusRatio row;
        row.name = name;
        for (const auto& doc : docs) {
            row.bytes += doc.text.size();
            row.tokens += tokenize(spec, doc.text).size();
        }
        if (row.tokens == 0) throw EmptyCorpus();
        row.ratio = static_cast<double>(row.bytes) / static_cast<double>(row.tokens);
        report.aggregate.bytes += row.bytes;
        report.aggregate.tokens += row.tokens;
        report.rows.push_back(std::move(row));
    }
    report.aggregate.ratio = static_cast<double>(report.aggregate.bytes) /
                             static_cast<double>(report.aggregate.tokens);
    return report;
}

std::string render_compression_table(const CompressionReport& report) {
    std::string out = "corpus           bytes        tokens       bytes/token\n";
    char line[160];
    auto print = [&](const CorpusRatio& row) {
        std::snprintf(line, sizeof(line), "%-16s %-12llu %-12llu %.4f\n", row.name.c_str(),
                      static_cast<unsigned long long>(row.bytes),
                      static_cast<unsigned long long>(row.tokens), row.ratio);
        out += line;
    };
    for (const auto& row : report.rows) print(row);
    print(report.aggregate);
    return out;
}

TokenizerSpec char_base_spec(std::span<const std::string> texts) {
    std::map<char32_t, bool> chars;  // cp -> is whitespace
    for (const auto& text : texts) {
        for (char32_t cp : uni::decode(text)) chars[cp] = uni::is_space(cp);
    }
    std::vector<std::string> tokens = {"<unk>"};
    for (const auto& [cp, _] : chars) tokens.push_back(uni::encode(cp));
    for (const auto& [cp, space] : chars) {
        if (!space) tokens.push_back("##" + uni::encode(cp));
    }
    return TokenizerSpec::from_tokens(std::move(tokens));
}

}  // namespace curator::tokenizer
