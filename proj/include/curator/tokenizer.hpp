#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "curator/corpus.hpp"

namespace curator::tokenizer {

using TokenId = std::uint32_t;

// An ordered vocabulary: base tokens, then extension tokens, then reserved
// padding tokens. Token ids are line positions. "##"-prefixed tokens are
// continuation pieces matched inside a word.
class TokenizerSpec {
public:
    TokenizerSpec() = default;
    TokenizerSpec(std::vector<std::string> tokens, std::size_t base_size,
                  std::size_t extension_size, std::string unknown_token = "<unk>");

    static TokenizerSpec from_tokens(std::vector<std::string> tokens,
                                     std::string unknown_token = "<unk>");
    static TokenizerSpec load(const std::filesystem::path& path,
                              std::string unknown_token = "<unk>");
    void save(const std::filesystem::path& path) const;

    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t size() const { return tokens_.size(); }
    std::size_t base_size() const { return base_size_; }
    std::size_t extension_size() const { return extension_size_; }
    std::size_t padded_size() const { return tokens_.size(); }
    const std::string& unknown_token() const { return unknown_token_; }

    bool contains(std::string_view token) const;
    std::optional<TokenId> id_of(std::string_view token) const;
    TokenId unknown_id() const { return unknown_id_; }

private:
    friend TokenizerSpec merge_and_pad(const TokenizerSpec&, std::span<const std::string>,
                                       std::size_t);
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    std::size_t base_size_ = 0;
    std::size_t extension_size_ = 0;
    std::string unknown_token_ = "<unk>";
    TokenId unknown_id_ = 0;

    void rebuild_index();
};

enum class ExtensionUnit { subword, whole_word };

struct WordPieceOptions {
    std::size_t target_new_tokens = 0;
    ExtensionUnit unit = ExtensionUnit::subword;
    bool strict = true;  // error on target 0 instead of returning empty
};

// Learns extension tokens from the CJK runs of a corpus by pair-merge scoring
// count(ab) / (count(a) * count(b)); ties broken by higher pair count, then
// lexicographically smaller merged string. Never emits a token already in
// base.
std::vector<std::string> train_wordpiece_extension(std::span<const Document> corpus,
                                                   const WordPieceOptions& options,
                                                   const TokenizerSpec& base);

TokenizerSpec merge_and_pad(const TokenizerSpec& base, std::span<const std::string> extension,
                            std::size_t pad_to);

std::vector<TokenId> tokenize(const TokenizerSpec& spec, std::string_view text);
std::string detokenize(const TokenizerSpec& spec, std::span<const TokenId> ids);

struct CorpusRatio {
    std::string name;
    std::uint64_t bytes = 0;   // UTF-8
    std::uint64_t tokens = 0;
    double ratio = 0;          // bytes per token
};

struct CompressionReport {
    std::vector<CorpusRatio> rows;
    CorpusRatio aggregate;
};

CompressionReport compression_ratio(const TokenizerSpec& spec,
                                    const std::map<std::string, std::vector<Document>>& corpora);
std::string render_compression_table(const CompressionReport& report);

// A small char-complete base vocabulary over the given texts: specials,
// every code point, and its continuation form.
TokenizerSpec char_base_spec(std::span<const std::string> texts);

}  // namespace curator::tokenizer
