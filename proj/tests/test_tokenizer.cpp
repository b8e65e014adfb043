#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "curator/tokenizer.hpp"
#include "curator/unicode.hpp"

using namespace curator;
using namespace curator::tokenizer;

namespace {

Document doc_of(std::string id, std::string text, std::string language = "zh") {
    Document doc;
    doc.id = std::move(id);
    doc.text = std::move(text);
    doc.source = SourceKind::encyclopedia;
    doc.language = std::move(language);
    return doc;
}

std::vector<std::string> token_strings(const TokenizerSpec& spec,
                                       const std::vector<TokenId>& ids) {
    std::vector<std::string> out;
    for (auto id : ids) out.push_back(spec.tokens()[id]);
    return out;
}

}  // namespace

TEST_CASE("wordpiece training on a repeated two-char word") {
    // Corpus dominated by one CJK bigram plus one rare alternative. Pair
    // scores tie at 1/(N+1); the tie breaks on the higher pair count.
    std::vector<Document> corpus;
    std::string text;
    for (int i = 0; i < 20; ++i) text += "你好 ";
    text += "你坏";
    corpus.push_back(doc_of("c", text));

    const auto base = char_base_spec(std::vector<std::string>{text});
    WordPieceOptions options;
    options.target_new_tokens = 2;
    const auto learned = train_wordpiece_extension(corpus, options, base);
    REQUIRE(learned.size() == 2);
    CHECK(learned[0] == "你好");
    CHECK(learned[1] == "你坏");
}

TEST_CASE("wordpiece merge order on a three-char run") {
    // "tianqihao" x3: both adjacent pairs score 1/3 with equal counts; the
    // lexicographically smaller merged string ("##..." sorts before CJK)
    // merges first, then the full word.
    std::vector<Document> corpus = {doc_of("c", "天气好 天气好 天气好")};
    const auto base = char_base_spec(std::vector<std::string>{corpus[0].text});
    WordPieceOptions options;
    options.target_new_tokens = 2;
    const auto learned = train_wordpiece_extension(corpus, options, base);
    REQUIRE(learned.size() == 2);
    CHECK(learned[0] == "##气好");
    CHECK(learned[1] == "天气好");
}

TEST_CASE("wordpiece edge cases") {
    std::vector<Document> corpus = {doc_of("c", "你好你好")};
    const auto base = char_base_spec(std::vector<std::string>{corpus[0].text});

    SUBCASE("empty corpus throws") {
        WordPieceOptions options;
        options.target_new_tokens = 5;
        CHECK_THROWS_AS(
            train_wordpiece_extension(std::vector<Document>{}, options, base), EmptyCorpus);
    }
    SUBCASE("target zero: strict errors, lenient returns empty") {
        WordPieceOptions strict;
        strict.target_new_tokens = 0;
        CHECK_THROWS_AS(train_wordpiece_extension(corpus, strict, base), ConfigInvalid);
        WordPieceOptions lenient;
        lenient.target_new_tokens = 0;
        lenient.strict = false;
        CHECK(train_wordpiece_extension(corpus, lenient, base).empty());
    }
    SUBCASE("learned tokens never duplicate the base vocabulary") {
        WordPieceOptions options;
        options.target_new_tokens = 50;  // more than learnable
        const auto learned = train_wordpiece_extension(corpus, options, base);
        for (const auto& token : learned) CHECK_FALSE(base.contains(token));
    }
    SUBCASE("whole-word mode ranks runs by frequency") {
        std::vector<Document> wcorpus = {
            doc_of("w", "你好 你好 世界")};
        const auto wbase = char_base_spec(std::vector<std::string>{wcorpus[0].text});
        WordPieceOptions options;
        options.target_new_tokens = 2;
        options.unit = ExtensionUnit::whole_word;
        const auto learned = train_wordpiece_extension(wcorpus, options, wbase);
        REQUIRE(learned.size() == 2);
        CHECK(learned[0] == "你好");
        CHECK(learned[1] == "世界");
    }
}

TEST_CASE("merge_and_pad") {
    SUBCASE("51190-token base pads to 51200 with 10 reserved tokens") {
        std::vector<std::string> tokens;
        tokens.reserve(51190);
        for (int i = 0; i < 51190; ++i) tokens.push_back("tok" + std::to_string(i));
        tokens[0] = "<unk>";
        const auto base = TokenizerSpec::from_tokens(std::move(tokens));
        REQUIRE(base.size() == 51190);
        const auto padded = merge_and_pad(base, std::vector<std::string>{}, 51200);
        CHECK(padded.size() == 51200);
        CHECK(padded.tokens()[51190] == "<pad_0>");
        CHECK(padded.tokens()[51199] == "<pad_9>");
    }
    SUBCASE("pad_to equal to current size adds nothing") {
        const auto base = TokenizerSpec::from_tokens({"<unk>", "a", "b"});
        const auto padded = merge_and_pad(base, std::vector<std::string>{}, 3);
        CHECK(padded.size() == 3);
    }
    SUBCASE("pad_to below size throws PadTooSmall") {
        const auto base = TokenizerSpec::from_tokens({"<unk>", "a", "b"});
        CHECK_THROWS_AS(merge_and_pad(base, std::vector<std::string>{"c"}, 3), PadTooSmall);
    }
    SUBCASE("idempotent at fixed pad_to") {
        const auto base = TokenizerSpec::from_tokens({"<unk>", "a", "b"});
        const auto once = merge_and_pad(base, std::vector<std::string>{"ab"}, 8);
        const auto twice = merge_and_pad(once, std::vector<std::string>{}, 8);
        CHECK(once.tokens() == twice.tokens());
    }
    SUBCASE("order is base, extension, padding") {
        const auto base = TokenizerSpec::from_tokens({"<unk>", "a"});
        const auto spec = merge_and_pad(base, std::vector<std::string>{"xy", "z"}, 6);
        CHECK(spec.tokens() ==
              std::vector<std::string>{"<unk>", "a", "xy", "z", "<pad_0>", "<pad_1>"});
    }
}

TEST_CASE("greedy longest-match tokenization") {
    const auto spec = TokenizerSpec::from_tokens(
        {"<unk>", "un", "happiness", "happy", " ", "a", "##a", "##b", "b"});

    SUBCASE("single vocabulary token maps to one id") {
        const auto ids = tokenize(spec, "happiness");
        REQUIRE(ids.size() == 1);
        CHECK(spec.tokens()[ids[0]] == "happiness");
    }
    SUBCASE("characters outside the vocabulary map to unknown") {
        const auto ids = tokenize(spec, "Q");
        REQUIRE(ids.size() == 1);
        CHECK(ids[0] == spec.unknown_id());
    }
    SUBCASE("unhappiness splits into two pieces by longest match") {
        const auto ids = tokenize(spec, "unhappiness");
        CHECK(token_strings(spec, ids) == std::vector<std::string>{"un", "happiness"});
    }
    SUBCASE("continuation pieces are preferred inside a word") {
        const auto ids = tokenize(spec, "aab");
        CHECK(token_strings(spec, ids) == std::vector<std::string>{"a", "##a", "##b"});
    }
    SUBCASE("whitespace is tokenized explicitly and round-trips") {
        const auto ids = tokenize(spec, "a b");
        CHECK(detokenize(spec, ids) == "a b");
    }
}

TEST_CASE("round trip is the identity when no unknowns are emitted") {
    const std::vector<std::string> seeds = {"你好世界 hello world a b",
                                            "aa bb 你好"};
    const auto base = char_base_spec(seeds);
    std::mt19937_64 rng(31);
    const std::u32string alphabet = U"ab 你好世界helo wrd";
    for (int trial = 0; trial < 100; ++trial) {
        std::u32string text;
        const auto len = rng() % 50;
        for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
        const auto utf8 = uni::encode(text);
        const auto ids = tokenize(base, utf8);
        bool has_unknown = std::any_of(ids.begin(), ids.end(),
                                       [&](TokenId id) { return id == base.unknown_id(); });
        if (!has_unknown) CHECK(detokenize(base, ids) == utf8);
    }
}

namespace {

// A ZH fixture with repeated phrases so the extension learns useful merges.
std::vector<Document> zh_fixture() {
    std::vector<Document> docs;
    const std::string phrases[] = {
        "今天天气很好。",
        "我们一起学习中文。",
        "中国的历史很悠久。",
        "今天我们学习历史。",
    };
    std::string text;
    for (int r = 0; r < 12; ++r) {
        for (const auto& p : phrases) text += p;
    }
    docs.push_back(doc_of("zh1", text));
    return docs;
}

std::uint64_t total_tokens(const TokenizerSpec& spec, const std::vector<Document>& docs) {
    std::uint64_t n = 0;
    for (const auto& doc : docs) n += tokenize(spec, doc.text).size();
    return n;
}

}  // namespace

TEST_CASE("extension changes nothing on ASCII text and compresses CJK text") {
    const auto zh = zh_fixture();
    std::vector<std::string> seed_texts = {zh[0].text,
                                           "plain ascii text with letters and spaces."};
    const auto base = char_base_spec(seed_texts);

    WordPieceOptions options;
    options.target_new_tokens = 40;
    const auto extension = train_wordpiece_extension(zh, options, base);
    REQUIRE_FALSE(extension.empty());
    const auto extended = merge_and_pad(base, extension, base.size() + extension.size() + 4);

    SUBCASE("token sequences on pure-ASCII text are identical") {
        const std::string ascii = "plain ascii text with letters and spaces.";
        CHECK(tokenize(base, ascii) == tokenize(extended, ascii));
    }
    SUBCASE("compression ratio is identical on ASCII, strictly greater on CJK") {
        std::map<std::string, std::vector<Document>> en_corpus = {
            {"en", {doc_of("e", "plain ascii text with letters and spaces.", "en")}}};
        const auto base_en = compression_ratio(base, en_corpus);
        const auto ext_en = compression_ratio(extended, en_corpus);
        CHECK(base_en.rows[0].ratio == ext_en.rows[0].ratio);
        CHECK(base_en.rows[0].tokens == ext_en.rows[0].tokens);

        std::map<std::string, std::vector<Document>> zh_corpus = {{"zh", zh}};
        const auto base_zh = compression_ratio(base, zh_corpus);
        const auto ext_zh = compression_ratio(extended, zh_corpus);
        CHECK(ext_zh.rows[0].ratio > base_zh.rows[0].ratio);
    }
    SUBCASE("extended token count never exceeds the base count") {
        // Superset vocabulary under the same greedy matcher.
        CHECK(total_tokens(extended, zh) <= total_tokens(base, zh));
        std::mt19937_64 rng(47);
        const auto cps = uni::decode(zh[0].text);
        for (int trial = 0; trial < 50; ++trial) {
            std::u32string text;
            for (int i = 0; i < 40; ++i) text.push_back(cps[rng() % cps.size()]);
            const auto utf8 = uni::encode(text);
            CHECK(tokenize(extended, utf8).size() <= tokenize(base, utf8).size());
        }
    }
}

TEST_CASE("compression ratio arithmetic") {
    SUBCASE("400 ascii bytes over 100 tokens is ratio 4.0") {
        const auto spec = TokenizerSpec::from_tokens({"<unk>", "abcd", "##abcd"});
        std::string text;
        for (int i = 0; i < 100; ++i) text += "abcd";
        std::map<std::string, std::vector<Document>> corpus = {{"c", {doc_of("d", text, "en")}}};
        const auto report = compression_ratio(spec, corpus);
        CHECK(report.rows[0].bytes == 400);
        CHECK(report.rows[0].tokens == 100);
        CHECK(report.rows[0].ratio == doctest::Approx(4.0));
    }
    SUBCASE("empty corpus map throws") {
        const auto spec = TokenizerSpec::from_tokens({"<unk>", "a"});
        CHECK_THROWS_AS(compression_ratio(spec, {}), EmptyCorpus);
    }
}

TEST_CASE("vocabulary file round trip preserves id order") {
    const auto path = std::filesystem::temp_directory_path() / "curator_vocab_test.txt";
    const auto spec = TokenizerSpec::from_tokens({"<unk>", "alpha", "beta", "##a"});
    spec.save(path);
    const auto loaded = TokenizerSpec::load(path);
    CHECK(loaded.tokens() == spec.tokens());
    std::filesystem::remove(path);
}
