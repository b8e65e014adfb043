#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/hashing.hpp"

namespace curator::dedup {

enum class ShingleMode { word, codepoint };

// Picks word shingles for space-delimited scripts and code-point shingles for
// CJK-dominant text.
ShingleMode auto_shingle_mode(const Document& doc);

struct ShingleSet {
    std::string doc_id;
    std::vector<std::uint64_t> hashes;  // sorted, deduplicated fingerprints
    int n = 10;
    ShingleMode mode = ShingleMode::word;
};

// Contiguous n-unit windows; fewer than n units collapse to one whole-text
// shingle. Empty text yields an empty set.
ShingleSet shingle(std::string_view text, int n = 10, ShingleMode mode = ShingleMode::word,
                   std::string doc_id = {});

struct MinHashSignature {
    std::string doc_id;
    std::vector<std::uint64_t> values;
    std::uint64_t permutation_seed = 0;
};

MinHashSignature minhash(const ShingleSet& shingles, std::size_t num_hashes = 128,
                         std::uint64_t seed = 0);

// Fraction of equal slots; unbiased estimator of shingle-set Jaccard.
double signature_similarity(const MinHashSignature& a, const MinHashSignature& b);

double exact_jaccard(const ShingleSet& a, const ShingleSet& b);

struct DedupLedger {
    // kept representative id -> ids removed in its favor
    std::map<std::string, std::vector<std::string>> removed;
    // removed id -> estimated similarity to its representative
    std::map<std::string, double> similarity;

    std::size_t removed_count() const;
};

struct DedupResult {
    std::vector<Document> kept;  // input order
    DedupLedger ledger;
};

// Exact-match dedup by 128-bit content hash within one slice. The kept
// representative is the lexicographically smallest id, so the result does not
// depend on input order.
DedupResult exact_dedup_slice(std::span<const Document> docs);

struct LshParams {
    int shingle_n = 10;
    std::size_t num_hashes = 128;
    std::size_t bands = 16;
    std::size_t rows = 8;
    double verify_threshold = 0.7;
    std::uint64_t seed = 0;
    int workers = 1;
    std::size_t slice_size = 100000;  // exact-dedup slice length
    bool cross_language = false;      // dedup across language tags when set
};

// Near-duplicate removal: band collisions verified by signature similarity,
// clusters canonicalized to the smallest id. Output is independent of input
// order and worker count.
DedupResult lsh_dedup(std::span<const Document> docs, const LshParams& params = {});

// Closed-form band collision probability 1 - (1 - J^r)^b.
double band_collision_probability(double jaccard, std::size_t bands, std::size_t rows);

void write_ledger(const DedupLedger& ledger, std::ostream& out);

}  // namespace curator::dedup
