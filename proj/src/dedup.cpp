#include "curator/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "curator/parallel.hpp"
#include "curator/unicode.hpp"

namespace curator::dedup {

namespace {

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) tokens.push_back(text.substr(start, i - start));
    }
    return tokens;
}

struct UnionFind {
    std::vector<std::size_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

ShingleMode auto_shingle_mode(const Document& doc) {
    if (doc.language == "zh" || doc.language == "ja") return ShingleMode::codepoint;
    return uni::cjk_fraction(doc.text) > 0.5 ? ShingleMode::codepoint : ShingleMode::word;
}

ShingleSet shingle(std::string_view text, int n, ShingleMode mode, std::string doc_id) {
    if (n < 1) throw ConfigInvalid("shingle_n", "must be >= 1");
    ShingleSet set;
    set.doc_id = std::move(doc_id);
    set.n = n;
    set.mode = mode;
    if (text.empty()) return set;

    const auto un = static_cast<std::size_t>(n);
    if (mode == ShingleMode::word) {
        const auto tokens = whitespace_tokens(text);
        if (tokens.empty()) return set;
        if (tokens.size() < un) {
            set.hashes.push_back(hashing::hash64(text));
        } else {
            for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
                std::string window;
                for (std::size_t j = 0; j < un; ++j) {
                    if (j > 0) window.push_back(' ');
                    window += std::string(tokens[i + j]);
                }
                set.hashes.push_back(hashing::hash64(window));
            }
        }
    } else {
        const auto cps = uni::decode(text);
        if (cps.size() < un) {
            set.hashes.push_back(hashing::hash64(text));
        } else {
            for (std::size_t i = 0; i + un <= cps.size(); ++i) {
                set.hashes.push_back(
                    hashing::hash64(uni::encode(std::u32string_view(cps).substr(i, un))));
            }
        }
    }
    std::sort(set.hashes.begin(), set.hashes.end());
    set.hashes.erase(std::unique(set.hashes.begin(), set.hashes.end()), set.hashes.end());
    return set;
}

MinHashSignature minhash(const ShingleSet& shingles, std::size_t num_hashes,
                         std::uint64_t seed) {
    if (num_hashes < 1) throw ConfigInvalid("num_hashes", "must be >= 1");
    if (shingles.hashes.empty()) throw EmptyShingleSet();
    MinHashSignature sig;
    sig.doc_id = shingles.doc_id;
    sig.permutation_seed = seed;
    sig.values.resize(num_hashes);
    for (std::size_t i = 0; i < num_hashes; ++i) {
        const std::uint64_t hash_seed = hashing::mix(seed, i + 1);
        std::uint64_t min_value = std::numeric_limits<std::uint64_t>::max();
        for (std::uint64_t h : shingles.hashes) {
            min_value = std::min(min_value, hashing::splitmix64(h ^ hash_seed));
        }
        sig.values[i] = min_value;
    }
    return sig;
}

double signature_similarity(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.values.size() != b.values.size() || a.values.empty())
        throw SignatureLengthMismatch();
    std::size_t equal = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (a.values[i] == b.values[i]) ++equal;
    }
    return static_cast<double>(equal) / static_cast<double>(a.values.size());
}

double exact_jaccard(const ShingleSet& a, const ShingleSet& b) {
    if (a.hashes.empty() && b.hashes.empty()) return 0.0;
    std::size_t inter = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.hashes.size() && j < b.hashes.size()) {
        if (a.hashes[i] == b.hashes[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a.hashes[i] < b.hashes[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni_size = a.hashes.size() + b.hashes.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni_size);
}

std::size_t DedupLedger::removed_count() const {
    std::size_t n = 0;
    for (const auto& [_, ids] : removed) n += ids.size();
    return n;
}

DedupResult exact_dedup_slice(std::span<const Document> docs) {
    std::unordered_map<hashing::Digest128, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        groups[hashing::hash128(docs[i].text)].push_back(i);
    }

    std::vector<bool> keep(docs.size(), true);
    DedupResult result;
    for (auto& [_, indices] : groups) {
        if (indices.size() < 2) continue;
        const auto rep = *std::min_element(indices.begin(), indices.end(),
                                           [&](std::size_t a, std::size_t b) {
                                               return docs[a].id < docs[b].id;
                                           });
        auto& removed = result.ledger.removed[docs[rep].id];
        for (std::size_t idx : indices) {
            if (idx == rep) continue;
            keep[idx] = false;
            removed.push_back(docs[idx].id);
            result.ledger.similarity[docs[idx].id] = 1.0;
        }
        std::sort(removed.begin(), removed.end());
    }
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (keep[i]) result.kept.push_back(docs[i]);
    }
    return result;
}

namespace {

// Dedups one language group in place, appending to the shared ledger.
void lsh_dedup_group(std::span<const Document> docs, const std::vector<std::size_t>& members,
                     const LshParams& params, std::vector<bool>& keep, DedupLedger& ledger) {
    const std::size_t signature_len = params.bands * params.rows;

    struct Entry {
        std::size_t doc_index = 0;
        MinHashSignature sig;
        bool has_sig = false;
    };
    std::vector<Entry> entries(members.size());
    parallel_for(members.size(), params.workers, [&](std::size_t i) {
        const auto doc_index = members[i];
        const auto& doc = docs[doc_index];
        entries[i].doc_index = doc_index;
        const auto set = shingle(doc.text, params.shingle_n, auto_shingle_mode(doc), doc.id);
        if (!set.hashes.empty()) {
            entries[i].sig = minhash(set, signature_len, params.seed);
            entries[i].has_sig = true;
        }
    });

    // Band buckets -> verified collision edges -> connected components.
    UnionFind clusters(entries.size());
    for (std::size_t band = 0; band < params.bands; ++band) {
        std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (!entries[i].has_sig) continue;
            const auto* slot = entries[i].sig.values.data() + band * params.rows;
            const std::string_view bytes(reinterpret_cast<const char*>(slot),
                                         params.rows * sizeof(std::uint64_t));
            buckets[hashing::hash64(bytes, band + 1)].push_back(i);
        }
        for (const auto& [_, bucket] : buckets) {
            if (bucket.size() < 2) continue;
            for (std::size_t a = 0; a < bucket.size(); ++a) {
                for (std::size_t b = a + 1; b < bucket.size(); ++b) {
                    if (clusters.find(bucket[a]) == clusters.find(bucket[b])) continue;
                    if (signature_similarity(entries[bucket[a]].sig, entries[bucket[b]].sig) >=
                        params.verify_threshold) {
                        clusters.unite(bucket[a], bucket[b]);
                    }
                }
            }
        }
    }

    // Canonicalize every cluster to its smallest id.
    std::unordered_map<std::size_t, std::vector<std::size_t>> components;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        components[clusters.find(i)].push_back(i);
    }
    for (const auto& [_, component] : components) {
        if (component.size() < 2) continue;
        const auto rep = *std::min_element(
            component.begin(), component.end(), [&](std::size_t a, std::size_t b) {
                return docs[entries[a].doc_index].id < docs[entries[b].doc_index].id;
            });
        const auto& rep_id = docs[entries[rep].doc_index].id;
        auto& removed = ledger.removed[rep_id];
        for (std::size_t i : component) {
            if (i == rep) continue;
            keep[entries[i].doc_index] = false;
            const auto& removed_id = docs[entries[i].doc_index].id;
            removed.push_back(removed_id);
            ledger.similarity[removed_id] =
                signature_similarity(entries[i].sig, entries[rep].sig);
        }
        std::sort(removed.begin(), removed.end());
    }
}

}  // namespace

DedupResult lsh_dedup(std::span<const Document> docs, const LshParams& params) {
    if (params.bands * params.rows == 0)
        throw ConfigInvalid("bands", "bands and rows must be positive");

    std::vector<bool> keep(docs.size(), true);
    DedupResult result;

    // Group by language unless cross-language dedup is requested.
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        groups[params.cross_language ? std::string{} : docs[i].language].push_back(i);
    }
    for (const auto& [_, members] : groups) {
        lsh_dedup_group(docs, members, params, keep, result.ledger);
    }

    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (keep[i]) result.kept.push_back(docs[i]);
    }
    return result;
}

double band_collision_probability(double jaccard, std::size_t bands, std::size_t rows) {
    return 1.0 - std::pow(1.0 - std::pow(jaccard, static_cast<double>(rows)),
                          static_cast<double>(bands));
}

void write_ledger(const DedupLedger& ledger, std::ostream& out) {
    for (const auto& [kept_id, removed_ids] : ledger.removed) {
        for (const auto& removed_id : removed_ids) {
            const auto it = ledger.similarity.find(removed_id);
            out << removed_id << '\t' << kept_id << '\t'
                << (it == ledger.similarity.end() ? 1.0 : it->second) << '\n';
        }
    }
}

}  // namespace curator::dedup
