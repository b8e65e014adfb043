#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace curator::hashing {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seeded FNV-1a with a splitmix finalizer. Stable across platforms and runs;
// the whole pipeline depends on that for reproducible signatures and digests.
std::uint64_t hash64(std::string_view bytes, std::uint64_t seed = 0);

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
}

struct Digest128 {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;
    auto operator<=>(const Digest128&) const = default;
};

Digest128 hash128(std::string_view bytes);
std::string hex(const Digest128& d);

// Derives a per-stage seed from the global seed so adding a stage never
// perturbs another stage's randomness.
std::uint64_t labeled_seed(std::uint64_t global_seed, std::string_view label);

}  // namespace curator::hashing

template <>
struct std::hash<curator::hashing::Digest128> {
    std::size_t operator()(const curator::hashing::Digest128& d) const noexcept {
        return static_cast<std::size_t>(d.hi ^ (d.lo * 0x9E3779B97F4A7C15ULL));
    }
};
