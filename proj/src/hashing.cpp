#include "curator/hashing.hpp"

#include <array>
#include <cstdio>

namespace curator::hashing {

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = 0xCBF29CE484222325ULL ^ splitmix64(seed);
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return splitmix64(h);
}

Digest128 hash128(std::string_view bytes) {
    return Digest128{hash64(bytes, 0x0123456789ABCDEFULL), hash64(bytes, 0xFEDCBA9876543210ULL)};
}

std::string hex(const Digest128& d) {
    std::array<char, 33> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx%016llx",
                  static_cast<unsigned long long>(d.hi), static_cast<unsigned long long>(d.lo));
    return std::string(buf.data(), 32);
}

std::uint64_t labeled_seed(std::uint64_t global_seed, std::string_view label) {
    return mix(global_seed, hash64(label, 0x5EEDL));
}

}  // namespace curator::hashing
