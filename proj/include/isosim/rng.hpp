#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace isosim {

// Seed mixing and unit draws are spelled out here instead of relying on
// std::uniform_real_distribution, whose output is implementation-defined.
// Every stream in the project derives from a single scenario seed.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
    std::uint64_t m = splitmix64(s);
    return m ^ b;
}

inline std::uint64_t hash_str(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic stream of doubles in [0, 1).
class RandomStream {
public:
    RandomStream() : eng_(0) {}
    explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

    double next_unit() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    std::uint64_t next_u64() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

} // namespace isosim
