#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ssada {

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Every random draw in the project comes from an engine derived here, so a run
// is a pure function of (seed, tag, indices) and can be replayed per epoch.
inline std::mt19937_64 rng_for(uint64_t seed, std::string_view tag,
                               uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = splitmix64(seed ^ fnv1a64(tag));
    h = splitmix64(h ^ (a * 0x9e3779b97f4a7c15ull));
    h = splitmix64(h ^ (b * 0xc2b2ae3d27d4eb4full));
    return std::mt19937_64(h);
}

inline double uniform01(std::mt19937_64& g) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

// Uniform integer in [0, n)
inline size_t uniform_index(std::mt19937_64& g, size_t n) {
    return std::uniform_int_distribution<size_t>(0, n - 1)(g);
}

inline double gaussian(std::mt19937_64& g, double mean = 0.0, double sigma = 1.0) {
    return std::normal_distribution<double>(mean, sigma)(g);
}

} // namespace ssada
