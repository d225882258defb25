#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace avex {

// 64-bit FNV-1a. Used for seed derivation, cache keys and content hashes.
// Fixed algorithm so results are identical across platforms.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// SplitMix64. std::shuffle / std::uniform_int_distribution are
// implementation-defined, so all randomized behavior in the library goes
// through this generator to keep runs byte-reproducible everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound). Rejection sampling, no modulo bias.
    uint64_t below(uint64_t bound) {
        if (bound == 0) return 0;
        uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

// Derives an independent stream for a named stratum (e.g. per category).
inline Rng stratum_rng(uint64_t seed, std::string_view name) {
    return Rng(seed ^ fnv1a64(name));
}

}  // namespace avex
