#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <vector>

namespace ragforge {

// 64-bit FNV-1a. Used for the hashed vocabulary and for parameter
// fingerprints, so it must stay byte-stable across platforms.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

// splitmix64: tiny, portable, and good enough for parameter init,
// k-means seeding and batch sampling. Unlike std::uniform_*_distribution
// its output is identical on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    // Mix a tag into the stream so different consumers of the same seed
    // get independent sequences.
    SplitMix64(uint64_t seed, std::string_view tag)
        : state_(seed ^ fnv1a64(tag)) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [-scale, scale].
    double next_uniform(double scale) {
        return (2.0 * next_double() - 1.0) * scale;
    }

    // Uniform integer in [0, n). n must be positive.
    uint64_t next_below(uint64_t n) {
        // Modulo bias is irrelevant at the n we use (n << 2^64).
        return next_u64() % n;
    }

    // Standard normal via Box-Muller; deterministic, no cached spare.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    uint64_t state_;
};

// Fingerprint a flat array of doubles by hashing its bytes.
inline uint64_t hash_doubles(std::span<const double> xs, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(xs.data(), xs.size() * sizeof(double), h);
}

}  // namespace ragforge
