#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace lsim {

// Deterministic PRNG. All randomness in the toolkit flows from a single
// user-facing seed; independent consumers derive their own stream with
// fork(label) so adding a consumer does not shift the values another one
// sees. Doubles come from raw 64-bit draws instead of
// std::uniform_real_distribution so streams do not depend on the standard
// library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : base_(seed), engine_(seed) {}

    // Child stream keyed by (construction seed, label).
    Rng fork(std::string_view label) const {
        uint64_t h = 1469598103934665603ull;  // FNV-1a
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return Rng(splitmix(base_ ^ h));
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n). Rejection sampling, unbiased.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t splitmix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t base_;
    std::mt19937_64 engine_;
};

}  // namespace lsim
