#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "tokenlab/tensor.hpp"

namespace tokenlab {

// Deterministic random streams.
//
// Every stream is derived from (global seed, purpose label, up to three
// indices) via FNV-1a over the label followed by splitmix64 folds of seed and
// indices. Adding a new purpose label therefore never reorders an existing
// stream. Doubles are built from the top 53 bits of mt19937_64 output, so
// sequences are identical across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    static uint64_t derive_seed(uint64_t seed, std::string_view label, uint64_t a = 0, uint64_t b = 0,
                                uint64_t c = 0) {
        uint64_t h = 1469598103934665603ull;  // FNV-1a 64 offset basis
        for (char ch : label) {
            h ^= static_cast<uint64_t>(static_cast<unsigned char>(ch));
            h *= 1099511628211ull;
        }
        h = splitmix(h ^ splitmix(seed));
        h = splitmix(h ^ splitmix(a + 0x9e3779b97f4a7c15ull));
        h = splitmix(h ^ splitmix(b + 0x7f4a7c159e3779b9ull));
        h = splitmix(h ^ splitmix(c + 0x85ebca6b2e716391ull));
        return h;
    }

    static Rng derive(uint64_t seed, std::string_view label, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
        return Rng(derive_seed(seed, label, a, b, c));
    }

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    // Box-Muller without a cached spare: each call consumes exactly two draws.
    double normal() {
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // CDF walk over a probability vector; the final index absorbs rounding.
    int categorical(const Tensor& probs) {
        const double u = uniform01();
        double acc = 0.0;
        for (int i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = gen_() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t splitmix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 gen_;
};

}  // namespace tokenlab
