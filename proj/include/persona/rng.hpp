#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace persona {

// Deterministic RNG. mt19937_64 is bit-stable everywhere, but the standard
// distributions and std::shuffle are implementation-specified, so the
// samplers here are hand-rolled to keep seeded runs identical across
// stdlibs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t uniform_u64(std::uint64_t bound) {
        if (bound == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % bound;
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_u64(n)); }

    // Uniform double in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, one value per call (no cached spare, keeps replay simple).
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[index(v.size())];
    }

private:
    std::mt19937_64 gen_;
};

} // namespace persona
