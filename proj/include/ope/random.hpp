#pragma once

// Seeded random streams.
//
// Replications are keyed by (seed, index): stream(seed, i) always yields the
// same sequence regardless of which thread runs replication i or in what
// order. Only the raw 64-bit engine output is used; uniform doubles and
// categorical draws are derived here so results are identical across
// standard library implementations.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ope/error.hpp"

namespace ope {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Mixes a tag into a seed; used to give every experiment stage its own key.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    return splitmix64(seed ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t key) : engine_(splitmix64(key)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        // Lemire's nearly-divisionless method.
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::size_t>(m >> 64);
    }

private:
    std::mt19937_64 engine_;
};

/// Independent stream for replication `index` under `seed`.
inline Rng stream(std::uint64_t seed, std::uint64_t index) { return Rng(derive_seed(seed, index)); }

/// Inverse-CDF sampler over a fixed probability vector.
class Categorical {
public:
    explicit Categorical(std::span<const double> probs) : cdf_(probs.size()) {
        require(!probs.empty(), Errc::empty_input, "categorical over empty support");
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            cdf_[i] = acc;
        }
        last_positive_ = probs.size() - 1;
        while (last_positive_ > 0 && probs[last_positive_] <= 0.0) --last_positive_;
    }

    std::size_t operator()(Rng& rng) const {
        const double u = rng.uniform() * cdf_.back();
        for (std::size_t i = 0; i < last_positive_; ++i)
            if (u < cdf_[i]) return i;
        return last_positive_;
    }

private:
    std::vector<double> cdf_;
    std::size_t last_positive_ = 0;
};

}  // namespace ope
