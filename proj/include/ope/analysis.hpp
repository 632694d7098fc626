#pragma once

// Variance and MSE machinery.
//
// decompose_variance splits the variance of a weight-form estimator into
//
//     V_int  = E_s[ Σ_τ ω²(τ,s) π_test²(τ) V_r(τ) / k_τ ]
//     V_path = Var_s[ Σ_τ ω(τ,s) π_test(τ) r̄(τ) ]
//
// Actions with k_τ = 0 have r̂(τ) = 0, so they contribute nothing to either
// the conditional mean or the conditional variance; any resulting error is
// carried by V_path. This keeps V_int + V_path equal to the variance of the
// estimator as implemented even on paths that miss actions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "ope/core.hpp"
#include "ope/estimators_multi.hpp"
#include "ope/policy_family.hpp"

namespace ope {

struct VarianceDecomposition {
    double v_int = 0.0;
    double v_path = 0.0;
    double total = 0.0;
};

struct MseBreakdown {
    double bias_sq = 0.0;
    double variance = 0.0;
    double mse = 0.0;
};

using WeightRule = std::function<WeightVector(const PathCounts&)>;

enum class DecompositionMode { exact, monte_carlo };

struct DecompositionOptions {
    DecompositionMode mode = DecompositionMode::exact;
    /// Upper bound on the number of count vectors C(N+K−1, K−1) in exact mode.
    std::size_t enumeration_limit = 1'000'000;
    std::size_t mc_paths = 100'000;
    std::uint64_t seed = 0;
    /// Condition on paths that sample every action at least once.
    bool full_coverage_only = false;
    /// Reject ω ≠ 0 on unsampled actions with V_r > 0 instead of applying r̂ = 0.
    bool strict_coverage = false;
};

/// C(n, k) as a double; exact for the magnitudes used here.
inline double binomial_coefficient(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

/// Calls fn(counts, probability) for every count vector of N multinomial
/// draws over `p`. Vectors with zero probability are skipped.
template <class Fn>
void for_each_count_vector(const Policy& p, std::size_t n, Fn&& fn) {
    const std::size_t k = p.size();
    PathCounts counts{std::vector<std::size_t>(k, 0)};
    const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);

    std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t action, std::size_t left,
                                                                    double log_prob) {
        if (action + 1 == k) {
            if (left > 0 && p[action] == 0.0) return;
            counts.counts[action] = left;
            const double lp = log_prob - std::lgamma(static_cast<double>(left) + 1.0) +
                              (left > 0 ? static_cast<double>(left) * std::log(p[action]) : 0.0);
            fn(static_cast<const PathCounts&>(counts), std::exp(lp));
            return;
        }
        for (std::size_t c = 0; c <= left; ++c) {
            if (c > 0 && p[action] == 0.0) break;
            counts.counts[action] = c;
            const double lp = log_prob - std::lgamma(static_cast<double>(c) + 1.0) +
                              (c > 0 ? static_cast<double>(c) * std::log(p[action]) : 0.0);
            rec(action + 1, left - c, lp);
        }
    };
    rec(0, n, log_n_fact);
}

namespace detail {

struct PathMoments {
    double conditional_mean = 0.0;
    double conditional_variance = 0.0;
};

inline PathMoments path_moments(const WeightVector& w, const PathCounts& counts, const Policy& p_test,
                                const RewardModel& rm, bool strict) {
    std::vector<double> mean_terms(counts.size(), 0.0);
    std::vector<double> var_terms(counts.size(), 0.0);
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a] == 0) {
            if (strict && w[a] != 0.0 && p_test[a] != 0.0 && rm.variance(a) > 0.0)
                fail(Errc::infinite_conditional_variance,
                     "non-zero weight on unsampled action " + std::to_string(a), static_cast<double>(a));
            continue;
        }
        mean_terms[a] = w[a] * p_test[a] * rm.mean(a);
        var_terms[a] = w[a] * w[a] * p_test[a] * p_test[a] * rm.variance(a) / static_cast<double>(counts[a]);
    }
    return {pairwise_sum(mean_terms), pairwise_sum(var_terms)};
}

}  // namespace detail

inline VarianceDecomposition decompose_variance(const WeightRule& rule, const Policy& behavior, const Policy& p_test,
                                                const RewardModel& rm, std::size_t n,
                                                const DecompositionOptions& opt = {}) {
    require(behavior.size() == p_test.size() && behavior.size() == rm.size(), Errc::dimension_mismatch,
            "policies and reward model differ in size");
    require(n >= 1, Errc::empty_input, "path length must be positive");
    const std::size_t k = behavior.size();

    std::vector<double> probs, cond_means, var_terms;
    auto visit = [&](const PathCounts& counts, double prob) {
        if (opt.full_coverage_only)
            for (auto c : counts.counts)
                if (c == 0) return;
        const auto m = detail::path_moments(rule(counts), counts, p_test, rm, opt.strict_coverage);
        probs.push_back(prob);
        cond_means.push_back(m.conditional_mean);
        var_terms.push_back(prob * m.conditional_variance);
    };

    if (opt.mode == DecompositionMode::exact) {
        const double size = binomial_coefficient(n + k - 1, k - 1);
        require(size <= static_cast<double>(opt.enumeration_limit), Errc::enumeration_too_large,
                "count-vector space has " + std::to_string(size) + " elements", size);
        for_each_count_vector(behavior, n, visit);
    } else {
        require(opt.mc_paths >= 2, Errc::invalid_argument, "Monte Carlo mode needs at least two paths");
        const Categorical draw(behavior.probabilities());
        for (std::size_t r = 0; r < opt.mc_paths; ++r) {
            Rng rng = stream(opt.seed, r);
            PathCounts counts{std::vector<std::size_t>(k, 0)};
            for (std::size_t i = 0; i < n; ++i) ++counts.counts[draw(rng)];
            visit(counts, 1.0);
        }
    }

    const double mass = pairwise_sum(probs);
    require(mass > 0.0, Errc::zero_normalizer, "no path satisfies the coverage condition");
    // Shifted by the first path's mean so identical conditional means give V_path = 0 exactly.
    const double pivot = cond_means.front();
    const double mean =
        pivot + pairwise_sum_of(probs.size(), [&](std::size_t i) { return probs[i] * (cond_means[i] - pivot); }) / mass;
    VarianceDecomposition out;
    out.v_int = pairwise_sum(var_terms) / mass;
    out.v_path = pairwise_sum_of(probs.size(), [&](std::size_t i) {
                     const double dev = cond_means[i] - mean;
                     return probs[i] * dev * dev;
                 }) /
                 mass;
    if (opt.mode == DecompositionMode::monte_carlo) {
        const double paths = static_cast<double>(probs.size());
        out.v_path *= paths / (paths - 1.0);
    }
    out.total = out.v_int + out.v_path;
    return out;
}

/// Fixed-path MSE of a weight vector:
///     bias² = (Σ_τ (ω−1) π_test r̄)²,  variance = Σ_τ ω² π_test² V_r / k_τ
inline MseBreakdown mse_at_fixed_path(const WeightVector& w, const PathCounts& counts, const Policy& p_test,
                                      const RewardModel& rm) {
    const std::size_t k = w.size();
    require(counts.size() == k && p_test.size() == k && rm.size() == k, Errc::dimension_mismatch,
            "weights, counts, policy and rewards differ in size");
    std::vector<double> bias_terms(k), var_terms(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        bias_terms[a] = (w[a] - 1.0) * p_test[a] * rm.mean(a);
        const double noise = w[a] * w[a] * p_test[a] * p_test[a] * rm.variance(a);
        if (noise == 0.0) continue;
        require(counts[a] > 0, Errc::infinite_conditional_variance,
                "non-zero weight on unsampled action " + std::to_string(a), static_cast<double>(a));
        var_terms[a] = noise / static_cast<double>(counts[a]);
    }
    MseBreakdown out;
    const double bias = pairwise_sum(bias_terms);
    out.bias_sq = bias * bias;
    out.variance = pairwise_sum(var_terms);
    out.mse = out.bias_sq + out.variance;
    return out;
}

namespace detail {

inline void check_full_support(const PolicyFamily& fam, const Policy& p_test, const RewardModel& rm) {
    require(p_test.size() == fam.num_actions() && rm.size() == fam.num_actions(), Errc::dimension_mismatch,
            "family, test policy and rewards differ in size");
    for (const auto& p : fam.policies())
        for (std::size_t a = 0; a < p.size(); ++a)
            require(p[a] > 0.0, Errc::unsupported_action,
                    "closed-form variances need full support; action " + std::to_string(a) + " has probability 0",
                    static_cast<double>(a));
}

}  // namespace detail

/// Var(BIS) = (1/N²) Σ_τ π_test²(r̄² + V_r) Σ_i 1/π_i(τ) − (1/N) J²
inline double analytic_var_bis_multi(const PolicyFamily& fam, const Policy& p_test, const RewardModel& rm) {
    detail::check_full_support(fam, p_test, rm);
    const double n = static_cast<double>(fam.num_records());
    const double first = pairwise_sum_of(fam.num_actions(), [&](std::size_t a) {
        const auto probs = fam.record_probs(a);
        const double inv = pairwise_sum_of(probs.size(), [&](std::size_t i) { return 1.0 / probs[i]; });
        const double m = rm.mean(a);
        return p_test[a] * p_test[a] * (m * m + rm.variance(a)) * inv;
    });
    const double j = true_value(p_test, rm);
    return first / (n * n) - j * j / n;
}

/// Var(FIS) = Σ_τ π_test²(r̄² + V_r) / Σ_j π_j(τ) − Σ_i (Σ_τ π_test r̄ π_i / Σ_j π_j)²
inline double analytic_var_fis_multi(const PolicyFamily& fam, const Policy& p_test, const RewardModel& rm) {
    detail::check_full_support(fam, p_test, rm);
    std::vector<double> fused(fam.num_actions());
    for (std::size_t a = 0; a < fused.size(); ++a) fused[a] = fam.fused_mass(a);
    const double first = pairwise_sum_of(fused.size(), [&](std::size_t a) {
        const double m = rm.mean(a);
        return p_test[a] * p_test[a] * (m * m + rm.variance(a)) / fused[a];
    });
    const double second = pairwise_sum_of(fam.num_records(), [&](std::size_t i) {
        const auto& pi = fam.record_policy(i);
        const double z = pairwise_sum_of(fused.size(), [&](std::size_t a) { return p_test[a] * rm.mean(a) * pi[a] / fused[a]; });
        return z * z;
    });
    return first - second;
}

/// Exact variance of Σ_i α^i(τ_i) π_test(τ_i)/π_i(τ_i) r_i for any per-record
/// weights; records are independent, so this is Σ_i (E[X_i²] − E[X_i]²).
inline double analytic_var_alpha_multi(const PolicyFamily& fam, const AlphaWeights& alpha, const Policy& p_test,
                                       const RewardModel& rm) {
    detail::check_full_support(fam, p_test, rm);
    require(alpha.records() == fam.num_records() && alpha.actions() == fam.num_actions(), Errc::dimension_mismatch,
            "alpha weights do not match the family");
    return pairwise_sum_of(fam.num_records(), [&](std::size_t i) {
        const auto& pi = fam.record_policy(i);
        double second = 0.0, first = 0.0;
        for (std::size_t a = 0; a < fam.num_actions(); ++a) {
            const double c = alpha.at(i, a) * p_test[a];
            const double m = rm.mean(a);
            second += c * c * (m * m + rm.variance(a)) / pi[a];
            first += c * m;
        }
        return second - first * first;
    });
}

/// Var(BIS) − Var(FIS); never negative (FIS dominates BIS).
inline double variance_gap(const PolicyFamily& fam, const Policy& p_test, const RewardModel& rm) {
    return analytic_var_bis_multi(fam, p_test, rm) - analytic_var_fis_multi(fam, p_test, rm);
}

struct HarmonicMeanCheck {
    double lhs = 0.0;  ///< (1/N²) Σ 1/a_i
    double rhs = 0.0;  ///< 1 / Σ a_i
    bool holds = false;
    /// lhs and rhs agree to rounding; happens exactly when all a_i are equal.
    bool equality = false;
};

inline HarmonicMeanCheck harmonic_mean_inequality(std::span<const double> a) {
    require(!a.empty(), Errc::empty_input, "need at least one entry");
    for (std::size_t i = 0; i < a.size(); ++i)
        require(a[i] > 0.0 && std::isfinite(a[i]), Errc::non_positive_entry,
                "entry " + std::to_string(i) + " is not strictly positive", static_cast<double>(i));
    const double n = static_cast<double>(a.size());
    HarmonicMeanCheck out;
    out.lhs = pairwise_sum_of(a.size(), [&](std::size_t i) { return 1.0 / a[i]; }) / (n * n);
    out.rhs = 1.0 / pairwise_sum(a);
    out.holds = out.lhs >= out.rhs - 1e-15;
    out.equality = std::abs(out.lhs - out.rhs) <= 8.0 * std::numeric_limits<double>::epsilon() * out.rhs;
    return out;
}

/// Expected EA estimate when one Bernoulli(1/2) action is sampled until its
/// first 0: Σ_k (1/2)^{k+1} k/(k+1) = 1 − ln 2. The true mean is 1/2, so
/// the bias is 1/2 − ln 2 < 0.
inline double ea_adaptive_bias_analytic() { return 1.0 - std::numbers::ln2; }

inline double ea_adaptive_true_mean() { return 0.5; }

/// Partial sum of the series above over k = 0..terms.
inline double ea_adaptive_series(std::size_t terms) {
    double s = 0.0;
    double weight = 0.5;
    for (std::size_t k = 0; k <= terms; ++k) {
        s += weight * static_cast<double>(k) / static_cast<double>(k + 1);
        weight *= 0.5;
    }
    return s;
}

}  // namespace ope
