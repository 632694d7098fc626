#pragma once

// MSE-optimal weights computed from the true reward moments.
//
// These are oracle quantities: they need r̄(τ) and V_r(τ), which a real
// evaluator never has. `plug_in_moments` exists for experimentation with
// estimated moments, but nothing built on it is an oracle and the optimality
// properties tested for this module do not apply to it.

#include <algorithm>
#include <cmath>
#include <limits>

#include "ope/core.hpp"
#include "ope/policy_family.hpp"

namespace ope {

struct OracleInputs {
    PathCounts counts;
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<double> p_test;

    std::size_t size() const noexcept { return counts.size(); }
};

/// Minimizer over ω of the fixed-path MSE
///     (Σ_τ (ω−1) π_test r̄)² + Σ_τ ω² π_test² V_r / k_τ
/// which is
///     ω*(τ) = k r̄ / (π_test V_r) · Σ π_test r̄ / (1 + Σ k r̄² / V_r).
/// Actions with π_test(τ) = 0 do not enter the objective; their weight is 0.
inline WeightVector optimal_weights_single_policy(const OracleInputs& in) {
    const std::size_t k = in.size();
    require(in.mean.size() == k && in.variance.size() == k && in.p_test.size() == k, Errc::dimension_mismatch,
            "oracle inputs differ in size");
    double signal = 0.0;
    double precision = 1.0;
    for (std::size_t a = 0; a < k; ++a) {
        if (in.p_test[a] == 0.0) continue;
        require(in.variance[a] > 0.0, Errc::zero_variance,
                "action " + std::to_string(a) + " has zero reward variance; use the constant weight 1",
                static_cast<double>(a));
        signal += in.p_test[a] * in.mean[a];
        precision += static_cast<double>(in.counts[a]) * in.mean[a] * in.mean[a] / in.variance[a];
    }
    std::vector<double> w(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        if (in.p_test[a] == 0.0) continue;
        w[a] = static_cast<double>(in.counts[a]) * in.mean[a] / (in.p_test[a] * in.variance[a]) * signal / precision;
    }
    return WeightVector(std::move(w));
}

/// One-action reduction: r̄² / (r̄² + V_r / k). Equals 1 for deterministic rewards.
inline double optimal_weight_single_action(double r_bar, double v_r, std::size_t k) {
    require(k >= 1, Errc::invalid_argument, "count must be positive");
    require(v_r >= 0.0, Errc::invalid_argument, "variance must be non-negative");
    require(r_bar != 0.0 || v_r != 0.0, Errc::degenerate_action, "r̄ = 0 and V_r = 0: every weight is optimal");
    if (v_r == 0.0) return 1.0;
    const double signal = r_bar * r_bar;
    return signal / (signal + v_r / static_cast<double>(k));
}

/// Minimum-variance weights within the unbiased family Σ_i α^i(τ) = 1:
///     α_i ∝ π_i(τ) / (r̄²(1 − π_i(τ)) + V_r)
/// With V_r = 0 this is π_i/(1 − π_i); as V_r grows it tends to the fused
/// weights π_i / Σ_j π_j.
inline std::vector<double> optimal_unbiased_alphas(std::size_t action, const PolicyFamily& fam, double r_bar,
                                                   double v_r) {
    require(action < fam.num_actions(), Errc::action_out_of_range, "action outside family support",
            static_cast<double>(action));
    const auto probs = fam.record_probs(action);
    std::vector<double> alpha(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double denom = r_bar * r_bar * (1.0 - probs[i]) + v_r;
        require(denom > 0.0, Errc::degenerate_denominator,
                "r̄²(1 − π_i) + V_r vanishes for record " + std::to_string(i), static_cast<double>(i));
        alpha[i] = probs[i] / denom;
    }
    const double total = pairwise_sum(alpha);
    require(total > 0.0, Errc::zero_fused_mass, "no behavior policy supports the action", static_cast<double>(action));
    for (double& x : alpha) x /= total;
    return alpha;
}

/// Per-action variance of the unbiased family at weights `alpha`:
///     Σ_i (r̄ α_i)² π_test² (1/π_i − 1) + (α_i π_test)² V_r / π_i
/// Records with π_i = 0 must carry α_i = 0, otherwise the variance is infinite.
inline double unbiased_action_variance(std::span<const double> alpha, std::span<const double> probs, double r_bar,
                                       double v_r, double p_test_tau = 1.0) {
    require(alpha.size() == probs.size(), Errc::dimension_mismatch, "alpha and record probabilities differ in size");
    const double t2 = p_test_tau * p_test_tau;
    return pairwise_sum_of(alpha.size(), [&](std::size_t i) {
        if (alpha[i] == 0.0) return 0.0;
        if (probs[i] <= 0.0) return std::numeric_limits<double>::infinity();
        const double a2 = alpha[i] * alpha[i];
        return a2 * t2 * (r_bar * r_bar * (1.0 / probs[i] - 1.0) + v_r / probs[i]);
    });
}

struct AlphaOptimalityReport {
    std::vector<double> alpha_opt;
    double objective_at_opt = 0.0;
    /// Objective at uniform weights over supporting records minus objective at α_opt.
    double uniform_gap = 0.0;
    /// Smallest (objective(sample) − objective(α_opt)) over the random feasible samples.
    double min_gap = 0.0;
    std::size_t samples = 0;

    bool optimal(double tol = 1e-10) const { return min_gap >= -tol && uniform_gap >= -tol; }
};

/// Evaluates the per-action objective at α_opt and at random points of the
/// feasible simplex (restricted to records that can produce the action).
inline AlphaOptimalityReport verify_alpha_optimality(std::size_t action, const PolicyFamily& fam, double r_bar,
                                                     double v_r, std::size_t samples = 200,
                                                     std::uint64_t seed = 0x5EED) {
    AlphaOptimalityReport rep;
    rep.alpha_opt = optimal_unbiased_alphas(action, fam, r_bar, v_r);
    const auto probs = fam.record_probs(action);
    rep.objective_at_opt = unbiased_action_variance(rep.alpha_opt, probs, r_bar, v_r);

    std::size_t supported = 0;
    for (double p : probs) supported += p > 0.0 ? 1 : 0;
    std::vector<double> uniform(probs.size(), 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (probs[i] > 0.0) uniform[i] = 1.0 / static_cast<double>(supported);
    rep.uniform_gap = unbiased_action_variance(uniform, probs, r_bar, v_r) - rep.objective_at_opt;

    Rng rng = stream(seed, action);
    rep.min_gap = std::numeric_limits<double>::infinity();
    std::vector<double> point(probs.size());
    for (std::size_t s = 0; s < samples; ++s) {
        // Flat Dirichlet via normalized exponentials.
        double total = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            point[i] = probs[i] > 0.0 ? -std::log1p(-rng.uniform()) : 0.0;
            total += point[i];
        }
        for (double& x : point) x /= total;
        rep.min_gap = std::min(rep.min_gap, unbiased_action_variance(point, probs, r_bar, v_r) - rep.objective_at_opt);
    }
    rep.samples = samples;
    if (samples == 0) rep.min_gap = 0.0;
    return rep;
}

struct MomentEstimates {
    std::vector<double> means;
    std::vector<double> variances;
};

/// Per-action sample mean and (unbiased) sample variance from logged data.
/// Non-oracle: use only where the true moments are unavailable.
inline MomentEstimates plug_in_moments(const LoggedDataset& d, std::size_t num_actions) {
    d.check_actions(num_actions);
    MomentEstimates m{empirical_means(d, num_actions), std::vector<double>(num_actions, 0.0)};
    std::vector<std::size_t> counts(num_actions, 0);
    for (const auto& r : d.records()) {
        const double dev = r.reward - m.means[r.action];
        m.variances[r.action] += dev * dev;
        ++counts[r.action];
    }
    for (std::size_t a = 0; a < num_actions; ++a)
        m.variances[a] = counts[a] > 1 ? m.variances[a] / static_cast<double>(counts[a] - 1) : 0.0;
    return m;
}

}  // namespace ope
