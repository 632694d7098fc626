#pragma once

// Single-behavior-policy estimators.
//
// Every estimator here can be written as
//
//     Ĵ = Σ_τ ω(τ, s) π_test(τ) r̂(τ)
//
// where r̂ are per-action empirical means and ω depends on the path only
// through its counts. Each estimator is offered both in that weight form and
// in its direct per-record form; the two must agree to rounding.

#include <string>
#include <string_view>

#include "ope/core.hpp"

namespace ope {

enum class SingleEstimatorKind { bis, nis, ea };

constexpr std::string_view to_string(SingleEstimatorKind kind) noexcept {
    switch (kind) {
        case SingleEstimatorKind::bis: return "BIS";
        case SingleEstimatorKind::nis: return "NIS";
        case SingleEstimatorKind::ea: return "EA";
    }
    return "?";
}

inline double estimate_weighted(const WeightVector& w, const Policy& p_test, std::span<const double> r_hat) {
    require(w.size() == p_test.size() && w.size() == r_hat.size(), Errc::dimension_mismatch,
            "weights, test policy and reward estimates differ in size");
    return pairwise_sum_of(w.size(), [&](std::size_t a) { return w[a] * p_test[a] * r_hat[a]; });
}

/// ω_BIS(τ) = k_τ / (N π(τ)); zero wherever the action was not sampled.
inline WeightVector omega_bis(const PathCounts& counts, std::size_t n, const Policy& behavior) {
    require(counts.size() == behavior.size(), Errc::dimension_mismatch, "counts and policy differ in size");
    require(n >= 1, Errc::empty_input, "path length must be positive");
    std::vector<double> w(counts.size(), 0.0);
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a] == 0) continue;
        require(behavior[a] > 0.0, Errc::unsupported_action,
                "action " + std::to_string(a) + " was logged but has behavior probability 0", static_cast<double>(a));
        w[a] = static_cast<double>(counts[a]) / (static_cast<double>(n) * behavior[a]);
    }
    return WeightVector(std::move(w));
}

/// ω_NIS from counts alone: Σ_j π_test(τ_j)/π(τ_j) = Σ_τ k_τ π_test(τ)/π(τ).
inline WeightVector omega_nis_from_counts(const PathCounts& counts, const Policy& behavior, const Policy& p_test) {
    require(counts.size() == behavior.size() && counts.size() == p_test.size(), Errc::dimension_mismatch,
            "counts and policies differ in size");
    const double normalizer = pairwise_sum_of(counts.size(), [&](std::size_t a) {
        if (counts[a] == 0) return 0.0;
        require(behavior[a] > 0.0, Errc::unsupported_action,
                "action " + std::to_string(a) + " was logged but has behavior probability 0", static_cast<double>(a));
        return static_cast<double>(counts[a]) * p_test[a] / behavior[a];
    });
    require(normalizer > 0.0, Errc::zero_normalizer, "every logged action has test probability 0");
    std::vector<double> w(counts.size(), 0.0);
    for (std::size_t a = 0; a < counts.size(); ++a)
        if (counts[a] > 0) w[a] = static_cast<double>(counts[a]) / (behavior[a] * normalizer);
    return WeightVector(std::move(w));
}

inline WeightVector omega_nis(const LoggedDataset& d, const Policy& behavior, const Policy& p_test) {
    return omega_nis_from_counts(path_counts(d, behavior.size()), behavior, p_test);
}

inline WeightVector omega_ea(std::size_t num_actions) { return WeightVector::constant(num_actions, 1.0); }

/// Weight rule by kind, as a function of the path counts.
inline WeightVector omega_for(SingleEstimatorKind kind, const PathCounts& counts, const Policy& behavior,
                              const Policy& p_test) {
    switch (kind) {
        case SingleEstimatorKind::bis: return omega_bis(counts, counts.total(), behavior);
        case SingleEstimatorKind::nis: return omega_nis_from_counts(counts, behavior, p_test);
        case SingleEstimatorKind::ea: return omega_ea(counts.size());
    }
    fail(Errc::invalid_argument, "unknown estimator kind");
}

namespace detail {

inline void check_single(const LoggedDataset& d, const Policy& behavior, const Policy& p_test) {
    require(behavior.size() == p_test.size(), Errc::dimension_mismatch, "behavior and test policies differ in size");
    d.check_actions(behavior.size());
}

inline double importance_ratio(const LogRecord& r, const Policy& behavior, const Policy& p_test) {
    require(behavior[r.action] > 0.0, Errc::unsupported_action,
            "action " + std::to_string(r.action) + " was logged but has behavior probability 0",
            static_cast<double>(r.action));
    return p_test[r.action] / behavior[r.action];
}

}  // namespace detail

/// (1/N) Σ_i π_test(τ_i)/π(τ_i) · r_i
inline double estimate_bis(const LoggedDataset& d, const Policy& behavior, const Policy& p_test) {
    detail::check_single(d, behavior, p_test);
    const auto recs = d.records();
    return pairwise_sum_of(recs.size(), [&](std::size_t i) {
               return detail::importance_ratio(recs[i], behavior, p_test) * recs[i].reward;
           }) /
           static_cast<double>(recs.size());
}

/// Σ_i w_i r_i / Σ_i w_i with w_i = π_test(τ_i)/π(τ_i).
inline double estimate_nis(const LoggedDataset& d, const Policy& behavior, const Policy& p_test) {
    detail::check_single(d, behavior, p_test);
    const auto recs = d.records();
    std::vector<double> ratios(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) ratios[i] = detail::importance_ratio(recs[i], behavior, p_test);
    const double normalizer = pairwise_sum(ratios);
    require(normalizer > 0.0, Errc::zero_normalizer, "every logged action has test probability 0");
    return pairwise_sum_of(recs.size(), [&](std::size_t i) { return ratios[i] * recs[i].reward; }) / normalizer;
}

/// Σ_τ π_test(τ) r̂(τ); the behavior policy is not used.
inline double estimate_ea(const LoggedDataset& d, const Policy& behavior, const Policy& p_test) {
    detail::check_single(d, behavior, p_test);
    const auto r_hat = empirical_means(d, p_test.size());
    return pairwise_sum_of(p_test.size(), [&](std::size_t a) { return p_test[a] * r_hat[a]; });
}

inline double estimate_single(SingleEstimatorKind kind, const LoggedDataset& d, const Policy& behavior,
                              const Policy& p_test) {
    switch (kind) {
        case SingleEstimatorKind::bis: return estimate_bis(d, behavior, p_test);
        case SingleEstimatorKind::nis: return estimate_nis(d, behavior, p_test);
        case SingleEstimatorKind::ea: return estimate_ea(d, behavior, p_test);
    }
    fail(Errc::invalid_argument, "unknown estimator kind");
}

/// Closed-form NIS weight when the other actions' importance mass is replaced
/// by its expectation 1 − π_test(τ):
///     k / (k π_test(τ) + (1 − π_test(τ)) π(τ) N)
/// A weighted harmonic mean of the BIS weight k/(πN) and the EA weight 1.
inline double nis_weight_approx(std::size_t k_tau, std::size_t n, double pi_tau, double pi_test_tau) {
    const double k = static_cast<double>(k_tau);
    const double denom = k * pi_test_tau + (1.0 - pi_test_tau) * pi_tau * static_cast<double>(n);
    require(denom > 0.0 && std::isfinite(denom), Errc::degenerate_denominator, "NIS approximation denominator is not positive");
    return k / denom;
}

}  // namespace ope
