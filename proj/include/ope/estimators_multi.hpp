#pragma once

// Estimators for data logged by several behavior policies, one per record.
//
// All unbiased members are stored in the convention
//
//     Ĵ = Σ_i α^i(τ_i) · π_test(τ_i) / π_i(τ_i) · r_i,     Σ_i α^i(τ) = 1
//
// so BIS has α = 1/N, FIS has α^i(τ) = π_i(τ) / Σ_j π_j(τ) and OUIS uses the
// minimum-variance weights from oracle_weights.hpp.

#include <algorithm>
#include <optional>
#include <string_view>

#include "ope/core.hpp"
#include "ope/oracle_weights.hpp"
#include "ope/policy_family.hpp"

namespace ope {

enum class MultiEstimatorKind { bis, fis, ouis, nbis, nfis, nouis, bcis, nbcis };

constexpr std::string_view to_string(MultiEstimatorKind kind) noexcept {
    switch (kind) {
        case MultiEstimatorKind::bis: return "BIS";
        case MultiEstimatorKind::fis: return "FIS";
        case MultiEstimatorKind::ouis: return "OUIS";
        case MultiEstimatorKind::nbis: return "NBIS";
        case MultiEstimatorKind::nfis: return "NFIS";
        case MultiEstimatorKind::nouis: return "NOUIS";
        case MultiEstimatorKind::bcis: return "BCIS";
        case MultiEstimatorKind::nbcis: return "NBCIS";
    }
    return "?";
}

inline constexpr double kDefaultCap = 10.0;

struct CapConfig {
    double cap = kDefaultCap;

    explicit CapConfig(double m = kDefaultCap) : cap(m) {
        require(m > 0.0 && !std::isnan(m), Errc::invalid_argument, "cap must be positive");
    }
};

/// α^i(τ) for every record i and action τ, row-major by record.
class AlphaWeights {
public:
    AlphaWeights(std::size_t records, std::size_t actions)
        : records_(records), actions_(actions), values_(records * actions, 0.0) {}

    std::size_t records() const noexcept { return records_; }
    std::size_t actions() const noexcept { return actions_; }
    double& at(std::size_t record, std::size_t action) { return values_[record * actions_ + action]; }
    double at(std::size_t record, std::size_t action) const { return values_[record * actions_ + action]; }

    /// Largest |Σ_i α^i(τ) − 1| over actions.
    double max_sum_deviation() const {
        double worst = 0.0;
        for (std::size_t a = 0; a < actions_; ++a) {
            const double s = pairwise_sum_of(records_, [&](std::size_t i) { return at(i, a); });
            worst = std::max(worst, std::abs(s - 1.0));
        }
        return worst;
    }

private:
    std::size_t records_;
    std::size_t actions_;
    std::vector<double> values_;
};

inline AlphaWeights alpha_bis(const PolicyFamily& fam) {
    AlphaWeights alpha(fam.num_records(), fam.num_actions());
    const double share = 1.0 / static_cast<double>(fam.num_records());
    for (std::size_t i = 0; i < alpha.records(); ++i)
        for (std::size_t a = 0; a < alpha.actions(); ++a) alpha.at(i, a) = share;
    return alpha;
}

inline AlphaWeights alpha_fis(const PolicyFamily& fam) {
    AlphaWeights alpha(fam.num_records(), fam.num_actions());
    for (std::size_t a = 0; a < alpha.actions(); ++a) {
        const double fused = fam.fused_mass(a);
        require(fused > 0.0, Errc::zero_fused_mass, "no behavior policy supports action " + std::to_string(a),
                static_cast<double>(a));
        for (std::size_t i = 0; i < alpha.records(); ++i) alpha.at(i, a) = fam.record_policy(i)[a] / fused;
    }
    return alpha;
}

inline AlphaWeights alpha_ouis(const PolicyFamily& fam, std::span<const double> means,
                               std::span<const double> variances) {
    require(means.size() == fam.num_actions() && variances.size() == fam.num_actions(), Errc::dimension_mismatch,
            "reward moments and family differ in action count");
    AlphaWeights alpha(fam.num_records(), fam.num_actions());
    for (std::size_t a = 0; a < alpha.actions(); ++a) {
        const auto column = optimal_unbiased_alphas(a, fam, means[a], variances[a]);
        for (std::size_t i = 0; i < alpha.records(); ++i) alpha.at(i, a) = column[i];
    }
    return alpha;
}

namespace detail {

inline void check_multi(const LoggedDataset& d, const PolicyFamily& fam, const Policy& p_test) {
    require(p_test.size() == fam.num_actions(), Errc::dimension_mismatch, "test policy and family differ in size");
    d.check_actions(fam.num_actions());
    for (const auto& r : d.records())
        require(r.policy_id < fam.num_policies(), Errc::invalid_policy_id,
                "record references policy " + std::to_string(r.policy_id), static_cast<double>(r.policy_id));
}

inline double own_ratio(const LogRecord& r, const PolicyFamily& fam, const Policy& p_test) {
    const double own = fam.policy(r.policy_id)[r.action];
    require(own > 0.0, Errc::unsupported_action,
            "record's own policy gives action " + std::to_string(r.action) + " probability 0",
            static_cast<double>(r.action));
    return p_test[r.action] / own;
}

/// Σ_τ π_j(τ) per action, with the records' policies taken from the dataset.
inline std::vector<double> fused_mass_of_records(const LoggedDataset& d, const PolicyFamily& fam) {
    std::vector<double> fused(fam.num_actions(), 0.0);
    for (std::size_t a = 0; a < fused.size(); ++a)
        fused[a] = pairwise_sum_of(d.size(), [&](std::size_t i) { return fam.policy(d[i].policy_id)[a]; });
    return fused;
}

}  // namespace detail

/// (1/N) Σ_i π_test(τ_i)/π_i(τ_i) · r_i
inline double estimate_bis_multi(const LoggedDataset& d, const PolicyFamily& fam, const Policy& p_test) {
    detail::check_multi(d, fam, p_test);
    return pairwise_sum_of(d.size(), [&](std::size_t i) { return detail::own_ratio(d[i], fam, p_test) * d[i].reward; }) /
           static_cast<double>(d.size());
}

/// Σ_i π_test(τ_i) / Σ_j π_j(τ_i) · r_i: each record is weighted by the
/// mixture of all behavior policies instead of its own.
inline double estimate_fis(const LoggedDataset& d, const PolicyFamily& fam, const Policy& p_test) {
    detail::check_multi(d, fam, p_test);
    const auto fused = detail::fused_mass_of_records(d, fam);
    return pairwise_sum_of(d.size(), [&](std::size_t i) {
        const auto a = d[i].action;
        require(fused[a] > 0.0, Errc::zero_fused_mass, "no behavior policy supports action " + std::to_string(a),
                static_cast<double>(a));
        return p_test[a] / fused[a] * d[i].reward;
    });
}

/// Σ_i α^i(τ_i) π_test(τ_i)/π_i(τ_i) r_i for arbitrary per-record weights.
inline double estimate_with_alphas(const LoggedDataset& d, const PolicyFamily& fam, const Policy& p_test,
                                   const AlphaWeights& alpha) {
    detail::check_multi(d, fam, p_test);
    require(alpha.records() == d.size() && alpha.actions() == fam.num_actions(), Errc::dimension_mismatch,
            "alpha weights do not match the dataset");
    return pairwise_sum_of(d.size(), [&](std::size_t i) {
        return alpha.at(i, d[i].action) * detail::own_ratio(d[i], fam, p_test) * d[i].reward;
    });
}

namespace detail {

/// α_opt^i(τ_i) · π_test(τ_i)/π_i(τ_i) for every record.
inline std::vector<double> ouis_record_weights(const LoggedDataset& d, const PolicyFamily& fam, const Policy& p_test,
                                               std::span<const double> means, std::span<const double> variances) {
    require(means.size() == fam.num_actions() && variances.size() == fam.num_actions(), Errc::dimension_mismatch,
            "reward moments and family differ in action count");
    // Per-action column of optimal α over records, computed once per logged action.
    std::vector<std::optional<std::vector<double>>> columns(fam.num_actions());
    std::vector<double> w(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto a = d[i].action;
        if (!columns[a]) columns[a] = optimal_unbiased_alphas(a, fam, means[a], variances[a]);
        w[i] = (*columns[a])[i] * own_ratio(d[i], fam, p_test);
    }
    return w;
}

}  // namespace detail

/// Optimal unbiased importance sampling with oracle reward moments.
inline double estimate_ouis(const LoggedDataset& d, const PolicyFamily& fam, const Policy& p_test,
                            std::span<const double> means, std::span<const double> variances) {
    detail::check_multi(d, fam, p_test);
    require(d.size() == fam.num_records(), Errc::dimension_mismatch, "OUIS needs one family record per logged record");
    for (std::size_t i = 0; i < d.size(); ++i)
        require(d[i].policy_id == fam.assignment()[i], Errc::invalid_policy_id,
                "record " + std::to_string(i) + " disagrees with the family assignment", static_cast<double>(i));
    const auto w = detail::ouis_record_weights(d, fam, p_test, means, variances);
    return pairwise_sum_of(d.size(), [&](std::size_t i) { return w[i] * d[i].reward; });
}

inline double estimate_ouis(const LoggedDataset& d, const PolicyFamily& fam, const Policy& p_test,
                            const RewardModel& rm) {
    return estimate_ouis(d, fam, p_test, rm.means(), rm.variances());
}

/// min(w, cap) elementwise, order preserved.
inline std::vector<double> cap_ratios(std::span<const double> ratios, const CapConfig& c) {
    std::vector<double> out(ratios.begin(), ratios.end());
    for (double& w : out) w = std::min(w, c.cap);
    return out;
}

/// Capped BIS: (1/N) Σ_i min(π_test/π_i, cap) r_i.
inline double estimate_bcis(const LoggedDataset& d, const PolicyFamily& fam, const Policy& p_test,
                            const CapConfig& c = CapConfig{}) {
    detail::check_multi(d, fam, p_test);
    std::vector<double> ratios(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) ratios[i] = detail::own_ratio(d[i], fam, p_test);
    const auto capped = cap_ratios(ratios, c);
    return pairwise_sum_of(d.size(), [&](std::size_t i) { return capped[i] * d[i].reward; }) /
           static_cast<double>(d.size());
}

/// Which per-record weights to self-normalize.
enum class NormalizedBase { bis, fis, ouis, capped_bis };

/// Σ_i w_i r_i / Σ_i w_i with w_i the record's total weight under `base`.
/// `means`/`variances` are only read for the OUIS base.
inline double normalize_estimator(NormalizedBase base, const LoggedDataset& d, const PolicyFamily& fam,
                                  const Policy& p_test, std::span<const double> means = {},
                                  std::span<const double> variances = {}, const CapConfig& c = CapConfig{}) {
    detail::check_multi(d, fam, p_test);
    std::vector<double> w(d.size());
    switch (base) {
        case NormalizedBase::bis:
            for (std::size_t i = 0; i < d.size(); ++i) w[i] = detail::own_ratio(d[i], fam, p_test);
            break;
        case NormalizedBase::capped_bis:
            for (std::size_t i = 0; i < d.size(); ++i) w[i] = std::min(detail::own_ratio(d[i], fam, p_test), c.cap);
            break;
        case NormalizedBase::fis: {
            const auto fused = detail::fused_mass_of_records(d, fam);
            for (std::size_t i = 0; i < d.size(); ++i) {
                const auto a = d[i].action;
                require(fused[a] > 0.0, Errc::zero_fused_mass, "no behavior policy supports action " + std::to_string(a));
                w[i] = p_test[a] / fused[a];
            }
            break;
        }
        case NormalizedBase::ouis:
            w = detail::ouis_record_weights(d, fam, p_test, means, variances);
            break;
    }
    const double mass = pairwise_sum(w);
    require(mass > 0.0, Errc::zero_normalizer, "total importance weight is zero");
    return pairwise_sum_of(d.size(), [&](std::size_t i) { return w[i] * d[i].reward; }) / mass;
}

/// Dispatch over every multi-policy estimator. `rm` supplies the oracle
/// moments needed by the OUIS variants.
inline double estimate_multi(MultiEstimatorKind kind, const LoggedDataset& d, const PolicyFamily& fam,
                             const Policy& p_test, const RewardModel& rm, const CapConfig& c = CapConfig{}) {
    switch (kind) {
        case MultiEstimatorKind::bis: return estimate_bis_multi(d, fam, p_test);
        case MultiEstimatorKind::fis: return estimate_fis(d, fam, p_test);
        case MultiEstimatorKind::ouis: return estimate_ouis(d, fam, p_test, rm);
        case MultiEstimatorKind::nbis: return normalize_estimator(NormalizedBase::bis, d, fam, p_test);
        case MultiEstimatorKind::nfis: return normalize_estimator(NormalizedBase::fis, d, fam, p_test);
        case MultiEstimatorKind::nouis:
            return normalize_estimator(NormalizedBase::ouis, d, fam, p_test, rm.means(), rm.variances());
        case MultiEstimatorKind::bcis: return estimate_bcis(d, fam, p_test, c);
        case MultiEstimatorKind::nbcis: return normalize_estimator(NormalizedBase::capped_bis, d, fam, p_test, {}, {}, c);
    }
    fail(Errc::invalid_argument, "unknown estimator kind");
}

}  // namespace ope
