#pragma once

// Synthetic data generators.
//
// Action indices are 0-based throughout. The scaled-Bernoulli environment is
// defined on 1-based actions i = 1..K; internal action a corresponds to
// i = a + 1, so the two peaks "K and K/2" of the test policy are 0-based
// actions K−1 and K/2−1.

#include <algorithm>
#include <cmath>
#include <utility>

#include "ope/core.hpp"
#include "ope/policy_family.hpp"

namespace ope {

/// r(τ) = Z(τ)/√p with probability p, else 0. Hence r̄ = √p Z and V_r = (1−p) Z².
struct ScaledBernoulliEnv {
    std::size_t num_actions = 0;
    double p = 1.0;
    std::vector<double> z;

    double mean(std::size_t a) const { return std::sqrt(p) * z[a]; }
    double variance(std::size_t a) const { return (1.0 - p) * z[a] * z[a]; }

    RewardModel reward_model() const {
        std::vector<double> means(num_actions), vars(num_actions);
        for (std::size_t a = 0; a < num_actions; ++a) {
            means[a] = mean(a);
            vars[a] = variance(a);
        }
        const double prob = p;
        const double scale = 1.0 / std::sqrt(p);
        auto levels = z;
        return RewardModel(std::move(means), std::move(vars),
                           [prob, scale, levels = std::move(levels)](std::size_t a, Rng& rng) {
                               return rng.bernoulli(prob) ? levels[a] * scale : 0.0;
                           });
    }
};

/// Z(i) = i/K for i ≤ K/2 and Z(i) = Z(K − i) above, with Z(0) = 0 so the
/// last action carries no reward.
inline ScaledBernoulliEnv make_scaled_bernoulli(std::size_t k, double p) {
    require(p > 0.0 && p <= 1.0, Errc::invalid_p, "success probability must lie in (0, 1]", p);
    require(k >= 2 && k % 2 == 0, Errc::odd_k, "action count must be even and at least 2", static_cast<double>(k));
    ScaledBernoulliEnv env{k, p, std::vector<double>(k)};
    const double kd = static_cast<double>(k);
    for (std::size_t i = 1; i <= k; ++i) {
        const std::size_t level = i <= k / 2 ? i : k - i;
        env.z[i - 1] = static_cast<double>(level) / kd;
    }
    return env;
}

/// π(i) = 2i / (K(K+1)) for 1-based i: later actions are sampled more often.
inline Policy behavior_policy_linear(std::size_t k) {
    require(k >= 1, Errc::empty_input, "policy has no actions");
    const double denom = static_cast<double>(k) * static_cast<double>(k + 1);
    std::vector<double> p(k);
    for (std::size_t i = 1; i <= k; ++i) p[i - 1] = 2.0 * static_cast<double>(i) / denom;
    return Policy::validate(std::move(p));
}

/// Two peaks with `peak_mass` each; the rest is spread evenly over the other K−2 actions.
inline Policy peaked_test_policy(std::size_t k, std::pair<std::size_t, std::size_t> peaks, double peak_mass) {
    require(peak_mass > 0.0 && peak_mass <= 0.5, Errc::invalid_argument, "peak mass must lie in (0, 0.5]", peak_mass);
    require(peaks.first < k && peaks.second < k, Errc::action_out_of_range, "peak index outside the action set");
    require(peaks.first != peaks.second, Errc::index_clash, "the two peaks must be distinct actions");
    const double rest = 1.0 - 2.0 * peak_mass;
    require(k > 2 || rest == 0.0, Errc::invalid_argument, "two actions leave no room for the remaining mass");
    std::vector<double> p(k, k > 2 ? rest / static_cast<double>(k - 2) : 0.0);
    p[peaks.first] = peak_mass;
    p[peaks.second] = peak_mass;
    return Policy::validate(std::move(p));
}

/// Test policy of the figure1 experiment: peaks on 1-based actions K and K/2.
inline Policy default_peaked_test_policy(std::size_t k, double peak_mass = 0.475) {
    return peaked_test_policy(k, {k - 1, k / 2 - 1}, peak_mass);
}

/// Rewards r̄(τ) ± √V_r(τ) with equal probability: exact first two moments.
inline RewardModel two_point_reward_model(std::vector<double> means, std::vector<double> variances) {
    std::vector<double> spread(variances.size());
    for (std::size_t a = 0; a < spread.size(); ++a)
        spread[a] = variances[a] >= 0.0 ? std::sqrt(variances[a]) : 0.0;
    auto centers = means;
    return RewardModel(std::move(means), std::move(variances),
                       [centers = std::move(centers), spread = std::move(spread)](std::size_t a, Rng& rng) {
                           return rng.bernoulli(0.5) ? centers[a] + spread[a] : centers[a] - spread[a];
                       });
}

/// Non-adaptive logging: N records, τ_i ~ π, r_i from the reward model.
inline LoggedDataset sample_dataset(const RewardModel& rm, const Policy& behavior, std::size_t n, Rng& rng) {
    require(n >= 1, Errc::empty_input, "a logged dataset needs at least one record");
    require(rm.size() == behavior.size(), Errc::dimension_mismatch, "reward model and policy differ in size");
    const Categorical draw(behavior.probabilities());
    std::vector<LogRecord> recs(n);
    for (auto& r : recs) {
        r.action = draw(rng);
        r.reward = rm.sample(r.action, rng);
        r.policy_id = 0;
    }
    return LoggedDataset(std::move(recs));
}

/// One record per family assignment; record i uses policy assignment[i].
inline LoggedDataset sample_dataset(const RewardModel& rm, const PolicyFamily& fam, Rng& rng) {
    require(rm.size() == fam.num_actions(), Errc::dimension_mismatch, "reward model and family differ in size");
    std::vector<Categorical> draws;
    draws.reserve(fam.num_policies());
    for (const auto& p : fam.policies()) draws.emplace_back(p.probabilities());
    std::vector<LogRecord> recs(fam.num_records());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto m = fam.assignment()[i];
        recs[i].action = draws[m](rng);
        recs[i].reward = rm.sample(recs[i].action, rng);
        recs[i].policy_id = m;
    }
    return LoggedDataset(std::move(recs));
}

inline LoggedDataset sample_dataset(const RewardModel& rm, const Policy& behavior, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return sample_dataset(rm, behavior, n, rng);
}

inline LoggedDataset sample_dataset(const RewardModel& rm, const PolicyFamily& fam, std::uint64_t seed) {
    Rng rng(seed);
    return sample_dataset(rm, fam, rng);
}

inline constexpr std::size_t kDefaultAdaptiveCap = 10'000;

/// One episode of the stop-at-first-zero logger on a Bernoulli(1/2) action.
struct AdaptiveStopLog {
    std::vector<int> draws;
    bool cap_hit = false;

    std::size_t length() const noexcept { return draws.size(); }

    /// Empirical average of the episode's rewards.
    double ea_estimate() const {
        std::size_t ones = 0;
        for (int d : draws) ones += d == 1 ? 1 : 0;
        return static_cast<double>(ones) / static_cast<double>(draws.size());
    }

    /// Importance-weighted first reward. The first draw is taken with
    /// probability 1 regardless of the data, so this is unbiased for r̄.
    double first_draw_estimate() const { return static_cast<double>(draws.front()); }
};

inline AdaptiveStopLog sample_adaptive_stop(Rng& rng, std::size_t cap = kDefaultAdaptiveCap) {
    require(cap >= 1, Errc::invalid_argument, "episode cap must be at least 1");
    AdaptiveStopLog log;
    while (log.draws.size() < cap) {
        const int r = rng.bernoulli(0.5) ? 1 : 0;
        log.draws.push_back(r);
        if (r == 0) return log;
    }
    log.cap_hit = true;
    return log;
}

inline AdaptiveStopLog sample_adaptive_stop(std::uint64_t seed, std::size_t cap = kDefaultAdaptiveCap) {
    Rng rng(seed);
    return sample_adaptive_stop(rng, cap);
}

inline constexpr double kFamilyProbabilityFloor = 1e-4;

/// M policies blending uniform with independent random peaked distributions:
///     π_m = floor + (1 − K·floor) · ((1 − spread) · uniform + spread · q_m)
/// with q_m ∝ e³, e ~ Exp(1), and floor = 1e-4 so every action keeps support.
/// spread = 0 gives M identical uniform policies; larger spread makes the
/// policies increasingly dissimilar.
inline PolicyFamily make_policy_family(std::size_t k, std::size_t m, double spread, std::uint64_t seed,
                                       std::size_t per_policy = 1) {
    require(k >= 1 && m >= 1, Errc::invalid_argument, "need at least one action and one policy");
    require(spread >= 0.0 && spread <= 1.0, Errc::invalid_argument, "spread must lie in [0, 1]", spread);
    require(static_cast<double>(k) * kFamilyProbabilityFloor < 1.0, Errc::invalid_argument,
            "too many actions for the probability floor");
    std::vector<Policy> policies;
    policies.reserve(m);
    const double uniform = 1.0 / static_cast<double>(k);
    for (std::size_t j = 0; j < m; ++j) {
        if (spread == 0.0) {
            policies.push_back(Policy::uniform(k));
            continue;
        }
        Rng rng = stream(seed, j);
        std::vector<double> q(k);
        for (double& x : q) {
            const double e = -std::log1p(-rng.uniform());
            x = e * e * e;
        }
        const double total = pairwise_sum(q);
        std::vector<double> p(k);
        const double free_mass = 1.0 - static_cast<double>(k) * kFamilyProbabilityFloor;
        for (std::size_t a = 0; a < k; ++a)
            p[a] = kFamilyProbabilityFloor + free_mass * ((1.0 - spread) * uniform + spread * q[a] / total);
        policies.push_back(Policy::validate(std::move(p)));
    }
    return PolicyFamily::blocked(std::move(policies), per_policy);
}

/// A random multi-policy problem with full support and two-point rewards.
struct MultiPolicyInstance {
    PolicyFamily family;
    Policy p_test;
    RewardModel rewards;
};

struct InstanceLimits {
    std::size_t max_actions = 5;
    std::size_t max_policies = 10;
    /// Every probability is at least (1 − max_mix)/K.
    double max_mix = 0.9;
    double min_mean = -1.0;
    double max_mean = 2.0;
    double max_variance = 1.0;
};

namespace detail {

inline std::vector<double> mixed_dirichlet(std::size_t k, double mix, Rng& rng) {
    std::vector<double> q(k);
    for (double& x : q) x = -std::log1p(-rng.uniform());
    const double total = pairwise_sum(q);
    const double uniform = 1.0 / static_cast<double>(k);
    for (double& x : q) x = (1.0 - mix) * uniform + mix * x / total;
    return q;
}

}  // namespace detail

/// K ∈ [2, max_actions] and M ∈ [2, max_policies], one record per policy.
/// Policies and the test policy mix a flat Dirichlet draw with uniform.
inline MultiPolicyInstance random_multi_instance(Rng& rng, const InstanceLimits& lim = {}) {
    require(lim.max_actions >= 2 && lim.max_policies >= 2, Errc::invalid_argument,
            "instances need at least two actions and two policies");
    require(lim.max_mix >= 0.0 && lim.max_mix < 1.0, Errc::invalid_argument, "max_mix must lie in [0, 1)");
    const std::size_t k = 2 + rng.below(lim.max_actions - 1);
    const std::size_t m = 2 + rng.below(lim.max_policies - 1);
    const double mix = lim.max_mix * rng.uniform();
    std::vector<Policy> policies;
    policies.reserve(m);
    for (std::size_t j = 0; j < m; ++j) policies.push_back(Policy::renormalize(detail::mixed_dirichlet(k, mix, rng)));
    Policy p_test = Policy::renormalize(detail::mixed_dirichlet(k, lim.max_mix * rng.uniform(), rng));
    std::vector<double> means(k), vars(k);
    for (std::size_t a = 0; a < k; ++a) {
        means[a] = lim.min_mean + (lim.max_mean - lim.min_mean) * rng.uniform();
        vars[a] = lim.max_variance * rng.uniform();
    }
    return {PolicyFamily::blocked(std::move(policies), 1), std::move(p_test),
            two_point_reward_model(std::move(means), std::move(vars))};
}

}  // namespace ope
