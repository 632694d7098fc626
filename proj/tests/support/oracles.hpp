#pragma once

// Reference computations written independently of the library code paths.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ope/analysis.hpp"
#include "ope/environments.hpp"
#include "ope/estimators_single.hpp"
#include "ope/oracle_weights.hpp"

namespace oracle {

using namespace ope;

inline Policy random_policy(Rng& rng, std::size_t k, double floor = 0.05) {
    std::vector<double> p(k);
    for (double& x : p) x = floor + rng.uniform();
    return Policy::renormalize(p);
}

inline OracleInputs random_inputs(Rng& rng, std::size_t k) {
    OracleInputs in;
    in.counts.counts.resize(k);
    in.mean.resize(k);
    in.variance.resize(k);
    in.p_test.resize(k);
    double total = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        in.counts.counts[a] = 1 + rng.below(20);
        in.mean[a] = rng.uniform() * 4.0 - 2.0;
        in.variance[a] = 0.05 + rng.uniform() * 3.0;
        total += in.p_test[a] = 0.02 + rng.uniform();
    }
    for (double& p : in.p_test) p /= total;
    return in;
}

/// Fixed-path MSE of a weight vector.
inline double objective(const OracleInputs& in, const Eigen::VectorXd& w) {
    double bias = 0.0, var = 0.0;
    for (std::size_t a = 0; a < in.size(); ++a) {
        const auto i = static_cast<Eigen::Index>(a);
        bias += (w(i) - 1.0) * in.p_test[a] * in.mean[a];
        var += w(i) * w(i) * in.p_test[a] * in.p_test[a] * in.variance[a] / static_cast<double>(in.counts[a]);
    }
    return bias * bias + var;
}

/// Stationary point of the quadratic: (u uᵀ + D) ω = u (uᵀ 1).
inline Eigen::VectorXd quadratic_minimizer(const OracleInputs& in) {
    const auto k = static_cast<Eigen::Index>(in.size());
    Eigen::VectorXd u(k);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        const auto s = static_cast<std::size_t>(a);
        u(a) = in.p_test[s] * in.mean[s];
        h(a, a) = in.p_test[s] * in.p_test[s] * in.variance[s] / static_cast<double>(in.counts[s]);
    }
    h += u * u.transpose();
    return h.ldlt().solve(u * u.sum());
}

/// min Σ c_i α_i² subject to Σ α_i = 1, via the KKT system.
inline Eigen::VectorXd simplex_minimizer(const std::vector<double>& c) {
    const auto n = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        kkt(i, i) = 2.0 * c[static_cast<std::size_t>(i)];
        kkt(i, n) = 1.0;
        kkt(n, i) = 1.0;
    }
    rhs(n) = 1.0;
    return kkt.fullPivLu().solve(rhs).head(n);
}

/// Per-record variance coefficients of an unbiased α column for one action.
inline std::vector<double> alpha_cost(std::span<const double> probs, double r_bar, double v_r) {
    std::vector<double> c(probs.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = r_bar * r_bar * (1.0 / probs[i] - 1.0) + v_r / probs[i];
    return c;
}

inline PolicyFamily random_family(Rng& rng, std::size_t k, std::size_t m) {
    std::vector<Policy> ps;
    for (std::size_t j = 0; j < m; ++j) ps.push_back(random_policy(rng, k, 0.02));
    return PolicyFamily::blocked(std::move(ps), 1 + rng.below(3));
}

/// Single-policy problem with two-point rewards r̄ ± sd.
struct TwoPointInstance {
    Policy behavior;
    Policy p_test;
    std::vector<double> mean;
    std::vector<double> sd;
    RewardModel rm;
};

inline TwoPointInstance random_two_point_instance(Rng& rng, std::size_t k) {
    std::vector<double> mean(k), var(k), sd(k);
    for (std::size_t a = 0; a < k; ++a) {
        mean[a] = rng.uniform() * 4 - 2;
        var[a] = rng.uniform() * 2;
        sd[a] = std::sqrt(var[a]);
    }
    auto behavior = random_policy(rng, k);
    auto test = random_policy(rng, k);
    return {behavior, test, mean, sd, two_point_reward_model(mean, var)};
}

/// Exact variance of the weight-form estimator by enumerating every ordered
/// path of N actions and every ± outcome of the two-point rewards.
inline double brute_force_variance(const TwoPointInstance& in, std::size_t n, const WeightRule& rule) {
    const std::size_t k = in.behavior.size();
    std::vector<double> probs, values;
    std::vector<std::size_t> path(n, 0);
    for (;;) {
        double p_path = 1.0;
        for (auto a : path) p_path *= in.behavior[a];
        if (p_path > 0.0) {
            PathCounts counts{std::vector<std::size_t>(k, 0)};
            for (auto a : path) ++counts.counts[a];
            const auto w = rule(counts);
            for (std::size_t signs = 0; signs < (std::size_t{1} << n); ++signs) {
                std::vector<double> sum(k, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    const double s = (signs >> i) & 1 ? 1.0 : -1.0;
                    sum[path[i]] += in.mean[path[i]] + s * in.sd[path[i]];
                }
                std::vector<double> r_hat(k, 0.0);
                for (std::size_t a = 0; a < k; ++a)
                    if (counts[a] > 0) r_hat[a] = sum[a] / static_cast<double>(counts[a]);
                probs.push_back(p_path / static_cast<double>(std::size_t{1} << n));
                values.push_back(estimate_weighted(w, in.p_test, r_hat));
            }
        }
        std::size_t pos = 0;
        while (pos < n && ++path[pos] == k) path[pos++] = 0;
        if (pos == n) break;
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) mean += probs[i] * values[i];
    double var = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) var += probs[i] * (values[i] - mean) * (values[i] - mean);
    return var;
}

/// BIS, NIS at the path's counts, and EA, in that order.
inline std::vector<std::pair<const char*, WeightRule>> single_policy_rules(const TwoPointInstance& in) {
    return {
        {"BIS", [&in](const PathCounts& c) { return omega_bis(c, c.total(), in.behavior); }},
        {"NIS", [&in](const PathCounts& c) { return omega_nis_from_counts(c, in.behavior, in.p_test); }},
        {"EA", [](const PathCounts& c) { return omega_ea(c.size()); }},
    };
}

/// Sample mean, its standard error, the unbiased sample variance and the
/// standard error of that variance.
struct Moments {
    double mean = 0.0;
    double se = 0.0;
    double var = 0.0;
    double var_se = 0.0;
};

inline Moments moments(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    double m = 0.0;
    for (double x : xs) m += x;
    m /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = (x - m) * (x - m);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    const double var = m2 * n / (n - 1.0);
    return {m, std::sqrt(var / n), var, std::sqrt(std::max(0.0, m4 - m2 * m2) / n)};
}

}  // namespace oracle
