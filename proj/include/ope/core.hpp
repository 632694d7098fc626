#pragma once

// Domain types shared by every estimator: policies over a finite action set,
// reward models, logged datasets and the per-action statistics derived from
// them. All types are immutable after construction.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ope/error.hpp"
#include "ope/random.hpp"

namespace ope {

inline constexpr double kNormalizationTolerance = 1e-12;

/// Pairwise (cascade) summation; error grows as O(log n) instead of O(n).
inline double pairwise_sum(std::span<const double> xs) {
    constexpr std::size_t kBlock = 32;
    if (xs.size() <= kBlock) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

/// Pairwise sum of f(i) for i in [0, n).
template <class F>
double pairwise_sum_of(std::size_t n, F&& f) {
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) terms[i] = f(i);
    return pairwise_sum(terms);
}

struct ActionSet {
    std::size_t size;

    explicit ActionSet(std::size_t k) : size(k) {
        require(k >= 1, Errc::invalid_argument, "action set must contain at least one action");
    }
};

class Policy {
public:
    /// Accepts `raw` only if it is already a probability vector; never rescales.
    static Policy validate(std::vector<double> raw) {
        require(!raw.empty(), Errc::empty_input, "policy has no actions");
        for (std::size_t i = 0; i < raw.size(); ++i) {
            require(raw[i] >= 0.0 && std::isfinite(raw[i]), Errc::negative_probability,
                    "probability of action " + std::to_string(i) + " is " + std::to_string(raw[i]),
                    static_cast<double>(i));
            if (raw[i] == 0.0) raw[i] = 0.0;  // folds -0.0
        }
        const double deviation = std::abs(pairwise_sum(raw) - 1.0);
        require(deviation <= kNormalizationTolerance, Errc::not_normalized,
                "probabilities sum deviates from 1 by " + std::to_string(deviation), deviation);
        return Policy(std::move(raw));
    }

    /// Explicit rescaling for user-supplied data such as empirical frequencies.
    static Policy renormalize(std::vector<double> raw) {
        require(!raw.empty(), Errc::empty_input, "policy has no actions");
        for (std::size_t i = 0; i < raw.size(); ++i)
            require(raw[i] >= 0.0 && std::isfinite(raw[i]), Errc::negative_probability,
                    "probability of action " + std::to_string(i) + " is negative", static_cast<double>(i));
        const double total = pairwise_sum(raw);
        require(total > 0.0, Errc::not_normalized, "cannot renormalize an all-zero vector", 1.0);
        for (double& p : raw) p /= total;
        return validate(std::move(raw));
    }

    static Policy uniform(std::size_t k) {
        require(k >= 1, Errc::empty_input, "policy has no actions");
        return Policy(std::vector<double>(k, 1.0 / static_cast<double>(k)));
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t action) const { return probs_[action]; }
    std::span<const double> probabilities() const noexcept { return probs_; }

    friend bool operator==(const Policy&, const Policy&) = default;

private:
    explicit Policy(std::vector<double> probs) : probs_(std::move(probs)) {}
    std::vector<double> probs_;
};

/// Per-action reward distribution: its first two moments plus a sampler.
class RewardModel {
public:
    using Sampler = std::function<double(std::size_t action, Rng& rng)>;

    RewardModel(std::vector<double> means, std::vector<double> variances, Sampler sampler)
        : means_(std::move(means)), variances_(std::move(variances)), sampler_(std::move(sampler)) {
        require(!means_.empty(), Errc::empty_input, "reward model has no actions");
        require(means_.size() == variances_.size(), Errc::dimension_mismatch, "means and variances differ in length");
        for (double v : variances_)
            require(v >= 0.0 && std::isfinite(v), Errc::invalid_argument, "reward variance must be finite and >= 0");
        require(static_cast<bool>(sampler_), Errc::invalid_argument, "reward model needs a sampler");
    }

    std::size_t size() const noexcept { return means_.size(); }
    double mean(std::size_t action) const { return means_[action]; }
    double variance(std::size_t action) const { return variances_[action]; }
    std::span<const double> means() const noexcept { return means_; }
    std::span<const double> variances() const noexcept { return variances_; }

    double sample(std::size_t action, Rng& rng) const { return sampler_(action, rng); }

private:
    std::vector<double> means_;
    std::vector<double> variances_;
    Sampler sampler_;
};

struct LogRecord {
    std::size_t action = 0;
    double reward = 0.0;
    std::size_t policy_id = 0;

    friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

class LoggedDataset {
public:
    explicit LoggedDataset(std::vector<LogRecord> records) : records_(std::move(records)) {
        require(!records_.empty(), Errc::empty_input, "a logged dataset needs at least one record");
    }

    /// Single-policy convenience: every record gets policy_id 0.
    static LoggedDataset from_actions(std::span<const std::size_t> actions, std::span<const double> rewards) {
        require(actions.size() == rewards.size(), Errc::dimension_mismatch, "actions and rewards differ in length");
        std::vector<LogRecord> recs(actions.size());
        for (std::size_t i = 0; i < actions.size(); ++i) recs[i] = {actions[i], rewards[i], 0};
        return LoggedDataset(std::move(recs));
    }

    std::size_t size() const noexcept { return records_.size(); }
    const LogRecord& operator[](std::size_t i) const { return records_[i]; }
    std::span<const LogRecord> records() const noexcept { return records_; }

    void check_actions(std::size_t num_actions) const {
        for (const auto& r : records_)
            require(r.action < num_actions, Errc::action_out_of_range,
                    "action " + std::to_string(r.action) + " outside [0, " + std::to_string(num_actions) + ")",
                    static_cast<double>(r.action));
    }

    friend bool operator==(const LoggedDataset&, const LoggedDataset&) = default;

private:
    std::vector<LogRecord> records_;
};

/// k(τ, s): how many times each action appears in the sampled path.
struct PathCounts {
    std::vector<std::size_t> counts;

    std::size_t size() const noexcept { return counts.size(); }
    std::size_t operator[](std::size_t action) const { return counts[action]; }
    std::size_t total() const {
        std::size_t n = 0;
        for (auto c : counts) n += c;
        return n;
    }
};

/// ω(τ, s): per-action multipliers applied to π_test(τ)·r̂(τ).
class WeightVector {
public:
    explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {
        for (double x : w_) require(std::isfinite(x), Errc::invalid_argument, "weight is not finite");
    }

    static WeightVector constant(std::size_t k, double value) { return WeightVector(std::vector<double>(k, value)); }

    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t action) const { return w_[action]; }
    std::span<const double> values() const noexcept { return w_; }

private:
    std::vector<double> w_;
};

inline PathCounts path_counts(const LoggedDataset& d, std::size_t num_actions) {
    d.check_actions(num_actions);
    PathCounts pc{std::vector<std::size_t>(num_actions, 0)};
    for (const auto& r : d.records()) ++pc.counts[r.action];
    return pc;
}

/// r̂(τ): mean logged reward per action, 0 for actions never sampled.
inline std::vector<double> empirical_means(const LoggedDataset& d, std::size_t num_actions) {
    d.check_actions(num_actions);
    std::vector<std::vector<double>> per_action(num_actions);
    for (const auto& r : d.records()) per_action[r.action].push_back(r.reward);
    std::vector<double> means(num_actions, 0.0);
    for (std::size_t a = 0; a < num_actions; ++a) {
        const auto& xs = per_action[a];
        if (xs.empty()) continue;
        // Exact on constant rewards: mean of c repeated k times must be c.
        bool constant = true;
        for (double x : xs) constant = constant && x == xs.front();
        means[a] = constant ? xs.front() : pairwise_sum(xs) / static_cast<double>(xs.size());
    }
    return means;
}

/// J(π_test) = Σ_τ π_test(τ) r̄(τ).
inline double true_value(const Policy& p_test, std::span<const double> mean_rewards) {
    require(p_test.size() == mean_rewards.size(), Errc::dimension_mismatch, "policy and reward means differ in size");
    return pairwise_sum_of(p_test.size(), [&](std::size_t a) { return p_test[a] * mean_rewards[a]; });
}

inline double true_value(const Policy& p_test, const RewardModel& rm) { return true_value(p_test, rm.means()); }

/// Probability mass π_test puts on actions the dataset never sampled.
inline double unsampled_test_mass(const PathCounts& counts, const Policy& p_test) {
    require(counts.size() == p_test.size(), Errc::dimension_mismatch, "counts and policy differ in size");
    double mass = 0.0;
    for (std::size_t a = 0; a < counts.size(); ++a)
        if (counts[a] == 0) mass += p_test[a];
    return mass;
}

}  // namespace ope
