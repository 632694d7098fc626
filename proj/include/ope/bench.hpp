#pragma once

// Experiment harness: configuration, the four runners, bootstrap intervals
// and CSV/JSON reports.
//
// Each runner derives one key per stage from the configured seed and draws
// replication r from stream(key, r). Replication results are stored by index
// and reduced in index order, so reports do not depend on thread count.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ope/analysis.hpp"
#include "ope/environments.hpp"
#include "ope/estimators_multi.hpp"
#include "ope/estimators_single.hpp"
#include "ope/parallel.hpp"

namespace ope::bench {

enum class ExperimentKind { figure1, multi_policy, ea_bias, dominance_scan };

/// Identifier written to the `experiment` column.
constexpr std::string_view experiment_id(ExperimentKind kind) noexcept {
    switch (kind) {
        case ExperimentKind::figure1: return "figure1";
        case ExperimentKind::multi_policy: return "multi_policy";
        case ExperimentKind::ea_bias: return "ea_bias";
        case ExperimentKind::dominance_scan: return "dominance_scan";
    }
    return "unknown";
}

/// Accepts both the CLI spelling (multi-policy) and the report spelling (multi_policy).
inline std::optional<ExperimentKind> parse_experiment(std::string_view name) {
    if (name == "figure1") return ExperimentKind::figure1;
    if (name == "multi-policy" || name == "multi_policy") return ExperimentKind::multi_policy;
    if (name == "ea-bias" || name == "ea_bias") return ExperimentKind::ea_bias;
    if (name == "dominance" || name == "dominance_scan") return ExperimentKind::dominance_scan;
    return std::nullopt;
}

enum class ReportFormat { csv, json };

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::figure1;
    std::size_t num_actions = 20;
    std::size_t num_records = 100;
    /// Replications per grid point; for ea_bias the episode count; for
    /// dominance_scan the Monte Carlo replications per instance.
    std::size_t reps = 10'000;
    std::vector<double> p_grid;
    std::size_t num_policies = 10;
    std::size_t per_policy = 30;
    std::vector<double> spreads;
    double reward_variance = 1.0;
    double cap = kDefaultCap;
    std::vector<std::string> estimators;
    std::uint64_t seed = 1;
    std::size_t bootstrap_resamples = 2000;
    std::size_t episode_cap = kDefaultAdaptiveCap;
    std::size_t instances = 50;
    std::size_t max_actions = 5;
    std::size_t max_policies = 10;
    std::string out;
    ReportFormat format = ReportFormat::csv;
};

inline std::vector<double> default_p_grid() {
    std::vector<double> grid(20);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i + 1) / 20.0;
    return grid;
}

inline const std::vector<std::string>& single_estimator_names() {
    static const std::vector<std::string> names{"BIS", "NIS", "EA"};
    return names;
}

inline const std::vector<std::string>& multi_estimator_names() {
    static const std::vector<std::string> names{"BIS", "FIS", "OUIS", "NBIS", "NFIS", "NOUIS", "BCIS", "NBCIS"};
    return names;
}

inline ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    switch (kind) {
        case ExperimentKind::figure1:
            cfg.p_grid = default_p_grid();
            cfg.estimators = single_estimator_names();
            break;
        case ExperimentKind::multi_policy:
            cfg.num_actions = 10;
            cfg.reps = 400;
            cfg.spreads = {0.0, 0.5, 1.0};
            cfg.estimators = multi_estimator_names();
            break;
        case ExperimentKind::ea_bias:
            cfg.reps = 1'000'000;
            cfg.bootstrap_resamples = 200;
            cfg.estimators = {"EA"};
            break;
        case ExperimentKind::dominance_scan:
            cfg.reps = 100'000;
            cfg.bootstrap_resamples = 200;
            cfg.estimators = {"BIS", "FIS"};
            break;
    }
    return cfg;
}

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { fail(Errc::config_invalid, what); }

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!piece.empty()) out.push_back(piece);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) config_error("key '" + key + "': cannot parse '" + text + "'");
    return value;
}

}  // namespace detail

/// Applies `key = value` lines to `cfg`. Blank lines and text after '#' are
/// ignored. Lists are comma separated. Unknown keys are rejected.
inline void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
    using detail::config_error;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) config_error("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        auto size_value = [&] { return detail::parse_number<std::size_t>(key, value); };
        auto real_value = [&] { return detail::parse_number<double>(key, value); };
        auto real_list = [&] {
            std::vector<double> xs;
            for (const auto& item : detail::split_list(value)) xs.push_back(detail::parse_number<double>(key, item));
            return xs;
        };

        if (key == "experiment") {
            const auto kind = parse_experiment(value);
            if (!kind) config_error("unknown experiment '" + value + "'");
            if (*kind != cfg.kind) config_error("config is for '" + value + "' but another experiment was requested");
        } else if (key == "actions") {
            cfg.num_actions = size_value();
        } else if (key == "records") {
            cfg.num_records = size_value();
        } else if (key == "reps") {
            cfg.reps = size_value();
        } else if (key == "p_grid") {
            cfg.p_grid = real_list();
        } else if (key == "policies") {
            cfg.num_policies = size_value();
        } else if (key == "per_policy") {
            cfg.per_policy = size_value();
        } else if (key == "spreads") {
            cfg.spreads = real_list();
        } else if (key == "reward_variance") {
            cfg.reward_variance = real_value();
        } else if (key == "cap") {
            cfg.cap = real_value();
        } else if (key == "estimators") {
            cfg.estimators = detail::split_list(value);
        } else if (key == "seed") {
            cfg.seed = detail::parse_number<std::uint64_t>(key, value);
        } else if (key == "bootstrap_resamples") {
            cfg.bootstrap_resamples = size_value();
        } else if (key == "episode_cap") {
            cfg.episode_cap = size_value();
        } else if (key == "instances") {
            cfg.instances = size_value();
        } else if (key == "max_actions") {
            cfg.max_actions = size_value();
        } else if (key == "max_policies") {
            cfg.max_policies = size_value();
        } else if (key == "out") {
            cfg.out = value;
        } else if (key == "format") {
            if (value == "csv") cfg.format = ReportFormat::csv;
            else if (value == "json") cfg.format = ReportFormat::json;
            else config_error("format must be csv or json, got '" + value + "'");
        } else {
            config_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) detail::config_error("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str());
}

/// Rejects any configuration a runner could not complete. Called by every
/// runner before the first random draw.
inline void validate(const ExperimentConfig& cfg) {
    using detail::config_error;
    if (cfg.reps < 2) config_error("reps must be at least 2");
    if (cfg.bootstrap_resamples < 100) config_error("bootstrap_resamples must be at least 100");
    const auto& registered = cfg.kind == ExperimentKind::figure1        ? single_estimator_names()
                             : cfg.kind == ExperimentKind::multi_policy ? multi_estimator_names()
                             : cfg.kind == ExperimentKind::ea_bias      ? std::vector<std::string>{"EA"}
                                                                        : std::vector<std::string>{"BIS", "FIS"};
    if (cfg.estimators.empty()) config_error("estimator list is empty");
    for (const auto& name : cfg.estimators) {
        if (std::find(registered.begin(), registered.end(), name) == registered.end())
            config_error("estimator '" + name + "' is not available for " + std::string(experiment_id(cfg.kind)));
        if (std::count(cfg.estimators.begin(), cfg.estimators.end(), name) > 1)
            config_error("estimator '" + name + "' listed twice");
    }
    switch (cfg.kind) {
        case ExperimentKind::figure1:
            if (cfg.num_actions < 4 || cfg.num_actions % 2 != 0) config_error("actions must be even and at least 4");
            if (cfg.num_records < 1) config_error("records must be at least 1");
            if (cfg.p_grid.empty()) config_error("p_grid is empty");
            for (double p : cfg.p_grid)
                if (!(p > 0.0 && p <= 1.0)) config_error("p_grid entries must lie in (0, 1]");
            break;
        case ExperimentKind::multi_policy:
            if (cfg.num_actions < 4 || cfg.num_actions % 2 != 0) config_error("actions must be even and at least 4");
            if (static_cast<double>(cfg.num_actions) * kFamilyProbabilityFloor >= 1.0) config_error("too many actions");
            if (cfg.num_policies < 1 || cfg.per_policy < 1) config_error("policies and per_policy must be positive");
            if (cfg.spreads.empty()) config_error("spreads is empty");
            for (double s : cfg.spreads)
                if (!(s >= 0.0 && s <= 1.0)) config_error("spreads entries must lie in [0, 1]");
            if (!(cfg.reward_variance > 0.0) || !std::isfinite(cfg.reward_variance))
                config_error("reward_variance must be positive");
            if (!(cfg.cap > 0.0)) config_error("cap must be positive");
            break;
        case ExperimentKind::ea_bias:
            if (cfg.episode_cap < 1) config_error("episode_cap must be at least 1");
            break;
        case ExperimentKind::dominance_scan:
            if (cfg.instances < 3) config_error("instances must be at least 3");
            if (cfg.max_actions < 2 || cfg.max_policies < 2) config_error("max_actions and max_policies must be >= 2");
            break;
    }
}

struct BenchRow {
    std::string experiment;
    std::string estimator;
    std::string param_name;
    double param_value = 0.0;
    std::string metric;
    double value = 0.0;
    double p5 = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
    std::size_t reps = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

struct Percentiles {
    double p5 = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
};

/// Linear interpolation between order statistics (the common "type 7" rule).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    require(!sorted.empty(), Errc::empty_samples, "quantile of an empty sample");
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Percentile bootstrap over index resamples: `statistic` receives the
/// resampled indices into the caller's data.
inline Percentiles bootstrap_indices(std::size_t n, const std::function<double(std::span<const std::size_t>)>& statistic,
                                     std::size_t resamples, std::uint64_t seed) {
    require(n > 0, Errc::empty_samples, "bootstrap needs at least one sample");
    require(resamples >= 100, Errc::invalid_argument, "bootstrap needs at least 100 resamples",
            static_cast<double>(resamples));
    std::vector<double> stats(resamples);
    std::vector<std::size_t> idx(n);
    for (std::size_t b = 0; b < resamples; ++b) {
        Rng rng = stream(seed, b);
        for (auto& i : idx) i = rng.below(n);
        stats[b] = statistic(idx);
    }
    std::sort(stats.begin(), stats.end());
    return {quantile_sorted(stats, 0.05), quantile_sorted(stats, 0.50), quantile_sorted(stats, 0.95)};
}

inline double mean_of(std::span<const double> xs) {
    return pairwise_sum(xs) / static_cast<double>(xs.size());
}

/// Percentile bootstrap of `statistic` (default: the mean) over `samples`.
inline Percentiles bootstrap_percentiles(std::span<const double> samples,
                                         const std::function<double(std::span<const double>)>& statistic = mean_of,
                                         std::size_t resamples = 2000, std::uint64_t seed = 0) {
    require(!samples.empty(), Errc::empty_samples, "bootstrap needs at least one sample");
    std::vector<double> draw(samples.size());
    return bootstrap_indices(
        samples.size(),
        [&](std::span<const std::size_t> idx) {
            for (std::size_t i = 0; i < idx.size(); ++i) draw[i] = samples[idx[i]];
            return statistic(draw);
        },
        resamples, seed);
}

namespace detail {

enum Stage : std::uint64_t { sampling = 1, bootstrap = 2, family = 3, instances = 4 };

inline double sample_variance(std::span<const double> xs) {
    const double m = mean_of(xs);
    const double ss = pairwise_sum_of(xs.size(), [&](std::size_t i) { return (xs[i] - m) * (xs[i] - m); });
    return ss / static_cast<double>(xs.size() - 1);
}

inline BenchRow make_row(const ExperimentConfig& cfg, std::string estimator, std::string param_name,
                         double param_value, std::string metric, double value, Percentiles pc) {
    return {std::string(experiment_id(cfg.kind)), std::move(estimator), std::move(param_name), param_value,
            std::move(metric), value, pc.p5, pc.p50, pc.p95, cfg.reps, cfg.seed};
}

inline Percentiles point(double v) { return {v, v, v}; }

inline SingleEstimatorKind single_kind(const std::string& name) {
    if (name == "BIS") return SingleEstimatorKind::bis;
    if (name == "NIS") return SingleEstimatorKind::nis;
    return SingleEstimatorKind::ea;
}

inline MultiEstimatorKind multi_kind(const std::string& name) {
    const auto& names = multi_estimator_names();
    static constexpr MultiEstimatorKind kinds[] = {MultiEstimatorKind::bis,  MultiEstimatorKind::fis,
                                                   MultiEstimatorKind::ouis, MultiEstimatorKind::nbis,
                                                   MultiEstimatorKind::nfis, MultiEstimatorKind::nouis,
                                                   MultiEstimatorKind::bcis, MultiEstimatorKind::nbcis};
    const auto pos = std::find(names.begin(), names.end(), name) - names.begin();
    return kinds[pos];
}

inline void sort_rows(std::vector<BenchRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
        if (a.param_value != b.param_value) return a.param_value < b.param_value;
        return a.estimator < b.estimator;
    });
}

}  // namespace detail

/// MSE of each single-policy estimator against the true value at every p.
inline std::vector<BenchRow> run_figure1(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::size_t ne = cfg.estimators.size();
    std::vector<SingleEstimatorKind> kinds;
    for (const auto& name : cfg.estimators) kinds.push_back(detail::single_kind(name));
    const Policy behavior = behavior_policy_linear(cfg.num_actions);
    const Policy p_test = default_peaked_test_policy(cfg.num_actions);
    const std::uint64_t sample_key = derive_seed(cfg.seed, detail::sampling);
    const std::uint64_t boot_key = derive_seed(cfg.seed, detail::bootstrap);

    std::vector<BenchRow> rows;
    for (std::size_t g = 0; g < cfg.p_grid.size(); ++g) {
        const double p = cfg.p_grid[g];
        const RewardModel rm = make_scaled_bernoulli(cfg.num_actions, p).reward_model();
        const double truth = true_value(p_test, rm);
        const std::uint64_t key = derive_seed(sample_key, g);
        std::vector<std::vector<double>> sq(ne, std::vector<double>(cfg.reps));
        parallel_for(cfg.reps, [&](std::size_t r) {
            Rng rng = stream(key, r);
            const LoggedDataset d = sample_dataset(rm, behavior, cfg.num_records, rng);
            for (std::size_t e = 0; e < ne; ++e) {
                const double err = estimate_single(kinds[e], d, behavior, p_test) - truth;
                sq[e][r] = err * err;
            }
        });
        for (std::size_t e = 0; e < ne; ++e) {
            const auto pc = bootstrap_percentiles(sq[e], mean_of, cfg.bootstrap_resamples,
                                                  derive_seed(boot_key, g * ne + e));
            rows.push_back(detail::make_row(cfg, cfg.estimators[e], "p", p, "mse", mean_of(sq[e]), pc));
        }
    }
    detail::sort_rows(rows);
    return rows;
}

/// Reward model of the multi-policy benchmark: two-point rewards with means
/// 1 + τ/K and a common variance.
inline RewardModel multi_policy_rewards(std::size_t k, double variance) {
    std::vector<double> means(k), vars(k, variance);
    for (std::size_t a = 0; a < k; ++a) means[a] = 1.0 + static_cast<double>(a) / static_cast<double>(k);
    return two_point_reward_model(std::move(means), std::move(vars));
}

/// RMSE of each multi-policy estimator for every configured spread.
inline std::vector<BenchRow> run_multi_policy(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::size_t ne = cfg.estimators.size();
    std::vector<MultiEstimatorKind> kinds;
    for (const auto& name : cfg.estimators) kinds.push_back(detail::multi_kind(name));
    const RewardModel rm = multi_policy_rewards(cfg.num_actions, cfg.reward_variance);
    const Policy p_test = default_peaked_test_policy(cfg.num_actions);
    const double truth = true_value(p_test, rm);
    const CapConfig cap(cfg.cap);
    const std::uint64_t sample_key = derive_seed(cfg.seed, detail::sampling);
    const std::uint64_t boot_key = derive_seed(cfg.seed, detail::bootstrap);
    const std::uint64_t family_key = derive_seed(cfg.seed, detail::family);
    const auto rmse = [](std::span<const double> sq) { return std::sqrt(mean_of(sq)); };

    std::vector<BenchRow> rows;
    for (std::size_t g = 0; g < cfg.spreads.size(); ++g) {
        const double spread = cfg.spreads[g];
        const PolicyFamily fam =
            make_policy_family(cfg.num_actions, cfg.num_policies, spread, family_key, cfg.per_policy);
        const std::uint64_t key = derive_seed(sample_key, g);
        std::vector<std::vector<double>> sq(ne, std::vector<double>(cfg.reps));
        parallel_for(cfg.reps, [&](std::size_t r) {
            Rng rng = stream(key, r);
            const LoggedDataset d = sample_dataset(rm, fam, rng);
            for (std::size_t e = 0; e < ne; ++e) {
                const double err = estimate_multi(kinds[e], d, fam, p_test, rm, cap) - truth;
                sq[e][r] = err * err;
            }
        });
        for (std::size_t e = 0; e < ne; ++e) {
            const auto pc =
                bootstrap_percentiles(sq[e], rmse, cfg.bootstrap_resamples, derive_seed(boot_key, g * ne + e));
            rows.push_back(detail::make_row(cfg, cfg.estimators[e], "spread", spread, "rmse", rmse(sq[e]), pc));
        }
    }
    detail::sort_rows(rows);
    return rows;
}

/// Stop-at-first-zero logging: the empirical average is biased, the
/// first-draw importance estimate is not.
inline std::vector<BenchRow> run_ea_bias(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::uint64_t key = derive_seed(cfg.seed, detail::sampling);
    const std::uint64_t boot_key = derive_seed(cfg.seed, detail::bootstrap);
    std::vector<double> ea(cfg.reps), first(cfg.reps);
    parallel_for(cfg.reps, [&](std::size_t r) {
        Rng rng = stream(key, r);
        const auto log = sample_adaptive_stop(rng, cfg.episode_cap);
        ea[r] = log.ea_estimate();
        first[r] = log.first_draw_estimate();
    });
    const double analytic = ea_adaptive_bias_analytic();
    const double truth = ea_adaptive_true_mean();
    const double cap = static_cast<double>(cfg.episode_cap);
    const std::size_t nb = cfg.bootstrap_resamples;
    const double ea_mean = mean_of(ea);
    const double is_mean = mean_of(first);
    auto shifted = [](Percentiles pc, double by) { return Percentiles{pc.p5 - by, pc.p50 - by, pc.p95 - by}; };
    const auto ea_pc = bootstrap_percentiles(ea, mean_of, nb, derive_seed(boot_key, 0));
    const auto is_pc = bootstrap_percentiles(first, mean_of, nb, derive_seed(boot_key, 1));

    using detail::make_row;
    return {
        make_row(cfg, "EA", "cap", cap, "analytic_mean", analytic, detail::point(analytic)),
        make_row(cfg, "EA", "cap", cap, "bias", ea_mean - truth, shifted(ea_pc, truth)),
        make_row(cfg, "EA", "cap", cap, "gap", ea_mean - analytic, shifted(ea_pc, analytic)),
        make_row(cfg, "EA", "cap", cap, "mean", ea_mean, ea_pc),
        make_row(cfg, "IS", "cap", cap, "bias", is_mean - truth, shifted(is_pc, truth)),
        make_row(cfg, "IS", "cap", cap, "mean", is_mean, is_pc),
        make_row(cfg, "truth", "cap", cap, "true_value", truth, detail::point(truth)),
    };
}

/// Two policies with mirrored preferences, a uniform test policy and
/// deterministic unit rewards. Fusing the policies strictly lowers the variance.
inline MultiPolicyInstance asymmetric_instance() {
    return {PolicyFamily::blocked({Policy::validate({0.9, 0.1}), Policy::validate({0.1, 0.9})}, 1),
            Policy::uniform(2), two_point_reward_model({1.0, 1.0}, {0.0, 0.0})};
}

/// Instance 0 has identical policies, instance 1 is `asymmetric_instance`,
/// the rest come from random_multi_instance.
inline MultiPolicyInstance dominance_instance(const ExperimentConfig& cfg, std::size_t index) {
    if (index == 1) return asymmetric_instance();
    Rng rng = stream(derive_seed(cfg.seed, detail::instances), index);
    InstanceLimits lim;
    lim.max_actions = cfg.max_actions;
    lim.max_policies = cfg.max_policies;
    auto inst = random_multi_instance(rng, lim);
    if (index == 0) {
        const Policy shared = inst.family.policy(0);
        inst.family = PolicyFamily::blocked(std::vector<Policy>(inst.family.num_policies(), shared), 1);
    }
    return inst;
}

/// Average rank with ties sharing the mean of their positions.
inline std::vector<double> ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j);
        for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
        i = j + 1;
    }
    return r;
}

/// Spearman correlation: Pearson correlation of the ranks.
inline double rank_correlation(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, Errc::invalid_argument, "rank correlation needs paired samples");
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

/// Var(BIS) − Var(FIS) per instance, analytic and simulated, plus summary
/// rows with the smallest analytic gap and the rank agreement of the two.
inline std::vector<BenchRow> run_dominance_scan(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::uint64_t sample_key = derive_seed(cfg.seed, detail::sampling);
    const std::uint64_t boot_key = derive_seed(cfg.seed, detail::bootstrap);
    std::vector<double> analytic(cfg.instances), empirical(cfg.instances);
    std::vector<BenchRow> rows;
    for (std::size_t g = 0; g < cfg.instances; ++g) {
        const auto inst = dominance_instance(cfg, g);
        analytic[g] = variance_gap(inst.family, inst.p_test, inst.rewards);
        const std::uint64_t key = derive_seed(sample_key, g);
        std::vector<double> bis(cfg.reps), fis(cfg.reps);
        parallel_for(cfg.reps, [&](std::size_t r) {
            Rng rng = stream(key, r);
            const LoggedDataset d = sample_dataset(inst.rewards, inst.family, rng);
            bis[r] = estimate_bis_multi(d, inst.family, inst.p_test);
            fis[r] = estimate_fis(d, inst.family, inst.p_test);
        });
        empirical[g] = detail::sample_variance(bis) - detail::sample_variance(fis);
        // Centred on the full-sample means so one-pass sums stay accurate.
        const double cb = mean_of(bis), cf = mean_of(fis);
        const auto pc = bootstrap_indices(
            cfg.reps,
            [&](std::span<const std::size_t> idx) {
                double sb = 0.0, sbb = 0.0, sf = 0.0, sff = 0.0;
                for (auto i : idx) {
                    const double b = bis[i] - cb, f = fis[i] - cf;
                    sb += b;
                    sbb += b * b;
                    sf += f;
                    sff += f * f;
                }
                const double n = static_cast<double>(idx.size());
                return ((sbb - sb * sb / n) - (sff - sf * sf / n)) / (n - 1.0);
            },
            cfg.bootstrap_resamples, derive_seed(boot_key, g));
        const double index = static_cast<double>(g);
        rows.push_back(detail::make_row(cfg, "BIS-FIS", "instance", index, "variance_gap_analytic", analytic[g],
                                        detail::point(analytic[g])));
        rows.push_back(
            detail::make_row(cfg, "BIS-FIS", "instance", index, "variance_gap_empirical", empirical[g], pc));
    }
    const double min_gap = *std::min_element(analytic.begin(), analytic.end());
    const double rho = rank_correlation(analytic, empirical);
    rows.push_back(detail::make_row(cfg, "BIS-FIS", "summary", static_cast<double>(cfg.instances), "min_gap", min_gap,
                                    detail::point(min_gap)));
    rows.push_back(detail::make_row(cfg, "BIS-FIS", "summary", static_cast<double>(cfg.instances),
                                    "rank_correlation", rho, detail::point(rho)));
    return rows;
}

inline std::vector<BenchRow> run(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case ExperimentKind::figure1: return run_figure1(cfg);
        case ExperimentKind::multi_policy: return run_multi_policy(cfg);
        case ExperimentKind::ea_bias: return run_ea_bias(cfg);
        case ExperimentKind::dominance_scan: return run_dominance_scan(cfg);
    }
    return {};
}

inline constexpr std::string_view kCsvHeader = "experiment,estimator,param_name,param_value,metric,value,p5,p50,p95,reps,seed";

/// Shortest decimal that reads back to the same double.
inline std::string format_real(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

namespace detail {

inline void write_field(std::string& out, std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
        out += s;
        return;
    }
    out += '"';
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

}  // namespace detail

inline std::string to_csv(const std::vector<BenchRow>& rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        detail::write_field(out, r.experiment);
        out += ',';
        detail::write_field(out, r.estimator);
        out += ',';
        detail::write_field(out, r.param_name);
        out += ',' + format_real(r.param_value) + ',';
        detail::write_field(out, r.metric);
        out += ',' + format_real(r.value) + ',' + format_real(r.p5) + ',' + format_real(r.p50) + ',' +
               format_real(r.p95) + ',' + std::to_string(r.reps) + ',' + std::to_string(r.seed) + '\n';
    }
    return out;
}

/// Inverse of to_csv. Throws ConfigInvalid on a malformed document.
inline std::vector<BenchRow> parse_csv(std::string_view text) {
    std::vector<BenchRow> rows;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        if (header) {
            if (line != kCsvHeader) fail(Errc::config_invalid, "unexpected CSV header");
            header = false;
            continue;
        }
        const auto f = detail::split_csv_line(line);
        if (f.size() != 11) fail(Errc::config_invalid, "CSV row has " + std::to_string(f.size()) + " fields");
        BenchRow r;
        r.experiment = f[0];
        r.estimator = f[1];
        r.param_name = f[2];
        r.param_value = detail::parse_number<double>("param_value", f[3]);
        r.metric = f[4];
        r.value = detail::parse_number<double>("value", f[5]);
        r.p5 = detail::parse_number<double>("p5", f[6]);
        r.p50 = detail::parse_number<double>("p50", f[7]);
        r.p95 = detail::parse_number<double>("p95", f[8]);
        r.reps = detail::parse_number<std::size_t>("reps", f[9]);
        r.seed = detail::parse_number<std::uint64_t>("seed", f[10]);
        rows.push_back(std::move(r));
    }
    if (header) fail(Errc::config_invalid, "CSV document has no header");
    return rows;
}

inline std::string to_json(const std::vector<BenchRow>& rows) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        doc.push_back({{"experiment", r.experiment},
                       {"estimator", r.estimator},
                       {"param_name", r.param_name},
                       {"param_value", r.param_value},
                       {"metric", r.metric},
                       {"value", r.value},
                       {"p5", r.p5},
                       {"p50", r.p50},
                       {"p95", r.p95},
                       {"reps", r.reps},
                       {"seed", r.seed}});
    }
    return doc.dump(2) + '\n';
}

inline std::string render_report(const std::vector<BenchRow>& rows, ReportFormat format) {
    return format == ReportFormat::csv ? to_csv(rows) : to_json(rows);
}

/// Writes the report to `path`; an empty path means standard output.
inline void emit_report(const std::vector<BenchRow>& rows, ReportFormat format, const std::string& path) {
    const std::string text = render_report(rows, format);
    if (path.empty()) {
        std::cout.write(text.data(), static_cast<std::streamsize>(text.size()));
        std::cout.flush();
        if (!std::cout) fail(Errc::io_failure, "cannot write report to standard output");
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) fail(Errc::io_failure, "failed writing '" + path + "'");
}

}  // namespace ope::bench
