#pragma once

#include <vector>

#include "ope/core.hpp"

namespace ope {

/// Behavior policies {π_m} plus, for every logged record, which of them
/// generated it. Per-record sums (fused mass, α weights) run over records,
/// so a policy used for 30 records appears 30 times in them.
class PolicyFamily {
public:
    PolicyFamily(std::vector<Policy> policies, std::vector<std::size_t> assignment)
        : policies_(std::move(policies)), assignment_(std::move(assignment)) {
        require(!policies_.empty(), Errc::empty_input, "policy family is empty");
        require(!assignment_.empty(), Errc::empty_input, "policy family assigns no records");
        for (const auto& p : policies_)
            require(p.size() == policies_.front().size(), Errc::dimension_mismatch,
                    "policies in a family must share the action set");
        for (auto m : assignment_)
            require(m < policies_.size(), Errc::invalid_policy_id,
                    "record assigned to policy " + std::to_string(m) + " of " + std::to_string(policies_.size()),
                    static_cast<double>(m));
    }

    /// Records 0..per_policy-1 use policy 0, the next block policy 1, ...
    static PolicyFamily blocked(std::vector<Policy> policies, std::size_t per_policy) {
        require(per_policy >= 1, Errc::invalid_argument, "need at least one record per policy");
        std::vector<std::size_t> assignment(policies.size() * per_policy);
        for (std::size_t i = 0; i < assignment.size(); ++i) assignment[i] = i / per_policy;
        return PolicyFamily(std::move(policies), std::move(assignment));
    }

    static PolicyFamily single(Policy policy, std::size_t n) {
        return PolicyFamily({std::move(policy)}, std::vector<std::size_t>(n, 0));
    }

    std::size_t num_actions() const noexcept { return policies_.front().size(); }
    std::size_t num_policies() const noexcept { return policies_.size(); }
    std::size_t num_records() const noexcept { return assignment_.size(); }

    const Policy& policy(std::size_t m) const { return policies_[m]; }
    std::span<const Policy> policies() const noexcept { return policies_; }
    std::span<const std::size_t> assignment() const noexcept { return assignment_; }
    const Policy& record_policy(std::size_t i) const { return policies_[assignment_[i]]; }

    /// π_i(τ) for every record i.
    std::vector<double> record_probs(std::size_t action) const {
        std::vector<double> out(assignment_.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = record_policy(i)[action];
        return out;
    }

    /// Σ_j π_j(τ) over records.
    double fused_mass(std::size_t action) const { return pairwise_sum(record_probs(action)); }

private:
    std::vector<Policy> policies_;
    std::vector<std::size_t> assignment_;
};

}  // namespace ope
