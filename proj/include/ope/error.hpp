#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ope {

enum class Errc {
    negative_probability,
    not_normalized,
    empty_input,
    action_out_of_range,
    invalid_policy_id,
    dimension_mismatch,
    unsupported_action,
    zero_normalizer,
    zero_fused_mass,
    degenerate_denominator,
    zero_variance,
    degenerate_action,
    infinite_conditional_variance,
    non_positive_entry,
    enumeration_too_large,
    invalid_p,
    odd_k,
    index_clash,
    invalid_argument,
    config_invalid,
    io_failure,
    empty_samples,
};

constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::negative_probability: return "NegativeProbability";
        case Errc::not_normalized: return "NotNormalized";
        case Errc::empty_input: return "EmptyInput";
        case Errc::action_out_of_range: return "ActionOutOfRange";
        case Errc::invalid_policy_id: return "InvalidPolicyId";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::unsupported_action: return "UnsupportedAction";
        case Errc::zero_normalizer: return "ZeroNormalizer";
        case Errc::zero_fused_mass: return "ZeroFusedMass";
        case Errc::degenerate_denominator: return "DegenerateDenominator";
        case Errc::zero_variance: return "ZeroVariance";
        case Errc::degenerate_action: return "DegenerateAction";
        case Errc::infinite_conditional_variance: return "InfiniteConditionalVariance";
        case Errc::non_positive_entry: return "NonPositiveEntry";
        case Errc::enumeration_too_large: return "EnumerationTooLarge";
        case Errc::invalid_p: return "InvalidP";
        case Errc::odd_k: return "OddK";
        case Errc::index_clash: return "IndexClash";
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::config_invalid: return "ConfigInvalid";
        case Errc::io_failure: return "IoFailure";
        case Errc::empty_samples: return "EmptySamples";
    }
    return "Unknown";
}

/// Every failure in the library is reported through this exception.
/// `detail()` carries a numeric payload where one is meaningful, e.g. the
/// normalization deviation for `not_normalized` or the offending index.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what, double detail = 0.0)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(detail) {}

    Errc code() const noexcept { return code_; }
    double detail() const noexcept { return detail_; }

private:
    Errc code_;
    double detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what, double detail = 0.0) {
    throw Error(code, what, detail);
}

inline void require(bool cond, Errc code, const std::string& what, double detail = 0.0) {
    if (!cond) fail(code, what, detail);
}

}  // namespace ope
