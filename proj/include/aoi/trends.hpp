#pragma once

// Exact (integer) trend comparisons over threshold surfaces. Thresholds are
// compared by rank: an age threshold by its value, a channel threshold by its
// channel index, "never" ranking above every finite entry. Entries without a
// step pattern are skipped and counted.

#include <cstddef>
#include <string>
#include <vector>

#include "aoi/policy.hpp"

namespace aoi {

struct TrendCheck {
    std::string name;
    std::size_t comparisons = 0;
    std::size_t violations = 0;
    std::size_t skipped = 0;
    std::vector<std::string> witnesses;  // first few violations, human readable

    bool holds() const { return violations == 0; }
};

/// T_th nonincreasing in E at fixed other ages.
TrendCheck probe_trend_in_energy(const std::vector<ProbeThresholdEntry>& surface);
/// T_th(E, T_{-1}) nonincreasing in each held-fixed age (N > 1 only).
TrendCheck probe_trend_in_fixed_ages(const std::vector<ProbeThresholdEntry>& surface);
/// p_th nonincreasing in E at fixed ages.
TrendCheck sample_trend_in_energy(const std::vector<SampleThresholdEntry>& surface, int num_channels);
/// p_th nonincreasing in each age coordinate at fixed E and other ages.
TrendCheck sample_trend_in_ages(const std::vector<SampleThresholdEntry>& surface, int num_channels);

/// Pointwise comparison of two surfaces solved with a smaller (`lower`) and a
/// larger (`higher`) parameter: the `higher` threshold must not exceed the
/// `lower` one at any shared key.
TrendCheck probe_trend_across(const std::vector<ProbeThresholdEntry>& lower,
                              const std::vector<ProbeThresholdEntry>& higher);
TrendCheck sample_trend_across(const std::vector<SampleThresholdEntry>& lower,
                               const std::vector<SampleThresholdEntry>& higher, int num_channels);

}  // namespace aoi
