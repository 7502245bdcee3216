#pragma once

// Brute-force ground truth for tiny instances: every stationary deterministic
// feasible policy is evaluated exactly and the best one is kept.

#include <cstdint>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/policy.hpp"

namespace aoi {

struct TinyInstanceGuard {
    std::uint64_t max_states = 64;
    std::uint64_t max_policies = 1'000'000;
};

/// Product over probe-feasible states of (1 + (N+1)^m). Saturates at
/// UINT64_MAX.
std::uint64_t policy_count(const ModelConfig& config);
std::uint64_t policy_count(std::uint64_t probe_feasible_states, int num_channels, int num_processes);

struct OracleResult {
    PolicyTable policy;
    double value = 0.0;               // at the start state
    std::vector<double> values;       // full table of the winner
    std::uint64_t policies_evaluated = 0;
};

/// Minimizes the value at `start`; among policies within 1e-9 of the best
/// start value, the one with the smallest summed value over all states wins.
/// Throws GuardError when the instance exceeds either bound.
OracleResult enumerate_optimal(const ModelConfig& config, const State& start, const TinyInstanceGuard& guard = {});

}  // namespace aoi
