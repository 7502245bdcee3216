#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "aoi/model.hpp"

namespace aoi {

/// Relative slack used when classifying argmin decisions: an action that
/// spends more energy is chosen only if it is cheaper by more than
/// kTieSlack * max(1, |cost|).
inline constexpr double kTieSlack = 1e-12;

inline double tie_slack(double reference) { return kTieSlack * std::max(1.0, std::abs(reference)); }

struct ValueTable {
    std::vector<double> values;  // indexed by StateSpace
    int iteration_count = 0;
    double final_delta = 0.0;
};

/// Everything the Bellman backup computes at one state.
struct BackupResult {
    double value = 0.0;
    double no_probe_cost = 0.0;
    /// E_C[W(E,T,C)]; +inf where probing is infeasible.
    double probe_cost = 0.0;
    bool probe = false;
    /// Per channel (ascending p): W = min(idle, best sample), idle cost,
    /// best sampling cost and the chosen target (0 = stay idle).
    std::vector<double> channel_value;
    std::vector<double> idle_cost;
    std::vector<double> sample_cost;
    std::vector<int> sample_target;
};

/// Two-stage Bellman operator over the truncated state space.
///
/// `prepare(prev)` caches E_A[prev(min(e + A, B), ages)] for every post-action
/// energy e, after which `backup(i)` costs O(m N) per state.
class BellmanOperator {
public:
    explicit BellmanOperator(const ModelConfig& config, std::uint64_t max_states = kDefaultMaxStates);

    const ModelConfig& config() const { return config_; }
    const StateSpace& space() const { return space_; }

    void prepare(const std::vector<double>& prev);

    double value(std::size_t state_index) const;
    BackupResult backup(std::size_t state_index) const;

    /// One synchronous sweep: out[i] = (T prev)(i). Returns sup |out - prev|.
    double sweep(const std::vector<double>& prev, std::vector<double>& out);

private:
    double expected_next(int energy_after_costs, std::size_t age_index) const {
        return expected_[static_cast<std::size_t>(energy_after_costs) * space_.num_age_vectors() + age_index];
    }

    ModelConfig config_;
    StateSpace space_;
    std::vector<double> expected_;
};

BackupResult bellman_backup(const State& state, const ValueTable& prev, const ModelConfig& config);

struct ValueIterationResult {
    ValueTable table;
    /// delta_history[k] = sup |J^(k+1) - J^(k)|.
    std::vector<double> delta_history;
    /// Most negative per-state change J^(k+1) - J^(k) seen over all sweeps
    /// (0 when iterates never decrease).
    double worst_decrease = 0.0;
};

inline constexpr double kDefaultTolerance = 1e-8;
inline constexpr int kDefaultMaxIters = 10'000;

/// Synchronous value iteration from J ≡ 0. Throws ConvergenceError if the
/// sup-norm delta is still >= tolerance after max_iters sweeps.
ValueIterationResult value_iteration(const ModelConfig& config, double tolerance = kDefaultTolerance,
                                     int max_iters = kDefaultMaxIters);

}  // namespace aoi
