#pragma once

// Closed-loop slot simulator, baseline policies and exact fixed-policy
// evaluation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/policy.hpp"

namespace aoi {

/// SplitMix64: a Weyl counter passed through a fixed 64-bit mixer. Uniform
/// doubles take the top 53 bits.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Inverse-CDF draw from a finite pmf; consumes exactly one uniform.
    int categorical(const std::vector<double>& pmf);

private:
    std::uint64_t state_;
};

/// A policy table optionally thinned by independent coin flips: where the
/// table probes, the probe is kept with probability `probe_rate`; where it
/// samples, the sample is kept with probability `sample_rate`. Rates of 1
/// give the deterministic table.
struct SchedulingPolicy {
    std::string name;
    PolicyTable table;
    double probe_rate = 1.0;
    double sample_rate = 1.0;

    bool randomized() const { return probe_rate < 1.0 || sample_rate < 1.0; }
};

enum class BaselineKind { always_act, random, fixed_threshold };

struct BaselineParams {
    BaselineKind kind = BaselineKind::always_act;
    double probe_rate = 1.0;   // random
    double sample_rate = 1.0;  // random
    int age_threshold = 1;     // fixed-threshold: probe iff max age >= this
    double p_threshold = 0.0;  // fixed-threshold: sample iff p_j >= this
};

/// Baselines probe only where E >= E_p + E_s and always target the
/// smallest-index max-age process. Throws ConfigError on bad parameters.
SchedulingPolicy baseline_policy(const BaselineParams& params, const ModelConfig& config);

SchedulingPolicy optimal_policy(PolicyTable table);

/// Throws InfeasibleActionError if the policy probes where E < E_p + E_s, and
/// ConfigError if the table has the wrong shape.
void check_policy(const SchedulingPolicy& policy, const ModelConfig& config);

struct EnergySummary {
    int min = 0;
    double mean = 0.0;
    int max = 0;
};

struct TrajectoryStats {
    std::int64_t horizon = 0;
    std::vector<double> per_process_avg_aoi;
    double total_avg_aoi = 0.0;
    std::int64_t probe_count = 0;
    std::int64_t sample_count = 0;
    std::int64_t success_count = 0;
    EnergySummary energy;
    std::uint64_t seed = 0;
};

/// E(0) = B and all ages 1 unless given.
State default_initial_state(const ModelConfig& config);

/// Simulates `horizon` slots. Per slot, in order: ages are accrued into the
/// AoI sums (pre-action ages), the probe decision is taken, the channel is
/// drawn if probing, the sample decision is taken, delivery is drawn if
/// sampling, then arrivals are drawn. Coin flips of a randomized policy are
/// drawn right before the channel (probe coin) and delivery (sample coin)
/// draws and only when the corresponding rate lies strictly inside (0, 1).
TrajectoryStats simulate(const SchedulingPolicy& policy, const ModelConfig& config, std::int64_t horizon,
                         std::uint64_t seed, std::optional<State> initial = std::nullopt);

struct MonteCarloEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::int64_t replications = 0;
};

/// Monte-Carlo estimate of the discounted cost from `start`: each
/// replication accrues alpha^t times the realized slot cost (0 for a
/// delivered process, its age otherwise) over `horizon` slots. Replication r
/// uses seed `seed + r`.
MonteCarloEstimate estimate_discounted_cost(const SchedulingPolicy& policy, const ModelConfig& config,
                                            const State& start, std::int64_t horizon, std::int64_t replications,
                                            std::uint64_t seed);

inline constexpr double kEvaluationTolerance = 1e-10;

/// J^mu by iterating the fixed-policy Bellman operator (built from
/// transition_support) from zero until the sup-norm change is below
/// `tolerance`. Throws ConvergenceError after max_iters.
std::vector<double> evaluate_policy_exact(const SchedulingPolicy& policy, const ModelConfig& config,
                                          double tolerance = kEvaluationTolerance, int max_iters = 1'000'000);

}  // namespace aoi
