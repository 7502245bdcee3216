#pragma once

// Greedy policy extraction and structural verification of a converged
// value table: threshold read-outs along age and channel quality,
// monotonicity of J and W, permutation symmetry and max-age selection.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/value_iteration.hpp"

namespace aoi {

/// Stationary deterministic two-stage policy.
struct PolicyTable {
    int num_channels = 0;
    std::vector<std::uint8_t> probe;  // per state
    std::vector<int> sample;          // per (state, channel): 0 or process 1..N; 0 where probe is false

    bool probes(std::size_t state) const { return probe[state] != 0; }
    int sample_at(std::size_t state, int channel) const {
        return sample[state * static_cast<std::size_t>(num_channels) + channel];
    }
    int& sample_at(std::size_t state, int channel) {
        return sample[state * static_cast<std::size_t>(num_channels) + channel];
    }

    friend bool operator==(const PolicyTable&, const PolicyTable&) = default;
};

PolicyTable make_policy_table(const StateSpace& space, int num_channels);

/// Full Bellman backups of `values`, one per state.
std::vector<BackupResult> greedy_backups(const ValueTable& values, const ModelConfig& config);

PolicyTable extract_policy(const ValueTable& values, const ModelConfig& config);
PolicyTable policy_from_backups(const std::vector<BackupResult>& backups, int num_channels);

/// Read-out of a boolean sequence expected to be a single false->true step.
struct StepReadout {
    bool monotone = true;
    std::optional<std::size_t> first_active;  // nullopt: never active (threshold at infinity)
};

StepReadout read_step(const std::vector<bool>& active);

struct ProbeThresholdEntry {
    int energy = 0;
    /// Ages of processes 2..N held fixed while process 1's age is scanned;
    /// empty when N = 1.
    std::vector<int> fixed_ages;
    bool monotone = true;
    /// Smallest scanned age at which the policy probes. Meaningful only when
    /// `monotone`; nullopt means it never probes in the truncated range.
    std::optional<int> threshold;
    /// Threshold is infinite or sits on the age cap.
    bool truncation_bound = false;
};

struct SampleThresholdEntry {
    int energy = 0;
    std::vector<int> ages;
    bool monotone = true;
    /// Lowest channel index (ascending p) at which sampling happens.
    std::optional<int> channel;
    std::optional<double> p_threshold;
};

struct ThresholdSurface {
    std::vector<ProbeThresholdEntry> probe;
    std::vector<SampleThresholdEntry> sample;
};

/// One entry per probing state, channels scanned in ascending p.
std::vector<SampleThresholdEntry> extract_sample_threshold(const PolicyTable& policy, const ModelConfig& config);

/// N = 1: one entry per energy level, age scanned 1..T_max.
/// N > 1: one entry per (E, T_2..T_N), T_1 scanned 1..T_max. Surfaces for
/// the other coordinates follow by permutation symmetry.
std::vector<ProbeThresholdEntry> extract_probe_threshold(const PolicyTable& policy, const ModelConfig& config);

ThresholdSurface extract_thresholds(const PolicyTable& policy, const ModelConfig& config);

/// Absolute slack for the monotonicity and symmetry verdicts.
inline constexpr double kStructureSlack = 1e-12;
inline constexpr double kSymmetryTolerance = 1e-9;

struct Witness {
    State state;
    int channel = -1;  // -1 when not channel-specific
};

struct StructureReport {
    // J nondecreasing in every age coordinate.
    bool value_monotone_in_age = true;
    double worst_age_violation = 0.0;
    std::optional<Witness> age_witness;

    // W(E, T, C_j) nonincreasing in p_j.
    bool channel_value_monotone = true;
    double worst_channel_violation = 0.0;
    std::optional<Witness> channel_witness;

    // J invariant under permutations of the age vector.
    bool permutation_invariant = true;
    double max_permutation_asymmetry = 0.0;

    // Sampled process is always the smallest-index max-age process.
    bool samples_max_age = true;
    std::size_t max_age_exceptions = 0;
    std::optional<Witness> max_age_witness;

    // No probing where E < E_p + E_s.
    bool forced_idle = true;

    // Sampling decisions form a step in ascending p.
    bool sample_step = true;
    std::size_t sample_step_violations = 0;
    std::optional<Witness> sample_step_witness;

    // Probing decisions form a step along the scanned age (conjecture;
    // reported, never enforced).
    bool probe_step = true;
    std::size_t probe_step_violations = 0;
    std::vector<ProbeThresholdEntry> probe_step_witnesses;  // first few
    std::size_t truncation_bound_count = 0;

    // Diagnostic only: is J nonincreasing in E?
    bool value_nonincreasing_in_energy = true;
    double worst_energy_violation = 0.0;

    /// Every property that is a theorem of the model (excludes the probe
    /// step and the energy diagnostic).
    bool proved_properties_hold() const {
        return value_monotone_in_age && channel_value_monotone && permutation_invariant && samples_max_age &&
               forced_idle && sample_step;
    }
};

StructureReport verify_structure(const ValueTable& values, const PolicyTable& policy, const ModelConfig& config);

/// Same as above, reusing precomputed backups of `values`.
StructureReport verify_structure(const ValueTable& values, const PolicyTable& policy, const ModelConfig& config,
                                 const std::vector<BackupResult>& backups);

}  // namespace aoi
