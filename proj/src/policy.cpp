#include "aoi/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aoi/error.hpp"

namespace aoi {

namespace {

constexpr std::size_t kMaxWitnesses = 16;

// Records `magnitude` as the new worst violation if it beats the current one.
void note_violation(double magnitude, double slack, bool& ok, double& worst, std::optional<Witness>& witness,
                    const Witness& where) {
    if (magnitude > slack) ok = false;
    if (magnitude > worst) {
        worst = magnitude;
        witness = where;
    }
}

}  // namespace

PolicyTable make_policy_table(const StateSpace& space, int num_channels) {
    PolicyTable t;
    t.num_channels = num_channels;
    t.probe.assign(space.size(), 0);
    t.sample.assign(space.size() * static_cast<std::size_t>(num_channels), 0);
    return t;
}

std::vector<BackupResult> greedy_backups(const ValueTable& values, const ModelConfig& config) {
    BellmanOperator op(config);
    op.prepare(values.values);
    std::vector<BackupResult> out;
    out.reserve(op.space().size());
    for (std::size_t i = 0; i < op.space().size(); ++i) out.push_back(op.backup(i));
    return out;
}

PolicyTable policy_from_backups(const std::vector<BackupResult>& backups, int num_channels) {
    PolicyTable t;
    t.num_channels = num_channels;
    t.probe.assign(backups.size(), 0);
    t.sample.assign(backups.size() * static_cast<std::size_t>(num_channels), 0);
    for (std::size_t i = 0; i < backups.size(); ++i) {
        if (!backups[i].probe) continue;
        t.probe[i] = 1;
        for (int j = 0; j < num_channels; ++j) t.sample_at(i, j) = backups[i].sample_target[j];
    }
    return t;
}

PolicyTable extract_policy(const ValueTable& values, const ModelConfig& config) {
    return policy_from_backups(greedy_backups(values, config), config.num_channels());
}

StepReadout read_step(const std::vector<bool>& active) {
    StepReadout r;
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (active[i]) {
            if (!r.first_active) r.first_active = i;
        } else if (r.first_active) {
            r.monotone = false;
        }
    }
    return r;
}

std::vector<SampleThresholdEntry> extract_sample_threshold(const PolicyTable& policy, const ModelConfig& config) {
    const StateSpace space(config);
    const int m = config.num_channels();
    std::vector<SampleThresholdEntry> out;
    std::vector<bool> active(m);
    for (std::size_t i = 0; i < space.size(); ++i) {
        if (!policy.probes(i)) continue;
        for (int j = 0; j < m; ++j) active[j] = policy.sample_at(i, j) != 0;
        const StepReadout step = read_step(active);
        const State s = space.state(i);
        SampleThresholdEntry e;
        e.energy = s.energy;
        e.ages = s.ages;
        e.monotone = step.monotone;
        if (step.monotone && step.first_active) {
            e.channel = static_cast<int>(*step.first_active);
            e.p_threshold = config.channel_probs[*step.first_active];
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ProbeThresholdEntry> extract_probe_threshold(const PolicyTable& policy, const ModelConfig& config) {
    const StateSpace space(config);
    const int n = config.num_processes;
    const int cap = config.age_cap;
    const std::size_t others = space.num_age_vectors() / static_cast<std::size_t>(cap);
    const std::size_t scan_stride = space.stride(0);

    std::vector<ProbeThresholdEntry> out;
    out.reserve(static_cast<std::size_t>(config.buffer_size + 1) * others);
    std::vector<bool> active(cap);
    for (int e = 0; e <= config.buffer_size; ++e) {
        // Age indices with T_1 = 1 are exactly 0..others-1.
        for (std::size_t rest = 0; rest < others; ++rest) {
            for (int t = 0; t < cap; ++t)
                active[t] = policy.probes(space.index(e, rest + static_cast<std::size_t>(t) * scan_stride));
            const StepReadout step = read_step(active);
            ProbeThresholdEntry entry;
            entry.energy = e;
            const std::vector<int> ages = space.ages_of(rest);
            entry.fixed_ages.assign(ages.begin() + 1, ages.begin() + n);
            entry.monotone = step.monotone;
            if (step.monotone) {
                if (step.first_active) entry.threshold = static_cast<int>(*step.first_active) + 1;
                entry.truncation_bound = !entry.threshold || *entry.threshold >= cap;
            }
            out.push_back(std::move(entry));
        }
    }
    return out;
}

ThresholdSurface extract_thresholds(const PolicyTable& policy, const ModelConfig& config) {
    return {extract_probe_threshold(policy, config), extract_sample_threshold(policy, config)};
}

StructureReport verify_structure(const ValueTable& values, const PolicyTable& policy, const ModelConfig& config) {
    return verify_structure(values, policy, config, greedy_backups(values, config));
}

StructureReport verify_structure(const ValueTable& values, const PolicyTable& policy, const ModelConfig& config,
                                 const std::vector<BackupResult>& backups) {
    const StateSpace space(config);
    if (values.values.size() != space.size() || backups.size() != space.size() ||
        policy.probe.size() != space.size())
        throw ConfigError("values", "table does not cover the state space");

    const auto& J = values.values;
    const int n = config.num_processes;
    const int m = config.num_channels();
    StructureReport r;

    std::vector<int> perm(n);
    std::vector<int> permuted(n);
    for (std::size_t i = 0; i < space.size(); ++i) {
        const int energy = space.energy_of(i);
        const std::size_t a = space.age_index_of(i);
        const std::vector<int> ages = space.ages_of(a);
        const Witness here{State{energy, ages}, -1};

        // (i) J nondecreasing along every age coordinate.
        for (int k = 0; k < n; ++k) {
            if (ages[k] == config.age_cap) continue;
            const double up = J[i + space.stride(k)];
            note_violation(J[i] - up, kStructureSlack, r.value_monotone_in_age, r.worst_age_violation,
                           r.age_witness, here);
        }

        // Diagnostic: J nonincreasing in E.
        if (energy < config.buffer_size) {
            const double diff = J[space.index(energy + 1, a)] - J[i];
            if (diff > kStructureSlack) r.value_nonincreasing_in_energy = false;
            r.worst_energy_violation = std::max(r.worst_energy_violation, diff);
        }

        // (iii) permutation invariance.
        if (n > 1) {
            std::iota(perm.begin(), perm.end(), 0);
            while (std::next_permutation(perm.begin(), perm.end())) {
                for (int k = 0; k < n; ++k) permuted[k] = ages[perm[k]];
                const double diff = std::abs(J[space.index(energy, space.age_index(permuted))] - J[i]);
                r.max_permutation_asymmetry = std::max(r.max_permutation_asymmetry, diff);
            }
        }

        const BackupResult& b = backups[i];
        if (!config.can_probe(energy)) {
            if (policy.probes(i)) r.forced_idle = false;
            continue;
        }

        // (ii) W nonincreasing in p (channels are stored ascending).
        for (int j = 0; j + 1 < m; ++j) {
            note_violation(b.channel_value[j + 1] - b.channel_value[j], kStructureSlack, r.channel_value_monotone,
                           r.worst_channel_violation, r.channel_witness, Witness{here.state, j + 1});
        }

        if (!policy.probes(i)) continue;

        // (iv) sampled process is the first max-age process.
        const int first_max = static_cast<int>(std::max_element(ages.begin(), ages.end()) - ages.begin()) + 1;
        std::vector<bool> active(m);
        for (int j = 0; j < m; ++j) {
            const int k = policy.sample_at(i, j);
            active[j] = k != 0;
            if (k != 0 && k != first_max) {
                r.samples_max_age = false;
                if (r.max_age_exceptions++ == 0) r.max_age_witness = Witness{here.state, j};
            }
        }

        // (v) sampling step along p.
        if (!read_step(active).monotone) {
            r.sample_step = false;
            if (r.sample_step_violations++ == 0) r.sample_step_witness = here;
        }
    }
    r.permutation_invariant = r.max_permutation_asymmetry < kSymmetryTolerance;

    for (auto& entry : extract_probe_threshold(policy, config)) {
        if (!entry.monotone) {
            r.probe_step = false;
            ++r.probe_step_violations;
            if (r.probe_step_witnesses.size() < kMaxWitnesses) r.probe_step_witnesses.push_back(entry);
        } else if (entry.truncation_bound && config.can_probe(entry.energy)) {
            ++r.truncation_bound_count;
        }
    }
    return r;
}

}  // namespace aoi
