#include "aoi/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "aoi/error.hpp"

namespace aoi {

int SplitMix64::categorical(const std::vector<double>& pmf) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        if (u < acc) return static_cast<int>(i);
    }
    // Rounding left u above the accumulated mass: take the last positive entry.
    for (std::size_t i = pmf.size(); i-- > 0;)
        if (pmf[i] > 0.0) return static_cast<int>(i);
    return 0;
}

namespace {

int first_max_age(const std::vector<int>& ages) {
    return static_cast<int>(std::max_element(ages.begin(), ages.end()) - ages.begin()) + 1;
}

bool keep(double rate, SplitMix64& rng) {
    if (rate >= 1.0) return true;
    if (rate <= 0.0) return false;
    return rng.uniform() < rate;
}

struct SlotOutcome {
    Action action;
    bool delivered = false;
};

// One slot of the closed loop, advancing `state` in place.
SlotOutcome run_slot(const SchedulingPolicy& policy, const ModelConfig& config, const StateSpace& space,
                     State& state, SplitMix64& rng) {
    const std::size_t idx = space.index(state.energy, space.age_index(state.ages));
    SlotOutcome out;
    if (policy.table.probes(idx) && keep(policy.probe_rate, rng)) {
        if (!config.can_probe(state.energy))
            throw InfeasibleActionError("policy probes at E = " + std::to_string(state.energy));
        out.action.probe = true;
        const int channel = rng.categorical(config.channel_pmf);
        const int target = policy.table.sample_at(idx, channel);
        if (target != 0 && keep(policy.sample_rate, rng)) {
            out.action.sample_target = target;
            out.delivered = rng.uniform() < config.channel_probs[channel];
        }
    }
    const int arrivals = rng.categorical(config.arrival_pmf);
    state = next_state(config, state, out.action, out.delivered, arrivals);
    return out;
}

}  // namespace

SchedulingPolicy baseline_policy(const BaselineParams& params, const ModelConfig& config) {
    const StateSpace space(config);
    SchedulingPolicy policy;
    policy.table = make_policy_table(space, config.num_channels());

    int age_threshold = 1;
    double p_threshold = 0.0;
    switch (params.kind) {
        case BaselineKind::always_act:
            policy.name = "always-act";
            break;
        case BaselineKind::random:
            if (!(params.probe_rate >= 0.0 && params.probe_rate <= 1.0))
                throw ConfigError("probe_rate", "must lie in [0,1]");
            if (!(params.sample_rate >= 0.0 && params.sample_rate <= 1.0))
                throw ConfigError("sample_rate", "must lie in [0,1]");
            policy.name = "random";
            policy.probe_rate = params.probe_rate;
            policy.sample_rate = params.sample_rate;
            break;
        case BaselineKind::fixed_threshold:
            if (params.age_threshold < 1) throw ConfigError("age_threshold", "must be >= 1");
            if (!(params.p_threshold >= 0.0 && params.p_threshold <= 1.0))
                throw ConfigError("p_threshold", "must lie in [0,1]");
            policy.name = "fixed-threshold";
            age_threshold = params.age_threshold;
            p_threshold = params.p_threshold;
            break;
    }

    for (std::size_t i = 0; i < space.size(); ++i) {
        const int energy = space.energy_of(i);
        const std::vector<int> ages = space.ages_of(space.age_index_of(i));
        if (!config.can_probe(energy)) continue;
        if (*std::max_element(ages.begin(), ages.end()) < age_threshold) continue;
        policy.table.probe[i] = 1;
        const int target = first_max_age(ages);
        for (int j = 0; j < config.num_channels(); ++j)
            if (config.channel_probs[j] >= p_threshold) policy.table.sample_at(i, j) = target;
    }
    return policy;
}

SchedulingPolicy optimal_policy(PolicyTable table) {
    SchedulingPolicy p;
    p.name = "optimal";
    p.table = std::move(table);
    return p;
}

void check_policy(const SchedulingPolicy& policy, const ModelConfig& config) {
    const StateSpace space(config);
    const auto& t = policy.table;
    if (t.probe.size() != space.size() || t.num_channels != config.num_channels() ||
        t.sample.size() != space.size() * static_cast<std::size_t>(config.num_channels()))
        throw ConfigError("policy", "table does not match the state space");
    for (std::size_t i = 0; i < space.size(); ++i) {
        if (t.probes(i) && !config.can_probe(space.energy_of(i)))
            throw InfeasibleActionError("policy probes at E = " + std::to_string(space.energy_of(i)));
        for (int j = 0; j < t.num_channels; ++j) {
            const int k = t.sample_at(i, j);
            if (k < 0 || k > config.num_processes) throw ConfigError("policy", "sample target outside 0..N");
        }
    }
}

State default_initial_state(const ModelConfig& config) {
    return State{config.buffer_size, std::vector<int>(config.num_processes, 1)};
}

TrajectoryStats simulate(const SchedulingPolicy& policy, const ModelConfig& config, std::int64_t horizon,
                         std::uint64_t seed, std::optional<State> initial) {
    if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
    check_policy(policy, config);
    const StateSpace space(config);
    State state = initial.value_or(default_initial_state(config));
    space.index(state);  // validates the initial state

    SplitMix64 rng(seed);
    TrajectoryStats stats;
    stats.horizon = horizon;
    stats.seed = seed;
    std::vector<double> age_sums(config.num_processes, 0.0);
    double energy_sum = 0.0;
    stats.energy.min = state.energy;
    stats.energy.max = state.energy;

    for (std::int64_t t = 0; t < horizon; ++t) {
        for (int k = 0; k < config.num_processes; ++k) age_sums[k] += state.ages[k];
        energy_sum += state.energy;
        stats.energy.min = std::min(stats.energy.min, state.energy);
        stats.energy.max = std::max(stats.energy.max, state.energy);

        const SlotOutcome slot = run_slot(policy, config, space, state, rng);
        if (slot.action.probe) ++stats.probe_count;
        if (slot.action.sample_target != 0) ++stats.sample_count;
        if (slot.delivered) ++stats.success_count;
    }

    const double h = static_cast<double>(horizon);
    stats.per_process_avg_aoi.resize(config.num_processes);
    for (int k = 0; k < config.num_processes; ++k) stats.per_process_avg_aoi[k] = age_sums[k] / h;
    stats.total_avg_aoi = std::accumulate(stats.per_process_avg_aoi.begin(), stats.per_process_avg_aoi.end(), 0.0);
    stats.energy.mean = energy_sum / h;
    return stats;
}

MonteCarloEstimate estimate_discounted_cost(const SchedulingPolicy& policy, const ModelConfig& config,
                                            const State& start, std::int64_t horizon, std::int64_t replications,
                                            std::uint64_t seed) {
    if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
    if (replications < 2) throw ConfigError("replications", "must be >= 2");
    check_policy(policy, config);
    const StateSpace space(config);
    space.index(start);

    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::int64_t r = 0; r < replications; ++r) {
        SplitMix64 rng(seed + static_cast<std::uint64_t>(r));
        State state = start;
        double weight = 1.0;
        double total = 0.0;
        for (std::int64_t t = 0; t < horizon; ++t) {
            double cost = std::accumulate(state.ages.begin(), state.ages.end(), 0.0);
            const std::vector<int> ages = state.ages;
            const SlotOutcome slot = run_slot(policy, config, space, state, rng);
            if (slot.delivered) cost -= ages[slot.action.sample_target - 1];
            total += weight * cost;
            weight *= config.discount;
        }
        sum += total;
        sum_sq += total * total;
    }
    const double n = static_cast<double>(replications);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n), replications};
}

std::vector<double> evaluate_policy_exact(const SchedulingPolicy& policy, const ModelConfig& config,
                                          double tolerance, int max_iters) {
    check_policy(policy, config);
    const StateSpace space(config);
    const std::size_t n = space.size();

    // Sparse fixed-policy kernel: expected slot cost plus merged successors.
    std::vector<double> cost(n, 0.0);
    std::vector<std::size_t> row_start(n + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> probs;
    std::map<std::size_t, double> row;
    for (std::size_t i = 0; i < n; ++i) {
        const State s = space.state(i);
        row.clear();
        auto mix = [&](const Action& action, std::optional<int> channel, double weight) {
            if (weight <= 0.0) return;
            cost[i] += weight * single_stage_cost(config, s, action, channel);
            for (const auto& t : transition_support(config, s, action, channel))
                row[space.index(t.next)] += weight * t.probability;
        };
        const double probe_weight = policy.table.probes(i) ? policy.probe_rate : 0.0;
        mix(Action::idle(), std::nullopt, 1.0 - probe_weight);
        if (probe_weight > 0.0) {
            for (int j = 0; j < config.num_channels(); ++j) {
                const double w = probe_weight * config.channel_pmf[j];
                const int target = policy.table.sample_at(i, j);
                if (target == 0) {
                    mix(Action::probe_only(), j, w);
                } else {
                    mix(Action::sample(target), j, w * policy.sample_rate);
                    mix(Action::probe_only(), j, w * (1.0 - policy.sample_rate));
                }
            }
        }
        for (const auto& [col, p] : row) {
            cols.push_back(col);
            probs.push_back(p);
        }
        row_start[i + 1] = cols.size();
    }

    std::vector<double> current(n, 0.0);
    std::vector<double> next(n);
    for (int iter = 0; iter < max_iters; ++iter) {
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double expect = 0.0;
            for (std::size_t e = row_start[i]; e < row_start[i + 1]; ++e) expect += probs[e] * current[cols[e]];
            next[i] = cost[i] + config.discount * expect;
            delta = std::max(delta, std::abs(next[i] - current[i]));
        }
        current.swap(next);
        if (delta < tolerance) return current;
        if (iter + 1 == max_iters) throw ConvergenceError(max_iters, delta);
    }
    return current;
}

}  // namespace aoi
