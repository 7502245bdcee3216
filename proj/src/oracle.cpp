#include "aoi/oracle.hpp"

#include <limits>
#include <numeric>

#include "aoi/error.hpp"
#include "aoi/simulation.hpp"

namespace aoi {

namespace {

constexpr double kStartTie = 1e-9;

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
    return a * b;
}

std::uint64_t choices_per_state(int num_channels, int num_processes) {
    std::uint64_t per_channel = 1;
    for (int j = 0; j < num_channels; ++j)
        per_channel = saturating_mul(per_channel, static_cast<std::uint64_t>(num_processes + 1));
    return per_channel == std::numeric_limits<std::uint64_t>::max() ? per_channel : per_channel + 1;
}

}  // namespace

std::uint64_t policy_count(const ModelConfig& config) {
    const std::uint64_t ages = state_count(config) / static_cast<std::uint64_t>(config.buffer_size + 1);
    const auto energies = static_cast<std::uint64_t>(config.buffer_size - config.action_cost() + 1);
    return policy_count(saturating_mul(energies, ages), config.num_channels(), config.num_processes);
}

std::uint64_t policy_count(std::uint64_t probe_feasible_states, int num_channels, int num_processes) {
    const std::uint64_t per_state = choices_per_state(num_channels, num_processes);
    std::uint64_t total = 1;
    for (std::uint64_t i = 0; i < probe_feasible_states; ++i) {
        total = saturating_mul(total, per_state);
        if (total == std::numeric_limits<std::uint64_t>::max()) break;
    }
    return total;
}

OracleResult enumerate_optimal(const ModelConfig& config, const State& start, const TinyInstanceGuard& guard) {
    const std::uint64_t states = state_count(config);
    if (states > guard.max_states)
        throw GuardError("oracle refuses " + std::to_string(states) + " states (limit " +
                             std::to_string(guard.max_states) + ")",
                         static_cast<double>(policy_count(config)));
    const std::uint64_t count = policy_count(config);
    if (count > guard.max_policies)
        throw GuardError("oracle refuses " + std::to_string(count) + " policies (limit " +
                             std::to_string(guard.max_policies) + ")",
                         static_cast<double>(count));

    const StateSpace space(config);
    const std::size_t start_index = space.index(start);
    const int m = config.num_channels();
    const int options = config.num_processes + 1;

    std::vector<std::size_t> feasible;
    for (std::size_t i = 0; i < space.size(); ++i)
        if (config.can_probe(space.energy_of(i))) feasible.push_back(i);
    const std::uint64_t per_state = choices_per_state(m, config.num_processes);

    SchedulingPolicy candidate;
    candidate.table = make_policy_table(space, m);
    std::vector<std::uint64_t> choice(feasible.size(), 0);

    OracleResult best;
    best.value = std::numeric_limits<double>::infinity();
    double best_total = std::numeric_limits<double>::infinity();
    for (std::uint64_t n = 0; n < count; ++n) {
        // Decode the per-state choices: 0 = no probe, otherwise 1 + base-(N+1)
        // digits giving the sample target for each channel.
        for (std::size_t f = 0; f < feasible.size(); ++f) {
            const std::size_t i = feasible[f];
            candidate.table.probe[i] = choice[f] != 0;
            std::uint64_t code = choice[f] == 0 ? 0 : choice[f] - 1;
            for (int j = 0; j < m; ++j) {
                candidate.table.sample_at(i, j) = choice[f] == 0 ? 0 : static_cast<int>(code % options);
                code /= options;
            }
        }

        std::vector<double> values = evaluate_policy_exact(candidate, config);
        const double v = values[start_index];
        const double total = std::accumulate(values.begin(), values.end(), 0.0);
        const bool better = v < best.value - kStartTie || (v <= best.value + kStartTie && total < best_total);
        if (better) {
            best.value = v;
            best_total = total;
            best.policy = candidate.table;
            best.values = std::move(values);
        }
        ++best.policies_evaluated;

        for (std::size_t f = 0; f < choice.size(); ++f) {
            if (++choice[f] < per_state) break;
            choice[f] = 0;
        }
    }
    return best;
}

}  // namespace aoi
