#pragma once

// Problem instance, truncated state space and transition law of the
// energy-harvesting probe-and-sample model.
//
// Conventions used throughout the library:
//   * channel states are 0-based indices into the canonical (ascending p)
//     channel list;
//   * processes are numbered 1..N in actions (0 means "sample nothing") and
//     stored 0-based in age vectors.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace aoi {

inline constexpr std::uint64_t kDefaultMaxStates = 10'000'000;
inline constexpr double kPmfTolerance = 1e-12;

struct ModelConfig {
    int buffer_size = 12;                 // B
    int probe_cost = 1;                   // E_p
    int sample_cost = 1;                  // E_s
    std::vector<double> arrival_pmf;      // P(A = a), a = 0..A_max
    std::vector<double> channel_probs;    // success probability per channel state
    std::vector<double> channel_pmf;      // occurrence probability per channel state
    int num_processes = 1;                // N
    double discount = 0.99;               // alpha
    int age_cap = 50;                     // T_max

    int num_channels() const { return static_cast<int>(channel_probs.size()); }
    int action_cost() const { return probe_cost + sample_cost; }
    bool can_probe(int energy) const { return energy >= action_cost(); }
    double mean_arrival() const;
};

std::vector<double> bernoulli_pmf(double rate);

/// Validates a raw configuration and returns its canonical form: channels
/// sorted by ascending success probability, duplicate probabilities merged by
/// summing their occurrence mass. Throws ConfigError naming the bad field.
ModelConfig canonicalize(ModelConfig raw);

/// B=12, E_p=E_s=1, Bernoulli(rate) arrivals, five equiprobable channel
/// states with p in {0.1,...,0.9}, alpha=0.99. Already canonical.
ModelConfig reference_model(int num_processes, double arrival_rate, int age_cap);

struct State {
    int energy = 0;
    std::vector<int> ages;

    friend bool operator==(const State&, const State&) = default;
};

struct Action {
    bool probe = false;
    int sample_target = 0;  // 0 = no sample, k in 1..N otherwise

    static Action idle() { return {}; }
    static Action probe_only() { return {true, 0}; }
    static Action sample(int process) { return {true, process}; }

    friend bool operator==(const Action&, const Action&) = default;
};

/// Dense indexing of {0..B} x {1..T_max}^N: energy-major, then ages in
/// lexicographic order with process 1 most significant.
class StateSpace {
public:
    explicit StateSpace(const ModelConfig& config, std::uint64_t max_states = kDefaultMaxStates);

    std::size_t size() const { return size_; }
    std::size_t num_age_vectors() const { return num_ages_; }
    int num_processes() const { return num_processes_; }
    int age_cap() const { return age_cap_; }
    int max_energy() const { return max_energy_; }

    std::size_t index(const State& s) const;
    State state(std::size_t index) const;

    std::size_t index(int energy, std::size_t age_index) const {
        return static_cast<std::size_t>(energy) * num_ages_ + age_index;
    }
    int energy_of(std::size_t index) const { return static_cast<int>(index / num_ages_); }
    std::size_t age_index_of(std::size_t index) const { return index % num_ages_; }

    std::size_t age_index(std::span<const int> ages) const;
    std::vector<int> ages_of(std::size_t age_index) const;
    int age_of(std::size_t age_index, int process) const;

    /// Age vector after one slot without a successful delivery.
    std::size_t aged(std::size_t age_index) const { return aged_[age_index]; }
    /// Age vector after one slot in which `process` (0-based) was delivered.
    std::size_t reset(std::size_t age_index, int process) const {
        return reset_[age_index * static_cast<std::size_t>(num_processes_) + process];
    }
    /// Sum of ages of an age vector.
    int age_sum(std::size_t age_index) const { return age_sum_[age_index]; }

    std::size_t stride(int process) const { return strides_[process]; }

private:
    int max_energy_;
    int age_cap_;
    int num_processes_;
    std::size_t num_ages_;
    std::size_t size_;
    std::vector<std::size_t> strides_;
    std::vector<std::size_t> aged_;
    std::vector<std::size_t> reset_;
    std::vector<int> age_sum_;
};

std::uint64_t state_count(const ModelConfig& config);

std::vector<State> enumerate_states(const ModelConfig& config,
                                    std::uint64_t max_states = kDefaultMaxStates);

/// Expected single-slot AoI cost. Sampling process k under channel j costs
/// sum_{i!=k} T_i + T_k (1 - p_j); anything else costs sum_i T_i.
double single_stage_cost(const ModelConfig& config, const State& state, const Action& action,
                         std::optional<int> channel = std::nullopt);

/// Throws InfeasibleActionError / ConfigError if the action cannot be taken.
void check_action(const ModelConfig& config, const State& state, const Action& action,
                  std::optional<int> channel);

/// Deterministic successor for one realization of (delivery, arrivals).
/// Shared by the exact transition kernel and the simulator.
State next_state(const ModelConfig& config, const State& state, const Action& action,
                 bool delivered, int arrivals);

struct Transition {
    State next;
    double probability = 0.0;
};

/// Exhaustive next-state distribution; outcomes leading to the same state are
/// merged, zero-probability outcomes dropped.
std::vector<Transition> transition_support(const ModelConfig& config, const State& state,
                                           const Action& action,
                                           std::optional<int> channel = std::nullopt);

}  // namespace aoi
