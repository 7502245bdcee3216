#include "aoi/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "aoi/error.hpp"

namespace aoi {

namespace {

void check_pmf(const std::vector<double>& pmf, const std::string& field) {
    if (pmf.empty()) throw ConfigError(field, "must not be empty");
    double total = 0.0;
    for (double v : pmf) {
        if (!std::isfinite(v) || v < 0.0) throw ConfigError(field, "entries must be finite and nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > kPmfTolerance)
        throw ConfigError(field, "must sum to 1 (sums to " + std::to_string(total) + ")");
}

}  // namespace

double ModelConfig::mean_arrival() const {
    double mean = 0.0;
    for (std::size_t a = 0; a < arrival_pmf.size(); ++a) mean += static_cast<double>(a) * arrival_pmf[a];
    return mean;
}

std::vector<double> bernoulli_pmf(double rate) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("arrival_rate", "must lie in [0,1]");
    return {1.0 - rate, rate};
}

ModelConfig canonicalize(ModelConfig raw) {
    if (raw.buffer_size < 1) throw ConfigError("buffer_size", "must be >= 1");
    if (raw.probe_cost < 0) throw ConfigError("probe_cost", "must be >= 0");
    if (raw.sample_cost < 0) throw ConfigError("sample_cost", "must be >= 0");
    if (raw.probe_cost + raw.sample_cost > raw.buffer_size)
        throw ConfigError("probe_cost", "probe_cost + sample_cost exceeds buffer_size");
    check_pmf(raw.arrival_pmf, "arrival_pmf");
    check_pmf(raw.channel_pmf, "channel_pmf");
    if (raw.channel_probs.size() != raw.channel_pmf.size())
        throw ConfigError("channel_probs", "length differs from channel_pmf");
    for (double p : raw.channel_probs)
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("channel_probs", "entries must lie in [0,1]");
    if (raw.num_processes < 1) throw ConfigError("num_processes", "must be >= 1");
    if (!(raw.discount > 0.0 && raw.discount < 1.0)) throw ConfigError("discount", "must lie in (0,1)");
    if (raw.age_cap < 2) throw ConfigError("age_cap", "must be >= 2");

    std::map<double, double> merged;
    for (std::size_t j = 0; j < raw.channel_probs.size(); ++j) merged[raw.channel_probs[j]] += raw.channel_pmf[j];
    raw.channel_probs.clear();
    raw.channel_pmf.clear();
    for (const auto& [p, q] : merged) {
        raw.channel_probs.push_back(p);
        raw.channel_pmf.push_back(q);
    }
    return raw;
}

ModelConfig reference_model(int num_processes, double arrival_rate, int age_cap) {
    ModelConfig c;
    c.buffer_size = 12;
    c.probe_cost = 1;
    c.sample_cost = 1;
    c.arrival_pmf = bernoulli_pmf(arrival_rate);
    c.channel_probs = {0.9, 0.7, 0.5, 0.3, 0.1};
    c.channel_pmf = {0.2, 0.2, 0.2, 0.2, 0.2};
    c.num_processes = num_processes;
    c.discount = 0.99;
    c.age_cap = age_cap;
    return canonicalize(std::move(c));
}

std::uint64_t state_count(const ModelConfig& config) {
    constexpr std::uint64_t kCap = std::uint64_t{1} << 62;
    std::uint64_t n = static_cast<std::uint64_t>(config.buffer_size) + 1;
    for (int k = 0; k < config.num_processes; ++k) {
        if (n > kCap / static_cast<std::uint64_t>(config.age_cap)) return kCap;
        n *= static_cast<std::uint64_t>(config.age_cap);
    }
    return n;
}

StateSpace::StateSpace(const ModelConfig& config, std::uint64_t max_states)
    : max_energy_(config.buffer_size), age_cap_(config.age_cap), num_processes_(config.num_processes) {
    const std::uint64_t total = state_count(config);
    if (total > max_states) throw CapacityError(total, max_states);
    size_ = static_cast<std::size_t>(total);
    num_ages_ = size_ / static_cast<std::size_t>(max_energy_ + 1);

    strides_.assign(num_processes_, 1);
    for (int k = num_processes_ - 2; k >= 0; --k) strides_[k] = strides_[k + 1] * age_cap_;

    aged_.resize(num_ages_);
    reset_.resize(num_ages_ * num_processes_);
    age_sum_.resize(num_ages_);
    std::vector<int> ages(num_processes_, 1);
    std::vector<int> next(num_processes_);
    for (std::size_t a = 0; a < num_ages_; ++a) {
        int sum = 0;
        for (int k = 0; k < num_processes_; ++k) {
            next[k] = std::min(ages[k] + 1, age_cap_);
            sum += ages[k];
        }
        age_sum_[a] = sum;
        aged_[a] = age_index(next);
        for (int k = 0; k < num_processes_; ++k) {
            const int saved = next[k];
            next[k] = 1;
            reset_[a * num_processes_ + k] = age_index(next);
            next[k] = saved;
        }
        // Advance the odometer, last process fastest.
        for (int k = num_processes_ - 1; k >= 0; --k) {
            if (++ages[k] <= age_cap_) break;
            ages[k] = 1;
        }
    }
}

std::size_t StateSpace::age_index(std::span<const int> ages) const {
    std::size_t idx = 0;
    for (int k = 0; k < num_processes_; ++k) idx += static_cast<std::size_t>(ages[k] - 1) * strides_[k];
    return idx;
}

std::vector<int> StateSpace::ages_of(std::size_t age_index) const {
    std::vector<int> ages(num_processes_);
    for (int k = 0; k < num_processes_; ++k) ages[k] = age_of(age_index, k);
    return ages;
}

int StateSpace::age_of(std::size_t age_index, int process) const {
    return static_cast<int>((age_index / strides_[process]) % static_cast<std::size_t>(age_cap_)) + 1;
}

std::size_t StateSpace::index(const State& s) const {
    if (s.energy < 0 || s.energy > max_energy_ || static_cast<int>(s.ages.size()) != num_processes_)
        throw ConfigError("state", "outside the state space");
    for (int t : s.ages)
        if (t < 1 || t > age_cap_) throw ConfigError("state", "age outside [1, age_cap]");
    return index(s.energy, age_index(s.ages));
}

State StateSpace::state(std::size_t idx) const {
    return State{energy_of(idx), ages_of(age_index_of(idx))};
}

std::vector<State> enumerate_states(const ModelConfig& config, std::uint64_t max_states) {
    const StateSpace space(config, max_states);
    std::vector<State> out;
    out.reserve(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) out.push_back(space.state(i));
    return out;
}

void check_action(const ModelConfig& config, const State& state, const Action& action,
                  std::optional<int> channel) {
    if (!action.probe && action.sample_target != 0)
        throw ConfigError("action", "sampling requires probing");
    if (action.sample_target < 0 || action.sample_target > config.num_processes)
        throw ConfigError("action", "sample target outside 0..N");
    if (action.sample_target > 0 && !channel)
        throw ConfigError("channel", "sampling requires a channel index");
    if (channel && (*channel < 0 || *channel >= config.num_channels()))
        throw ConfigError("channel", "channel index out of range");
    if (action.probe && !config.can_probe(state.energy))
        throw InfeasibleActionError("probing needs E >= E_p + E_s (E = " + std::to_string(state.energy) + ")");
}

double single_stage_cost(const ModelConfig& config, const State& state, const Action& action,
                         std::optional<int> channel) {
    if (action.sample_target < 0 || action.sample_target > config.num_processes)
        throw ConfigError("action", "sample target outside 0..N");
    if (action.sample_target > 0 && !channel) throw ConfigError("channel", "sampling requires a channel index");
    double cost = std::accumulate(state.ages.begin(), state.ages.end(), 0.0);
    if (action.sample_target > 0) {
        if (*channel < 0 || *channel >= config.num_channels())
            throw ConfigError("channel", "channel index out of range");
        const double p = config.channel_probs[*channel];
        cost -= state.ages[action.sample_target - 1] * p;
    }
    return cost;
}

State next_state(const ModelConfig& config, const State& state, const Action& action, bool delivered,
                 int arrivals) {
    int spent = 0;
    if (action.probe) spent += config.probe_cost;
    if (action.sample_target > 0) spent += config.sample_cost;
    State next;
    next.energy = std::min(state.energy - spent + arrivals, config.buffer_size);
    next.ages.resize(state.ages.size());
    for (std::size_t k = 0; k < state.ages.size(); ++k) next.ages[k] = std::min(state.ages[k] + 1, config.age_cap);
    if (action.sample_target > 0 && delivered) next.ages[action.sample_target - 1] = 1;
    return next;
}

std::vector<Transition> transition_support(const ModelConfig& config, const State& state,
                                           const Action& action, std::optional<int> channel) {
    check_action(config, state, action, channel);
    const double p_success = action.sample_target > 0 ? config.channel_probs[*channel] : 0.0;

    std::vector<Transition> out;
    auto add = [&out](State s, double prob) {
        if (prob <= 0.0) return;
        for (auto& t : out) {
            if (t.next == s) {
                t.probability += prob;
                return;
            }
        }
        out.push_back({std::move(s), prob});
    };
    for (int outcome = 1; outcome >= 0; --outcome) {
        const bool delivered = outcome == 1;
        const double p_outcome = delivered ? p_success : 1.0 - p_success;
        for (std::size_t a = 0; a < config.arrival_pmf.size(); ++a)
            add(next_state(config, state, action, delivered, static_cast<int>(a)), p_outcome * config.arrival_pmf[a]);
    }
    return out;
}

}  // namespace aoi
