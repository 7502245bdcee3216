#include "aoi/value_iteration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aoi/error.hpp"

namespace aoi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shared by value() and backup().
double backup_impl(const ModelConfig& config, const StateSpace& space, const std::vector<double>& expected,
                   std::size_t state_index, BackupResult* out) {
    const std::size_t n_ages = space.num_age_vectors();
    auto ej = [&](int energy, std::size_t age_index) {
        return expected[static_cast<std::size_t>(energy) * n_ages + age_index];
    };

    const int energy = space.energy_of(state_index);
    const std::size_t ages = space.age_index_of(state_index);
    const std::size_t aged = space.aged(ages);
    const double alpha = config.discount;
    const double base = space.age_sum(ages);

    const double no_probe = base + alpha * ej(energy, aged);
    if (out) {
        out->no_probe_cost = no_probe;
        out->probe_cost = kInf;
        out->probe = false;
        out->channel_value.assign(config.num_channels(), kInf);
        out->idle_cost.assign(config.num_channels(), kInf);
        out->sample_cost.assign(config.num_channels(), kInf);
        out->sample_target.assign(config.num_channels(), 0);
    }
    if (!config.can_probe(energy)) {
        if (out) out->value = no_probe;
        return no_probe;
    }

    const int after_probe = energy - config.probe_cost;
    const int after_sample = after_probe - config.sample_cost;
    const double idle = base + alpha * ej(after_probe, aged);
    const double fail_next = ej(after_sample, aged);

    double probe = 0.0;
    for (int j = 0; j < config.num_channels(); ++j) {
        const double p = config.channel_probs[j];
        double best = kInf;  // cost of the selected target
        double lowest = kInf;
        int target = 0;
        for (int k = 0; k < config.num_processes; ++k) {
            const double success_next = ej(after_sample, space.reset(ages, k));
            const double cost =
                (base - space.age_of(ages, k) * p) + alpha * (p * success_next + (1.0 - p) * fail_next);
            lowest = std::min(lowest, cost);
            if (target == 0 || cost < best - tie_slack(best)) {
                best = cost;
                target = k + 1;
            }
        }
        const double w = std::min(idle, lowest);
        const int chosen = best < idle - tie_slack(idle) ? target : 0;
        probe += config.channel_pmf[j] * w;
        if (out) {
            out->channel_value[j] = w;
            out->idle_cost[j] = idle;
            out->sample_cost[j] = lowest;
            out->sample_target[j] = chosen;
        }
    }

    const bool do_probe = probe < no_probe - tie_slack(no_probe);
    const double value = std::min(no_probe, probe);
    if (out) {
        out->probe_cost = probe;
        out->probe = do_probe;
        out->value = value;
    }
    return value;
}

// out[e * n_ages + a] = E_A[values(min(e + A, B), a)].
void expect_over_arrivals(const ModelConfig& config, const StateSpace& space, const std::vector<double>& values,
                          std::vector<double>& out) {
    const std::size_t n_ages = space.num_age_vectors();
    const int b = config.buffer_size;
    out.assign(static_cast<std::size_t>(b + 1) * n_ages, 0.0);
    for (int e = 0; e <= b; ++e) {
        double* row = out.data() + static_cast<std::size_t>(e) * n_ages;
        for (std::size_t a = 0; a < config.arrival_pmf.size(); ++a) {
            const double pa = config.arrival_pmf[a];
            if (pa == 0.0) continue;
            const int e_next = std::min(e + static_cast<int>(a), b);
            const double* src = values.data() + static_cast<std::size_t>(e_next) * n_ages;
            for (std::size_t t = 0; t < n_ages; ++t) row[t] += pa * src[t];
        }
    }
}

// Increment of a min node whose children move from `old` to `old + inc`,
// clamped to [min inc, inc at the old argmin].
class MinIncrement {
public:
    void add(double old, double inc) {
        if (old < best_old_) {
            best_old_ = old;
            best_inc_ = inc;
        }
        olds_[count_] = old;
        incs_[count_] = inc;
        ++count_;
        lowest_inc_ = std::min(lowest_inc_, inc);
    }
    double old_value() const { return best_old_; }
    double increment() const {
        double d = kInf;
        for (int i = 0; i < count_; ++i) d = std::min(d, (olds_[i] - best_old_) + incs_[i]);
        return std::clamp(d, lowest_inc_, best_inc_);
    }

    static constexpr int kMaxChildren = 64;

private:
    double olds_[kMaxChildren];
    double incs_[kMaxChildren];
    int count_ = 0;
    double best_old_ = kInf;
    double best_inc_ = 0.0;
    double lowest_inc_ = kInf;
};

// (T J)(i) - (T J_prev)(i) where J = J_prev + diff, given arrival
// expectations of J_prev and of diff.
double increment_impl(const ModelConfig& config, const StateSpace& space, const std::vector<double>& expected_prev,
                      const std::vector<double>& expected_diff, std::size_t state_index) {
    const std::size_t n_ages = space.num_age_vectors();
    auto at = [&](const std::vector<double>& table, int energy, std::size_t age_index) {
        return table[static_cast<std::size_t>(energy) * n_ages + age_index];
    };

    const int energy = space.energy_of(state_index);
    const std::size_t ages = space.age_index_of(state_index);
    const std::size_t aged = space.aged(ages);
    const double alpha = config.discount;
    const double base = space.age_sum(ages);

    const double no_probe_old = base + alpha * at(expected_prev, energy, aged);
    const double no_probe_inc = alpha * at(expected_diff, energy, aged);
    if (!config.can_probe(energy)) return no_probe_inc;

    const int after_probe = energy - config.probe_cost;
    const int after_sample = after_probe - config.sample_cost;
    const double idle_old = base + alpha * at(expected_prev, after_probe, aged);
    const double idle_inc = alpha * at(expected_diff, after_probe, aged);
    const double fail_old = at(expected_prev, after_sample, aged);
    const double fail_inc = at(expected_diff, after_sample, aged);

    double probe_old = 0.0;
    double probe_inc = 0.0;
    for (int j = 0; j < config.num_channels(); ++j) {
        const double p = config.channel_probs[j];
        MinIncrement w;
        w.add(idle_old, idle_inc);
        for (int k = 0; k < config.num_processes; ++k) {
            const std::size_t reset = space.reset(ages, k);
            const double old = (base - space.age_of(ages, k) * p) +
                               alpha * (p * at(expected_prev, after_sample, reset) + (1.0 - p) * fail_old);
            const double inc = alpha * (p * at(expected_diff, after_sample, reset) + (1.0 - p) * fail_inc);
            w.add(old, inc);
        }
        probe_old += config.channel_pmf[j] * w.old_value();
        probe_inc += config.channel_pmf[j] * w.increment();
    }

    MinIncrement top;
    top.add(no_probe_old, no_probe_inc);
    top.add(probe_old, probe_inc);
    return top.increment();
}

}  // namespace

BellmanOperator::BellmanOperator(const ModelConfig& config, std::uint64_t max_states)
    : config_(config), space_(config_, max_states) {}

void BellmanOperator::prepare(const std::vector<double>& prev) {
    if (prev.size() != space_.size()) throw ConfigError("values", "table does not cover the state space");
    expect_over_arrivals(config_, space_, prev, expected_);
}

double BellmanOperator::value(std::size_t state_index) const {
    return backup_impl(config_, space_, expected_, state_index, nullptr);
}

BackupResult BellmanOperator::backup(std::size_t state_index) const {
    BackupResult r;
    backup_impl(config_, space_, expected_, state_index, &r);
    return r;
}

double BellmanOperator::sweep(const std::vector<double>& prev, std::vector<double>& out) {
    prepare(prev);
    out.resize(space_.size());
    double delta = 0.0;
    for (std::size_t i = 0; i < space_.size(); ++i) {
        out[i] = value(i);
        delta = std::max(delta, std::abs(out[i] - prev[i]));
    }
    return delta;
}

BackupResult bellman_backup(const State& state, const ValueTable& prev, const ModelConfig& config) {
    BellmanOperator op(config);
    op.prepare(prev.values);
    return op.backup(op.space().index(state));
}

ValueIterationResult value_iteration(const ModelConfig& config, double tolerance, int max_iters) {
    if (!(tolerance > 0.0)) throw ConfigError("tolerance", "must be > 0");
    if (max_iters < 1) throw ConfigError("max_iters", "must be >= 1");
    if (config.num_processes + 1 > MinIncrement::kMaxChildren)
        throw CapacityError(static_cast<std::uint64_t>(config.num_processes), MinIncrement::kMaxChildren - 1);

    BellmanOperator op(config);
    const StateSpace& space = op.space();
    const std::size_t n = space.size();
    ValueIterationResult result;

    // J^(1) = T 0 directly; afterwards the iterate advances by increments
    // D^(k+1) = T J^(k) - T J^(k-1) propagated from D^(k).
    std::vector<double> previous(n, 0.0);
    std::vector<double> current;
    double delta = op.sweep(previous, current);
    std::vector<double> diff = current;
    result.delta_history.push_back(delta);
    result.worst_decrease = std::min(0.0, *std::min_element(diff.begin(), diff.end()));
    int iter = 1;

    std::vector<double> expected_prev;
    std::vector<double> expected_diff;
    std::vector<double> next_diff(n);
    while (!(delta < tolerance) && iter < max_iters) {
        expect_over_arrivals(config, space, previous, expected_prev);
        expect_over_arrivals(config, space, diff, expected_diff);
        delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            next_diff[i] = increment_impl(config, space, expected_prev, expected_diff, i);
            delta = std::max(delta, std::abs(next_diff[i]));
            result.worst_decrease = std::min(result.worst_decrease, next_diff[i]);
        }
        previous = current;
        for (std::size_t i = 0; i < n; ++i) current[i] += next_diff[i];
        diff.swap(next_diff);
        result.delta_history.push_back(delta);
        ++iter;
    }
    if (!(delta < tolerance)) throw ConvergenceError(iter, delta);
    result.table.values = std::move(current);
    result.table.iteration_count = iter;
    result.table.final_delta = delta;
    return result;
}

}  // namespace aoi
