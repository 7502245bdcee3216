#include "aoi/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "aoi/error.hpp"

namespace aoi {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Number formatting

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::string format_rounded(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    std::string s(buf);
    return s == "-0" ? "0" : s;
}

// ---------------------------------------------------------------------------
// Spec parsing

const json* member(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    for (const auto& [key, _] : obj.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError(path.empty() ? key : path + "." + key, "unknown field");
    }
}

const json& require_object(const json& v, const std::string& path) {
    if (!v.is_object()) throw ConfigError(path, "expected an object");
    return v;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<int>();
}

std::vector<double> as_numbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

ModelConfig parse_model(const json& m) {
    const std::string path = "model";
    require_object(m, path);
    reject_unknown(m, path,
                   {"buffer_size", "probe_cost", "sample_cost", "arrival_rate", "arrival_pmf", "channel_probs",
                    "channel_pmf", "num_processes", "discount", "age_cap"});
    ModelConfig c;
    if (auto* v = member(m, "buffer_size")) c.buffer_size = as_int(*v, path + ".buffer_size");
    if (auto* v = member(m, "probe_cost")) c.probe_cost = as_int(*v, path + ".probe_cost");
    if (auto* v = member(m, "sample_cost")) c.sample_cost = as_int(*v, path + ".sample_cost");
    if (auto* v = member(m, "num_processes")) c.num_processes = as_int(*v, path + ".num_processes");
    if (auto* v = member(m, "discount")) c.discount = as_number(*v, path + ".discount");
    if (auto* v = member(m, "age_cap")) c.age_cap = as_int(*v, path + ".age_cap");

    const json* rate = member(m, "arrival_rate");
    const json* pmf = member(m, "arrival_pmf");
    if (rate && pmf) throw ConfigError(path + ".arrival_pmf", "give either arrival_rate or arrival_pmf");
    if (!rate && !pmf) throw ConfigError(path + ".arrival_pmf", "missing (or give arrival_rate)");
    if (rate) {
        try {
            c.arrival_pmf = bernoulli_pmf(as_number(*rate, path + ".arrival_rate"));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ".arrival_rate", "must lie in [0,1]");
        }
    } else {
        c.arrival_pmf = as_numbers(*pmf, path + ".arrival_pmf");
    }

    const json* probs = member(m, "channel_probs");
    const json* cpmf = member(m, "channel_pmf");
    if (!probs) throw ConfigError(path + ".channel_probs", "missing");
    if (!cpmf) throw ConfigError(path + ".channel_pmf", "missing");
    c.channel_probs = as_numbers(*probs, path + ".channel_probs");
    c.channel_pmf = as_numbers(*cpmf, path + ".channel_pmf");

    try {
        return canonicalize(std::move(c));
    } catch (const ConfigError& e) {
        throw ConfigError(path + "." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
    }
}

BaselineParams parse_baseline(const json& b, const std::string& path) {
    require_object(b, path);
    reject_unknown(b, path, {"kind", "probe_rate", "sample_rate", "age_threshold", "p_threshold"});
    const json* kind = member(b, "kind");
    if (!kind || !kind->is_string()) throw ConfigError(path + ".kind", "expected a string");
    BaselineParams p;
    const std::string k = kind->get<std::string>();
    if (k == "always-act") {
        p.kind = BaselineKind::always_act;
    } else if (k == "random") {
        p.kind = BaselineKind::random;
        p.probe_rate = 0.5;
        p.sample_rate = 0.5;
        if (auto* v = member(b, "probe_rate")) p.probe_rate = as_number(*v, path + ".probe_rate");
        if (auto* v = member(b, "sample_rate")) p.sample_rate = as_number(*v, path + ".sample_rate");
        if (!(p.probe_rate >= 0 && p.probe_rate <= 1)) throw ConfigError(path + ".probe_rate", "must lie in [0,1]");
        if (!(p.sample_rate >= 0 && p.sample_rate <= 1))
            throw ConfigError(path + ".sample_rate", "must lie in [0,1]");
    } else if (k == "fixed-threshold") {
        p.kind = BaselineKind::fixed_threshold;
        if (auto* v = member(b, "age_threshold")) p.age_threshold = as_int(*v, path + ".age_threshold");
        if (auto* v = member(b, "p_threshold")) p.p_threshold = as_number(*v, path + ".p_threshold");
        if (p.age_threshold < 1) throw ConfigError(path + ".age_threshold", "must be >= 1");
        if (!(p.p_threshold >= 0 && p.p_threshold <= 1)) throw ConfigError(path + ".p_threshold", "must lie in [0,1]");
    } else {
        throw ConfigError(path + ".kind", "unknown baseline '" + k + "'");
    }
    return p;
}

std::string baseline_label(const BaselineParams& p) {
    switch (p.kind) {
        case BaselineKind::always_act:
            return "always-act";
        case BaselineKind::random:
            return "random(" + format_number(p.probe_rate) + "," + format_number(p.sample_rate) + ")";
        case BaselineKind::fixed_threshold:
            return "fixed-threshold(" + std::to_string(p.age_threshold) + "," + format_number(p.p_threshold) + ")";
    }
    return "baseline";
}

}  // namespace

std::vector<GridPoint> ExperimentSpec::grid() const {
    std::vector<std::vector<double>> arrivals = arrival_sweep;
    if (arrivals.empty()) arrivals.push_back(model.arrival_pmf);
    std::vector<double> discounts = discount_sweep;
    if (discounts.empty()) discounts.push_back(model.discount);
    std::vector<int> buffers = buffer_sweep;
    if (buffers.empty()) buffers.push_back(model.buffer_size);

    std::vector<GridPoint> out;
    for (const auto& pmf : arrivals) {
        for (double alpha : discounts) {
            for (int b : buffers) {
                ModelConfig c = model;
                c.arrival_pmf = pmf;
                c.discount = alpha;
                c.buffer_size = b;
                out.push_back({static_cast<int>(out.size()), canonicalize(std::move(c))});
            }
        }
    }
    return out;
}

ExperimentSpec parse_spec(const json& doc) {
    require_object(doc, "spec");
    reject_unknown(doc, "", {"name", "model", "sweeps", "solver", "sim", "outputs"});
    ExperimentSpec spec;
    if (auto* v = member(doc, "name")) {
        if (!v->is_string()) throw ConfigError("name", "expected a string");
        spec.name = v->get<std::string>();
    }
    const json* model = member(doc, "model");
    if (!model) throw ConfigError("model", "missing");
    spec.model = parse_model(*model);

    if (auto* sweeps = member(doc, "sweeps")) {
        require_object(*sweeps, "sweeps");
        reject_unknown(*sweeps, "sweeps", {"arrival_rate", "arrival_pmf", "discount", "buffer_size"});
        const json* rates = member(*sweeps, "arrival_rate");
        const json* pmfs = member(*sweeps, "arrival_pmf");
        if (rates && pmfs) throw ConfigError("sweeps.arrival_pmf", "give either arrival_rate or arrival_pmf");
        if (rates) {
            for (double r : as_numbers(*rates, "sweeps.arrival_rate")) {
                if (!(r >= 0 && r <= 1)) throw ConfigError("sweeps.arrival_rate", "entries must lie in [0,1]");
                spec.arrival_sweep.push_back(bernoulli_pmf(r));
            }
        }
        if (pmfs) {
            if (!pmfs->is_array()) throw ConfigError("sweeps.arrival_pmf", "expected an array of pmfs");
            for (std::size_t i = 0; i < pmfs->size(); ++i)
                spec.arrival_sweep.push_back(
                    as_numbers((*pmfs)[i], "sweeps.arrival_pmf[" + std::to_string(i) + "]"));
        }
        if (auto* v = member(*sweeps, "discount")) spec.discount_sweep = as_numbers(*v, "sweeps.discount");
        if (auto* v = member(*sweeps, "buffer_size")) {
            if (!v->is_array()) throw ConfigError("sweeps.buffer_size", "expected an array of integers");
            for (std::size_t i = 0; i < v->size(); ++i)
                spec.buffer_sweep.push_back(as_int((*v)[i], "sweeps.buffer_size[" + std::to_string(i) + "]"));
        }
    }

    if (auto* solver = member(doc, "solver")) {
        require_object(*solver, "solver");
        reject_unknown(*solver, "solver", {"tolerance", "max_iters"});
        if (auto* v = member(*solver, "tolerance")) spec.solver.tolerance = as_number(*v, "solver.tolerance");
        if (auto* v = member(*solver, "max_iters")) spec.solver.max_iters = as_int(*v, "solver.max_iters");
        if (!(spec.solver.tolerance > 0)) throw ConfigError("solver.tolerance", "must be > 0");
        if (spec.solver.max_iters < 1) throw ConfigError("solver.max_iters", "must be >= 1");
    }

    if (auto* sim = member(doc, "sim")) {
        require_object(*sim, "sim");
        reject_unknown(*sim, "sim", {"horizon", "replications", "seed", "baselines"});
        spec.sim.enabled = true;
        if (auto* v = member(*sim, "horizon")) {
            if (!v->is_number_integer()) throw ConfigError("sim.horizon", "expected an integer");
            spec.sim.horizon = v->get<std::int64_t>();
        }
        if (auto* v = member(*sim, "replications")) spec.sim.replications = as_int(*v, "sim.replications");
        if (auto* v = member(*sim, "seed")) {
            if (!v->is_number_unsigned()) throw ConfigError("sim.seed", "expected a nonnegative integer");
            spec.sim.seed = v->get<std::uint64_t>();
        }
        if (spec.sim.horizon < 1) throw ConfigError("sim.horizon", "must be >= 1");
        if (spec.sim.replications < 1) throw ConfigError("sim.replications", "must be >= 1");
        if (auto* v = member(*sim, "baselines")) {
            if (!v->is_array()) throw ConfigError("sim.baselines", "expected an array");
            for (std::size_t i = 0; i < v->size(); ++i)
                spec.sim.baselines.push_back(parse_baseline((*v)[i], "sim.baselines[" + std::to_string(i) + "]"));
        } else {
            spec.sim.baselines.push_back({BaselineKind::always_act});
            spec.sim.baselines.push_back({BaselineKind::random, 0.5, 0.5});
        }
    }

    if (auto* outputs = member(doc, "outputs")) {
        require_object(*outputs, "outputs");
        reject_unknown(*outputs, "outputs", {"values"});
        if (auto* v = member(*outputs, "values")) {
            if (!v->is_boolean()) throw ConfigError("outputs.values", "expected a boolean");
            spec.outputs.write_values = v->get<bool>();
        }
    }

    try {
        (void)spec.grid();
    } catch (const ConfigError& e) {
        throw ConfigError("sweeps." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
    }
    return spec;
}

ExperimentSpec load_spec(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("spec", "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("spec", std::string("JSON parse error: ") + e.what());
    }
    return parse_spec(doc);
}

// ---------------------------------------------------------------------------
// JSON views

namespace {

json state_json(const State& s) { return json{{"energy", s.energy}, {"ages", s.ages}}; }

json witness_json(const std::optional<Witness>& w) {
    if (!w) return nullptr;
    json j = state_json(w->state);
    if (w->channel >= 0) j["channel"] = w->channel + 1;
    return j;
}

json threshold_json(const ProbeThresholdEntry& e) {
    return json{{"energy", e.energy}, {"fixed_ages", e.fixed_ages}, {"monotone", e.monotone}};
}

}  // namespace

json to_json(const StructureReport& r) {
    json probe_witnesses = json::array();
    for (const auto& e : r.probe_step_witnesses) probe_witnesses.push_back(threshold_json(e));
    return json{
        {"value_monotone_in_age", {{"holds", r.value_monotone_in_age},
                                   {"worst_violation", r.worst_age_violation},
                                   {"witness", witness_json(r.age_witness)}}},
        {"channel_value_monotone", {{"holds", r.channel_value_monotone},
                                    {"worst_violation", r.worst_channel_violation},
                                    {"witness", witness_json(r.channel_witness)}}},
        {"permutation_invariant", {{"holds", r.permutation_invariant},
                                   {"max_asymmetry", r.max_permutation_asymmetry}}},
        {"samples_max_age", {{"holds", r.samples_max_age},
                             {"exceptions", r.max_age_exceptions},
                             {"witness", witness_json(r.max_age_witness)}}},
        {"forced_idle", r.forced_idle},
        {"sample_step", {{"holds", r.sample_step},
                         {"violations", r.sample_step_violations},
                         {"witness", witness_json(r.sample_step_witness)}}},
        {"probe_step_conjecture", {{"holds", r.probe_step},
                                   {"violations", r.probe_step_violations},
                                   {"witnesses", probe_witnesses},
                                   {"truncation_bound", r.truncation_bound_count}}},
        {"energy_diagnostic", {{"value_nonincreasing_in_energy", r.value_nonincreasing_in_energy},
                               {"worst_violation", r.worst_energy_violation}}},
        {"proved_properties_hold", r.proved_properties_hold()},
    };
}

json to_json(const TrajectoryStats& s) {
    return json{{"horizon", s.horizon},
                {"seed", s.seed},
                {"per_process_avg_aoi", s.per_process_avg_aoi},
                {"total_avg_aoi", s.total_avg_aoi},
                {"probe_count", s.probe_count},
                {"sample_count", s.sample_count},
                {"success_count", s.success_count},
                {"energy", {{"min", s.energy.min}, {"mean", s.energy.mean}, {"max", s.energy.max}}}};
}

json to_json(const TrendCheck& c) {
    return json{{"name", c.name},
                {"holds", c.holds()},
                {"comparisons", c.comparisons},
                {"violations", c.violations},
                {"skipped", c.skipped},
                {"witnesses", c.witnesses}};
}

int RunSummary::exit_code() const {
    if (!all_converged) return 2;
    if (!proved_properties_hold) return 3;
    return 0;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

struct SimRecord {
    std::string policy;
    int replication = 0;
    TrajectoryStats stats;
};

struct PointResult {
    GridPoint point;
    std::optional<PointError> error;
    std::vector<double> deltas;
    int iterations = 0;
    double final_delta = 0.0;
    double worst_decrease = 0.0;
    bool contraction_ok = true;
    double max_delta_ratio = 0.0;
    ValueTable values;
    ThresholdSurface thresholds;
    StructureReport report;
    std::vector<TrendCheck> trends;
    std::vector<SimRecord> sims;
};

bool wants_analysis(Stage s) { return s == Stage::analyze || s == Stage::run; }
bool wants_simulation(Stage s) { return s == Stage::simulate || s == Stage::run; }

void solve_point(PointResult& r, const ExperimentSpec& spec, const RunOptions& opt) {
    const ModelConfig& model = r.point.model;
    const double tol = opt.tolerance.value_or(spec.solver.tolerance);
    ValueIterationResult vi = value_iteration(model, tol, spec.solver.max_iters);
    r.deltas = vi.delta_history;
    r.iterations = vi.table.iteration_count;
    r.final_delta = vi.table.final_delta;
    r.worst_decrease = vi.worst_decrease;
    for (std::size_t k = 1; k < r.deltas.size(); ++k) {
        if (r.deltas[k] > model.discount * r.deltas[k - 1] + 1e-9) r.contraction_ok = false;
        if (r.deltas[k - 1] > 0) r.max_delta_ratio = std::max(r.max_delta_ratio, r.deltas[k] / r.deltas[k - 1]);
    }
    r.values = std::move(vi.table);

    const bool analyze = wants_analysis(opt.stage);
    const bool simulate_it = wants_simulation(opt.stage) && spec.sim.enabled;
    if (!analyze && !simulate_it) return;

    const auto backups = greedy_backups(r.values, model);
    const PolicyTable policy = policy_from_backups(backups, model.num_channels());
    if (analyze) {
        r.thresholds = extract_thresholds(policy, model);
        r.report = verify_structure(r.values, policy, model, backups);
        r.trends.push_back(probe_trend_in_energy(r.thresholds.probe));
        if (model.num_processes > 1) r.trends.push_back(probe_trend_in_fixed_ages(r.thresholds.probe));
        r.trends.push_back(sample_trend_in_energy(r.thresholds.sample, model.num_channels()));
        r.trends.push_back(sample_trend_in_ages(r.thresholds.sample, model.num_channels()));
    }
    if (simulate_it) {
        const std::uint64_t seed = opt.seed.value_or(spec.sim.seed);
        std::vector<SchedulingPolicy> policies{optimal_policy(policy)};
        for (const auto& b : spec.sim.baselines) {
            SchedulingPolicy p = baseline_policy(b, model);
            p.name = baseline_label(b);
            policies.push_back(std::move(p));
        }
        for (const auto& p : policies) {
            for (int rep = 0; rep < spec.sim.replications; ++rep) {
                r.sims.push_back({p.name, rep,
                                  simulate(p, model, spec.sim.horizon, seed + static_cast<std::uint64_t>(rep))});
            }
        }
    }
}

std::string key_columns(const GridPoint& p) {
    return std::to_string(p.ordinal) + "," + format_number(p.model.mean_arrival()) + "," +
           format_number(p.model.discount) + "," + std::to_string(p.model.buffer_size);
}

json key_json(const GridPoint& p) {
    return json{{"point", p.ordinal},
                {"lambda", p.model.mean_arrival()},
                {"discount", p.model.discount},
                {"buffer_size", p.model.buffer_size}};
}

std::string age_header(int from, int to) {
    std::string s;
    for (int k = from; k <= to; ++k) s += ",t" + std::to_string(k);
    return s;
}

std::string join_ages(const std::vector<int>& ages) {
    std::string s;
    for (int a : ages) s += "," + std::to_string(a);
    return s;
}

constexpr const char* kEol = "\r\n";

class ArtifactWriter {
public:
    ArtifactWriter(fs::path dir, std::vector<std::string>& files) : dir_(std::move(dir)), files_(files) {}

    std::ofstream open(const std::string& name) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("outputs.directory", "cannot write " + (dir_ / name).string());
        files_.push_back(name);
        return out;
    }

    void write_json(const std::string& name, const json& doc) {
        auto out = open(name);
        out << doc.dump(2) << "\n";
    }

private:
    fs::path dir_;
    std::vector<std::string>& files_;
};

}  // namespace

RunSummary run_experiment(const ExperimentSpec& spec, const RunOptions& opt) {
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) throw ConfigError("outputs.directory", "cannot create " + opt.out_dir.string() + ": " + ec.message());

    const std::vector<GridPoint> grid = spec.grid();
    std::vector<PointResult> results(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) results[i].point = grid[i];

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < results.size(); i = next++) {
            try {
                solve_point(results[i], spec, opt);
            } catch (const Error& e) {
                results[i].error = PointError{results[i].point.ordinal, e.kind(), e.what()};
            }
        }
    };
    const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(results.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    RunSummary summary;
    summary.points = static_cast<int>(results.size());
    for (const auto& r : results) {
        if (r.error) {
            summary.errors.push_back(*r.error);
            summary.all_converged = false;
            continue;
        }
        if (!r.contraction_ok || r.worst_decrease < 0.0) summary.proved_properties_hold = false;
        if (wants_analysis(opt.stage) && !r.report.proved_properties_hold()) summary.proved_properties_hold = false;
    }

    ArtifactWriter writer(opt.out_dir, summary.files);
    const int n = spec.model.num_processes;

    {
        auto out = writer.open("convergence.csv");
        out << "point,lambda,discount,buffer_size,iteration,delta" << kEol;
        for (const auto& r : results)
            for (std::size_t k = 0; k < r.deltas.size(); ++k)
                out << key_columns(r.point) << "," << (k + 1) << "," << format_number(r.deltas[k]) << kEol;
    }

    if (opt.stage == Stage::solve || spec.outputs.write_values) {
        auto out = writer.open("values.csv");
        out << "point,lambda,discount,buffer_size,energy" << age_header(1, n) << ",value" << kEol;
        for (const auto& r : results) {
            if (r.error) continue;
            const StateSpace space(r.point.model);
            for (std::size_t i = 0; i < space.size(); ++i) {
                const State s = space.state(i);
                out << key_columns(r.point) << "," << s.energy << join_ages(s.ages) << ","
                    << format_number(r.values.values[i]) << kEol;
            }
        }
    }

    if (wants_analysis(opt.stage)) {
        {
            auto out = writer.open("probe_thresholds.csv");
            out << "point,lambda,discount,buffer_size,energy" << age_header(2, n) << ",t_th,monotone,truncation_bound"
                << kEol;
            for (const auto& r : results) {
                for (const auto& e : r.thresholds.probe) {
                    const std::string th =
                        !e.monotone ? "na" : (e.threshold ? std::to_string(*e.threshold) : std::string("inf"));
                    out << key_columns(r.point) << "," << e.energy << join_ages(e.fixed_ages) << "," << th << ","
                        << (e.monotone ? 1 : 0) << "," << (e.truncation_bound ? 1 : 0) << kEol;
                }
            }
        }
        {
            auto out = writer.open("sample_thresholds.csv");
            out << "point,lambda,discount,buffer_size,energy" << age_header(1, n) << ",p_th,channel,monotone" << kEol;
            for (const auto& r : results) {
                for (const auto& e : r.thresholds.sample) {
                    std::string p = "na";
                    std::string ch = "na";
                    if (e.monotone) {
                        p = e.p_threshold ? format_number(*e.p_threshold) : "inf";
                        ch = e.channel ? std::to_string(*e.channel + 1) : "inf";
                    }
                    out << key_columns(r.point) << "," << e.energy << join_ages(e.ages) << "," << p << "," << ch
                        << "," << (e.monotone ? 1 : 0) << kEol;
                }
            }
        }

        json points = json::array();
        for (const auto& r : results) {
            json j = key_json(r.point);
            if (r.error) {
                j["error"] = {{"kind", r.error->kind}, {"message", r.error->message}};
                points.push_back(j);
                continue;
            }
            j["iterations"] = r.iterations;
            j["final_delta"] = r.final_delta;
            j["contraction"] = {{"holds", r.contraction_ok}, {"max_delta_ratio", r.max_delta_ratio}};
            j["monotone_from_zero_worst_decrease"] = r.worst_decrease;
            j["structure"] = to_json(r.report);
            json trends = json::array();
            for (const auto& t : r.trends) trends.push_back(to_json(t));
            j["trends"] = trends;
            points.push_back(j);
        }

        // Threshold trends across the arrival sweep: consecutive arrival
        // levels at identical (discount, buffer size).
        json across = json::array();
        for (std::size_t a = 0; a < results.size(); ++a) {
            for (std::size_t b = a + 1; b < results.size(); ++b) {
                const auto& ra = results[a];
                const auto& rb = results[b];
                if (ra.error || rb.error) continue;
                const auto& ma = ra.point.model;
                const auto& mb = rb.point.model;
                if (ma.discount != mb.discount || ma.buffer_size != mb.buffer_size) continue;
                if (!(mb.mean_arrival() > ma.mean_arrival())) continue;
                // Only the next larger arrival level.
                bool consecutive = true;
                for (std::size_t c = 0; c < results.size(); ++c) {
                    const auto& mc = results[c].point.model;
                    if (mc.discount == ma.discount && mc.buffer_size == ma.buffer_size &&
                        mc.mean_arrival() > ma.mean_arrival() && mc.mean_arrival() < mb.mean_arrival())
                        consecutive = false;
                }
                if (!consecutive) continue;
                json item{{"lower_point", ra.point.ordinal}, {"higher_point", rb.point.ordinal}};
                item["probe"] = to_json(probe_trend_across(ra.thresholds.probe, rb.thresholds.probe));
                item["sample"] =
                    to_json(sample_trend_across(ra.thresholds.sample, rb.thresholds.sample, ma.num_channels()));
                across.push_back(item);
            }
        }
        writer.write_json("structure.json", json{{"name", spec.name}, {"points", points}, {"across_arrival", across}});
    }

    if (wants_simulation(opt.stage) && spec.sim.enabled) {
        json records = json::array();
        json summaries = json::array();
        for (const auto& r : results) {
            if (r.error) continue;
            std::map<std::string, std::vector<double>> by_policy;
            std::vector<std::string> order;
            for (const auto& s : r.sims) {
                json j = key_json(r.point);
                j["policy"] = s.policy;
                j["replication"] = s.replication;
                j.update(to_json(s.stats));
                records.push_back(j);
                if (!by_policy.count(s.policy)) order.push_back(s.policy);
                by_policy[s.policy].push_back(s.stats.total_avg_aoi);
            }
            for (const auto& name : order) {
                const auto& xs = by_policy[name];
                const double cnt = static_cast<double>(xs.size());
                double mean = 0.0;
                for (double x : xs) mean += x;
                mean /= cnt;
                double var = 0.0;
                for (double x : xs) var += (x - mean) * (x - mean);
                var = xs.size() > 1 ? var / (cnt - 1.0) : 0.0;
                const double half = 1.96 * std::sqrt(var / cnt);
                json j = key_json(r.point);
                j["policy"] = name;
                j["replications"] = xs.size();
                j["mean_total_avg_aoi"] = mean;
                j["ci95"] = {mean - half, mean + half};
                summaries.push_back(j);
            }
        }
        writer.write_json("simulation.json", json{{"name", spec.name}, {"records", records}, {"summary", summaries}});
    }

    json manifest_points = json::array();
    for (const auto& r : results) {
        json j = key_json(r.point);
        j["converged"] = !r.error;
        if (r.error) j["error"] = {{"kind", r.error->kind}, {"message", r.error->message}};
        manifest_points.push_back(j);
    }
    static constexpr const char* kStageNames[] = {"solve", "analyze", "simulate", "run"};
    json manifest{{"name", spec.name},
                  {"stage", kStageNames[static_cast<int>(opt.stage)]},
                  {"points", manifest_points},
                  {"files", summary.files},
                  {"all_converged", summary.all_converged},
                  {"proved_properties_hold", summary.proved_properties_hold},
                  {"exit_code", summary.exit_code()}};
    writer.write_json("manifest.json", manifest);
    return summary;
}

// ---------------------------------------------------------------------------
// Threshold diff

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

CsvTable read_csv(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("run", "cannot read " + file.string());
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            t.header = split(line);
            first = false;
        } else {
            t.rows.push_back(split(line));
        }
    }
    return t;
}

struct Cell {
    std::string key;
    bool defined = false;
    double value = 0.0;  // +inf for "inf"
    std::string text;
};

// Ordered numerically by (point, energy, ages).
using KeyedCells = std::map<std::vector<long long>, Cell>;

KeyedCells keyed(const CsvTable& t, const std::string& value_column) {
    std::vector<std::size_t> key_cols;
    std::size_t value_col = t.header.size();
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        const std::string& h = t.header[c];
        if (h == "point" || h == "energy" || (h.size() > 1 && h[0] == 't' && std::isdigit(static_cast<unsigned char>(h[1]))))
            key_cols.push_back(c);
        if (h == value_column) value_col = c;
    }
    if (value_col == t.header.size()) throw ConfigError("run", "column " + value_column + " missing");
    KeyedCells out;
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) throw ConfigError("run", "ragged CSV row");
        try {
        std::vector<long long> numeric;
        Cell cell;
        for (std::size_t c : key_cols) {
            cell.key += (cell.key.empty() ? "" : ";") + t.header[c] + "=" + row[c];
            numeric.push_back(std::stoll(row[c]));
        }
        cell.text = row[value_col];
        if (cell.text == "inf") {
            cell.defined = true;
            cell.value = std::numeric_limits<double>::infinity();
        } else if (cell.text != "na") {
            cell.defined = true;
            cell.value = std::stod(cell.text);
        }
        out[std::move(numeric)] = std::move(cell);
        } catch (const std::logic_error&) {
            throw ConfigError("run", "malformed threshold CSV row");
        }
    }
    return out;
}

void add_entry(DiffReport& report, const std::string& surface, const std::string& key, const Cell& a, const Cell& b) {
    ThresholdDiff d{surface, key, a.text, b.text, "na", "undefined"};
    if (a.defined && b.defined) {
        if (a.value == b.value) {
            d.difference = "0";
            d.direction = "tie";
        } else {
            d.difference = format_rounded(b.value - a.value);
            d.direction = b.value > a.value ? "increase" : "decrease";
        }
    }
    if (d.direction == "increase") {
        ++report.increases;
        (surface == "probe" ? report.probe_increases : report.sample_increases)++;
    } else if (d.direction == "decrease") {
        ++report.decreases;
    } else if (d.direction == "tie") {
        ++report.ties;
    } else {
        ++report.undefined;
    }
    report.entries.push_back(std::move(d));
}

}  // namespace

DiffReport diff_thresholds(const fs::path& run_a, const fs::path& run_b) {
    DiffReport report;

    const KeyedCells pa = keyed(read_csv(run_a / "probe_thresholds.csv"), "t_th");
    const KeyedCells pb = keyed(read_csv(run_b / "probe_thresholds.csv"), "t_th");
    std::vector<std::string> missing;
    for (const auto& [k, cell] : pa)
        if (!pb.count(k)) missing.push_back("b:" + cell.key);
    for (const auto& [k, cell] : pb)
        if (!pa.count(k)) missing.push_back("a:" + cell.key);
    if (!missing.empty()) throw KeyMismatchError(std::move(missing));
    for (const auto& [k, cell] : pa) add_entry(report, "probe", cell.key, cell, pb.at(k));

    const KeyedCells sa = keyed(read_csv(run_a / "sample_thresholds.csv"), "p_th");
    const KeyedCells sb = keyed(read_csv(run_b / "sample_thresholds.csv"), "p_th");
    for (const auto& [k, cell] : sa) {
        const auto it = sb.find(k);
        if (it == sb.end()) {
            ++report.sample_only_in_a;
            continue;
        }
        add_entry(report, "sample", cell.key, cell, it->second);
    }
    for (const auto& [k, _] : sb)
        if (!sa.count(k)) ++report.sample_only_in_b;
    return report;
}

void write_diff_csv(const DiffReport& report, const fs::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("out", "cannot write " + file.string());
    out << "surface,key,a,b,difference,direction" << kEol;
    for (const auto& d : report.entries)
        out << d.surface << "," << d.key << "," << d.a << "," << d.b << "," << d.difference << "," << d.direction
            << kEol;
}

json diff_summary_json(const DiffReport& r) {
    return json{{"entries", r.entries.size()},
                {"increases", r.increases},
                {"decreases", r.decreases},
                {"ties", r.ties},
                {"undefined", r.undefined},
                {"probe_increases", r.probe_increases},
                {"sample_increases", r.sample_increases},
                {"sample_only_in_a", r.sample_only_in_a},
                {"sample_only_in_b", r.sample_only_in_b}};
}

}  // namespace aoi
