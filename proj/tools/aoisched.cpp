// aoisched: command-line front end for the AoI scheduling solver.
//
//   aoisched run --spec configs/fig2.json --out out/fig2
//   aoisched diff out/a out/b --out out/diff
//
// Errors are reported on stderr as a single JSON object of the form
// {"error": {"kind": ..., "message": ..., ...}} with a nonzero exit status.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aoi/error.hpp"
#include "aoi/experiment.hpp"
#include "aoi/oracle.hpp"
#include "aoi/value_iteration.hpp"

namespace {

using nlohmann::json;

constexpr int kExitError = 1;
constexpr const char* kOutEnv = "AOI_OUT_DIR";

std::string default_out_dir() {
    const char* env = std::getenv(kOutEnv);
    return env && *env ? env : "out";
}

int report(const aoi::Error& e, int code) {
    json rec{{"kind", e.kind()}, {"message", e.what()}};
    if (const auto* c = dynamic_cast<const aoi::ConfigError*>(&e)) rec["field"] = c->field();
    if (const auto* k = dynamic_cast<const aoi::KeyMismatchError*>(&e)) rec["missing"] = k->missing();
    if (const auto* g = dynamic_cast<const aoi::GuardError*>(&e)) rec["policy_count"] = g->policy_count();
    if (const auto* n = dynamic_cast<const aoi::ConvergenceError*>(&e)) {
        rec["iterations"] = n->iterations();
        rec["last_delta"] = n->last_delta();
    }
    std::cerr << json{{"error", rec}}.dump() << "\n";
    return code;
}

std::vector<int> parse_state(const std::string& text) {
    std::vector<int> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw aoi::ConfigError("start", "expected comma-separated integers E,T1,...,TN");
        }
    }
    if (out.size() < 2) throw aoi::ConfigError("start", "expected E,T1,...,TN");
    return out;
}

struct PipelineArgs {
    std::string spec;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 1;
    double tolerance = 0.0;
};

int run_pipeline(aoi::Stage stage, const PipelineArgs& args, const CLI::App& cmd) {
    const aoi::ExperimentSpec spec = aoi::load_spec(args.spec);
    aoi::RunOptions opt;
    opt.stage = stage;
    opt.out_dir = args.out;
    opt.threads = args.threads;
    if (cmd.count("--seed")) opt.seed = args.seed;
    if (cmd.count("--tolerance")) {
        if (!(args.tolerance > 0)) throw aoi::ConfigError("tolerance", "must be > 0");
        opt.tolerance = args.tolerance;
    }
    const aoi::RunSummary summary = aoi::run_experiment(spec, opt);

    json status{{"points", summary.points},
                {"all_converged", summary.all_converged},
                {"proved_properties_hold", summary.proved_properties_hold},
                {"out", args.out},
                {"files", summary.files}};
    std::cout << status.dump() << "\n";
    if (summary.exit_code() != 0) {
        json errors = json::array();
        for (const auto& e : summary.errors)
            errors.push_back({{"point", e.point}, {"kind", e.kind}, {"message", e.message}});
        const char* kind = summary.all_converged ? "invariant_violation" : "non_convergence";
        std::cerr << json{{"error", {{"kind", kind}, {"points", errors}}}}.dump() << "\n";
    }
    return summary.exit_code();
}

int run_oracle(const std::string& spec_path, const std::string& start_text) {
    const aoi::ExperimentSpec spec = aoi::load_spec(spec_path);
    const aoi::ModelConfig& model = spec.model;
    const std::vector<int> raw = parse_state(start_text);
    const aoi::State start{raw.front(), std::vector<int>(raw.begin() + 1, raw.end())};

    const aoi::OracleResult oracle = aoi::enumerate_optimal(model, start);
    const auto vi = aoi::value_iteration(model, spec.solver.tolerance, spec.solver.max_iters);
    const aoi::StateSpace space(model);
    const double vi_value = vi.table.values[space.index(start)];
    std::cout << json{{"policies_evaluated", oracle.policies_evaluated},
                      {"oracle_value", oracle.value},
                      {"value_iteration_value", vi_value},
                      {"abs_difference", std::abs(oracle.value - vi_value)}}
                     .dump()
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Age-of-Information scheduling: solve, analyze, simulate and compare threshold policies"};
    app.require_subcommand(1);

    PipelineArgs args;
    args.out = default_out_dir();

    struct Verb {
        const char* name;
        const char* help;
        aoi::Stage stage;
    };
    const Verb verbs[] = {
        {"solve", "run value iteration and write convergence logs and values", aoi::Stage::solve},
        {"analyze", "solve, then extract thresholds and verify policy structure", aoi::Stage::analyze},
        {"simulate", "solve, then simulate the optimal policy against baselines", aoi::Stage::simulate},
        {"run", "full pipeline: solve, analyze and simulate", aoi::Stage::run},
    };
    std::vector<std::pair<CLI::App*, aoi::Stage>> pipeline;
    for (const auto& v : verbs) {
        CLI::App* cmd = app.add_subcommand(v.name, v.help);
        cmd->add_option("--spec", args.spec, "experiment spec (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", args.out, std::string("output directory (default $") + kOutEnv + " or ./out)");
        cmd->add_option("--seed", args.seed, "override the simulation seed");
        cmd->add_option("--threads", args.threads, "worker threads for grid points")->check(CLI::PositiveNumber);
        cmd->add_option("--tolerance", args.tolerance, "override the value-iteration tolerance");
        pipeline.emplace_back(cmd, v.stage);
    }

    std::string dir_a;
    std::string dir_b;
    std::string diff_out;
    CLI::App* diff = app.add_subcommand("diff", "compare the threshold surfaces of two run directories");
    diff->add_option("run_a", dir_a, "first run directory")->required()->check(CLI::ExistingDirectory);
    diff->add_option("run_b", dir_b, "second run directory")->required()->check(CLI::ExistingDirectory);
    diff->add_option("--out", diff_out, "directory for diff.csv and diff_summary.json");

    std::string oracle_spec;
    std::string oracle_start;
    CLI::App* oracle = app.add_subcommand("oracle", "");
    oracle->group("");
    oracle->add_option("--spec", oracle_spec)->required()->check(CLI::ExistingFile);
    oracle->add_option("--start", oracle_start, "start state E,T1,...,TN")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        for (const auto& [cmd, stage] : pipeline)
            if (cmd->parsed()) return run_pipeline(stage, args, *cmd);

        if (diff->parsed()) {
            const aoi::DiffReport report = aoi::diff_thresholds(dir_a, dir_b);
            const json summary = aoi::diff_summary_json(report);
            if (!diff_out.empty()) {
                std::filesystem::create_directories(diff_out);
                aoi::write_diff_csv(report, std::filesystem::path(diff_out) / "diff.csv");
                std::ofstream(std::filesystem::path(diff_out) / "diff_summary.json") << summary.dump(2) << "\n";
            }
            std::cout << summary.dump() << "\n";
            return 0;
        }
        if (oracle->parsed()) return run_oracle(oracle_spec, oracle_start);
    } catch (const aoi::ConvergenceError& e) {
        return report(e, 2);
    } catch (const aoi::Error& e) {
        return report(e, kExitError);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
        return kExitError;
    }
    return kExitError;
}
