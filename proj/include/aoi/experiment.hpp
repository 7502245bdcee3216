#pragma once

// Experiment runner behind the CLI: parses a JSON experiment spec, expands
// the parameter grid, runs solve -> analyze -> simulate per grid point and
// writes the CSV/JSON artifacts. Output bytes depend only on the spec and the
// seed, never on thread count or timing.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/model.hpp"
#include "aoi/policy.hpp"
#include "aoi/simulation.hpp"
#include "aoi/trends.hpp"
#include "aoi/value_iteration.hpp"

namespace aoi {

struct SolverSettings {
    double tolerance = kDefaultTolerance;
    int max_iters = kDefaultMaxIters;
};

struct SimSettings {
    bool enabled = false;
    std::int64_t horizon = 100'000;
    int replications = 20;
    std::uint64_t seed = 1;
    std::vector<BaselineParams> baselines;
};

struct OutputSettings {
    bool write_values = false;
};

struct GridPoint {
    int ordinal = 0;
    ModelConfig model;
};

struct ExperimentSpec {
    std::string name;
    ModelConfig model;  // canonical base model
    std::vector<std::vector<double>> arrival_sweep;
    std::vector<double> discount_sweep;
    std::vector<int> buffer_sweep;
    SolverSettings solver;
    SimSettings sim;
    OutputSettings outputs;

    /// Arrival pmf (outermost) x discount x buffer size, in spec order. Every
    /// point is validated.
    std::vector<GridPoint> grid() const;
};

/// Throws ConfigError with a dotted field path (e.g. "model.arrival_pmf").
ExperimentSpec parse_spec(const nlohmann::json& doc);
ExperimentSpec load_spec(const std::filesystem::path& path);

enum class Stage { solve, analyze, simulate, run };

struct RunOptions {
    Stage stage = Stage::run;
    std::filesystem::path out_dir;
    int threads = 1;
    std::optional<std::uint64_t> seed;
    std::optional<double> tolerance;
};

struct PointError {
    int point = 0;
    std::string kind;
    std::string message;
};

struct RunSummary {
    int points = 0;
    bool all_converged = true;
    bool proved_properties_hold = true;
    std::vector<PointError> errors;
    std::vector<std::string> files;  // relative to out_dir, in write order

    /// 0 success, 2 non-convergence, 3 invariant violation.
    int exit_code() const;
};

RunSummary run_experiment(const ExperimentSpec& spec, const RunOptions& options);

struct ThresholdDiff {
    std::string surface;  // "probe" or "sample"
    std::string key;
    std::string a;
    std::string b;
    std::string difference;  // b - a, "inf"/"-inf" against infinite entries, "na" if either side undefined
    std::string direction;   // increase, decrease, tie, undefined
};

struct DiffReport {
    std::vector<ThresholdDiff> entries;
    std::size_t increases = 0;
    std::size_t decreases = 0;
    std::size_t ties = 0;
    std::size_t undefined = 0;
    // Per-surface counts, "probe" and "sample".
    std::size_t probe_increases = 0;
    std::size_t sample_increases = 0;
    // Sample keys are compared on the intersection; the remainder is counted
    // here.
    std::size_t sample_only_in_a = 0;
    std::size_t sample_only_in_b = 0;
};

/// Compares the threshold CSVs of two run directories. Probe-surface keys
/// (point, energy, fixed ages) must coincide, otherwise KeyMismatchError.
DiffReport diff_thresholds(const std::filesystem::path& run_a, const std::filesystem::path& run_b);

void write_diff_csv(const DiffReport& report, const std::filesystem::path& file);
nlohmann::json diff_summary_json(const DiffReport& report);

/// Shortest round-trip decimal form; "inf" for +infinity.
std::string format_number(double v);

nlohmann::json to_json(const StructureReport& report);
nlohmann::json to_json(const TrajectoryStats& stats);
nlohmann::json to_json(const TrendCheck& check);

}  // namespace aoi
