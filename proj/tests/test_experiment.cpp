#include <doctest.h>

#include <sstream>

#include "aoi/error.hpp"
#include "aoi/experiment.hpp"
#include "support.hpp"

using namespace aoi;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_spec() {
    return json::parse(R"({
        "name": "small",
        "model": {"buffer_size": 6, "arrival_rate": 0.5, "channel_probs": [0.9, 0.5, 0.1],
                  "channel_pmf": [0.3, 0.4, 0.3], "num_processes": 2, "discount": 0.95, "age_cap": 6},
        "sweeps": {"arrival_rate": [0.3, 0.6]},
        "sim": {"horizon": 2000, "replications": 3, "seed": 5},
        "outputs": {"values": true}
    })");
}

std::string config_field(const json& doc) {
    try {
        parse_spec(doc);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "none";
}

std::string first_line(const fs::path& file) {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string> lines(const fs::path& file) {
    std::istringstream in(test::slurp(file));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

fs::path run_single(const std::string& name, double rate, double discount, int buffer = 12) {
    json doc = json::parse(test::slurp(test::config_path("fig2.json")));
    doc.erase("sweeps");
    doc.erase("sim");
    doc["model"]["arrival_rate"] = rate;
    doc["model"]["discount"] = discount;
    doc["model"]["buffer_size"] = buffer;
    RunOptions opt;
    opt.stage = Stage::analyze;
    opt.out_dir = test::scratch_dir(name);
    run_experiment(parse_spec(doc), opt);
    return opt.out_dir;
}

}  // namespace

TEST_CASE("bundled specs parse into the documented grids") {
    const ExperimentSpec f2 = load_spec(test::config_path("fig2.json"));
    const auto g2 = f2.grid();
    REQUIRE(g2.size() == 3);
    CHECK(g2[0].model.mean_arrival() == doctest::Approx(0.3));
    CHECK(g2[2].model.mean_arrival() == doctest::Approx(0.7));
    CHECK(g2[1].model.age_cap == 50);
    CHECK(g2[1].model.num_processes == 1);
    CHECK(f2.sim.enabled);
    CHECK(f2.sim.replications == 20);
    CHECK(f2.sim.horizon == 100000);
    CHECK(f2.sim.baselines.size() == 2);

    const ExperimentSpec f6 = load_spec(test::config_path("fig6.json"));
    CHECK(f6.grid().size() == 3);
    CHECK(f6.model.num_processes == 3);
    CHECK(f6.model.age_cap == 12);
    CHECK_FALSE(f6.sim.enabled);
}

TEST_CASE("grid order: arrival outermost, then discount, then buffer size") {
    json doc = small_spec();
    doc["sweeps"]["discount"] = {0.9, 0.95};
    doc["sweeps"]["buffer_size"] = {4, 6};
    const auto grid = parse_spec(doc).grid();
    REQUIRE(grid.size() == 8);
    for (int i = 0; i < 8; ++i) CHECK(grid[i].ordinal == i);
    CHECK(grid[0].model.buffer_size == 4);
    CHECK(grid[1].model.buffer_size == 6);
    CHECK(grid[2].model.discount == 0.95);
    CHECK(grid[3].model.mean_arrival() == doctest::Approx(0.3));
    CHECK(grid[4].model.mean_arrival() == doctest::Approx(0.6));
}

TEST_CASE("spec validation names the field") {
    json doc = small_spec();
    doc["model"].erase("arrival_rate");
    doc["model"]["arrival_pmf"] = {0.5, 0.4};
    CHECK(config_field(doc) == "model.arrival_pmf");

    doc = small_spec();
    doc["model"]["discount"] = 1.5;
    CHECK(config_field(doc) == "model.discount");

    doc = small_spec();
    doc["model"]["channel_pmf"] = {0.5, 0.5};
    CHECK(config_field(doc) == "model.channel_probs");

    doc = small_spec();
    doc["model"]["age_cap"] = "ten";
    CHECK(config_field(doc) == "model.age_cap");

    doc = small_spec();
    doc["model"]["bufer_size"] = 3;
    CHECK(config_field(doc) == "model.bufer_size");

    doc = small_spec();
    doc["sweeps"]["discount"] = {0.9, 1.0};
    CHECK(config_field(doc) == "sweeps.discount");

    doc = small_spec();
    doc["sweeps"]["buffer_size"] = {1};
    CHECK(config_field(doc) == "sweeps.probe_cost");

    doc = small_spec();
    doc["sweeps"]["arrival_rate"] = {0.3, 1.3};
    CHECK(config_field(doc) == "sweeps.arrival_rate");

    doc = small_spec();
    doc["sim"]["baselines"] = json::array({{{"kind", "random"}, {"probe_rate", 2}}});
    CHECK(config_field(doc) == "sim.baselines[0].probe_rate");

    doc = small_spec();
    doc["sim"]["baselines"] = json::array({{{"kind", "greedy"}}});
    CHECK(config_field(doc) == "sim.baselines[0].kind");

    doc = small_spec();
    doc["solver"] = {{"tolerance", -1}};
    CHECK(config_field(doc) == "solver.tolerance");

    doc = small_spec();
    doc.erase("model");
    CHECK(config_field(doc) == "model");

    CHECK(config_field(small_spec()) == "none");
    CHECK_THROWS_AS(load_spec(test::source_dir() / "no_such_spec.json"), ConfigError);
}

TEST_CASE("artifact schemas") {
    RunOptions opt;
    opt.out_dir = test::scratch_dir("schema");
    const RunSummary s = run_experiment(parse_spec(small_spec()), opt);
    CHECK(s.exit_code() == 0);
    CHECK(s.points == 2);
    const std::vector<std::string> expected_files{"convergence.csv",       "values.csv",     "probe_thresholds.csv",
                                                  "sample_thresholds.csv", "structure.json", "simulation.json",
                                                  "manifest.json"};
    CHECK(s.files == expected_files);
    CHECK(first_line(opt.out_dir / "convergence.csv") == "point,lambda,discount,buffer_size,iteration,delta");
    CHECK(first_line(opt.out_dir / "values.csv") == "point,lambda,discount,buffer_size,energy,t1,t2,value");
    CHECK(first_line(opt.out_dir / "probe_thresholds.csv") ==
          "point,lambda,discount,buffer_size,energy,t2,t_th,monotone,truncation_bound");
    CHECK(first_line(opt.out_dir / "sample_thresholds.csv") ==
          "point,lambda,discount,buffer_size,energy,t1,t2,p_th,channel,monotone");

    for (const char* name : {"convergence.csv", "values.csv", "probe_thresholds.csv", "sample_thresholds.csv"}) {
        const auto rows = lines(opt.out_dir / name);
        REQUIRE(rows.size() > 1);
        const auto commas = std::count(rows[0].begin(), rows[0].end(), ',');
        for (const auto& r : rows) {
            CHECK(r.back() == '\r');
            CHECK(std::count(r.begin(), r.end(), ',') == commas);
        }
    }
    CHECK(lines(opt.out_dir / "values.csv").size() == 1 + 2 * 7 * 36);
    CHECK(lines(opt.out_dir / "probe_thresholds.csv").size() == 1 + 2 * 7 * 6);
    CHECK(lines(opt.out_dir / "probe_thresholds.csv")[1].rfind("0,0.3,0.95,6,0,1,inf,1,1", 0) == 0);

    const json structure = json::parse(test::slurp(opt.out_dir / "structure.json"));
    REQUIRE(structure["points"].size() == 2);
    const json& p0 = structure["points"][0];
    CHECK(p0["structure"]["proved_properties_hold"] == true);
    CHECK(p0["contraction"]["holds"] == true);
    CHECK(p0.contains("trends"));
    CHECK(structure["across_arrival"].size() == 1);

    const json sim = json::parse(test::slurp(opt.out_dir / "simulation.json"));
    CHECK(sim["records"].size() == 2 * 3 * 3);
    CHECK(sim["summary"].size() == 2 * 3);
    CHECK(sim["summary"][0]["policy"] == "optimal");
    CHECK(sim["summary"][1]["policy"] == "always-act");
    CHECK(sim["summary"][2]["policy"] == "random(0.5,0.5)");
    const json rec = sim["records"][0];
    for (const char* key : {"per_process_avg_aoi", "total_avg_aoi", "probe_count", "sample_count", "success_count",
                            "energy", "seed", "horizon", "replication", "lambda", "discount"})
        CHECK(rec.contains(key));

    const json manifest = json::parse(test::slurp(opt.out_dir / "manifest.json"));
    CHECK(manifest["exit_code"] == 0);
    CHECK(manifest["points"].size() == 2);
}

TEST_CASE("stages write only their artifacts") {
    RunOptions opt;
    opt.stage = Stage::solve;
    opt.out_dir = test::scratch_dir("stage_solve");
    json doc = small_spec();
    doc.erase("outputs");
    CHECK(run_experiment(parse_spec(doc), opt).files ==
          std::vector<std::string>{"convergence.csv", "values.csv", "manifest.json"});
    opt.stage = Stage::simulate;
    opt.out_dir = test::scratch_dir("stage_sim");
    CHECK(run_experiment(parse_spec(doc), opt).files ==
          std::vector<std::string>{"convergence.csv", "simulation.json", "manifest.json"});
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
    const ExperimentSpec spec = parse_spec(small_spec());
    RunOptions a;
    a.out_dir = test::scratch_dir("det_a");
    a.threads = 1;
    RunOptions b = a;
    b.out_dir = test::scratch_dir("det_b");
    b.threads = 3;
    const RunSummary sa = run_experiment(spec, a);
    run_experiment(spec, b);
    for (const auto& f : sa.files) {
        CAPTURE(f);
        CHECK(test::slurp(a.out_dir / f) == test::slurp(b.out_dir / f));
    }
    RunOptions c = a;
    c.out_dir = test::scratch_dir("det_c");
    c.seed = 77;
    run_experiment(spec, c);
    CHECK(test::slurp(a.out_dir / "simulation.json") != test::slurp(c.out_dir / "simulation.json"));
    CHECK(test::slurp(a.out_dir / "probe_thresholds.csv") == test::slurp(c.out_dir / "probe_thresholds.csv"));
}

TEST_CASE("non-convergence yields exit code 2 and an error record per point") {
    json doc = small_spec();
    doc["solver"] = {{"max_iters", 5}};
    RunOptions opt;
    opt.out_dir = test::scratch_dir("nonconv");
    const RunSummary s = run_experiment(parse_spec(doc), opt);
    CHECK(s.exit_code() == 2);
    REQUIRE(s.errors.size() == 2);
    CHECK(s.errors[0].kind == "non_convergence");
    const json manifest = json::parse(test::slurp(opt.out_dir / "manifest.json"));
    CHECK(manifest["points"][1]["converged"] == false);
}

TEST_CASE("diff of identical runs is all ties") {
    const fs::path a = run_single("diff_same_a", 0.5, 0.99);
    const fs::path b = run_single("diff_same_b", 0.5, 0.99);
    const DiffReport r = diff_thresholds(a, b);
    CHECK(r.entries.size() > 0);
    CHECK(r.increases == 0);
    CHECK(r.decreases == 0);
    CHECK(r.ties + r.undefined == r.entries.size());
    CHECK(r.sample_only_in_a == 0);
}

TEST_CASE("diff across arrival rates: no probe threshold increases") {
    const fs::path lo = run_single("diff_lo", 0.3, 0.99);
    const fs::path hi = run_single("diff_hi", 0.7, 0.99);
    const DiffReport r = diff_thresholds(lo, hi);
    CHECK(r.probe_increases == 0);
    CHECK(r.sample_increases == 0);
    CHECK(r.decreases > 0);
}

TEST_CASE("diff refuses runs with different grid keys") {
    const fs::path a = run_single("diff_key_a", 0.5, 0.99);
    const fs::path b = run_single("diff_key_b", 0.5, 0.99, 10);
    try {
        diff_thresholds(a, b);
        FAIL("expected KeyMismatchError");
    } catch (const KeyMismatchError& e) {
        CHECK(e.missing().size() == 2);
        CHECK(e.missing()[0] == "b:point=0;energy=11");
    }
}

TEST_CASE("discount diff matches the golden file") {
    const fs::path a = run_single("golden_a", 0.5, 0.9);
    const fs::path b = run_single("golden_b", 0.5, 0.99);
    const DiffReport r = diff_thresholds(a, b);
    const fs::path out = test::scratch_dir("golden") / "diff.csv";
    write_diff_csv(r, out);
    CHECK(test::slurp(out) == test::slurp(test::source_dir() / "tests" / "golden" / "diff_discount.csv"));
}

TEST_CASE("format_number") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(12) == "12");
    CHECK(format_number(1e-8) == "1e-08");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(std::stod(format_number(729.4395059559201)) == 729.4395059559201);
}
