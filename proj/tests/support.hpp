#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "aoi/model.hpp"

namespace aoi::test {

inline std::filesystem::path source_dir() { return AOI_SOURCE_DIR; }
inline std::filesystem::path config_path(const std::string& name) { return source_dir() / "configs" / name; }

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("aoi_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ModelConfig tiny_model(std::vector<double> probs, std::vector<double> pmf, std::vector<double> arrivals,
                              double discount = 0.9, int num_processes = 1, int age_cap = 3) {
    ModelConfig c;
    c.buffer_size = 2;
    c.probe_cost = 1;
    c.sample_cost = 1;
    c.channel_probs = std::move(probs);
    c.channel_pmf = std::move(pmf);
    c.arrival_pmf = std::move(arrivals);
    c.num_processes = num_processes;
    c.discount = discount;
    c.age_cap = age_cap;
    return canonicalize(c);
}

// Geometric aging cost sum_{t>=0} alpha^t min(T + t, T_max) in closed form:
// the linear part until the cap, then the capped tail.
inline double aging_cost(int age, int age_cap, double alpha) {
    double total = 0.0;
    double w = 1.0;
    for (int t = age; t < age_cap; ++t) {
        total += w * t;
        w *= alpha;
    }
    return total + w * age_cap / (1.0 - alpha);
}

}  // namespace aoi::test
