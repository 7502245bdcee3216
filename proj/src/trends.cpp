#include "aoi/trends.hpp"

#include <climits>
#include <map>
#include <optional>
#include <sstream>

namespace aoi {

namespace {

constexpr std::size_t kMaxWitnesses = 8;

using Key = std::vector<int>;             // energy followed by ages
using RankMap = std::map<Key, std::optional<int>>;  // nullopt: no step pattern

std::string describe(const Key& k) {
    std::ostringstream os;
    os << "(E=" << k[0];
    for (std::size_t i = 1; i < k.size(); ++i) os << (i == 1 ? "; " : ",") << k[i];
    os << ")";
    return os.str();
}

RankMap ranks(const std::vector<ProbeThresholdEntry>& surface) {
    RankMap out;
    for (const auto& e : surface) {
        Key k{e.energy};
        k.insert(k.end(), e.fixed_ages.begin(), e.fixed_ages.end());
        out[k] = e.monotone ? std::optional<int>(e.threshold.value_or(INT_MAX)) : std::nullopt;
    }
    return out;
}

RankMap ranks(const std::vector<SampleThresholdEntry>& surface, int num_channels) {
    RankMap out;
    for (const auto& e : surface) {
        Key k{e.energy};
        k.insert(k.end(), e.ages.begin(), e.ages.end());
        out[k] = e.monotone ? std::optional<int>(e.channel.value_or(num_channels)) : std::nullopt;
    }
    return out;
}

void compare(TrendCheck& check, const Key& from, const std::optional<int>& a, const Key& to,
             const std::optional<int>& b) {
    if (!a || !b) {
        ++check.skipped;
        return;
    }
    ++check.comparisons;
    if (*b > *a) {
        ++check.violations;
        if (check.witnesses.size() < kMaxWitnesses)
            check.witnesses.push_back(describe(from) + " -> " + describe(to));
    }
}

// For every key, compares against the key with coordinate `coord` bumped by one.
void along_coordinate(TrendCheck& check, const RankMap& map, std::size_t coord) {
    for (const auto& [key, rank] : map) {
        Key next = key;
        ++next[coord];
        const auto it = map.find(next);
        if (it != map.end()) compare(check, key, rank, next, it->second);
    }
}

void across(TrendCheck& check, const RankMap& lower, const RankMap& higher) {
    for (const auto& [key, rank] : lower) {
        const auto it = higher.find(key);
        if (it != higher.end()) compare(check, key, rank, key, it->second);
    }
}

}  // namespace

TrendCheck probe_trend_in_energy(const std::vector<ProbeThresholdEntry>& surface) {
    TrendCheck c;
    c.name = "probe threshold nonincreasing in energy";
    along_coordinate(c, ranks(surface), 0);
    return c;
}

TrendCheck probe_trend_in_fixed_ages(const std::vector<ProbeThresholdEntry>& surface) {
    TrendCheck c;
    c.name = "probe threshold nonincreasing in the other ages";
    const RankMap map = ranks(surface);
    if (map.empty()) return c;
    const std::size_t width = map.begin()->first.size();
    for (std::size_t coord = 1; coord < width; ++coord) along_coordinate(c, map, coord);
    return c;
}

TrendCheck sample_trend_in_energy(const std::vector<SampleThresholdEntry>& surface, int num_channels) {
    TrendCheck c;
    c.name = "sample threshold nonincreasing in energy";
    along_coordinate(c, ranks(surface, num_channels), 0);
    return c;
}

TrendCheck sample_trend_in_ages(const std::vector<SampleThresholdEntry>& surface, int num_channels) {
    TrendCheck c;
    c.name = "sample threshold nonincreasing in ages";
    const RankMap map = ranks(surface, num_channels);
    if (map.empty()) return c;
    const std::size_t width = map.begin()->first.size();
    for (std::size_t coord = 1; coord < width; ++coord) along_coordinate(c, map, coord);
    return c;
}

TrendCheck probe_trend_across(const std::vector<ProbeThresholdEntry>& lower,
                              const std::vector<ProbeThresholdEntry>& higher) {
    TrendCheck c;
    c.name = "probe threshold nonincreasing across parameter";
    across(c, ranks(lower), ranks(higher));
    return c;
}

TrendCheck sample_trend_across(const std::vector<SampleThresholdEntry>& lower,
                               const std::vector<SampleThresholdEntry>& higher, int num_channels) {
    TrendCheck c;
    c.name = "sample threshold nonincreasing across parameter";
    across(c, ranks(lower, num_channels), ranks(higher, num_channels));
    return c;
}

}  // namespace aoi
