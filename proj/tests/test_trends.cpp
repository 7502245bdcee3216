#include <doctest.h>

#include "aoi/trends.hpp"

using namespace aoi;

namespace {

ProbeThresholdEntry probe_entry(int e, std::optional<int> th, std::vector<int> fixed = {}, bool monotone = true) {
    ProbeThresholdEntry p;
    p.energy = e;
    p.fixed_ages = std::move(fixed);
    p.threshold = th;
    p.monotone = monotone;
    return p;
}

SampleThresholdEntry sample_entry(int e, std::vector<int> ages, std::optional<int> channel, bool monotone = true) {
    SampleThresholdEntry s;
    s.energy = e;
    s.ages = std::move(ages);
    s.channel = channel;
    s.monotone = monotone;
    return s;
}

}  // namespace

TEST_CASE("probe trend in energy counts increases, treats missing thresholds as infinite") {
    const std::vector<ProbeThresholdEntry> good{probe_entry(0, std::nullopt), probe_entry(1, std::nullopt),
                                                probe_entry(2, 9), probe_entry(3, 9), probe_entry(4, 5)};
    const TrendCheck ok = probe_trend_in_energy(good);
    CHECK(ok.holds());
    CHECK(ok.comparisons == 4);

    const std::vector<ProbeThresholdEntry> bad{probe_entry(0, 4), probe_entry(1, 6), probe_entry(2, std::nullopt)};
    const TrendCheck nok = probe_trend_in_energy(bad);
    CHECK(nok.violations == 2);
    CHECK_FALSE(nok.witnesses.empty());
}

TEST_CASE("non-step entries are skipped, not compared") {
    const std::vector<ProbeThresholdEntry> s{probe_entry(0, 4), probe_entry(1, std::nullopt, {}, false),
                                             probe_entry(2, 9)};
    const TrendCheck c = probe_trend_in_energy(s);
    CHECK(c.comparisons == 0);
    CHECK(c.skipped == 2);
    CHECK(c.holds());
}

TEST_CASE("probe trend in the fixed ages") {
    const std::vector<ProbeThresholdEntry> s{probe_entry(2, 8, {1, 1}), probe_entry(2, 7, {2, 1}),
                                             probe_entry(2, 9, {1, 2})};
    const TrendCheck c = probe_trend_in_fixed_ages(s);
    CHECK(c.comparisons == 2);
    CHECK(c.violations == 1);
}

TEST_CASE("sample trends in energy and ages use channel ranks") {
    const int m = 5;
    const std::vector<SampleThresholdEntry> s{sample_entry(2, {3}, 3), sample_entry(3, {3}, 2),
                                              sample_entry(2, {4}, 4), sample_entry(3, {4}, std::nullopt)};
    const TrendCheck in_e = sample_trend_in_energy(s, m);
    CHECK(in_e.comparisons == 2);
    CHECK(in_e.violations == 1);  // (2,4) -> (3,4): channel 4 -> never
    const TrendCheck in_t = sample_trend_in_ages(s, m);
    CHECK(in_t.comparisons == 2);
    CHECK(in_t.violations == 2);
}

TEST_CASE("trends across a parameter compare matching keys only") {
    const std::vector<ProbeThresholdEntry> lo{probe_entry(2, 9), probe_entry(3, 8), probe_entry(4, 6)};
    const std::vector<ProbeThresholdEntry> hi{probe_entry(2, 8), probe_entry(3, 8), probe_entry(4, 7)};
    const TrendCheck c = probe_trend_across(lo, hi);
    CHECK(c.comparisons == 3);
    CHECK(c.violations == 1);

    const std::vector<SampleThresholdEntry> slo{sample_entry(2, {5}, 2), sample_entry(3, {5}, 1)};
    const std::vector<SampleThresholdEntry> shi{sample_entry(2, {5}, 1)};
    const TrendCheck sc = sample_trend_across(slo, shi, 5);
    CHECK(sc.comparisons == 1);
    CHECK(sc.holds());
}
