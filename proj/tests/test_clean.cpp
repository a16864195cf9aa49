#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ersm/clean.hpp"

using namespace ersm;

namespace {
const double kNan = std::numeric_limits<double>::quiet_NaN();
}

TEST_CASE("a lone huge spike is replaced by its neighbors' interpolant") {
    TimeSeries ts(0.0, 60.0, {45000.0, 45001.0, 10000.0, 45003.0, 45004.0});
    CleanStats stats;
    TimeSeries c = clean_series(ts, 500.0, &stats);
    CHECK(stats.spikes_removed == 1);
    CHECK(c.values[2] == Catch::Approx(0.5 * (45001.0 + 45003.0)));
    CHECK(c.values[0] == 45000.0);
    CHECK(c.values[4] == 45004.0);
}

TEST_CASE("a clean series passes through unchanged") {
    std::vector<double> vals;
    for (int i = 0; i < 200; ++i) vals.push_back(45000.0 + 20.0 * std::sin(i * 0.1));
    TimeSeries ts(0.0, 60.0, vals);
    CleanStats stats;
    TimeSeries c = clean_series(ts, 500.0, &stats);
    CHECK(stats.spikes_removed == 0);
    CHECK(stats.gaps_filled == 0);
    CHECK(c.values == vals);
}

TEST_CASE("an interior gap is filled linearly") {
    TimeSeries ts(0.0, 60.0, {10.0, kNan, 20.0}, {0, 1, 0});
    CleanStats stats;
    TimeSeries c = clean_series(ts, 500.0, &stats);
    CHECK(c.values[1] == Catch::Approx(15.0));
    CHECK(stats.gaps_filled == 1);
    // the mask still records where the source had no sample
    CHECK(c.is_gap(1));
}

TEST_CASE("leading and trailing gaps take the nearest valid value") {
    TimeSeries ts(0.0, 60.0, {kNan, kNan, 7.0, 8.0, kNan}, {1, 1, 0, 0, 1});
    TimeSeries c = clean_series(ts, 500.0);
    CHECK(c.values[0] == 7.0);
    CHECK(c.values[1] == 7.0);
    CHECK(c.values[4] == 8.0);
}

TEST_CASE("valid samples are never modified by gap filling") {
    std::mt19937_64 rng(314);
    std::normal_distribution<double> step(0.0, 3.0);
    std::vector<double> vals{45000.0};
    for (int i = 1; i < 1000; ++i) vals.push_back(vals.back() + step(rng));
    TimeSeries ts(0.0, 60.0, vals);
    for (size_t i = 50; i < 1000; i += 97) {
        ts.values[i] = kNan;
        ts.gap_mask[i] = 1;
    }
    TimeSeries c = clean_series(ts, 500.0);
    for (size_t i = 0; i < ts.size(); ++i)
        if (!ts.is_gap(i)) CHECK(c.values[i] == ts.values[i]);
}

TEST_CASE("cleaning twice equals cleaning once") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> step(0.0, 5.0);
    std::uniform_int_distribution<size_t> where(0, 1999);
    std::vector<double> vals{45000.0};
    for (int i = 1; i < 2000; ++i) vals.push_back(vals.back() + step(rng));
    TimeSeries ts(0.0, 60.0, vals);
    for (int s = 0; s < 12; ++s) ts.values[where(rng)] += 2000.0;
    for (int g = 0; g < 8; ++g) {
        size_t i = where(rng);
        ts.values[i] = kNan;
        ts.gap_mask[i] = 1;
    }
    TimeSeries once = clean_series(ts, 500.0);
    TimeSeries twice = clean_series(once, 500.0);
    REQUIRE(once.size() == twice.size());
    for (size_t i = 0; i < once.size(); ++i) {
        CHECK(twice.values[i] == once.values[i]);
        CHECK(twice.is_gap(i) == once.is_gap(i));
    }
}

TEST_CASE("degenerate inputs are rejected") {
    TimeSeries all_gaps(0.0, 60.0, {kNan, kNan, kNan}, {1, 1, 1});
    CHECK_THROWS_AS(clean_series(all_gaps, 500.0), EmptySeries);
    TimeSeries ok(0.0, 60.0, {1.0, 2.0});
    CHECK_THROWS_AS(clean_series(ok, 0.0), InvalidArgument);
    CHECK_THROWS_AS(clean_series(ok, -5.0), InvalidArgument);
}
