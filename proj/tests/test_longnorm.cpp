#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ersm/longnorm.hpp"

using namespace ersm;

namespace {

StationRecord station(const std::string& code, double lon) {
    StationRecord s;
    s.iaga_code = code;
    s.latitude_deg = 40.0;
    s.longitude_deg = lon;
    s.elevation_m = 0.0;
    return s;
}

TimeSeries diurnal(size_t n, double period_s = 60.0, double t0 = 0.0) {
    TimeSeries ts(t0, period_s, {});
    for (size_t i = 0; i < n; ++i)
        ts.values.push_back(std::sin(2.0 * M_PI * ts.epoch_at(i) / 86400.0));
    ts.gap_mask.assign(n, 0);
    return ts;
}

} // namespace

TEST_CASE("rotation offset from longitude difference") {
    auto [d0, t0] = longitude_offset(station("A", 17.25), station("B", 17.25));
    CHECK(d0 == 0.0);
    CHECK(t0 == 0.0);

    auto [d1, t1] = longitude_offset(station("A", 10.0), station("B", 5.822));
    CHECK(d1 == Catch::Approx(4.178));
    CHECK(t1 == Catch::Approx(1000.0).margin(1e-9));

    // antimeridian pair: -179 is 2 degrees east of 179 after wrapping
    auto [d2, t2] = longitude_offset(station("A", -179.0), station("B", 179.0));
    CHECK(d2 == Catch::Approx(2.0));
    CHECK(t2 == Catch::Approx(478.7).margin(0.1));

    // antisymmetry
    auto [d3, t3] = longitude_offset(station("B", 5.822), station("A", 10.0));
    CHECK(d3 == Catch::Approx(-4.178));
    CHECK(t3 == Catch::Approx(-1000.0).margin(1e-9));
}

TEST_CASE("co-located stations align as the identity") {
    TimeSeries ers = diurnal(3 * 1440);
    TimeSeries lrs = diurnal(3 * 1440);
    for (double& v : lrs.values) v *= 2.0;
    AlignmentResult ar = align(ers, lrs, station("E", 30.0), station("L", 30.0));
    CHECK(ar.offset_s == 0.0);
    CHECK(ar.delta_lon_deg == 0.0);
    REQUIRE(ar.aligned_ers.size() == ers.size());
    CHECK(ar.aligned_ers.values == ers.values);
    CHECK(ar.truncated_lrs.values == lrs.values);
}

TEST_CASE("aligned series and truth always share a grid") {
    TimeSeries ers = diurnal(7 * 1440);
    TimeSeries lrs = diurnal(7 * 1440);
    for (double off_deg : {1.0, 7.5213, -12.0, 0.0041}) {
        AlignmentResult ar =
            align(ers, lrs, station("E", off_deg), station("L", 0.0));
        CHECK(ar.aligned_ers.size() == ar.truncated_lrs.size());
        CHECK(ar.aligned_ers.start_epoch == ar.truncated_lrs.start_epoch);
        CHECK(ar.aligned_ers.period_s == ar.truncated_lrs.period_s);
        CHECK(!ar.aligned_ers.empty());
    }
}

TEST_CASE("an hour of longitude offset shifts the diurnal phase by an hour") {
    // 3600 s of rotation corresponds to 3600 * 0.004178 degrees
    double dlon = 3600.0 * omega_earth_deg_per_s;
    TimeSeries ers = diurnal(7 * 1440);
    TimeSeries lrs = diurnal(7 * 1440);
    AlignmentResult ar = align(ers, lrs, station("E", dlon), station("L", 0.0));
    CHECK(ar.offset_s == Catch::Approx(3600.0).margin(1e-9));
    // interior samples only: edge transients from the split are confined to
    // the first and last few filter warm-up lengths
    size_t n = ar.aligned_ers.size();
    for (size_t i = n / 10; i < n - n / 10; i += 13) {
        double t = ar.aligned_ers.epoch_at(i);
        double expect = std::sin(2.0 * M_PI * (t - 3600.0) / 86400.0);
        CHECK(ar.aligned_ers.values[i] == Catch::Approx(expect).margin(0.01));
    }
}

TEST_CASE("the high band is not displaced") {
    // diurnal carrier plus a fast ripple; after alignment the ripple must
    // still sit at its original timestamps
    TimeSeries ers = diurnal(7 * 1440);
    for (size_t i = 0; i < ers.size(); ++i)
        ers.values[i] = 20.0 * ers.values[i] +
                        3.0 * std::sin(2.0 * M_PI * ers.epoch_at(i) / 1200.0);
    TimeSeries lrs = diurnal(7 * 1440);
    double dlon = 1800.0 * omega_earth_deg_per_s;
    AlignmentResult ar = align(ers, lrs, station("E", dlon), station("L", 0.0));

    auto [low, high] = complementary_split(ar.aligned_ers, 0.33);
    (void)low;
    size_t n = high.size();
    for (size_t i = n / 10; i < n - n / 10; i += 11) {
        double t = high.epoch_at(i);
        double expect = 3.0 * std::sin(2.0 * M_PI * t / 1200.0);
        CHECK(high.values[i] == Catch::Approx(expect).margin(0.1));
    }
}

TEST_CASE("a 1800 s offset costs 30 minute-samples of span") {
    TimeSeries ers = diurnal(7 * 1440);
    TimeSeries lrs = diurnal(7 * 1440);
    double dlon = 1800.0 * omega_earth_deg_per_s;
    AlignmentResult ar = align(ers, lrs, station("E", dlon), station("L", 0.0));
    CHECK(ar.aligned_ers.size() == 7 * 1440 - 30);
}

TEST_CASE("disjoint series fail to align") {
    TimeSeries ers = diurnal(2 * 1440);
    TimeSeries lrs = diurnal(1440, 60.0, 5.0 * 86400.0);
    CHECK_THROWS_AS(align(ers, lrs, station("E", 10.0), station("L", 9.0)),
                    NoOverlap);
}
