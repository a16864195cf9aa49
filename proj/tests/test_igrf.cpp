#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "ersm/format.hpp"
#include "ersm/igrf.hpp"
#include "ersm/time.hpp"

using namespace ersm;

namespace {

IgrfModel load_fixture(const std::string& name) {
    for (const char* base : {"tests/fixtures/", "../tests/fixtures/", "fixtures/"}) {
        std::ifstream in(base + name);
        if (in) {
            std::stringstream ss;
            ss << in.rdbuf();
            return load_coefficients(ss.str());
        }
    }
    FAIL("fixture not found: " << name);
    return IgrfModel{};
}

// Minimal well-formed coefficient text: every (n, m) up to degree 13 present,
// nonzero entries taken from the overrides list.
std::string synthetic_table(
    const std::vector<std::tuple<char, int, int, double>>& overrides) {
    std::ostringstream out;
    out << "# synthetic coefficient table\n";
    out << "c/s deg ord 2020.0 SV\n";
    out << "g/h n m 2020.0 2020-25\n";
    for (int n = 1; n <= 13; ++n)
        for (int m = 0; m <= n; ++m) {
            double gv = 0.0, hv = 0.0;
            for (const auto& [ch, on, om, val] : overrides) {
                if (on == n && om == m) {
                    if (ch == 'g') gv = val;
                    else hv = val;
                }
            }
            out << strformat("g %d %d %.2f 0.0\n", n, m, gv);
            if (m > 0) out << strformat("h %d %d %.2f 0.0\n", n, m, hv);
        }
    return out.str();
}

} // namespace

TEST_CASE("synthesis matches the frozen reference calculator points") {
    IgrfModel wmm = load_fixture("wmm2020_as_igrf.txt");
    IgrfModel igrf = load_fixture("igrf14_sv.txt");
    struct Point {
        const IgrfModel* model;
        double year, lat, lon, alt_m;
        double north, east, down;
    };
    const Point points[] = {
        {&wmm, 2023.0, 38.21, -77.37, 69.0, 21250.725362, -3916.595357, 45467.623240},
        {&wmm, 2020.0, 80.0, 0.0, 0.0, 6570.390743, -146.329193, 54606.013217},
        {&wmm, 2020.0, 0.0, 120.0, 0.0, 39624.272652, 109.876153, -10932.461281},
        {&wmm, 2020.0, -80.0, -120.0, 0.0, 5940.575262, 15772.085985, -52480.776228},
        {&wmm, 2022.5, 80.0, 0.0, 100000.0, 6224.048505, -44.478022, 52527.008659},
        {&wmm, 2022.5, -80.0, -120.0, 100000.0, 5814.965889, 14802.966384, -49755.311995},
        {&wmm, 2027.5, 38.21, -77.37, 69.0, 21429.671444, -3955.075950, 44857.608249},
        {&wmm, 2026.0, 64.87, -147.86, 200.0, 12241.387768, 3293.332241, 54612.952744},
        {&igrf, 2025.0, 38.21, -77.37, 69.0, 21301.358145, -3921.260868, 45176.831714},
        {&igrf, 2027.6, -35.32, 149.36, 855.0, 23027.893155, 5212.601746, -52954.666255},
    };
    for (const Point& p : points) {
        FieldVector fv = core_field(*p.model, p.lat, p.lon, p.alt_m, p.year);
        INFO("year " << p.year << " lat " << p.lat << " lon " << p.lon);
        CHECK(fv.north_nT == Catch::Approx(p.north).margin(1e-3));
        CHECK(fv.east_nT == Catch::Approx(p.east).margin(1e-3));
        CHECK(fv.down_nT == Catch::Approx(p.down).margin(1e-3));
    }
}

TEST_CASE("surface field magnitudes stay in the physical range") {
    IgrfModel m = load_fixture("igrf14_sv.txt");
    for (double lat = -85.0; lat <= 85.0; lat += 17.0)
        for (double lon = -180.0; lon < 180.0; lon += 36.0) {
            double f = core_field(m, lat, lon, 0.0, 2025.5).magnitude();
            CHECK(f > 20000.0);
            CHECK(f < 70000.0);
        }
}

TEST_CASE("a pure dipole gives the textbook equator and pole values") {
    double g10 = -30000.0;
    IgrfModel m = load_coefficients(synthetic_table({{'g', 1, 0, g10}}));
    // geocentric radius equal to the reference radius removes the 1/r^3 factor
    double alt_equator = (6371.2 - 6378.137) * 1000.0;
    double f_eq = core_field(m, 0.0, 0.0, alt_equator, 2020.0).magnitude();
    CHECK(f_eq == Catch::Approx(std::abs(g10)).epsilon(1e-9));

    double alt_pole = (6371.2 - 6356.7523142) * 1000.0;
    double f_pole = core_field(m, 90.0, 0.0, alt_pole, 2020.0).magnitude();
    CHECK(f_pole == Catch::Approx(2.0 * std::abs(g10)).epsilon(1e-9));
}

TEST_CASE("poles and near-pole latitudes synthesize without blowing up") {
    IgrfModel m = load_fixture("igrf14_sv.txt");
    for (double lat : {90.0, -90.0, 89.9999999, -89.9999999}) {
        FieldVector fv = core_field(m, lat, 45.0, 0.0, 2025.0);
        CHECK(std::isfinite(fv.north_nT));
        CHECK(std::isfinite(fv.east_nT));
        CHECK(std::isfinite(fv.down_nT));
        CHECK(fv.magnitude() > 20000.0);
        CHECK(fv.magnitude() < 70000.0);
    }
    CHECK_THROWS_AS(core_field(m, 90.1, 0.0, 0.0, 2025.0), InvalidArgument);
}

TEST_CASE("synthesis is linear in the coefficients") {
    IgrfModel a = load_coefficients(synthetic_table(
        {{'g', 1, 0, -29000.0}, {'g', 2, 1, 3000.0}, {'h', 2, 1, -1500.0}}));
    IgrfModel b = load_coefficients(synthetic_table(
        {{'g', 1, 1, -1500.0}, {'h', 1, 1, 4500.0}, {'g', 3, 2, 800.0}}));
    IgrfModel sum = load_coefficients(synthetic_table({{'g', 1, 0, -29000.0},
                                                       {'g', 2, 1, 3000.0},
                                                       {'h', 2, 1, -1500.0},
                                                       {'g', 1, 1, -1500.0},
                                                       {'h', 1, 1, 4500.0},
                                                       {'g', 3, 2, 800.0}}));
    FieldVector fa = core_field(a, 38.0, -77.0, 100.0, 2020.0);
    FieldVector fb = core_field(b, 38.0, -77.0, 100.0, 2020.0);
    FieldVector fs = core_field(sum, 38.0, -77.0, 100.0, 2020.0);
    CHECK(fs.north_nT == Catch::Approx(fa.north_nT + fb.north_nT).margin(1e-9));
    CHECK(fs.east_nT == Catch::Approx(fa.east_nT + fb.east_nT).margin(1e-9));
    CHECK(fs.down_nT == Catch::Approx(fa.down_nT + fb.down_nT).margin(1e-9));
}

TEST_CASE("evaluation at an exact model epoch equals that epoch's table") {
    IgrfModel m = load_fixture("wmm2020_as_igrf.txt");
    GaussCoeffs at_epoch = coefficients_at(m, 2020.0);
    for (int n = 1; n <= igrf::max_degree; ++n)
        for (int mm = 0; mm <= n; ++mm) {
            CHECK(at_epoch.g[n][mm] == m.coefficients.front().g[n][mm]);
            CHECK(at_epoch.h[n][mm] == m.coefficients.front().h[n][mm]);
        }
    // interpolation midpoint between the two epochs
    GaussCoeffs mid = coefficients_at(m, 2022.5);
    CHECK(mid.g[1][0] == Catch::Approx(0.5 * (m.coefficients[0].g[1][0] +
                                              m.coefficients[1].g[1][0]))
                             .margin(1e-12));
}

TEST_CASE("validity window is first epoch through last epoch plus five years") {
    IgrfModel m = load_fixture("wmm2020_as_igrf.txt");  // epochs 2020, 2025
    CHECK_NOTHROW(core_field(m, 40.0, 0.0, 0.0, 2020.0));
    CHECK_NOTHROW(core_field(m, 40.0, 0.0, 0.0, 2029.999));
    CHECK_THROWS_AS(core_field(m, 40.0, 0.0, 0.0, 2019.99), OutOfRange);
    CHECK_THROWS_AS(core_field(m, 40.0, 0.0, 0.0, 2030.01), OutOfRange);
}

TEST_CASE("secular variation extrapolates past the last epoch") {
    IgrfModel m = load_fixture("igrf14_sv.txt");  // single epoch 2025 + SV
    GaussCoeffs base = coefficients_at(m, 2025.0);
    GaussCoeffs later = coefficients_at(m, 2027.0);
    CHECK(later.g[1][0] == Catch::Approx(base.g[1][0] +
                                         2.0 * m.secular_variation.g[1][0])
                               .margin(1e-12));
}

TEST_CASE("malformed coefficient tables are rejected") {
    // h(n, 0) must not appear
    std::string bad = synthetic_table({});
    size_t pos = bad.find("g 2 0");
    bad.insert(pos, "h 2 0 10.0 0.0\n");
    CHECK_THROWS_AS(load_coefficients(bad), ParseError);

    // truncated file: drop the last line
    std::string trunc = synthetic_table({});
    trunc.erase(trunc.rfind("g 13 13"));
    CHECK_THROWS_AS(load_coefficients(trunc), ParseError);

    CHECK_THROWS_AS(load_coefficients(std::string("# nothing\n")), ParseError);
}

TEST_CASE("core subtraction leaves the temporal part") {
    IgrfModel m = load_fixture("wmm2020_as_igrf.txt");
    StationRecord st;
    st.iaga_code = "FRD";
    st.latitude_deg = 38.21;
    st.longitude_deg = -77.37;
    st.elevation_m = 69.0;

    TimeSeries zeros(civil_to_epoch(2023, 4, 6, 0, 0, 0.0), 60.0,
                     std::vector<double>(2 * 1440, 0.0));
    TimeSeries neg_core = temporal_scalar(zeros, st, m);

    // total exactly equal to the interpolated core -> all-zero output
    TimeSeries total = neg_core;
    for (double& v : total.values) v = -v;
    TimeSeries dv = temporal_scalar(total, st, m);
    for (double v : dv.values) CHECK(v == Catch::Approx(0.0).margin(1e-9));

    // additive offsets pass straight through
    for (double& v : total.values) v += 30.0;
    TimeSeries dv30 = temporal_scalar(total, st, m);
    for (double v : dv30.values) CHECK(v == Catch::Approx(30.0).margin(1e-9));
}

TEST_CASE("hourly interpolation tracks direct synthesis closely") {
    IgrfModel m = load_fixture("wmm2020_as_igrf.txt");
    StationRecord st;
    st.iaga_code = "FRD";
    st.latitude_deg = 38.21;
    st.longitude_deg = -77.37;
    st.elevation_m = 69.0;
    TimeSeries total(civil_to_epoch(2023, 4, 6, 0, 0, 0.0), 60.0,
                     std::vector<double>(1440, 50000.0));
    TimeSeries dv = temporal_scalar(total, st, m);
    for (size_t i = 0; i < dv.size(); i += 37) {
        double direct = core_field(m, st.latitude_deg, st.longitude_deg,
                                   st.elevation_m, decimal_year(dv.epoch_at(i)))
                            .magnitude();
        CHECK(std::abs((50000.0 - dv.values[i]) - direct) < 0.5);
    }
}

TEST_CASE("an external core series can replace synthesis") {
    TimeSeries total(0.0, 60.0, {50010.0, 50020.0, 50030.0});
    TimeSeries core(0.0, 180.0, {50000.0, 50000.0});
    TimeSeries dv = subtract_core(total, core);
    CHECK(dv.values == std::vector<double>{10.0, 20.0, 30.0});
}
