#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ersm/dsp.hpp"

using namespace ersm;

namespace {

TimeSeries sinusoid(double freq_cph, double amp, size_t n, double period_s = 60.0,
                    double phase = 0.0) {
    TimeSeries ts(0.0, period_s, {});
    ts.values.reserve(n);
    double omega = 2.0 * M_PI * freq_cph / 3600.0;
    for (size_t i = 0; i < n; ++i)
        ts.values.push_back(amp * std::sin(omega * ts.epoch_at(i) + phase));
    ts.gap_mask.assign(n, 0);
    return ts;
}

// Least-squares fit of A*sin(wt) + B*cos(wt); returns (amplitude, phase).
std::pair<double, double> fit_sinusoid(const TimeSeries& ts, double freq_cph) {
    double omega = 2.0 * M_PI * freq_cph / 3600.0;
    double ss = 0, sc = 0, cc = 0, sy = 0, cy = 0;
    for (size_t i = 0; i < ts.size(); ++i) {
        double s = std::sin(omega * ts.epoch_at(i));
        double c = std::cos(omega * ts.epoch_at(i));
        ss += s * s; sc += s * c; cc += c * c;
        sy += s * ts.values[i]; cy += c * ts.values[i];
    }
    double det = ss * cc - sc * sc;
    double a = (cy * ss - sy * sc) / det;
    double b = (sy * cc - cy * sc) / det;
    return {std::hypot(a, b), std::atan2(a, b)};
}

} // namespace

TEST_CASE("lowpass design hits the textbook anchor points") {
    IirFilter f = design_butterworth_lowpass(4, 0.33, 60.0);
    CHECK(f.gain_at(0.0) == Catch::Approx(1.0).margin(1e-9));
    CHECK(f.gain_at(0.33) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
    // monotone rolloff above cutoff
    CHECK(f.gain_at(0.66) < f.gain_at(0.33));
    CHECK(f.gain_at(1.32) < f.gain_at(0.66));
    CHECK(f.gain_at(3.0) < 0.01);
}

TEST_CASE("design rejects invalid orders and cutoffs") {
    CHECK_THROWS_AS(design_butterworth_lowpass(0, 0.33, 60.0), InvalidArgument);
    CHECK_THROWS_AS(design_butterworth_lowpass(-2, 0.33, 60.0), InvalidArgument);
    // Nyquist at 60 s cadence is 30 cph
    CHECK_THROWS_AS(design_butterworth_lowpass(4, 30.0, 60.0), InvalidCutoff);
    CHECK_THROWS_AS(design_butterworth_lowpass(4, 31.0, 60.0), InvalidCutoff);
    CHECK_THROWS_AS(design_butterworth_lowpass(4, 0.0, 60.0), InvalidCutoff);
    CHECK_NOTHROW(design_butterworth_lowpass(4, 29.9, 60.0));
    CHECK_NOTHROW(design_butterworth_lowpass(5, 0.33, 60.0));  // odd order
}

TEST_CASE("zero-phase filtering keeps constants exactly") {
    IirFilter f = design_butterworth_lowpass(4, 0.33, 60.0);
    TimeSeries ts(0.0, 60.0, std::vector<double>(2000, 123.456));
    TimeSeries out = filtfilt(f, ts);
    REQUIRE(out.size() == ts.size());
    for (double v : out.values) CHECK(v == Catch::Approx(123.456).margin(1e-9));
}

TEST_CASE("a passband sinusoid survives with amplitude and phase intact") {
    IirFilter f = design_butterworth_lowpass(4, 0.33, 60.0);
    TimeSeries in = sinusoid(0.05, 10.0, 7 * 1440);
    TimeSeries out = filtfilt(f, in);
    auto [amp, phase] = fit_sinusoid(out, 0.05);
    CHECK(amp == Catch::Approx(10.0).epsilon(0.01));
    // one sample at 0.05 cph is 2*pi*0.05/3600*60 rad of phase
    CHECK(std::abs(phase) < 2.0 * M_PI * 0.05 / 3600.0 * 60.0);
}

TEST_CASE("a stopband sinusoid is crushed") {
    IirFilter f = design_butterworth_lowpass(4, 0.33, 60.0);
    TimeSeries in = sinusoid(3.0, 10.0, 7 * 1440);
    TimeSeries out = filtfilt(f, in);
    auto [amp, phase] = fit_sinusoid(out, 3.0);
    (void)phase;
    CHECK(amp < 0.2);  // <= 2% of the input amplitude
}

TEST_CASE("filtering rejects too-short input") {
    IirFilter f = design_butterworth_lowpass(4, 0.33, 60.0);
    TimeSeries ts(0.0, 60.0, std::vector<double>(36, 1.0));  // 36 <= 9*order
    CHECK_THROWS_AS(filtfilt(f, ts), TooShort);
    TimeSeries ok(0.0, 60.0, std::vector<double>(37, 1.0));
    CHECK_NOTHROW(filtfilt(f, ok));
}

TEST_CASE("band split reconstructs the input exactly") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 10.0);
    for (int trial = 0; trial < 20; ++trial) {
        TimeSeries ts(1.68e9, 60.0, {});
        size_t n = 3 * 1440;
        for (size_t i = 0; i < n; ++i)
            ts.values.push_back(g(rng) + 30.0 * std::sin(i * 2.0 * M_PI / 1440.0));
        ts.gap_mask.assign(n, 0);
        auto [low, high] = complementary_split(ts, 0.33);
        REQUIRE(low.size() == n);
        REQUIRE(high.size() == n);
        double worst = 0.0;
        for (size_t i = 0; i < n; ++i)
            worst = std::max(worst,
                             std::abs(low.values[i] + high.values[i] - ts.values[i]));
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("band split separates well-spaced sinusoids") {
    TimeSeries slow = sinusoid(0.04, 20.0, 7 * 1440);
    TimeSeries fast = sinusoid(5.0, 5.0, 7 * 1440);
    TimeSeries sum = slow;
    for (size_t i = 0; i < sum.size(); ++i) sum.values[i] += fast.values[i];
    auto [low, high] = complementary_split(sum, 0.33);
    auto [la, lp] = fit_sinusoid(low, 0.04);
    auto [ha, hp] = fit_sinusoid(high, 5.0);
    (void)lp; (void)hp;
    CHECK(la == Catch::Approx(20.0).epsilon(0.02));
    CHECK(ha == Catch::Approx(5.0).epsilon(0.02));
}

TEST_CASE("band split of a constant leaves nothing in the high band") {
    TimeSeries ts(0.0, 60.0, std::vector<double>(2000, 42.0));
    auto [low, high] = complementary_split(ts, 0.33);
    for (size_t i = 0; i < ts.size(); ++i) {
        CHECK(low.values[i] == Catch::Approx(42.0).margin(1e-9));
        CHECK(high.values[i] == Catch::Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("zero shift is the identity") {
    TimeSeries ts(0.0, 60.0, {1.0, 2.0, 3.0});
    TimeSeries out = shift_series(ts, 0.0);
    CHECK(out.start_epoch == ts.start_epoch);
    CHECK(out.values == ts.values);
}

TEST_CASE("whole-sample shifts displace without interpolating") {
    TimeSeries ts(0.0, 60.0, {});
    for (int i = 0; i < 100; ++i) ts.values.push_back(static_cast<double>(i));
    ts.gap_mask.assign(100, 0);
    TimeSeries out = shift_series(ts, 120.0);
    REQUIRE(out.size() == 98);
    CHECK(out.start_epoch == 120.0);
    // out(t) = ts(t - 120): at t=120 the value is ts(0) = 0
    CHECK(out.values[0] == 0.0);
    CHECK(out.values[97] == 97.0);
}

TEST_CASE("fractional shifts interpolate linearly") {
    // values encode f(t) = t, so a +90 s shift reads f(t) = t - 90
    TimeSeries ts(0.0, 60.0, {});
    for (int i = 0; i < 100; ++i) ts.values.push_back(60.0 * i);
    ts.gap_mask.assign(100, 0);
    TimeSeries out = shift_series(ts, 90.0);
    for (size_t i = 0; i < out.size(); ++i)
        CHECK(out.values[i] == Catch::Approx(out.epoch_at(i) - 90.0).margin(1e-9));
    TimeSeries back = shift_series(ts, -90.0);
    for (size_t i = 0; i < back.size(); ++i)
        CHECK(back.values[i] == Catch::Approx(back.epoch_at(i) + 90.0).margin(1e-9));
}

TEST_CASE("shift composition returns to the original on the overlap") {
    TimeSeries ts(0.0, 60.0, {});
    for (int i = 0; i < 500; ++i)
        ts.values.push_back(std::sin(i * 0.21) + 0.5 * std::cos(i * 0.037));
    ts.gap_mask.assign(500, 0);
    for (double off : {60.0, 180.0, 600.0}) {
        TimeSeries round = shift_series(shift_series(ts, off), -off);
        REQUIRE(!round.empty());
        for (size_t i = 0; i < round.size(); ++i) {
            ptrdiff_t j = ts.index_of(round.epoch_at(i));
            REQUIRE(j >= 0);
            CHECK(round.values[i] == Catch::Approx(ts.values[j]).margin(1e-12));
        }
    }
}

TEST_CASE("shifts beyond the span are rejected") {
    TimeSeries ts(0.0, 60.0, std::vector<double>(10, 1.0));
    CHECK_THROWS_AS(shift_series(ts, 100000.0), InvalidShift);
    CHECK_THROWS_AS(shift_series(ts, -100000.0), InvalidShift);
}

TEST_CASE("finite-difference derivative") {
    TimeSeries lin(0.0, 60.0, {});
    for (int i = 0; i < 50; ++i) lin.values.push_back(3.0 * 60.0 * i);
    lin.gap_mask.assign(50, 0);
    TimeSeries d = time_derivative(lin);
    REQUIRE(d.size() == lin.size());
    for (double v : d.values) CHECK(v == Catch::Approx(3.0));

    TimeSeries konst(0.0, 60.0, std::vector<double>(50, 5.0));
    for (double v : time_derivative(konst).values) CHECK(v == 0.0);

    TimeSeries two(0.0, 60.0, {0.0, 6.0});
    TimeSeries d2 = time_derivative(two);
    CHECK(d2.values[0] == Catch::Approx(0.1));
    CHECK(d2.values[1] == Catch::Approx(0.1));  // tail replicated

    TimeSeries one(0.0, 60.0, {1.0});
    CHECK_THROWS_AS(time_derivative(one), TooShort);
}

TEST_CASE("lag search recovers constructed shifts") {
    TimeSeries a(0.0, 60.0, {});
    for (int i = 0; i < 3000; ++i)
        a.values.push_back(std::sin(i * 0.011) + 0.4 * std::sin(i * 0.0041 + 1.0));
    a.gap_mask.assign(3000, 0);

    TimeSeries b = shift_series(a, 300.0);
    CHECK(best_lag(a, b, 3600.0) == 300.0);
    CHECK(best_lag(a, a, 3600.0) == 0.0);

    // property: for integer k, best_lag(shift(ts, k*period), ts) = -k*period
    for (int k : {-5, -2, 1, 3, 7}) {
        TimeSeries s = shift_series(a, k * 60.0);
        CHECK(best_lag(s, a, 3600.0) == -k * 60.0);
    }
}

TEST_CASE("lag search rejects constant input") {
    TimeSeries flat(0.0, 60.0, std::vector<double>(500, 3.0));
    TimeSeries wavy(0.0, 60.0, {});
    for (int i = 0; i < 500; ++i) wavy.values.push_back(std::sin(i * 0.1));
    wavy.gap_mask.assign(500, 0);
    CHECK_THROWS_AS(best_lag(flat, wavy, 600.0), DegenerateSignal);
    CHECK_THROWS_AS(best_lag(wavy, flat, 600.0), DegenerateSignal);
}

TEST_CASE("anti-correlated signals still produce a bounded lag") {
    TimeSeries a(0.0, 60.0, {});
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    double acc = 0.0;
    for (int i = 0; i < 2000; ++i) {
        acc += g(rng);
        a.values.push_back(acc);
    }
    a.gap_mask.assign(2000, 0);
    TimeSeries neg = a;
    for (double& v : neg.values) v = -v;
    double lag = best_lag(a, neg, 1800.0);
    CHECK(std::abs(lag) <= 1800.0);
}
