#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "ersm/errors.hpp"
#include "ersm/format.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

struct Sos {
    double b0, b1, b2;   // numerator
    double a1, a2;       // denominator (a0 = 1)
};

struct IirFilter {
    std::vector<Sos> sections;
    double cutoff_cph = 0.0;
    double sample_period_s = 0.0;

    int order() const {
        int n = 0;
        for (const auto& s : sections) n += (s.a2 != 0.0 || s.b2 != 0.0) ? 2 : 1;
        return n;
    }

    // |H(f)| at a frequency given in cycles/hour.
    double gain_at(double freq_cph) const {
        double theta = 2.0 * M_PI * (freq_cph / 3600.0) * sample_period_s;
        std::complex<double> z1 = std::polar(1.0, -theta);
        std::complex<double> z2 = z1 * z1;
        std::complex<double> h(1.0, 0.0);
        for (const auto& s : sections)
            h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
        return std::abs(h);
    }
};

// Butterworth lowpass via the bilinear transform with frequency prewarping,
// returned as unit-DC-gain second-order sections.
inline IirFilter design_butterworth_lowpass(int order, double cutoff_cph,
                                            double sample_period_s) {
    if (order < 1 || order > 8)
        throw InvalidArgument(strformat("butterworth: order %d outside [1, 8]", order));
    if (sample_period_s <= 0.0)
        throw InvalidArgument("butterworth: sample period must be positive");
    double nyquist_cph = 0.5 * 3600.0 / sample_period_s;
    if (cutoff_cph <= 0.0 || cutoff_cph >= nyquist_cph)
        throw InvalidCutoff(strformat(
            "butterworth: cutoff %.4f cph outside (0, %.4f)", cutoff_cph, nyquist_cph));

    double theta_c = 2.0 * M_PI * (cutoff_cph / 3600.0) * sample_period_s;
    double warped = std::tan(theta_c / 2.0);

    // analog prototype poles on the unit circle, scaled to the warped cutoff,
    // mapped through z = (1 + s) / (1 - s)
    std::vector<std::complex<double>> poles;
    for (int k = 0; k < order; ++k) {
        double angle = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
        std::complex<double> pa = warped * std::polar(1.0, angle);
        poles.push_back((1.0 + pa) / (1.0 - pa));
    }

    IirFilter f;
    f.cutoff_cph = cutoff_cph;
    f.sample_period_s = sample_period_s;
    size_t i = 0;
    if (order % 2 == 1) {
        // the real pole sits at angle pi/2 + pi/(2*order) steps in; it is the
        // middle entry of the list
        std::complex<double> pr = poles[order / 2];
        Sos s{};
        s.a1 = -pr.real();
        s.a2 = 0.0;
        double g = (1.0 + s.a1) / 2.0;
        s.b0 = g;
        s.b1 = g;
        s.b2 = 0.0;
        f.sections.push_back(s);
    }
    for (int k = 0; k < order / 2; ++k) {
        std::complex<double> p = poles[k];
        Sos s{};
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        double g = (1.0 + s.a1 + s.a2) / 4.0;
        s.b0 = g;
        s.b1 = 2.0 * g;
        s.b2 = g;
        f.sections.push_back(s);
    }
    (void)i;
    return f;
}

namespace detail {

// One direct-form-II-transposed pass over a buffer, with per-section initial
// state scaled to the first sample (steady-state response to a constant).
inline void sosfilt_inplace(const std::vector<Sos>& sections,
                            std::vector<double>& x) {
    if (x.empty()) return;
    for (const auto& s : sections) {
        double x0 = x.front();
        double s1 = (1.0 - s.b0) * x0;
        double s2 = (s.b2 - s.a2) * x0;
        for (double& v : x) {
            double xin = v;
            double y = s.b0 * xin + s1;
            s1 = s.b1 * xin - s.a1 * y + s2;
            s2 = s.b2 * xin - s.a2 * y;
            v = y;
        }
    }
}

} // namespace detail

// Zero-phase application: odd-symmetric padding, filter, reverse, filter,
// reverse, then strip the padding.
inline TimeSeries filtfilt(const IirFilter& filter, const TimeSeries& ts) {
    int order = filter.order();
    size_t warmup = static_cast<size_t>(3 * order);
    if (ts.size() <= 3 * warmup)
        throw TooShort(strformat(
            "filtfilt: series length %zu <= %zu (3x warm-up)", ts.size(), 3 * warmup));

    size_t pad = std::min<size_t>(static_cast<size_t>(3 * order * 10), ts.size() - 1);
    const size_t n = ts.size();
    std::vector<double> buf(n + 2 * pad);
    for (size_t i = 0; i < pad; ++i)
        buf[i] = 2.0 * ts.values[0] - ts.values[pad - i];
    std::copy(ts.values.begin(), ts.values.end(), buf.begin() + pad);
    for (size_t i = 0; i < pad; ++i)
        buf[pad + n + i] = 2.0 * ts.values[n - 1] - ts.values[n - 2 - i];

    detail::sosfilt_inplace(filter.sections, buf);
    std::reverse(buf.begin(), buf.end());
    detail::sosfilt_inplace(filter.sections, buf);
    std::reverse(buf.begin(), buf.end());

    TimeSeries out = ts;
    std::copy(buf.begin() + pad, buf.begin() + pad + n, out.values.begin());
    return out;
}

namespace detail {

// Output-smoothing helper for the regressors: prediction spans shorter than
// the filtfilt warm-up are returned unfiltered.
inline TimeSeries maybe_lowpass(TimeSeries ts, double cutoff_cph, int order = 4);

} // namespace detail

// low = filtfilt(lowpass, ts); high = ts - low, so low + high reconstructs
// the input exactly.
inline std::pair<TimeSeries, TimeSeries> complementary_split(const TimeSeries& ts,
                                                             double cutoff_cph,
                                                             int order = 4) {
    IirFilter lp = design_butterworth_lowpass(order, cutoff_cph, ts.period_s);
    TimeSeries low = filtfilt(lp, ts);
    TimeSeries high = ts;
    for (size_t i = 0; i < ts.size(); ++i)
        high.values[i] = ts.values[i] - low.values[i];
    return {low, high};
}

// Output sample at time t takes the value ts(t - offset_s); samples needing
// data outside the input span are dropped and start_epoch adjusted.
inline TimeSeries shift_series(const TimeSeries& ts, double offset_s) {
    if (ts.size() < 2)
        throw TooShort("shift_series: need at least 2 samples");
    double duration = ts.period_s * static_cast<double>(ts.size() - 1);
    if (std::abs(offset_s) >= duration)
        throw InvalidShift(strformat(
            "shift_series: offset %.1f s exceeds series duration %.1f s",
            offset_s, duration));

    size_t drop = static_cast<size_t>(
        std::ceil(std::abs(offset_s) / ts.period_s - 1e-9));
    size_t out_n = ts.size() - drop;
    TimeSeries out;
    out.period_s = ts.period_s;
    out.start_epoch = offset_s > 0.0
        ? ts.start_epoch + static_cast<double>(drop) * ts.period_s
        : ts.start_epoch;
    out.values.resize(out_n);
    out.gap_mask.assign(out_n, 0);
    for (size_t i = 0; i < out_n; ++i) {
        double t = out.start_epoch + static_cast<double>(i) * out.period_s;
        out.values[i] = ts.interpolate(t - offset_s);
    }
    return out;
}

// Forward difference (value[i+1] - value[i]) / period; the final sample
// repeats the previous derivative so lengths stay aligned.
inline TimeSeries time_derivative(const TimeSeries& ts) {
    if (ts.size() < 2)
        throw TooShort("time_derivative: need at least 2 samples");
    TimeSeries out = ts;
    for (size_t i = 0; i + 1 < ts.size(); ++i)
        out.values[i] = (ts.values[i + 1] - ts.values[i]) / ts.period_s;
    out.values[ts.size() - 1] = out.values[ts.size() - 2];
    return out;
}

inline TimeSeries detail::maybe_lowpass(TimeSeries ts, double cutoff_cph,
                                        int order) {
    if (ts.size() <= static_cast<size_t>(9 * order)) return ts;
    IirFilter lp = design_butterworth_lowpass(order, cutoff_cph, ts.period_s);
    return filtfilt(lp, ts);
}

// Integer-sample lag (seconds) maximizing the Pearson correlation between
// b(t) and a(t - lag) over their overlap; ties resolve toward smaller |lag|.
inline double best_lag(const TimeSeries& a, const TimeSeries& b, double max_lag_s) {
    if (std::abs(a.period_s - b.period_s) > 1e-9)
        throw Misaligned("best_lag: sample periods differ");
    if (a.size() < 2 || b.size() < 2)
        throw TooShort("best_lag: need at least 2 samples per series");
    double phase = std::remainder(b.start_epoch - a.start_epoch, a.period_s);
    if (std::abs(phase) > 1e-6)
        throw Misaligned("best_lag: grids are phase-shifted");

    auto variance_zero = [](const TimeSeries& ts) {
        double first = ts.values.front();
        for (double v : ts.values)
            if (v != first) return false;
        return true;
    };
    if (variance_zero(a) || variance_zero(b))
        throw DegenerateSignal("best_lag: constant input");

    ptrdiff_t d0 = static_cast<ptrdiff_t>(
        std::round((b.start_epoch - a.start_epoch) / a.period_s));
    ptrdiff_t max_k = static_cast<ptrdiff_t>(std::floor(max_lag_s / a.period_s + 1e-9));
    ptrdiff_t na = static_cast<ptrdiff_t>(a.size());
    ptrdiff_t nb = static_cast<ptrdiff_t>(b.size());

    double best_corr = -2.0;
    ptrdiff_t best_k = 0;
    for (ptrdiff_t step = 0; step <= max_k; ++step) {
        for (int sign = -1; sign <= 1; sign += 2) {
            if (step == 0 && sign > 0) continue;
            ptrdiff_t k = step == 0 ? 0 : sign * step;
            // pair b[i] with a[i + d0 - k]
            ptrdiff_t lo = std::max<ptrdiff_t>(0, k - d0);
            ptrdiff_t hi = std::min<ptrdiff_t>(nb, na - d0 + k);
            if (hi - lo < 2) continue;
            double sa = 0, sb = 0;
            for (ptrdiff_t i = lo; i < hi; ++i) {
                sa += a.values[i + d0 - k];
                sb += b.values[i];
            }
            double cnt = static_cast<double>(hi - lo);
            double ma = sa / cnt, mb = sb / cnt;
            double num = 0, va = 0, vb = 0;
            for (ptrdiff_t i = lo; i < hi; ++i) {
                double da = a.values[i + d0 - k] - ma;
                double db = b.values[i] - mb;
                num += da * db;
                va += da * da;
                vb += db * db;
            }
            if (va <= 0.0 || vb <= 0.0) continue;
            double corr = num / std::sqrt(va * vb);
            if (corr > best_corr) {
                best_corr = corr;
                best_k = k;
            }
        }
    }
    if (best_corr < -1.5)
        throw DegenerateSignal("best_lag: no lag with a defined correlation");
    return static_cast<double>(best_k) * a.period_s;
}

} // namespace ersm
