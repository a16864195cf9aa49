#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "ersm/errors.hpp"
#include "ersm/format.hpp"
#include "ersm/station.hpp"
#include "ersm/time.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

namespace igrf {
constexpr int max_degree = 13;
constexpr double wgs84_a_km = 6378.137;
constexpr double wgs84_b_km = 6356.7523142;
constexpr double reference_radius_km = 6371.2;
} // namespace igrf

// Schmidt semi-normalized Gauss coefficients for one epoch, degrees 1..13.
struct GaussCoeffs {
    std::array<std::array<double, igrf::max_degree + 1>, igrf::max_degree + 1> g{};
    std::array<std::array<double, igrf::max_degree + 1>, igrf::max_degree + 1> h{};
};

struct FieldVector {
    double north_nT = 0.0;
    double east_nT = 0.0;
    double down_nT = 0.0;

    double magnitude() const {
        return std::sqrt(north_nT * north_nT + east_nT * east_nT +
                         down_nT * down_nT);
    }
};

struct IgrfModel {
    std::vector<double> epochs;            // ascending decimal years
    std::vector<GaussCoeffs> coefficients; // one table per epoch
    GaussCoeffs secular_variation;         // nT/year beyond the final epoch

    double first_epoch() const { return epochs.front(); }
    double last_epoch() const { return epochs.back(); }
};

// Parse the official IGRF coefficient layout: '#' comments, a "c/s ..."
// column-role line, a "g/h n m <epoch years...> <SV>" header, then one row
// per (g|h, n, m). The SV column header is a year range like "2025-30".
inline IgrfModel load_coefficients(std::istream& in) {
    IgrfModel model;
    std::string line;
    int lineno = 0;
    size_t n_epochs = 0;
    bool have_header = false;
    std::array<std::array<int, igrf::max_degree + 1>, igrf::max_degree + 1> seen_g{};
    std::array<std::array<int, igrf::max_degree + 1>, igrf::max_degree + 1> seen_h{};

    while (std::getline(in, line)) {
        ++lineno;
        size_t b = line.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        if (line[b] == '#') continue;
        std::istringstream iss(line);
        std::vector<std::string> toks;
        std::string tok;
        while (iss >> tok) toks.push_back(tok);
        if (toks.empty()) continue;
        if (toks[0] == "c/s") continue;
        if (toks[0] == "g/h") {
            if (toks.size() < 5)
                throw ParseError(strformat("igrf line %d: header too short", lineno));
            for (size_t i = 3; i < toks.size(); ++i) {
                if (i + 1 == toks.size() && toks[i].find('-') != std::string::npos)
                    continue;  // SV column, labeled as a year range
                try {
                    model.epochs.push_back(std::stod(toks[i]));
                } catch (...) {
                    throw ParseError(strformat("igrf line %d: bad epoch '%s'",
                                               lineno, toks[i].c_str()));
                }
            }
            if (model.epochs.empty())
                throw ParseError(strformat("igrf line %d: no epochs in header", lineno));
            for (size_t i = 1; i < model.epochs.size(); ++i)
                if (model.epochs[i] <= model.epochs[i - 1])
                    throw ParseError("igrf: epochs not ascending");
            n_epochs = model.epochs.size();
            model.coefficients.resize(n_epochs);
            have_header = true;
            continue;
        }
        if (!have_header)
            throw ParseError(strformat("igrf line %d: data before g/h header", lineno));
        if (toks[0] != "g" && toks[0] != "h")
            throw ParseError(strformat("igrf line %d: row must start g or h", lineno));
        if (toks.size() != 3 + n_epochs + 1)
            throw ParseError(strformat(
                "igrf line %d: expected %zu columns, got %zu", lineno,
                3 + n_epochs + 1, toks.size()));
        int n, m;
        try {
            n = std::stoi(toks[1]);
            m = std::stoi(toks[2]);
        } catch (...) {
            throw ParseError(strformat("igrf line %d: bad degree/order", lineno));
        }
        if (n < 1 || n > igrf::max_degree || m < 0 || m > n)
            throw ParseError(strformat("igrf line %d: (n, m) = (%d, %d) invalid",
                                       lineno, n, m));
        if (toks[0] == "h" && m == 0)
            throw ParseError(strformat("igrf line %d: h(n, 0) row not allowed", lineno));
        std::vector<double> vals;
        for (size_t i = 3; i < toks.size(); ++i) {
            try {
                vals.push_back(std::stod(toks[i]));
            } catch (...) {
                throw ParseError(strformat("igrf line %d: bad value '%s'",
                                           lineno, toks[i].c_str()));
            }
        }
        bool is_g = toks[0] == "g";
        for (size_t e = 0; e < n_epochs; ++e) {
            if (is_g) model.coefficients[e].g[n][m] = vals[e];
            else      model.coefficients[e].h[n][m] = vals[e];
        }
        if (is_g) {
            model.secular_variation.g[n][m] = vals[n_epochs];
            seen_g[n][m] = 1;
        } else {
            model.secular_variation.h[n][m] = vals[n_epochs];
            seen_h[n][m] = 1;
        }
    }

    if (!have_header)
        throw ParseError("igrf: missing g/h header line");
    for (int n = 1; n <= igrf::max_degree; ++n)
        for (int m = 0; m <= n; ++m) {
            if (!seen_g[n][m])
                throw ParseError(strformat("igrf: missing g(%d, %d) row", n, m));
            if (m > 0 && !seen_h[n][m])
                throw ParseError(strformat("igrf: missing h(%d, %d) row", n, m));
        }
    return model;
}

inline IgrfModel load_coefficients(const std::string& text) {
    std::istringstream iss(text);
    return load_coefficients(iss);
}

// Coefficients at an arbitrary time: linear interpolation between bracketing
// epochs, secular-variation extrapolation for up to 5 years past the last.
inline GaussCoeffs coefficients_at(const IgrfModel& model, double year) {
    if (year < model.first_epoch() || year > model.last_epoch() + 5.0)
        throw OutOfRange(strformat(
            "igrf: %.3f outside validity [%.1f, %.1f]", year,
            model.first_epoch(), model.last_epoch() + 5.0));
    GaussCoeffs out;
    if (year >= model.last_epoch()) {
        double dt = year - model.last_epoch();
        const GaussCoeffs& base = model.coefficients.back();
        for (int n = 1; n <= igrf::max_degree; ++n)
            for (int m = 0; m <= n; ++m) {
                out.g[n][m] = base.g[n][m] + dt * model.secular_variation.g[n][m];
                out.h[n][m] = base.h[n][m] + dt * model.secular_variation.h[n][m];
            }
        return out;
    }
    size_t hi = 1;
    while (model.epochs[hi] < year) ++hi;
    size_t lo = hi - 1;
    double frac = (year - model.epochs[lo]) /
                  (model.epochs[hi] - model.epochs[lo]);
    const GaussCoeffs& c0 = model.coefficients[lo];
    const GaussCoeffs& c1 = model.coefficients[hi];
    for (int n = 1; n <= igrf::max_degree; ++n)
        for (int m = 0; m <= n; ++m) {
            out.g[n][m] = c0.g[n][m] + frac * (c1.g[n][m] - c0.g[n][m]);
            out.h[n][m] = c0.h[n][m] + frac * (c1.h[n][m] - c0.h[n][m]);
        }
    return out;
}

// Spherical-harmonic synthesis of one coefficient table at a geodetic
// position; returns geodetic north/east/down components.
inline FieldVector synthesize(const GaussCoeffs& c, double lat_deg,
                              double lon_deg, double alt_m) {
    if (lat_deg < -90.0 || lat_deg > 90.0)
        throw InvalidArgument(strformat("igrf: latitude %.4f outside [-90, 90]",
                                        lat_deg));
    constexpr int nmax = igrf::max_degree;
    const double a = igrf::wgs84_a_km;
    const double b = igrf::wgs84_b_km;
    const double lat = lat_deg * M_PI / 180.0;
    const double lon = lon_deg * M_PI / 180.0;
    const double h_km = alt_m / 1000.0;

    const double sinlat = std::sin(lat);
    const double coslat = std::cos(lat);

    // geodetic -> geocentric
    const double sr = std::sqrt(a * a * coslat * coslat + b * b * sinlat * sinlat);
    const double theta = std::atan2(coslat * (h_km * sr + a * a),
                                    sinlat * (h_km * sr + b * b));
    const double r = std::sqrt(
        h_km * h_km + 2.0 * h_km * sr +
        (a * a * a * a - (a * a * a * a - b * b * b * b) * sinlat * sinlat) /
            (a * a - (a * a - b * b) * sinlat * sinlat));

    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const double inv_st = 1.0 / (st + (st == 0.0) * 1e-8);

    // Schmidt semi-normalized associated Legendre values and derivatives
    double P[nmax + 1][nmax + 1] = {};
    double DP[nmax + 1][nmax + 1] = {};
    P[0][0] = 1.0;
    P[1][0] = ct;
    P[1][1] = st;
    DP[0][0] = 0.0;
    DP[1][0] = -st;
    DP[1][1] = ct;
    for (int n = 2; n <= nmax; ++n) {
        double rt = std::sqrt((2.0 * n - 1.0) / (2.0 * n));
        P[n][n] = P[n - 1][n - 1] * st * rt;
        DP[n][n] = (DP[n - 1][n - 1] * st + P[n - 1][n - 1] * ct) * rt;
    }
    for (int m = 0; m <= nmax; ++m) {
        for (int n = std::max(m + 1, 2); n <= nmax; ++n) {
            double r0 = std::sqrt(static_cast<double>((n - 1) * (n - 1) - m * m));
            double r1 = 1.0 / std::sqrt(static_cast<double>(n * n - m * m));
            P[n][m] = (P[n - 1][m] * ct * (2.0 * n - 1.0) - P[n - 2][m] * r0) * r1;
            DP[n][m] = ((DP[n - 1][m] * ct - P[n - 1][m] * st) * (2.0 * n - 1.0) -
                        DP[n - 2][m] * r0) * r1;
        }
    }

    double sm[nmax + 1], cm[nmax + 1];
    for (int m = 0; m <= nmax; ++m) {
        sm[m] = std::sin(m * lon);
        cm[m] = std::cos(m * lon);
    }

    double B_r = 0.0, B_theta = 0.0, B_phi = 0.0;
    const double fn_0 = igrf::reference_radius_km / r;
    double fn = fn_0 * fn_0;
    for (int n = 1; n <= nmax; ++n) {
        double c1 = 0.0, c2 = 0.0, c3 = 0.0;
        for (int m = 0; m <= n; ++m) {
            double tmp = c.g[n][m] * cm[m] + c.h[n][m] * sm[m];
            c1 += tmp * P[n][m];
            c2 += tmp * DP[n][m];
            c3 += m * (c.g[n][m] * sm[m] - c.h[n][m] * cm[m]) * P[n][m];
        }
        fn *= fn_0;
        B_r += (n + 1) * c1 * fn;
        B_theta -= c2 * fn;
        B_phi += c3 * fn * inv_st;
    }

    // rotate from geocentric spherical to geodetic north/east/down
    const double psi = theta - (M_PI / 2.0 - lat);
    const double sinpsi = std::sin(psi);
    const double cospsi = std::cos(psi);
    FieldVector f;
    f.north_nT = -B_theta * cospsi - B_r * sinpsi;
    f.east_nT = B_phi;
    f.down_nT = B_theta * sinpsi - B_r * cospsi;
    return f;
}

inline FieldVector core_field(const IgrfModel& model, double lat_deg,
                              double lon_deg, double alt_m, double year) {
    return synthesize(coefficients_at(model, year), lat_deg, lon_deg, alt_m);
}

// |B_total| - |B_core| per sample; the core magnitude is synthesized hourly
// and linearly interpolated between evaluations.
inline TimeSeries temporal_scalar(const TimeSeries& total,
                                  const StationRecord& station,
                                  const IgrfModel& model) {
    if (total.empty()) throw EmptySeries("temporal_scalar: empty input");
    const double t0 = total.start_epoch;
    const double t1 = total.end_epoch();
    const double step = 3600.0;
    size_t n_nodes = static_cast<size_t>(std::ceil((t1 - t0) / step - 1e-9)) + 1;
    if (n_nodes < 2) n_nodes = 2;
    std::vector<double> node_t(n_nodes), node_core(n_nodes);
    for (size_t i = 0; i < n_nodes; ++i) {
        node_t[i] = std::min(t0 + static_cast<double>(i) * step, t1);
        node_core[i] = core_field(model, station.latitude_deg,
                                  station.longitude_deg, station.elevation_m,
                                  decimal_year(node_t[i])).magnitude();
    }
    if (n_nodes >= 2 && node_t[n_nodes - 1] <= node_t[n_nodes - 2])
        node_t[n_nodes - 1] = node_t[n_nodes - 2] + 1.0;

    TimeSeries out = total;
    size_t seg = 0;
    for (size_t i = 0; i < total.size(); ++i) {
        double t = total.epoch_at(i);
        while (seg + 2 < n_nodes && node_t[seg + 1] < t) ++seg;
        double frac = (t - node_t[seg]) / (node_t[seg + 1] - node_t[seg]);
        frac = std::clamp(frac, 0.0, 1.0);
        double core = node_core[seg] + frac * (node_core[seg + 1] - node_core[seg]);
        out.values[i] = total.values[i] - core;
    }
    return out;
}

// Escape hatch: subtract an externally computed core-magnitude series (any
// cadence covering the span) instead of synthesizing.
inline TimeSeries subtract_core(const TimeSeries& total, const TimeSeries& core) {
    if (total.empty()) throw EmptySeries("subtract_core: empty input");
    TimeSeries out = total;
    for (size_t i = 0; i < total.size(); ++i)
        out.values[i] = total.values[i] - core.interpolate(total.epoch_at(i));
    return out;
}

} // namespace ersm
