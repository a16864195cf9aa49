#pragma once

#include <cmath>

#include "ersm/errors.hpp"
#include "ersm/features.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

struct LinearModel {
    double scale_a = 1.0;
    double offset_b = 0.0;
};

// Closed-form ordinary least squares of target on the magnitude feature
// alone; the linear model ignores the other columns.
inline LinearModel fit_linear(const FeatureMatrix& fm) {
    if (fm.rows() < 2 || !fm.has_target())
        throw DegenerateFit("fit_linear: need at least 2 rows with targets");
    const size_t n = fm.rows();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += fm.mag_nT[i];
        my += fm.target_nT[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = fm.mag_nT[i] - mx;
        sxx += dx * dx;
        sxy += dx * (fm.target_nT[i] - my);
    }
    if (sxx <= 0.0)
        throw DegenerateFit("fit_linear: magnitude feature has zero variance");
    LinearModel m;
    m.scale_a = sxy / sxx;
    m.offset_b = my - m.scale_a * mx;
    if (!std::isfinite(m.scale_a) || !std::isfinite(m.offset_b))
        throw DegenerateFit("fit_linear: non-finite coefficients");
    return m;
}

inline TimeSeries predict_linear(const LinearModel& m, const FeatureMatrix& fm) {
    TimeSeries out;
    out.start_epoch = fm.epochs.empty() ? 0.0 : fm.epochs.front();
    out.period_s = fm.period_s;
    out.values.resize(fm.rows());
    out.gap_mask.assign(fm.rows(), 0);
    for (size_t i = 0; i < fm.rows(); ++i)
        out.values[i] = m.scale_a * fm.mag_nT[i] + m.offset_b;
    return out;
}

} // namespace ersm
