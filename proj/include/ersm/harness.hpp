#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ersm/dsp.hpp"
#include "ersm/errors.hpp"
#include "ersm/features.hpp"
#include "ersm/format.hpp"
#include "ersm/igrf.hpp"
#include "ersm/knn.hpp"
#include "ersm/kp.hpp"
#include "ersm/linear.hpp"
#include "ersm/longnorm.hpp"
#include "ersm/neural.hpp"
#include "ersm/station.hpp"
#include "ersm/time.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

constexpr double seconds_per_day = 86400.0;
constexpr int block_train_days = 10;
constexpr int block_eval_days = 7;
constexpr int block_length_days = 17;

struct Block {
    int index = 0;
    double train_start = 0.0;   // UTC midnight
    double train_end = 0.0;     // exclusive; also the eval start
    double eval_end = 0.0;      // exclusive
    std::vector<double> train_days;  // midnights with data
    std::vector<double> eval_days;   // midnights with data
};

struct BlockSchedule {
    double day0 = 0.0;
    std::vector<Block> blocks;
};

// Consecutive 17-day blocks (10 train + 7 eval) from the first UTC midnight
// at or after start_epoch; the partial tail is discarded. A day flagged as
// missing shrinks the spans that contain it: blocks whose train span loses
// every day are dropped, eval spans simply shed the missing days.
inline BlockSchedule make_schedule(double start_epoch, double end_epoch,
                                   const std::vector<uint8_t>* day_has_data = nullptr) {
    double day0 = std::ceil(start_epoch / seconds_per_day - 1e-9) * seconds_per_day;
    int n_days = static_cast<int>(std::floor((end_epoch - day0) / seconds_per_day + 1e-9));
    if (n_days < block_length_days)
        throw SpanTooShort(strformat(
            "make_schedule: %d days < %d-day block", n_days, block_length_days));
    auto available = [&](int day) {
        if (!day_has_data) return true;
        if (day < 0 || day >= static_cast<int>(day_has_data->size())) return false;
        return (*day_has_data)[day] != 0;
    };

    BlockSchedule sched;
    sched.day0 = day0;
    int n_blocks = n_days / block_length_days;
    for (int b = 0; b < n_blocks; ++b) {
        Block blk;
        blk.index = b;
        int first = b * block_length_days;
        blk.train_start = day0 + first * seconds_per_day;
        blk.train_end = blk.train_start + block_train_days * seconds_per_day;
        blk.eval_end = blk.train_start + block_length_days * seconds_per_day;
        for (int d = 0; d < block_train_days; ++d)
            if (available(first + d))
                blk.train_days.push_back(day0 + (first + d) * seconds_per_day);
        for (int d = block_train_days; d < block_length_days; ++d)
            if (available(first + d))
                blk.eval_days.push_back(day0 + (first + d) * seconds_per_day);
        if (blk.train_days.empty()) continue;  // nothing to fit on
        sched.blocks.push_back(std::move(blk));
    }
    return sched;
}

inline double rmse(const TimeSeries& pred, const TimeSeries& truth) {
    require_same_grid(pred, truth, "rmse");
    if (pred.empty()) throw EmptySeries("rmse: empty series");
    double se = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double e = pred.values[i] - truth.values[i];
        se += e * e;
    }
    return std::sqrt(se / static_cast<double>(pred.size()));
}

struct DayScore {
    std::string date;      // YYYY-MM-DD
    int block = 0;
    std::string model;
    std::string stratum;   // "all" | "kp_ge4" | "kp_lt4"
    double rmse_nT = 0.0;
    size_t samples = 0;
};

struct ModelSummary {
    std::string model;
    size_t days = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

struct TracePoint {
    double epoch_s;
    double truth;
    std::map<std::string, double> pred;
};

struct EvalReport {
    std::string ers_code;
    std::string lrs_code;
    double separation_km = 0.0;
    std::vector<DayScore> rows;
    std::vector<ModelSummary> summaries;
    std::vector<int> failed_blocks;
    std::vector<std::string> failures;
    std::vector<TracePoint> trace;  // first evaluated block, per-model traces
};

struct EvalOptions {
    std::vector<std::string> models{"linear"};
    double cutoff_cph = 0.33;
    double output_cutoff_cph = 1.5;
    uint64_t seed = 0;
    KnnSearchConfig knn = KnnSearchConfig::defaults();
    NnTrainConfig nn;
};

namespace detail {

inline std::string date_string(double midnight_epoch) {
    CivilTime ct = epoch_to_civil(midnight_epoch);
    return strformat("%04d-%02d-%02d", ct.year, ct.month, ct.day);
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    size_t i0 = static_cast<size_t>(pos);
    double frac = pos - static_cast<double>(i0);
    if (i0 + 1 >= sorted.size()) return sorted.back();
    return sorted[i0] * (1.0 - frac) + sorted[i0 + 1] * frac;
}

} // namespace detail

// The full protocol: per block, align and fit on the train span, re-align
// the eval span with the same station offset, predict, and score each eval
// day overall and split at Kp >= 4. A block that throws is recorded in
// failed_blocks and skipped.
inline EvalReport evaluate_pair(const StationRecord& ers_rec, const TimeSeries& ers_dv,
                                const StationRecord& lrs_rec, const TimeSeries& lrs_dv,
                                const KpSeries& kp, const BlockSchedule& schedule,
                                const EvalOptions& opts = EvalOptions()) {
    EvalReport report;
    report.ers_code = ers_rec.iaga_code;
    report.lrs_code = lrs_rec.iaga_code;
    report.separation_km = separation_km(ers_rec, lrs_rec);

    for (const Block& blk : schedule.blocks) {
        try {
            TimeSeries train_ers = ers_dv.slice_time(blk.train_start, blk.train_end);
            TimeSeries train_lrs = lrs_dv.slice_time(blk.train_start, blk.train_end);
            TimeSeries eval_ers = ers_dv.slice_time(blk.train_end, blk.eval_end);
            TimeSeries eval_lrs = lrs_dv.slice_time(blk.train_end, blk.eval_end);
            if (train_ers.empty() || train_lrs.empty())
                throw EmptySeries("block train span has no data");
            if (eval_ers.empty() || eval_lrs.empty())
                throw EmptySeries("block eval span has no data");

            AlignmentResult train_aligned =
                align(train_ers, train_lrs, ers_rec, lrs_rec, opts.cutoff_cph);
            FeatureMatrix train_fm = build_features(train_aligned, kp);

            AlignmentResult eval_aligned =
                align(eval_ers, eval_lrs, ers_rec, lrs_rec, opts.cutoff_cph);
            FeatureMatrix eval_fm = build_features(eval_aligned, kp);

            std::map<std::string, TimeSeries> preds;
            for (const std::string& name : opts.models) {
                if (name == "linear") {
                    LinearModel m = fit_linear(train_fm);
                    preds[name] = predict_linear(m, eval_fm);
                } else if (name == "knn") {
                    KnnSearchConfig kc = opts.knn;
                    kc.output_cutoff_cph = opts.output_cutoff_cph;
                    kc.seed = opts.seed + 7919ULL * static_cast<uint64_t>(blk.index);
                    KnnModel m = fit_knn(train_fm, kp, kc);
                    preds[name] = predict_knn_raw(m, eval_fm);
                    preds[name] = detail::maybe_lowpass(preds[name],
                                                        m.output_cutoff_cph);
                } else if (name == "nn") {
                    NnTrainConfig nc = opts.nn;
                    nc.output_cutoff_cph = opts.output_cutoff_cph;
                    NnEnsemble m = fit_nn(train_fm,
                                          opts.seed + 104729ULL * static_cast<uint64_t>(blk.index),
                                          nc);
                    preds[name] = predict_nn(m, eval_fm);
                } else {
                    throw InvalidArgument("evaluate_pair: unknown model " + name);
                }
            }

            const TimeSeries& truth = eval_aligned.truncated_lrs;
            for (double day : blk.eval_days) {
                TimeSeries day_truth = truth.slice_time(day, day + seconds_per_day);
                if (day_truth.empty()) continue;
                std::string date = detail::date_string(day);
                for (const auto& [name, pred] : preds) {
                    TimeSeries day_pred = pred.slice_time(day, day + seconds_per_day);
                    if (!same_grid(day_pred, day_truth)) continue;
                    double se_all = 0.0, se_hi = 0.0, se_lo = 0.0;
                    size_t n_hi = 0, n_lo = 0;
                    for (size_t i = 0; i < day_pred.size(); ++i) {
                        double e = day_pred.values[i] - day_truth.values[i];
                        se_all += e * e;
                        if (kp_at(kp, day_pred.epoch_at(i)) >= 4.0) {
                            se_hi += e * e;
                            ++n_hi;
                        } else {
                            se_lo += e * e;
                            ++n_lo;
                        }
                    }
                    size_t n_all = day_pred.size();
                    report.rows.push_back({date, blk.index, name, "all",
                                           std::sqrt(se_all / n_all), n_all});
                    if (n_hi > 0)
                        report.rows.push_back({date, blk.index, name, "kp_ge4",
                                               std::sqrt(se_hi / n_hi), n_hi});
                    if (n_lo > 0)
                        report.rows.push_back({date, blk.index, name, "kp_lt4",
                                               std::sqrt(se_lo / n_lo), n_lo});
                }
            }

            if (report.trace.empty() && !preds.empty()) {
                for (size_t i = 0; i < truth.size(); ++i) {
                    TracePoint tp;
                    tp.epoch_s = truth.epoch_at(i);
                    tp.truth = truth.values[i];
                    bool complete = true;
                    for (const auto& [name, pred] : preds) {
                        ptrdiff_t idx = pred.index_of(tp.epoch_s);
                        if (idx < 0) { complete = false; break; }
                        tp.pred[name] = pred.values[idx];
                    }
                    if (complete) report.trace.push_back(std::move(tp));
                }
            }
        } catch (const Error& e) {
            report.failed_blocks.push_back(blk.index);
            report.failures.push_back(strformat("block %d: %s", blk.index, e.what()));
        }
    }

    // daily distributions of the overall stratum per model
    std::map<std::string, std::vector<double>> daily;
    for (const auto& row : report.rows)
        if (row.stratum == "all") daily[row.model].push_back(row.rmse_nT);
    for (auto& [model, vals] : daily) {
        std::sort(vals.begin(), vals.end());
        ModelSummary s;
        s.model = model;
        s.days = vals.size();
        s.median = detail::quantile_sorted(vals, 0.5);
        s.q1 = detail::quantile_sorted(vals, 0.25);
        s.q3 = detail::quantile_sorted(vals, 0.75);
        report.summaries.push_back(std::move(s));
    }
    return report;
}

// Appendix adjustments for an external baseline prediction series.

inline std::pair<TimeSeries, double> mean_adjust(const TimeSeries& pred,
                                                 const TimeSeries& truth) {
    require_same_grid(pred, truth, "mean_adjust");
    if (pred.empty()) throw EmptySeries("mean_adjust: empty series");
    double b = 0.0;
    for (size_t i = 0; i < pred.size(); ++i)
        b += pred.values[i] - truth.values[i];
    b /= static_cast<double>(pred.size());
    TimeSeries adj = pred;
    for (double& v : adj.values) v -= b;
    return {adj, b};
}

inline std::pair<TimeSeries, double> lag_adjust(const TimeSeries& pred,
                                                const TimeSeries& truth,
                                                double max_lag_s) {
    double lag = best_lag(truth, pred, max_lag_s);
    TimeSeries shifted = lag == 0.0 ? pred : shift_series(pred, -lag);
    auto [adj, tr] = intersect_span(shifted, truth);
    (void)tr;
    return {adj, lag};
}

// |v_baseline + v_core| - |v_core| per sample, for vector baseline series.
inline TimeSeries core_readdition(const TimeSeries& base_n, const TimeSeries& base_e,
                                  const TimeSeries& base_d,
                                  const std::vector<FieldVector>& core) {
    require_same_grid(base_n, base_e, "core_readdition");
    require_same_grid(base_n, base_d, "core_readdition");
    if (core.size() != base_n.size())
        throw Misaligned("core_readdition: core vector length mismatch");
    TimeSeries out = base_n;
    for (size_t i = 0; i < out.size(); ++i) {
        const FieldVector& c = core[i];
        double n = base_n.values[i] + c.north_nT;
        double e = base_e.values[i] + c.east_nT;
        double d = base_d.values[i] + c.down_nT;
        out.values[i] = std::sqrt(n * n + e * e + d * d) - c.magnitude();
    }
    return out;
}

} // namespace ersm
