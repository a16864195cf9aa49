#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "ersm/dsp.hpp"
#include "ersm/errors.hpp"
#include "ersm/features.hpp"
#include "ersm/format.hpp"
#include "ersm/kp.hpp"
#include "ersm/time.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

// Weighted Manhattan distance over quantile-transformed (tod, deriv, mag)
// triples; alpha scales only the derivative term.
inline double knn_distance(const std::array<double, 3>& p,
                           const std::array<double, 3>& q, double alpha) {
    return std::abs(p[0] - q[0]) + alpha * std::abs(p[1] - q[1]) +
           std::abs(p[2] - q[2]);
}

struct KnnModel {
    QuantileMap tod_map;
    QuantileMap deriv_map;
    QuantileMap mag_map;
    std::vector<std::array<double, 3>> train_points;  // transformed
    std::vector<double> train_targets;                // raw nT
    int k = 5;
    double alpha = 2.0;
    double output_cutoff_cph = 1.5;

    std::array<double, 3> transform(double tod, double deriv, double mag) const {
        return {tod_map.transform(tod), deriv_map.transform(deriv),
                mag_map.transform(mag)};
    }
};

namespace detail {

// 3-d KD-tree over the transformed feature triples. Queries return exactly
// the k nearest under the weighted Manhattan metric with (distance, index)
// lexicographic ordering, matching an exhaustive scan bit for bit: subtrees
// are skipped only when their axis bound strictly exceeds the current worst
// neighbor distance.
class KdTree3 {
public:
    explicit KdTree3(const std::vector<std::array<double, 3>>& pts)
        : pts_(pts) {
        idx_.resize(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) idx_[i] = static_cast<int>(i);
        nodes_.reserve(pts.size() * 2 + 1);
        root_ = build(0, static_cast<int>(pts.size()), 0);
    }

    // k nearest neighbors of q, ascending by (distance, train index).
    std::vector<std::pair<double, int>> query(const std::array<double, 3>& q,
                                              double alpha, size_t k) const {
        Search s;
        s.q = q;
        s.w = {1.0, alpha, 1.0};
        s.k = std::min(k, pts_.size());
        search(root_, s);
        std::sort(s.heap.begin(), s.heap.end());
        return s.heap;
    }

private:
    struct Node {
        int axis;
        int point;   // index into pts_
        int left;
        int right;
    };
    struct Search {
        std::array<double, 3> q;
        std::array<double, 3> w;
        size_t k;
        // kept as a max-heap on (distance, index)
        std::vector<std::pair<double, int>> heap;

        bool full() const { return heap.size() >= k; }
        std::pair<double, int> worst() const { return heap.front(); }
        void offer(double d, int idx) {
            std::pair<double, int> cand{d, idx};
            if (!full()) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
    };

    int build(int lo, int hi, int depth) {
        if (lo >= hi) return -1;
        int axis = depth % 3;
        int mid = (lo + hi) / 2;
        std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                         [&](int a, int b) {
                             if (pts_[a][axis] != pts_[b][axis])
                                 return pts_[a][axis] < pts_[b][axis];
                             return a < b;
                         });
        Node node;
        node.axis = axis;
        node.point = idx_[mid];
        int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        int l = build(lo, mid, depth + 1);
        int r = build(mid + 1, hi, depth + 1);
        nodes_[self].left = l;
        nodes_[self].right = r;
        return self;
    }

    void search(int ni, Search& s) const {
        if (ni < 0) return;
        const Node& node = nodes_[ni];
        const auto& p = pts_[node.point];
        double d = s.w[0] * std::abs(p[0] - s.q[0]) +
                   s.w[1] * std::abs(p[1] - s.q[1]) +
                   s.w[2] * std::abs(p[2] - s.q[2]);
        s.offer(d, node.point);
        double delta = s.q[node.axis] - p[node.axis];
        int near = delta < 0.0 ? node.left : node.right;
        int far = delta < 0.0 ? node.right : node.left;
        search(near, s);
        double bound = s.w[node.axis] * std::abs(delta);
        if (!s.full() || bound <= s.worst().first)
            search(far, s);
    }

    const std::vector<std::array<double, 3>>& pts_;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
    int root_;
};

} // namespace detail

// Neighbor list for one transformed query point, ascending (distance, index).
inline std::vector<std::pair<double, int>> knn_neighbors(
    const KnnModel& m, const std::array<double, 3>& q, size_t k) {
    detail::KdTree3 tree(m.train_points);
    return tree.query(q, m.alpha, k);
}

namespace detail {

// Inverse-distance-weighted combination of a sorted neighbor prefix; when
// the nearest distance is zero the prediction is the mean target of the
// zero-distance members of the neighbor set.
inline double combine_neighbors(const std::vector<std::pair<double, int>>& nbrs,
                                size_t k, const std::vector<double>& targets) {
    size_t kk = std::min(k, nbrs.size());
    if (kk == 0) throw InvalidArgument("knn: no neighbors");
    if (nbrs[0].first == 0.0) {
        double sum = 0.0;
        size_t cnt = 0;
        for (size_t i = 0; i < kk && nbrs[i].first == 0.0; ++i) {
            sum += targets[nbrs[i].second];
            ++cnt;
        }
        return sum / static_cast<double>(cnt);
    }
    double wsum = 0.0;
    for (size_t i = 0; i < kk; ++i) wsum += 1.0 / nbrs[i].first;
    double out = 0.0;
    for (size_t i = 0; i < kk; ++i)
        out += (1.0 / nbrs[i].first) / wsum * targets[nbrs[i].second];
    return out;
}

} // namespace detail

// Raw per-row kNN regression (Eqs. for distance and inverse-distance
// weights), without the output lowpass.
inline TimeSeries predict_knn_raw(const KnnModel& m, const FeatureMatrix& fm) {
    detail::KdTree3 tree(m.train_points);
    TimeSeries out;
    out.start_epoch = fm.epochs.empty() ? 0.0 : fm.epochs.front();
    out.period_s = fm.period_s;
    out.values.resize(fm.rows());
    out.gap_mask.assign(fm.rows(), 0);
    size_t k = std::min<size_t>(m.k, m.train_points.size());
    for (size_t i = 0; i < fm.rows(); ++i) {
        auto q = m.transform(fm.tod_s[i], fm.deriv_nTps[i], fm.mag_nT[i]);
        auto nbrs = tree.query(q, m.alpha, k);
        out.values[i] = detail::combine_neighbors(nbrs, k, m.train_targets);
    }
    return out;
}

inline TimeSeries predict_knn(const KnnModel& m, const FeatureMatrix& fm) {
    TimeSeries raw = predict_knn_raw(m, fm);
    IirFilter lp = design_butterworth_lowpass(4, m.output_cutoff_cph, raw.period_s);
    return filtfilt(lp, raw);
}

struct KnnSearchConfig {
    std::vector<int> k_grid;        // default 5, 10, ..., 100
    std::vector<double> alpha_grid; // default 1, 2, ..., 50
    int basin_hops = 20;
    double perturbation = 2.0;
    double alpha_lo = 1.0;
    double alpha_hi = 50.0;
    uint64_t seed = 0;
    double storm_kp = 4.0;          // validation rows above this are pruned
    double output_cutoff_cph = 1.5;

    static KnnSearchConfig defaults() {
        KnnSearchConfig c;
        for (int k = 5; k <= 100; k += 5) c.k_grid.push_back(k);
        for (int a = 1; a <= 50; ++a) c.alpha_grid.push_back(a);
        return c;
    }
};

struct KnnSearchReport {
    int grid_k = 0;
    double grid_alpha = 0.0;
    double grid_cv_rmse = 0.0;
    double refined_alpha = 0.0;
    double refined_cv_rmse = 0.0;
};

namespace detail {

struct KnnFolds {
    // per fold: row indices of the held-out day, its scoring mask, and the
    // training row indices (all other days)
    std::vector<std::vector<size_t>> val_rows;
    std::vector<std::vector<uint8_t>> val_scored;
    std::vector<std::vector<size_t>> train_rows;
};

inline KnnFolds make_day_folds(const FeatureMatrix& fm, const KpSeries& kp,
                               double storm_kp) {
    std::map<double, std::vector<size_t>> by_day;
    for (size_t i = 0; i < fm.rows(); ++i)
        by_day[floor_utc_day(fm.epochs[i])].push_back(i);
    KnnFolds folds;
    for (const auto& [day, rows] : by_day) {
        std::vector<uint8_t> scored(rows.size());
        for (size_t j = 0; j < rows.size(); ++j)
            scored[j] = kp_at(kp, fm.epochs[rows[j]]) > storm_kp ? 0 : 1;
        std::vector<size_t> train;
        train.reserve(fm.rows() - rows.size());
        for (size_t i = 0; i < fm.rows(); ++i)
            if (floor_utc_day(fm.epochs[i]) != day) train.push_back(i);
        folds.val_rows.push_back(rows);
        folds.val_scored.push_back(std::move(scored));
        folds.train_rows.push_back(std::move(train));
    }
    return folds;
}

} // namespace detail

// Hyperparameter search: quantile transforms fit on the full training set,
// (k, alpha) grid scored by day-fold cross-validation (storm rows pruned
// from held-out scoring, folds weighted by surviving row count), then alpha
// refined continuously by basin hopping around the grid optimum.
inline KnnModel fit_knn(const FeatureMatrix& fm, const KpSeries& kp,
                        const KnnSearchConfig& cfg_in = KnnSearchConfig::defaults(),
                        KnnSearchReport* report = nullptr) {
    if (!fm.has_target())
        throw InvalidArgument("fit_knn: feature matrix has no targets");
    KnnSearchConfig cfg = cfg_in;
    if (cfg.k_grid.empty() || cfg.alpha_grid.empty())
        cfg = KnnSearchConfig::defaults();

    KnnModel model;
    model.tod_map = QuantileMap::fit(fm.tod_s);
    model.deriv_map = QuantileMap::fit(fm.deriv_nTps);
    model.mag_map = QuantileMap::fit(fm.mag_nT);
    model.output_cutoff_cph = cfg.output_cutoff_cph;
    model.train_points.resize(fm.rows());
    for (size_t i = 0; i < fm.rows(); ++i)
        model.train_points[i] =
            model.transform(fm.tod_s[i], fm.deriv_nTps[i], fm.mag_nT[i]);
    model.train_targets = fm.target_nT;

    detail::KnnFolds folds = detail::make_day_folds(fm, kp, cfg.storm_kp);
    const size_t n_folds = folds.val_rows.size();
    if (n_folds < 2)
        throw InvalidArgument("fit_knn: need at least 2 days of training rows");

    size_t k_max = 0;
    for (int k : cfg.k_grid) k_max = std::max<size_t>(k_max, k);

    // per-fold KD-trees over the training subsets
    std::vector<std::vector<std::array<double, 3>>> fold_pts(n_folds);
    std::vector<std::vector<double>> fold_targets(n_folds);
    for (size_t f = 0; f < n_folds; ++f) {
        for (size_t i : folds.train_rows[f]) {
            fold_pts[f].push_back(model.train_points[i]);
            fold_targets[f].push_back(fm.target_nT[i]);
        }
        if (fold_pts[f].empty())
            throw InvalidArgument("fit_knn: a fold has no training rows");
    }
    std::vector<detail::KdTree3> fold_trees;
    fold_trees.reserve(n_folds);
    for (size_t f = 0; f < n_folds; ++f) fold_trees.emplace_back(fold_pts[f]);

    // weighted CV score for one alpha across a set of k values: one k_max
    // neighbor search per validation row, shared across the k grid
    auto cv_scores = [&](double alpha, const std::vector<int>& ks)
        -> std::vector<double> {
        std::vector<double> wsum(ks.size(), 0.0), werr(ks.size(), 0.0);
        for (size_t f = 0; f < n_folds; ++f) {
            const auto& rows = folds.val_rows[f];
            size_t kq = std::min(k_max, fold_pts[f].size());
            std::vector<std::vector<double>> preds(
                ks.size(), std::vector<double>(rows.size()));
            for (size_t j = 0; j < rows.size(); ++j) {
                size_t i = rows[j];
                auto nbrs = fold_trees[f].query(model.train_points[i], alpha, kq);
                for (size_t ki = 0; ki < ks.size(); ++ki)
                    preds[ki][j] = detail::combine_neighbors(
                        nbrs, static_cast<size_t>(ks[ki]), fold_targets[f]);
            }
            size_t survivors = 0;
            for (uint8_t s : folds.val_scored[f]) survivors += s;
            if (survivors == 0) continue;
            for (size_t ki = 0; ki < ks.size(); ++ki) {
                TimeSeries day;
                day.start_epoch = fm.epochs[rows.front()];
                day.period_s = fm.period_s;
                day.values = preds[ki];
                day.gap_mask.assign(rows.size(), 0);
                TimeSeries filt = detail::maybe_lowpass(day, cfg.output_cutoff_cph);
                double se = 0.0;
                for (size_t j = 0; j < rows.size(); ++j) {
                    if (!folds.val_scored[f][j]) continue;
                    double e = filt.values[j] - fm.target_nT[rows[j]];
                    se += e * e;
                }
                double rmse = std::sqrt(se / static_cast<double>(survivors));
                werr[ki] += rmse * static_cast<double>(survivors);
                wsum[ki] += static_cast<double>(survivors);
            }
        }
        std::vector<double> out(ks.size());
        for (size_t ki = 0; ki < ks.size(); ++ki) {
            if (wsum[ki] == 0.0)
                throw NoValidationData("fit_knn: every fold was fully pruned");
            out[ki] = werr[ki] / wsum[ki];
        }
        return out;
    };

    // grid search
    int best_k = cfg.k_grid.front();
    double best_alpha = cfg.alpha_grid.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (double alpha : cfg.alpha_grid) {
        std::vector<double> scores = cv_scores(alpha, cfg.k_grid);
        for (size_t ki = 0; ki < cfg.k_grid.size(); ++ki) {
            if (scores[ki] < best_score) {
                best_score = scores[ki];
                best_k = cfg.k_grid[ki];
                best_alpha = alpha;
            }
        }
    }
    if (report) {
        report->grid_k = best_k;
        report->grid_alpha = best_alpha;
        report->grid_cv_rmse = best_score;
    }

    // continuous refinement of alpha at the chosen k: basin hopping with a
    // Nelder-Mead local stage and Metropolis acceptance (T = 1)
    std::map<double, double> memo;
    std::vector<int> k_one{best_k};
    auto objective = [&](double alpha) {
        double a = std::clamp(alpha, cfg.alpha_lo, cfg.alpha_hi);
        double key = std::round(a * 1e6) / 1e6;
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        double v = cv_scores(key, k_one)[0];
        memo[key] = v;
        return v;
    };
    auto nelder_mead_1d = [&](double x0) {
        double a = x0;
        double b = x0 + std::max(std::abs(x0) * 0.05, 0.05);
        double fa = objective(a), fb = objective(b);
        for (int it = 0; it < 40; ++it) {
            if (fb < fa) { std::swap(a, b); std::swap(fa, fb); }
            if (std::abs(b - a) < 1e-3 && std::abs(fb - fa) < 1e-7) break;
            double xr = a + (a - b);            // reflect worst through best
            double fr = objective(xr);
            if (fr < fa) {
                double xe = a + 2.0 * (a - b);  // expand
                double fe = objective(xe);
                if (fe < fr) { b = xe; fb = fe; }
                else { b = xr; fb = fr; }
            } else if (fr < fb) {
                b = xr; fb = fr;
            } else {
                double xc = a + 0.5 * (b - a);  // contract (also the shrink point)
                b = xc;
                fb = objective(xc);
            }
        }
        return fa < fb ? std::make_pair(a, fa) : std::make_pair(b, fb);
    };

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> step(0.0, cfg.perturbation);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto [cur_x, cur_f] = nelder_mead_1d(best_alpha);
    double glob_x = cur_x, glob_f = cur_f;
    for (int hop = 0; hop < cfg.basin_hops; ++hop) {
        double trial = std::clamp(cur_x + step(rng), cfg.alpha_lo, cfg.alpha_hi);
        auto [nx, nf] = nelder_mead_1d(trial);
        nx = std::clamp(nx, cfg.alpha_lo, cfg.alpha_hi);
        if (nf < glob_f) { glob_f = nf; glob_x = nx; }
        if (nf <= cur_f || unif(rng) < std::exp(-(nf - cur_f))) {
            cur_x = nx;
            cur_f = nf;
        }
    }

    model.k = best_k;
    model.alpha = std::clamp(glob_x, cfg.alpha_lo, cfg.alpha_hi);
    if (report) {
        report->refined_alpha = model.alpha;
        report->refined_cv_rmse = glob_f;
    }
    return model;
}

} // namespace ersm
