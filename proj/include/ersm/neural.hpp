#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ersm/dsp.hpp"
#include "ersm/errors.hpp"
#include "ersm/features.hpp"
#include "ersm/format.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

struct NnTrainConfig {
    int members = 16;
    int blocks = 3;
    int hidden = 30;
    int epochs = 200;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double dropout = 0.1;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    int max_retries = 3;
    double output_cutoff_cph = 1.5;
};

// One ensemble member: 4 standardized inputs, `blocks` residual blocks
// (linear 4->hidden, batch normalization, relu, dropout, linear hidden->4,
// skip add), then a linear 4->1 head. Parameters live in one flat vector so
// the optimizer and finite-difference checks can treat them uniformly.
class NnMember {
public:
    static constexpr int in_dim = 4;

    NnMember() = default;
    NnMember(int blocks, int hidden) : blocks_(blocks), hidden_(hidden) {
        per_block_ = static_cast<size_t>(hidden_) * in_dim + hidden_  // W1, b1
                   + hidden_ + hidden_                                // gamma, beta
                   + static_cast<size_t>(in_dim) * hidden_ + in_dim;  // W2, b2
        params.assign(per_block_ * blocks_ + in_dim + 1, 0.0);
        running_mean.assign(static_cast<size_t>(blocks_) * hidden_, 0.0);
        running_var.assign(static_cast<size_t>(blocks_) * hidden_, 1.0);
    }

    int blocks() const { return blocks_; }
    int hidden() const { return hidden_; }

    // uniform init in +-1/sqrt(fan_in) for linear layers; unit scale, zero
    // shift for the normalization layers
    void init(std::mt19937_64& rng) {
        auto u = [&](double bound) {
            std::uniform_real_distribution<double> d(-bound, bound);
            return d(rng);
        };
        for (int b = 0; b < blocks_; ++b) {
            double k1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
            for (size_t i = 0; i < static_cast<size_t>(hidden_) * in_dim; ++i)
                params[w1_off(b) + i] = u(k1);
            for (int i = 0; i < hidden_; ++i) params[b1_off(b) + i] = u(k1);
            for (int i = 0; i < hidden_; ++i) params[gamma_off(b) + i] = 1.0;
            for (int i = 0; i < hidden_; ++i) params[beta_off(b) + i] = 0.0;
            double k2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
            for (size_t i = 0; i < static_cast<size_t>(in_dim) * hidden_; ++i)
                params[w2_off(b) + i] = u(k2);
            for (int i = 0; i < in_dim; ++i) params[b2_off(b) + i] = u(k2);
        }
        double kf = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (int i = 0; i < in_dim; ++i) params[wf_off() + i] = u(kf);
        params[bf_off()] = u(kf);
        std::fill(running_mean.begin(), running_mean.end(), 0.0);
        std::fill(running_var.begin(), running_var.end(), 1.0);
    }

    struct PassOptions {
        bool training = false;       // batch statistics + dropout masks
        bool use_norm = true;
        bool use_dropout = true;
        double dropout = 0.1;
        double bn_eps = 1e-5;
        double bn_momentum = 0.1;
        std::mt19937_64* rng = nullptr;
    };

    // Forward pass over a row-major N x 4 batch. Returns the N outputs and,
    // when caches is non-null, keeps everything backward() needs.
    struct Caches {
        size_t n = 0;
        std::vector<std::vector<double>> block_in;   // per block, N*4
        std::vector<std::vector<double>> lin1;       // pre-norm, N*H
        std::vector<std::vector<double>> xhat;       // normalized, N*H
        std::vector<std::vector<double>> inv_std;    // per feature, H
        std::vector<std::vector<double>> act;        // post relu+dropout, N*H
        std::vector<std::vector<uint8_t>> act_mask;  // relu gate * dropout keep
        std::vector<std::vector<double>> drop_scale; // per sample*H multiplier
        std::vector<double> head_in;                 // N*4
    };

    std::vector<double> forward(const std::vector<double>& X, size_t n,
                                const PassOptions& opt, Caches* caches) const {
        std::vector<double> x = X;  // N x 4, mutated through the blocks
        if (caches) {
            *caches = Caches{};
            caches->n = n;
        }
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        for (int b = 0; b < blocks_; ++b) {
            const double* W1 = &params[w1_off(b)];
            const double* B1 = &params[b1_off(b)];
            const double* G = &params[gamma_off(b)];
            const double* Be = &params[beta_off(b)];
            const double* W2 = &params[w2_off(b)];
            const double* B2 = &params[b2_off(b)];

            std::vector<double> h(n * hidden_);
            for (size_t i = 0; i < n; ++i) {
                const double* xi = &x[i * in_dim];
                double* hi = &h[i * hidden_];
                for (int j = 0; j < hidden_; ++j) {
                    const double* w = &W1[static_cast<size_t>(j) * in_dim];
                    hi[j] = B1[j] + w[0] * xi[0] + w[1] * xi[1] + w[2] * xi[2] +
                            w[3] * xi[3];
                }
            }

            std::vector<double> normed = h;
            std::vector<double> inv_std(hidden_, 1.0);
            std::vector<double> xhat;
            if (opt.use_norm) {
                xhat.resize(n * hidden_);
                for (int j = 0; j < hidden_; ++j) {
                    double mean, var;
                    if (opt.training) {
                        double s = 0.0;
                        for (size_t i = 0; i < n; ++i) s += h[i * hidden_ + j];
                        mean = s / static_cast<double>(n);
                        double v = 0.0;
                        for (size_t i = 0; i < n; ++i) {
                            double d = h[i * hidden_ + j] - mean;
                            v += d * d;
                        }
                        var = v / static_cast<double>(n);
                        double* rm = &running_mean[bn_off(b)];
                        double* rv = &running_var[bn_off(b)];
                        double unbiased = n > 1
                            ? v / static_cast<double>(n - 1) : var;
                        rm[j] = (1.0 - opt.bn_momentum) * rm[j] + opt.bn_momentum * mean;
                        rv[j] = (1.0 - opt.bn_momentum) * rv[j] + opt.bn_momentum * unbiased;
                    } else {
                        mean = running_mean[bn_off(b) + j];
                        var = running_var[bn_off(b) + j];
                    }
                    double is = 1.0 / std::sqrt(var + opt.bn_eps);
                    inv_std[j] = is;
                    for (size_t i = 0; i < n; ++i) {
                        double xh = (h[i * hidden_ + j] - mean) * is;
                        xhat[i * hidden_ + j] = xh;
                        normed[i * hidden_ + j] = G[j] * xh + Be[j];
                    }
                }
            }

            std::vector<double> act(n * hidden_);
            std::vector<uint8_t> mask(n * hidden_);
            std::vector<double> dscale(n * hidden_, 1.0);
            const bool drop = opt.use_dropout && opt.training && opt.dropout > 0.0;
            const double keep_scale = drop ? 1.0 / (1.0 - opt.dropout) : 1.0;
            for (size_t i = 0; i < n * static_cast<size_t>(hidden_); ++i) {
                double v = normed[i] > 0.0 ? normed[i] : 0.0;
                uint8_t m = normed[i] > 0.0 ? 1 : 0;
                double sc = 1.0;
                if (drop) {
                    if (opt.rng && ud(*opt.rng) < opt.dropout) {
                        sc = 0.0;
                        m = 0;
                        v = 0.0;
                    } else {
                        sc = keep_scale;
                        v *= keep_scale;
                    }
                }
                act[i] = v;
                mask[i] = m;
                dscale[i] = sc;
            }

            std::vector<double> out(n * in_dim);
            for (size_t i = 0; i < n; ++i) {
                const double* ai = &act[i * hidden_];
                double* oi = &out[i * in_dim];
                for (int j = 0; j < in_dim; ++j) {
                    const double* w = &W2[static_cast<size_t>(j) * hidden_];
                    double s = B2[j];
                    for (int m2 = 0; m2 < hidden_; ++m2) s += w[m2] * ai[m2];
                    oi[j] = s + x[i * in_dim + j];  // skip connection
                }
            }

            if (caches) {
                caches->block_in.push_back(x);
                caches->lin1.push_back(std::move(h));
                caches->xhat.push_back(std::move(xhat));
                caches->inv_std.push_back(std::move(inv_std));
                caches->act.push_back(act);
                caches->act_mask.push_back(std::move(mask));
                caches->drop_scale.push_back(std::move(dscale));
            }
            x = std::move(out);
        }

        std::vector<double> y(n);
        const double* Wf = &params[wf_off()];
        for (size_t i = 0; i < n; ++i) {
            const double* xi = &x[i * in_dim];
            y[i] = params[bf_off()] + Wf[0] * xi[0] + Wf[1] * xi[1] +
                   Wf[2] * xi[2] + Wf[3] * xi[3];
        }
        if (caches) caches->head_in = std::move(x);
        return y;
    }

    // Mean-squared-error loss and its gradient with respect to every
    // parameter, for the batch captured in `caches` by a forward pass with
    // the same options.
    double backward(const std::vector<double>& y, const std::vector<double>& t,
                    const Caches& caches, const PassOptions& opt,
                    std::vector<double>& grad) const {
        const size_t n = caches.n;
        grad.assign(params.size(), 0.0);
        double loss = 0.0;
        std::vector<double> dy(n);
        for (size_t i = 0; i < n; ++i) {
            double e = y[i] - t[i];
            loss += e * e;
            dy[i] = 2.0 * e / static_cast<double>(n);
        }
        loss /= static_cast<double>(n);

        // head
        const double* Wf = &params[wf_off()];
        std::vector<double> dx(n * in_dim);
        for (size_t i = 0; i < n; ++i) {
            const double* xi = &caches.head_in[i * in_dim];
            for (int j = 0; j < in_dim; ++j) {
                grad[wf_off() + j] += dy[i] * xi[j];
                dx[i * in_dim + j] = dy[i] * Wf[j];
            }
            grad[bf_off()] += dy[i];
        }

        for (int b = blocks_ - 1; b >= 0; --b) {
            const double* W1 = &params[w1_off(b)];
            const double* G = &params[gamma_off(b)];
            const double* W2 = &params[w2_off(b)];
            const auto& act = caches.act[b];
            const auto& dscale = caches.drop_scale[b];
            const auto& xhat = caches.xhat[b];
            const auto& inv_std = caches.inv_std[b];
            const auto& block_in = caches.block_in[b];

            // through the second linear layer
            std::vector<double> dact(n * hidden_, 0.0);
            for (size_t i = 0; i < n; ++i) {
                const double* di = &dx[i * in_dim];
                const double* ai = &act[i * hidden_];
                double* dai = &dact[i * hidden_];
                for (int j = 0; j < in_dim; ++j) {
                    double d = di[j];
                    double* gw = &grad[w2_off(b) + static_cast<size_t>(j) * hidden_];
                    const double* w = &W2[static_cast<size_t>(j) * hidden_];
                    for (int m2 = 0; m2 < hidden_; ++m2) {
                        gw[m2] += d * ai[m2];
                        dai[m2] += d * w[m2];
                    }
                    grad[b2_off(b) + j] += d;
                }
            }

            // through dropout and relu: act = relu(normed) * dscale
            std::vector<double> dnormed(n * hidden_);
            for (size_t i = 0; i < n * static_cast<size_t>(hidden_); ++i)
                dnormed[i] = caches.act_mask[b][i] ? dact[i] * dscale[i] : 0.0;

            // through the normalization layer (batch statistics)
            std::vector<double> dh(n * hidden_);
            if (opt.use_norm) {
                for (int j = 0; j < hidden_; ++j) {
                    double sum_d = 0.0, sum_dx = 0.0;
                    for (size_t i = 0; i < n; ++i) {
                        double d = dnormed[i * hidden_ + j];
                        grad[gamma_off(b) + j] += d * xhat[i * hidden_ + j];
                        grad[beta_off(b) + j] += d;
                        double dxh = d * G[j];
                        sum_d += dxh;
                        sum_dx += dxh * xhat[i * hidden_ + j];
                    }
                    if (opt.training) {
                        double invn = 1.0 / static_cast<double>(n);
                        for (size_t i = 0; i < n; ++i) {
                            double dxh = dnormed[i * hidden_ + j] * G[j];
                            dh[i * hidden_ + j] =
                                inv_std[j] * (dxh - sum_d * invn -
                                              xhat[i * hidden_ + j] * sum_dx * invn);
                        }
                    } else {
                        for (size_t i = 0; i < n; ++i)
                            dh[i * hidden_ + j] =
                                dnormed[i * hidden_ + j] * G[j] * inv_std[j];
                    }
                }
            } else {
                dh = dnormed;
            }

            // through the first linear layer, plus the skip path
            std::vector<double> dxin(n * in_dim, 0.0);
            for (size_t i = 0; i < n; ++i) {
                const double* xi = &block_in[i * in_dim];
                const double* dhi = &dh[i * hidden_];
                double* dxi = &dxin[i * in_dim];
                for (int j = 0; j < hidden_; ++j) {
                    double d = dhi[j];
                    double* gw = &grad[w1_off(b) + static_cast<size_t>(j) * in_dim];
                    const double* w = &W1[static_cast<size_t>(j) * in_dim];
                    gw[0] += d * xi[0];
                    gw[1] += d * xi[1];
                    gw[2] += d * xi[2];
                    gw[3] += d * xi[3];
                    dxi[0] += d * w[0];
                    dxi[1] += d * w[1];
                    dxi[2] += d * w[2];
                    dxi[3] += d * w[3];
                    grad[b1_off(b) + j] += d;
                }
                for (int j = 0; j < in_dim; ++j)
                    dxi[j] += dx[i * in_dim + j];  // skip connection
            }
            dx = std::move(dxin);
        }
        return loss;
    }

    std::vector<double> params;
    // normalization statistics buffers: updated during training-mode forward
    // passes, read-only at evaluation time
    mutable std::vector<double> running_mean;
    mutable std::vector<double> running_var;

    size_t w1_off(int b) const { return per_block_ * b; }
    size_t b1_off(int b) const { return w1_off(b) + static_cast<size_t>(hidden_) * in_dim; }
    size_t gamma_off(int b) const { return b1_off(b) + hidden_; }
    size_t beta_off(int b) const { return gamma_off(b) + hidden_; }
    size_t w2_off(int b) const { return beta_off(b) + hidden_; }
    size_t b2_off(int b) const { return w2_off(b) + static_cast<size_t>(in_dim) * hidden_; }
    size_t wf_off() const { return per_block_ * blocks_; }
    size_t bf_off() const { return wf_off() + in_dim; }
    size_t bn_off(int b) const { return static_cast<size_t>(b) * hidden_; }

private:
    int blocks_ = 3;
    int hidden_ = 30;
    size_t per_block_ = 0;
};

struct NnEnsemble {
    std::vector<NnMember> members;
    Standardizer standardizer;  // tod, deriv, mag, storm
    double output_cutoff_cph = 1.5;
};

namespace detail {

inline std::vector<double> standardized_inputs(const FeatureMatrix& fm,
                                               const Standardizer& st) {
    std::vector<double> X(fm.rows() * NnMember::in_dim);
    for (size_t i = 0; i < fm.rows(); ++i) {
        X[i * 4 + 0] = st.apply(0, fm.tod_s[i]);
        X[i * 4 + 1] = st.apply(1, fm.deriv_nTps[i]);
        X[i * 4 + 2] = st.apply(2, fm.mag_nT[i]);
        X[i * 4 + 3] = st.apply(3, static_cast<double>(fm.storm_flag[i]));
    }
    return X;
}

inline NnMember train_member(const std::vector<double>& X,
                             const std::vector<double>& targets, size_t n,
                             uint64_t seed, const NnTrainConfig& cfg) {
    NnMember member(cfg.blocks, cfg.hidden);
    std::mt19937_64 rng(seed);
    member.init(rng);

    std::vector<double> m_adam(member.params.size(), 0.0);
    std::vector<double> v_adam(member.params.size(), 0.0);
    long step = 0;

    NnMember::PassOptions opt;
    opt.training = true;
    opt.use_norm = true;
    opt.use_dropout = true;
    opt.dropout = cfg.dropout;
    opt.bn_eps = cfg.bn_eps;
    opt.bn_momentum = cfg.bn_momentum;
    opt.rng = &rng;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> bx, bt, grad;
    NnMember::Caches caches;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t ofs = 0; ofs < n; ofs += cfg.batch_size) {
            size_t bn = std::min<size_t>(cfg.batch_size, n - ofs);
            bx.resize(bn * NnMember::in_dim);
            bt.resize(bn);
            for (size_t i = 0; i < bn; ++i) {
                size_t src = order[ofs + i];
                std::copy(&X[src * 4], &X[src * 4] + 4, &bx[i * 4]);
                bt[i] = targets[src];
            }
            std::vector<double> y = member.forward(bx, bn, opt, &caches);
            double loss = member.backward(y, bt, caches, opt, grad);
            if (!std::isfinite(loss))
                throw TrainingDiverged(strformat(
                    "nn: non-finite loss at epoch %d", epoch));
            ++step;
            double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
            double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
            for (size_t p = 0; p < member.params.size(); ++p) {
                m_adam[p] = cfg.adam_beta1 * m_adam[p] + (1.0 - cfg.adam_beta1) * grad[p];
                v_adam[p] = cfg.adam_beta2 * v_adam[p] + (1.0 - cfg.adam_beta2) * grad[p] * grad[p];
                member.params[p] -= cfg.learning_rate * (m_adam[p] / bc1) /
                                    (std::sqrt(v_adam[p] / bc2) + cfg.adam_eps);
            }
        }
    }
    return member;
}

} // namespace detail

// Train the ensemble: shared feature standardization, independently seeded
// members, divergent members retried with a derived seed up to max_retries.
inline NnEnsemble fit_nn(const FeatureMatrix& fm, uint64_t seed,
                         const NnTrainConfig& cfg = NnTrainConfig()) {
    if (!fm.has_target())
        throw InvalidArgument("fit_nn: feature matrix has no targets");
    if (fm.rows() < 2)
        throw InvalidArgument("fit_nn: need at least 2 rows");

    NnEnsemble ens;
    ens.output_cutoff_cph = cfg.output_cutoff_cph;
    std::vector<double> storm(fm.rows());
    for (size_t i = 0; i < fm.rows(); ++i)
        storm[i] = static_cast<double>(fm.storm_flag[i]);
    ens.standardizer = Standardizer::fit(
        {fm.tod_s, fm.deriv_nTps, fm.mag_nT, storm});

    std::vector<double> X = detail::standardized_inputs(fm, ens.standardizer);
    for (int i = 0; i < cfg.members; ++i) {
        uint64_t member_seed = seed + static_cast<uint64_t>(i);
        int attempts = 0;
        for (;;) {
            try {
                ens.members.push_back(detail::train_member(
                    X, fm.target_nT, fm.rows(), member_seed, cfg));
                break;
            } catch (const TrainingDiverged&) {
                if (++attempts > cfg.max_retries) throw;
                member_seed = member_seed * 6364136223846793005ULL + 1442695040888963407ULL;
            }
        }
    }
    return ens;
}

// Median-trimmed ensemble combination at one timestamp: drop the single
// member value farthest from the median (ties drop the lower index), average
// the rest.
inline double trim_combine(const std::vector<double>& vals) {
    if (vals.empty()) throw InvalidArgument("trim_combine: no values");
    if (vals.size() == 1) return vals[0];
    std::vector<double> sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    double median = n % 2 == 1
        ? sorted[n / 2]
        : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    size_t drop = 0;
    double worst = -1.0;
    for (size_t i = 0; i < vals.size(); ++i) {
        double d = std::abs(vals[i] - median);
        if (d > worst) {
            worst = d;
            drop = i;
        }
    }
    double sum = 0.0;
    for (size_t i = 0; i < vals.size(); ++i)
        if (i != drop) sum += vals[i];
    return sum / static_cast<double>(vals.size() - 1);
}

// Each member predicts and is lowpass filtered; per timestamp the trimmed
// ensemble mean is taken.
inline TimeSeries predict_nn(const NnEnsemble& ens, const FeatureMatrix& fm) {
    if (ens.members.empty()) throw InvalidArgument("predict_nn: empty ensemble");
    std::vector<double> X = detail::standardized_inputs(fm, ens.standardizer);
    NnMember::PassOptions opt;
    opt.training = false;

    std::vector<TimeSeries> series;
    series.reserve(ens.members.size());
    for (const auto& member : ens.members) {
        std::vector<double> y = member.forward(X, fm.rows(), opt, nullptr);
        TimeSeries ts;
        ts.start_epoch = fm.epochs.empty() ? 0.0 : fm.epochs.front();
        ts.period_s = fm.period_s;
        ts.values = std::move(y);
        ts.gap_mask.assign(fm.rows(), 0);
        series.push_back(detail::maybe_lowpass(std::move(ts),
                                               ens.output_cutoff_cph));
    }

    TimeSeries out = series.front();
    std::vector<double> vals(series.size());
    for (size_t i = 0; i < fm.rows(); ++i) {
        for (size_t m = 0; m < series.size(); ++m) vals[m] = series[m].values[i];
        out.values[i] = trim_combine(vals);
    }
    return out;
}

} // namespace ersm
