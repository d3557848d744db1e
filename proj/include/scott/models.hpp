#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scott/dataset.hpp"
#include "scott/rng.hpp"

namespace scott {

using ParameterVector = std::vector<double>;

enum class LossKind { kMse, kGaussianNll };

/// Layer widths for the feedforward forecaster: context_len inputs, tanh
/// hidden layers, and a linear head of pred_len values (MSE) or
/// 2 * pred_len values interpreted as (mean, log-scale) pairs (NLL).
struct FeedforwardLayout {
    int input = 1;
    std::vector<int> hidden;
    int pred_len = 1;
    LossKind loss = LossKind::kMse;

    int output_dim() const {
        return loss == LossKind::kGaussianNll ? 2 * pred_len : pred_len;
    }

    std::vector<int> widths() const {
        std::vector<int> w;
        w.push_back(input);
        for (int h : hidden) w.push_back(h);
        w.push_back(output_dim());
        return w;
    }

    int param_count() const {
        auto w = widths();
        int n = 0;
        for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l + 1] * (w[l] + 1);
        return n;
    }

    void validate() const {
        if (input < 1 || pred_len < 1)
            throw std::invalid_argument("feedforward: widths must be >= 1");
        for (int h : hidden)
            if (h < 1) throw std::invalid_argument("feedforward: widths must be >= 1");
    }
};

/// A (model, loss) pair exposing deterministic value, gradient and point
/// prediction on one training example. Stateless: evaluation is a pure
/// function of (theta, example), safe to call concurrently.
///
/// The autoregressive model predicts from the most recent p context values
/// with one coefficient per window position, oldest first:
///   zhat_{t0+1} = sum_s theta_s * z_{t0-p+s},  s = 1..p,
/// applied recursively for multi-step horizons. Loss is squared error
/// summed over the horizon.
class GradientOracle {
public:
    enum class Kind { kAr, kFeedforward };

    static GradientOracle ar(int order) {
        if (order < 1) throw std::invalid_argument("ar: order must be >= 1");
        GradientOracle o;
        o.kind_ = Kind::kAr;
        o.ar_order_ = order;
        o.dim_ = order;
        return o;
    }

    static GradientOracle feedforward(FeedforwardLayout layout) {
        layout.validate();
        GradientOracle o;
        o.kind_ = Kind::kFeedforward;
        o.layout_ = std::move(layout);
        o.widths_ = o.layout_.widths();
        o.act_offsets_.assign(o.widths_.size(), 0);
        o.param_offsets_.assign(o.widths_.size() - 1, 0);
        std::size_t acts = 0, params = 0;
        for (std::size_t l = 0; l < o.widths_.size(); ++l) {
            o.act_offsets_[l] = acts;
            acts += o.widths_[l];
            if (l + 1 < o.widths_.size()) {
                o.param_offsets_[l] = params;
                params += static_cast<std::size_t>(o.widths_[l + 1]) * (o.widths_[l] + 1);
            }
        }
        o.total_acts_ = acts;
        o.dim_ = static_cast<int>(params);
        return o;
    }

    Kind kind() const { return kind_; }
    int ar_order() const { return ar_order_; }
    const FeedforwardLayout& layout() const { return layout_; }

    int dim() const { return dim_; }

    LossKind loss_kind() const {
        return kind_ == Kind::kAr ? LossKind::kMse : layout_.loss;
    }

    /// Zero for the autoregressive model, seeded uniform(-s, s) with
    /// s = 1/sqrt(fan_in) per layer for the feedforward model.
    ParameterVector init_params(std::uint64_t seed) const {
        ParameterVector theta(dim(), 0.0);
        if (kind_ == Kind::kFeedforward) {
            Rng rng(seed);
            auto w = layout_.widths();
            std::size_t at = 0;
            for (std::size_t l = 0; l + 1 < w.size(); ++l) {
                const double s = 1.0 / std::sqrt(static_cast<double>(w[l]));
                const std::size_t n = static_cast<std::size_t>(w[l + 1]) * (w[l] + 1);
                for (std::size_t i = 0; i < n; ++i)
                    theta[at++] = s * (2.0 * rng.next_double() - 1.0);
            }
        }
        return theta;
    }

    std::vector<double> predict(const ParameterVector& theta,
                                const TimeSeriesDataset& ds,
                                const TrainingExample& ex) const {
        check(theta, ds);
        return kind_ == Kind::kAr ? ar_predict(theta, ds.context(ex), ds.pred_len)
                                  : ff_predict(theta, ds.context(ex));
    }

    double loss(const ParameterVector& theta, const TimeSeriesDataset& ds,
                const TrainingExample& ex) const {
        check(theta, ds);
        double value = 0;
        if (kind_ == Kind::kAr) {
            ar_eval(theta, ds.context(ex), ds.target(ex), &value, nullptr);
        } else {
            ff_eval(theta, ds.context(ex), ds.target(ex), &value, nullptr);
        }
        return value;
    }

    std::vector<double> grad(const ParameterVector& theta,
                             const TimeSeriesDataset& ds,
                             const TrainingExample& ex) const {
        check(theta, ds);
        std::vector<double> g(dim(), 0.0);
        if (kind_ == Kind::kAr) {
            ar_eval(theta, ds.context(ex), ds.target(ex), nullptr, g.data());
        } else {
            ff_eval(theta, ds.context(ex), ds.target(ex), nullptr, g.data());
        }
        return g;
    }

    /// Adds the example gradient into `out` (size dim()); returns the loss.
    double grad_accumulate(const ParameterVector& theta,
                           const TimeSeriesDataset& ds, const TrainingExample& ex,
                           double* out) const {
        check(theta, ds);
        double value = 0;
        if (kind_ == Kind::kAr) {
            ar_eval(theta, ds.context(ex), ds.target(ex), &value, out);
        } else {
            ff_eval(theta, ds.context(ex), ds.target(ex), &value, out);
        }
        return value;
    }

private:
    void check(const ParameterVector& theta, const TimeSeriesDataset& ds) const {
        if (static_cast<int>(theta.size()) != dim())
            throw std::invalid_argument("oracle: parameter dimension mismatch: got " +
                                        std::to_string(theta.size()) + ", expected " +
                                        std::to_string(dim()));
        if (kind_ == Kind::kAr && ds.context_len < ar_order_)
            throw std::invalid_argument("oracle: context shorter than AR order");
        if (kind_ == Kind::kFeedforward && ds.context_len != layout_.input)
            throw std::invalid_argument("oracle: feedforward input width != context length");
        if (kind_ == Kind::kFeedforward && ds.pred_len != layout_.pred_len)
            throw std::invalid_argument("oracle: feedforward head width != prediction length");
    }

    std::vector<double> ar_predict(const ParameterVector& theta,
                                   std::span<const double> context,
                                   int horizon) const {
        const int p = ar_order_;
        std::vector<double> window(context.end() - p, context.end());
        std::vector<double> out(horizon);
        for (int h = 0; h < horizon; ++h) {
            double pred = 0;
            for (int s = 0; s < p; ++s) pred += theta[s] * window[s];
            out[h] = pred;
            window.erase(window.begin());
            window.push_back(pred);
        }
        return out;
    }

    // Squared-error loss and gradient for the recursive AR forecaster.
    // Multi-step Jacobians d window / d theta are carried forward.
    void ar_eval(const ParameterVector& theta, std::span<const double> context,
                 std::span<const double> target, double* loss_out,
                 double* grad_out) const {
        const int p = ar_order_;
        const int horizon = static_cast<int>(target.size());
        if (horizon == 1) {
            // hot path: no recursion, no temporaries
            const double* w = context.data() + (context.size() - p);
            double pred = 0;
            for (int s = 0; s < p; ++s) pred += theta[s] * w[s];
            const double resid = pred - target[0];
            if (loss_out) *loss_out = resid * resid;
            if (grad_out)
                for (int s = 0; s < p; ++s) grad_out[s] += 2.0 * resid * w[s];
            return;
        }
        std::vector<double> window(context.end() - p, context.end());
        const bool multi_step = horizon > 1;
        std::vector<double> jac;  // row j = d window[j] / d theta
        if (multi_step && grad_out) jac.assign(static_cast<std::size_t>(p) * p, 0.0);
        std::vector<double> dpred(grad_out ? p : 0);

        double loss = 0;
        for (int h = 0; h < horizon; ++h) {
            double pred = 0;
            for (int s = 0; s < p; ++s) pred += theta[s] * window[s];
            const double resid = pred - target[h];
            loss += resid * resid;
            if (grad_out) {
                for (int s = 0; s < p; ++s) {
                    double d = window[s];
                    if (multi_step)
                        for (int j = 0; j < p; ++j)
                            d += theta[j] * jac[static_cast<std::size_t>(j) * p + s];
                    dpred[s] = d;
                    grad_out[s] += 2.0 * resid * d;
                }
            }
            if (h + 1 < horizon) {
                window.erase(window.begin());
                window.push_back(pred);
                if (grad_out && multi_step) {
                    // shift rows up, new last row = dpred
                    for (int j = 0; j + 1 < p; ++j)
                        for (int s = 0; s < p; ++s)
                            jac[static_cast<std::size_t>(j) * p + s] =
                                jac[static_cast<std::size_t>(j + 1) * p + s];
                    for (int s = 0; s < p; ++s)
                        jac[static_cast<std::size_t>(p - 1) * p + s] = dpred[s];
                }
            }
        }
        if (loss_out) *loss_out = loss;
    }

    std::vector<double> ff_predict(const ParameterVector& theta,
                                   std::span<const double> context) const {
        FfScratch& ws = scratch();
        ff_forward(theta, context, ws);
        const double* out = ws.acts.data() + act_offsets_.back();
        return {out, out + layout_.pred_len};
    }

    // Reusable per-thread buffers; gradient evaluation is allocation-free
    // after warm-up.
    struct FfScratch {
        std::vector<double> acts;
        std::vector<double> delta;
        std::vector<double> dprev;
    };

    static FfScratch& scratch() {
        thread_local FfScratch ws;
        return ws;
    }

    void ff_forward(const ParameterVector& theta, std::span<const double> context,
                    FfScratch& ws) const {
        if (ws.acts.size() < total_acts_) ws.acts.resize(total_acts_);
        double* acts = ws.acts.data();
        std::copy(context.begin(), context.end(), acts);
        const std::size_t layers = widths_.size();
        for (std::size_t l = 0; l + 1 < layers; ++l) {
            const int n_in = widths_[l], n_out = widths_[l + 1];
            const double* in = acts + act_offsets_[l];
            double* out = acts + act_offsets_[l + 1];
            const double* weight = theta.data() + param_offsets_[l];
            const double* bias = weight + static_cast<std::size_t>(n_out) * n_in;
            const bool is_hidden = l + 2 < layers;
            for (int r = 0; r < n_out; ++r) {
                double z = bias[r];
                const double* row = weight + static_cast<std::size_t>(r) * n_in;
                for (int c = 0; c < n_in; ++c) z += row[c] * in[c];
                out[r] = is_hidden ? std::tanh(z) : z;
            }
        }
    }

    void ff_eval(const ParameterVector& theta, std::span<const double> context,
                 std::span<const double> target, double* loss_out,
                 double* grad_out) const {
        FfScratch& ws = scratch();
        ff_forward(theta, context, ws);
        const double* acts = ws.acts.data();
        const double* out = acts + act_offsets_.back();
        const int horizon = layout_.pred_len;

        std::size_t max_w = 0;
        for (int w : widths_) max_w = std::max(max_w, static_cast<std::size_t>(w));
        if (ws.delta.size() < max_w) {
            ws.delta.resize(max_w);
            ws.dprev.resize(max_w);
        }
        double* delta = ws.delta.data();
        double* dprev = ws.dprev.data();

        double loss = 0;
        if (layout_.loss == LossKind::kMse) {
            for (int h = 0; h < horizon; ++h) {
                const double resid = out[h] - target[h];
                loss += resid * resid;
                delta[h] = 2.0 * resid;
            }
        } else {
            for (int h = 0; h < horizon; ++h) {
                const double mu = out[h];
                const double log_scale = out[horizon + h];
                const double inv_var = std::exp(-2.0 * log_scale);
                const double resid = target[h] - mu;
                loss += log_scale + 0.5 * resid * resid * inv_var +
                        0.5 * std::log(2.0 * std::numbers::pi);
                delta[h] = -resid * inv_var;
                delta[horizon + h] = 1.0 - resid * resid * inv_var;
            }
        }
        if (loss_out) *loss_out = loss;
        if (!grad_out) return;

        // Reverse pass through the linear layers and tanh activations.
        for (std::size_t l = widths_.size() - 1; l-- > 0;) {
            const int n_in = widths_[l], n_out = widths_[l + 1];
            const double* in = acts + act_offsets_[l];
            const double* weight = theta.data() + param_offsets_[l];
            double* gw = grad_out + param_offsets_[l];
            double* gb = gw + static_cast<std::size_t>(n_out) * n_in;
            for (int c = 0; c < n_in; ++c) dprev[c] = 0.0;
            for (int r = 0; r < n_out; ++r) {
                const double d = delta[r];
                gb[r] += d;
                const double* row = weight + static_cast<std::size_t>(r) * n_in;
                double* grow = gw + static_cast<std::size_t>(r) * n_in;
                for (int c = 0; c < n_in; ++c) {
                    grow[c] += d * in[c];
                    dprev[c] += d * row[c];
                }
            }
            if (l > 0) {
                // chain through tanh: a = tanh(z) => dz = (1 - a^2) da
                for (int c = 0; c < n_in; ++c) dprev[c] *= 1.0 - in[c] * in[c];
            }
            std::swap_ranges(dprev, dprev + n_in, delta);
        }
    }

    Kind kind_ = Kind::kAr;
    int ar_order_ = 1;
    int dim_ = 1;
    FeedforwardLayout layout_;
    std::vector<int> widths_;
    std::vector<std::size_t> act_offsets_;
    std::vector<std::size_t> param_offsets_;
    std::size_t total_acts_ = 0;
};

}  // namespace scott
