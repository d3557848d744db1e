#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "scott/models.hpp"
#include "scott/samplers.hpp"

namespace scott {

using AlphaSchedule = std::function<double(long)>;

inline AlphaSchedule constant_alpha(double alpha) {
    return [alpha](long) { return alpha; };
}

/// How many control-variate steps to take between anchor refreshes.
struct InnerMode {
    enum class Kind { kGeometric, kFixed, kEarlyStop };
    Kind kind = Kind::kGeometric;
    long fixed_k = 1;       // kFixed
    double gamma = 0.125;   // kEarlyStop threshold on ||v||^2 / ||v0||^2
    long k_max = 0;         // kEarlyStop cap; 0 means 10 * B

    static InnerMode geometric() { return {}; }
    static InnerMode fixed(long k) {
        InnerMode m;
        m.kind = Kind::kFixed;
        m.fixed_k = k;
        return m;
    }
    static InnerMode early_stop(double gamma, long k_max = 0) {
        InnerMode m;
        m.kind = Kind::kEarlyStop;
        m.gamma = gamma;
        m.k_max = k_max;
        return m;
    }
};

/// Draw of the inner-loop length K ~ Geo(B/(B+1)), P(K = k) = p^k (1-p),
/// k = 0, 1, ...; expectation B.
inline long sample_inner_length(int n_strata, Rng& rng) {
    if (n_strata < 1) throw std::invalid_argument("sample_inner_length: B must be >= 1");
    const double p = static_cast<double>(n_strata) / (n_strata + 1.0);
    const double u = rng.next_double_pos();
    return static_cast<long>(std::floor(std::log(u) / std::log(p)));
}

// Called after every atomic unit of work (one mini-batch step or one
// anchor): (gradient evals so far, outer iteration, current iterate).
using ProgressFn = std::function<void(long, long, const ParameterVector&)>;

// Called once per outer loop right after the anchor is computed:
// (t, theta at anchor, anchor gradient, evals so far).
using OuterHookFn =
    std::function<void(long, const ParameterVector&, const std::vector<double>&, long)>;

struct OptimResult {
    ParameterVector final_params;
    long evals = 0;
    long outer_loops = 0;
    bool diverged = false;
    std::vector<std::string> warnings;
    // theta^(t,0) and alpha_t per outer loop, for output selection.
    std::vector<ParameterVector> outer_iterates;
    std::vector<double> outer_alphas;
};

namespace detail {

inline bool all_finite(const ParameterVector& theta) {
    for (double v : theta)
        if (!std::isfinite(v)) return false;
    return true;
}

// Mean gradient of a fixed index batch; writes into out.
template <typename OracleT>
void batch_grad(const OracleT& go, const TimeSeriesDataset& ds,
                       const std::vector<TrainingExample>& examples,
                       const std::vector<std::size_t>& batch,
                       const ParameterVector& theta, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t idx : batch) go.grad_accumulate(theta, ds, examples[idx], out.data());
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& v : out) v *= inv;
}

// Plain, Adam and Adagrad parameter updates over a shared direction.
struct SgdRule {
    void apply(ParameterVector& theta, const std::vector<double>& v, double alpha) {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= alpha * v[i];
    }
};

struct AdamRule {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m, s;
    long step = 0;

    void reset_state() {
        m.clear();
        s.clear();
        step = 0;
    }

    void apply(ParameterVector& theta, const std::vector<double>& v, double alpha) {
        if (m.empty()) {
            m.assign(theta.size(), 0.0);
            s.assign(theta.size(), 0.0);
        }
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * v[i];
            s[i] = beta2 * s[i] + (1.0 - beta2) * v[i] * v[i];
            const double mhat = m[i] / c1;
            const double shat = s[i] / c2;
            theta[i] -= alpha * mhat / (std::sqrt(shat) + eps);
        }
    }
};

struct AdagradRule {
    double eps = 1e-10;
    std::vector<double> accum;

    void reset_state() { accum.clear(); }

    void apply(ParameterVector& theta, const std::vector<double>& v, double alpha) {
        if (accum.empty()) accum.assign(theta.size(), 0.0);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            accum[i] += v[i] * v[i];
            theta[i] -= alpha * v[i] / (std::sqrt(accum[i]) + eps);
        }
    }
};

// One-sampler loop: theta <- rule(theta, mini-batch gradient).
template <typename OracleT, typename Rule>
OptimResult plain_core(const OracleT& go, const TimeSeriesDataset& ds,
                       const std::vector<TrainingExample>& examples,
                       UniformSampler sampler, Rule rule, ParameterVector theta,
                       const AlphaSchedule& alpha, long budget,
                       const ProgressFn& progress) {
    const long step_cost = sampler.batch();
    if (budget < step_cost)
        throw std::invalid_argument("budget smaller than one mini-batch");
    OptimResult res;
    std::vector<double> g(go.dim());
    std::vector<std::size_t> batch(sampler.batch());
    long step = 0;
    while (res.evals + step_cost <= budget) {
        for (auto& idx : batch) idx = sampler.draw_one();
        batch_grad(go, ds, examples, batch, theta, g);
        res.evals += step_cost;
        rule.apply(theta, g, alpha(step));
        ++step;
        if (!all_finite(theta)) {
            res.diverged = true;
            break;
        }
        if (progress) progress(res.evals, step, theta);
    }
    res.outer_loops = step;
    res.final_params = std::move(theta);
    return res;
}

// Anchored control-variate loop shared by the stratified optimizer family.
// Per outer loop: one stratified anchor (B*b evals), then K inner steps,
// each recomputing the fresh mini-batch gradient at both the current and
// the anchor iterate (2*M evals). The direction is
//   v = grad_batch(theta) - grad_batch(theta_anchor) + anchor.
template <typename OracleT, typename Rule>
OptimResult anchored_core(const OracleT& go, const TimeSeriesDataset& ds,
                          const std::vector<TrainingExample>& examples,
                          StratifiedSampler strat_sampler, UniformSampler uniform_sampler,
                          Rule rule, ParameterVector theta, const AlphaSchedule& alpha,
                          InnerMode mode, long budget, const ProgressFn& progress,
                          const OuterHookFn& outer_hook, bool record_outer,
                          Rng opt_rng, bool reset_moments_per_outer = false) {
    const long anchor_cost = strat_sampler.evals_per_draw();
    const long step_cost = 2L * uniform_sampler.batch();
    if (budget < anchor_cost)
        throw std::invalid_argument("budget smaller than one stratified anchor");
    const int n_strata = static_cast<int>(strat_sampler.stratification().num_strata());

    OptimResult res;
    if (mode.kind == InnerMode::Kind::kEarlyStop) {
        if (mode.gamma <= 0)
            throw std::invalid_argument("early stopping needs gamma > 0");
        if (mode.gamma >= 1.0)
            res.warnings.push_back(
                "gamma >= 1: early stopping fires after the first inner step");
        if (mode.k_max == 0) mode.k_max = 10L * n_strata;
    }

    Rng k_rng = opt_rng.split(1);
    std::vector<double> g_now(go.dim()), g_snap(go.dim()), v(go.dim());
    std::vector<std::size_t> batch(uniform_sampler.batch());

    for (long t = 0;; ++t) {
        if (res.evals + anchor_cost > budget) break;
        if constexpr (std::is_same_v<Rule, AdamRule> || std::is_same_v<Rule, AdagradRule>) {
            if (reset_moments_per_outer) rule.reset_state();
        }
        GradEstimate anchor = stratified_grad(strat_sampler, go, ds, examples, theta);
        res.evals += anchor.evals;
        res.outer_loops = t + 1;
        if (record_outer) {
            res.outer_iterates.push_back(theta);
            res.outer_alphas.push_back(alpha(t));
        }
        if (outer_hook) outer_hook(t, theta, anchor.grad, res.evals);
        if (progress) progress(res.evals, t, theta);

        const ParameterVector theta_anchor = theta;
        long k_target = 0;
        switch (mode.kind) {
            case InnerMode::Kind::kGeometric:
                k_target = sample_inner_length(n_strata, k_rng);
                break;
            case InnerMode::Kind::kFixed:
                k_target = mode.fixed_k;
                break;
            case InnerMode::Kind::kEarlyStop:
                k_target = mode.k_max;
                break;
        }

        double v0_norm_sq = -1;
        for (long k = 0; k < k_target; ++k) {
            if (res.evals + step_cost > budget) {
                res.final_params = std::move(theta);
                return res;
            }
            for (auto& idx : batch) idx = uniform_sampler.draw_one();
            batch_grad(go, ds, examples, batch, theta, g_now);
            batch_grad(go, ds, examples, batch, theta_anchor, g_snap);
            res.evals += step_cost;
            double norm_sq = 0;
            for (int i = 0; i < go.dim(); ++i) {
                v[i] = g_now[i] - g_snap[i] + anchor.grad[i];
                norm_sq += v[i] * v[i];
            }
            rule.apply(theta, v, alpha(t));
            if (!all_finite(theta)) {
                res.diverged = true;
                res.final_params = std::move(theta);
                return res;
            }
            if (progress) progress(res.evals, t, theta);
            if (mode.kind == InnerMode::Kind::kEarlyStop) {
                if (k == 0) v0_norm_sq = norm_sq;
                if (norm_sq <= mode.gamma * v0_norm_sq) break;
            }
        }
    }
    res.final_params = std::move(theta);
    return res;
}

}  // namespace detail

/// Plain mini-batch SGD to the gradient-evaluation budget.
template <typename OracleT>
OptimResult sgd_run(const OracleT& go, const TimeSeriesDataset& ds,
                           const std::vector<TrainingExample>& examples,
                           UniformSampler sampler, ParameterVector theta0,
                           const AlphaSchedule& alpha, long budget,
                           const ProgressFn& progress = nullptr) {
    return detail::plain_core(go, ds, examples, std::move(sampler), detail::SgdRule{},
                              std::move(theta0), alpha, budget, progress);
}

template <typename OracleT>
OptimResult adam_run(const OracleT& go, const TimeSeriesDataset& ds,
                            const std::vector<TrainingExample>& examples,
                            UniformSampler sampler, ParameterVector theta0,
                            const AlphaSchedule& alpha, double beta1, double beta2,
                            long budget, const ProgressFn& progress = nullptr,
                            double eps = 1e-8) {
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
        throw std::invalid_argument("adam: need 0 <= beta < 1");
    detail::AdamRule rule;
    rule.beta1 = beta1;
    rule.beta2 = beta2;
    rule.eps = eps;
    return detail::plain_core(go, ds, examples, std::move(sampler), std::move(rule),
                              std::move(theta0), alpha, budget, progress);
}

template <typename OracleT>
OptimResult adagrad_run(const OracleT& go, const TimeSeriesDataset& ds,
                               const std::vector<TrainingExample>& examples,
                               UniformSampler sampler, ParameterVector theta0,
                               const AlphaSchedule& alpha, long budget,
                               const ProgressFn& progress = nullptr,
                               double eps = 1e-10) {
    return detail::plain_core(go, ds, examples, std::move(sampler), detail::AdagradRule{eps},
                              std::move(theta0), alpha, budget, progress);
}

/// Stratified control-variate gradient descent. Anchors are stratified
/// gradients refreshed once per outer loop; inner steps recenter fresh
/// mini-batch gradients around the anchor.
template <typename OracleT>
OptimResult scott_run(const OracleT& go, const TimeSeriesDataset& ds,
                             const std::vector<TrainingExample>& examples,
                             StratifiedSampler strat_sampler, UniformSampler uniform_sampler,
                             ParameterVector theta0, const AlphaSchedule& alpha,
                             InnerMode mode, long budget, Rng opt_rng,
                             const ProgressFn& progress = nullptr,
                             const OuterHookFn& outer_hook = nullptr,
                             bool record_outer = false) {
    return detail::anchored_core(go, ds, examples, std::move(strat_sampler),
                                 std::move(uniform_sampler), detail::SgdRule{},
                                 std::move(theta0), alpha, mode, budget, progress,
                                 outer_hook, record_outer, opt_rng);
}

/// Same control-variate direction as scott_run with the Adam update rule.
/// Moment state persists across outer loops unless reset_moments_per_outer.
template <typename OracleT>
OptimResult s_adam_run(const OracleT& go, const TimeSeriesDataset& ds,
                              const std::vector<TrainingExample>& examples,
                              StratifiedSampler strat_sampler, UniformSampler uniform_sampler,
                              ParameterVector theta0, const AlphaSchedule& alpha,
                              double beta1, double beta2, InnerMode mode, long budget,
                              Rng opt_rng, const ProgressFn& progress = nullptr,
                              const OuterHookFn& outer_hook = nullptr,
                              bool record_outer = false, double eps = 1e-8,
                              bool reset_moments_per_outer = false) {
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
        throw std::invalid_argument("s-adam: need 0 <= beta < 1");
    detail::AdamRule rule;
    rule.beta1 = beta1;
    rule.beta2 = beta2;
    rule.eps = eps;
    return detail::anchored_core(go, ds, examples, std::move(strat_sampler),
                                 std::move(uniform_sampler), std::move(rule),
                                 std::move(theta0), alpha, mode, budget, progress,
                                 outer_hook, record_outer, opt_rng,
                                 reset_moments_per_outer);
}

template <typename OracleT>
OptimResult s_adagrad_run(const OracleT& go, const TimeSeriesDataset& ds,
                                 const std::vector<TrainingExample>& examples,
                                 StratifiedSampler strat_sampler,
                                 UniformSampler uniform_sampler, ParameterVector theta0,
                                 const AlphaSchedule& alpha, InnerMode mode, long budget,
                                 Rng opt_rng, const ProgressFn& progress = nullptr,
                                 const OuterHookFn& outer_hook = nullptr,
                                 bool record_outer = false, double eps = 1e-10,
                                 bool reset_moments_per_outer = false) {
    return detail::anchored_core(go, ds, examples, std::move(strat_sampler),
                                 std::move(uniform_sampler), detail::AdagradRule{eps},
                                 std::move(theta0), alpha, mode, budget, progress,
                                 outer_hook, record_outer, opt_rng,
                                 reset_moments_per_outer);
}

/// Samples one outer iterate with probability proportional to alpha_t * B.
inline ParameterVector select_output(const std::vector<ParameterVector>& outer_iterates,
                                     const std::vector<double>& outer_alphas,
                                     int n_strata, Rng& rng) {
    if (outer_iterates.empty())
        throw std::invalid_argument("select_output: no outer iterates");
    if (outer_alphas.size() != outer_iterates.size())
        throw std::invalid_argument("select_output: alpha count mismatch");
    double total = 0;
    for (double a : outer_alphas) total += a * n_strata;
    if (total <= 0) throw std::invalid_argument("select_output: weights must be positive");
    const double u = rng.next_double() * total;
    double acc = 0;
    for (std::size_t t = 0; t < outer_iterates.size(); ++t) {
        acc += outer_alphas[t] * n_strata;
        if (u < acc) return outer_iterates[t];
    }
    return outer_iterates.back();
}

}  // namespace scott
