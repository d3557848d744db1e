#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "scott/models.hpp"
#include "scott/stratify.hpp"

// Brute-force verification toolkit: exhaustive full gradients, exact
// estimator moments by outcome enumeration, finite differences, and the
// closed-form sampling variance of the adversarial construction. Everything
// here is an independent route against which the samplers and optimizers
// are checked.
namespace scott::oracle {

/// Exact mean of per-example gradients over `examples`.
template <typename OracleT>
std::vector<double> full_gradient(const OracleT& go,
                                         const TimeSeriesDataset& ds,
                                         const std::vector<TrainingExample>& examples,
                                         const ParameterVector& theta) {
    if (examples.empty()) throw std::invalid_argument("full_gradient: no examples");
    std::vector<double> g(go.dim(), 0.0);
    for (const auto& ex : examples) go.grad_accumulate(theta, ds, ex, g.data());
    const double inv = 1.0 / static_cast<double>(examples.size());
    for (double& v : g) v *= inv;
    return g;
}

/// Exact first and second moments of a single-draw-per-stratum estimator.
/// `variance` is the trace of the estimator covariance.
struct EnumerationReport {
    std::vector<double> mean;
    double variance = 0;
    double outcome_count = 0;  // product of stratum sizes; may be huge
};

/// Exact moments of the stratified estimator at b = 1, computed stratum by
/// stratum and combined through independence:
///   mean = sum_i w_i * mean_i,   variance = sum_i w_i^2 * var_i.
template <typename OracleT>
EnumerationReport enumerate_stratified(const Stratification& strat,
                                       const OracleT& go,
                                              const TimeSeriesDataset& ds,
                                              const std::vector<TrainingExample>& examples,
                                              const ParameterVector& theta,
                                              int per_stratum_draws = 1) {
    if (per_stratum_draws != 1)
        throw std::invalid_argument("enumerate_stratified: only b = 1 is supported");
    const int d = go.dim();
    EnumerationReport report;
    report.mean.assign(d, 0.0);
    report.outcome_count = 1;
    std::vector<double> g(d), mean_i(d);
    for (std::size_t i = 0; i < strat.num_strata(); ++i) {
        const auto& members = strat.strata[i];
        const double w = strat.weights[i];
        std::fill(mean_i.begin(), mean_i.end(), 0.0);
        double sumsq = 0;
        for (std::size_t idx : members) {
            std::fill(g.begin(), g.end(), 0.0);
            go.grad_accumulate(theta, ds, examples[idx], g.data());
            for (int k = 0; k < d; ++k) {
                mean_i[k] += g[k];
                sumsq += g[k] * g[k];
            }
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        double mean_norm_sq = 0;
        for (int k = 0; k < d; ++k) {
            mean_i[k] *= inv;
            mean_norm_sq += mean_i[k] * mean_i[k];
            report.mean[k] += w * mean_i[k];
        }
        const double var_i = sumsq * inv - mean_norm_sq;
        report.variance += w * w * std::max(0.0, var_i);
        report.outcome_count *= static_cast<double>(members.size());
    }
    return report;
}

/// Exact moments of the stratified estimator at b = 1 by walking the full
/// cartesian product of per-stratum choices, with no independence shortcut.
/// Intended as the slow cross-check of enumerate_stratified; refuses
/// products above `max_outcomes`.
template <typename OracleT>
EnumerationReport enumerate_joint(const Stratification& strat,
                                  const OracleT& go,
                                         const TimeSeriesDataset& ds,
                                         const std::vector<TrainingExample>& examples,
                                         const ParameterVector& theta,
                                         std::uint64_t max_outcomes = 2'000'000) {
    const int d = go.dim();
    const std::size_t n_strata = strat.num_strata();
    std::uint64_t outcomes = 1;
    for (const auto& members : strat.strata) {
        if (outcomes > max_outcomes / members.size())
            throw std::invalid_argument("enumerate_joint: outcome product too large");
        outcomes *= members.size();
    }

    // Pre-compute weighted per-example gradients.
    std::vector<std::vector<std::vector<double>>> wg(n_strata);
    std::vector<double> g(d);
    for (std::size_t i = 0; i < n_strata; ++i) {
        wg[i].reserve(strat.strata[i].size());
        for (std::size_t idx : strat.strata[i]) {
            std::fill(g.begin(), g.end(), 0.0);
            go.grad_accumulate(theta, ds, examples[idx], g.data());
            for (double& v : g) v *= strat.weights[i];
            wg[i].push_back(g);
        }
    }

    std::vector<std::size_t> pick(n_strata, 0);
    std::vector<double> sum(d, 0.0), estimator(d);
    double second_moment = 0;
    const double prob = 1.0 / static_cast<double>(outcomes);
    for (std::uint64_t step = 0; step < outcomes; ++step) {
        std::fill(estimator.begin(), estimator.end(), 0.0);
        for (std::size_t i = 0; i < n_strata; ++i) {
            const auto& v = wg[i][pick[i]];
            for (int k = 0; k < d; ++k) estimator[k] += v[k];
        }
        double norm_sq = 0;
        for (int k = 0; k < d; ++k) {
            sum[k] += estimator[k];
            norm_sq += estimator[k] * estimator[k];
        }
        second_moment += norm_sq;
        // odometer over per-stratum choices
        for (std::size_t i = 0; i < n_strata; ++i) {
            if (++pick[i] < wg[i].size()) break;
            pick[i] = 0;
        }
    }

    EnumerationReport report;
    report.outcome_count = static_cast<double>(outcomes);
    report.mean.assign(d, 0.0);
    double mean_norm_sq = 0;
    for (int k = 0; k < d; ++k) {
        report.mean[k] = sum[k] * prob;
        mean_norm_sq += report.mean[k] * report.mean[k];
    }
    report.variance = second_moment * prob - mean_norm_sq;
    return report;
}

/// Closed-form variance (trace of covariance) of a single uniformly sampled
/// example gradient at theta = 0 on gen_adversarial(p, delta, 0).
///
/// Derived from the construction's per-series gradients with pbar = p/2:
///   series 1:            -delta^2/2 in coordinate 1
///   series 2..pbar:      zero
///   series pbar+1..2pbar: -delta^2/2 in coordinates pbar+1..p
/// so the full gradient is [-delta^2/(4 pbar), 0 x (pbar-1),
/// -delta^2/4 x (p-pbar)] and
///   Var = (1/2pbar) * [((2pbar-1)/(4pbar))^2 + (p-pbar)/16] * delta^4
///       + ((2pbar-1)/2pbar) * [1/(16 pbar^2) + (p-pbar)/16] * delta^4.
inline double adversarial_variance(int p, double delta, double c = 0.0) {
    if (p < 2) throw std::invalid_argument("adversarial_variance: p must be >= 2");
    if (c != 0.0)
        throw std::invalid_argument("adversarial_variance: only c = 0 is supported");
    const double pbar = static_cast<double>(p / 2);
    const double tail = static_cast<double>(p - p / 2);
    const double d4 = delta * delta * delta * delta;
    const double lead = (2.0 * pbar - 1.0) / (4.0 * pbar);
    const double dev_first = lead * lead + tail / 16.0;
    const double dev_rest = 1.0 / (16.0 * pbar * pbar) + tail / 16.0;
    return d4 * (dev_first / (2.0 * pbar) +
                 dev_rest * (2.0 * pbar - 1.0) / (2.0 * pbar));
}

/// Central finite differences, one coordinate at a time.
inline std::vector<double> finite_diff_grad(
    const std::function<double(const ParameterVector&)>& loss_fn,
    const ParameterVector& theta, double h) {
    if (h <= 0) throw std::invalid_argument("finite_diff_grad: h must be > 0");
    ParameterVector probe = theta;
    std::vector<double> g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double up = loss_fn(probe);
        probe[i] = saved - h;
        const double down = loss_fn(probe);
        probe[i] = saved;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace scott::oracle
