#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "scott/models.hpp"
#include "scott/oracle.hpp"
#include "scott/rng.hpp"
#include "scott/stratify.hpp"

namespace scott {

struct GradEstimate {
    std::vector<double> grad;
    long evals = 0;
};

/// I.i.d. uniform sampling with replacement over the whole example set.
class UniformSampler {
public:
    UniformSampler(std::size_t n_examples, int batch, Rng rng)
        : n_(n_examples), batch_(batch), rng_(rng.split(0)) {
        if (n_examples == 0) throw std::invalid_argument("uniform sampler: no examples");
        if (batch < 1) throw std::invalid_argument("uniform sampler: batch must be >= 1");
    }

    int batch() const { return batch_; }
    std::size_t universe() const { return n_; }

    std::size_t draw_one() { return rng_.next_below(n_); }

    std::vector<std::size_t> draw() {
        std::vector<std::size_t> idx(batch_);
        for (auto& i : idx) i = draw_one();
        return idx;
    }

private:
    std::size_t n_;
    int batch_;
    Rng rng_;
};

/// Independent uniform draws with replacement inside each stratum. Each
/// stratum owns a pre-split stream, so results do not depend on the order
/// strata are visited.
class StratifiedSampler {
public:
    StratifiedSampler(Stratification strat, int per_stratum, Rng rng)
        : strat_(std::move(strat)), per_stratum_(per_stratum) {
        if (per_stratum < 1)
            throw std::invalid_argument("stratified sampler: b must be >= 1");
        streams_.reserve(strat_.num_strata());
        for (std::size_t i = 0; i < strat_.num_strata(); ++i)
            streams_.push_back(rng.split(i));
    }

    const Stratification& stratification() const { return strat_; }
    int per_stratum() const { return per_stratum_; }
    long evals_per_draw() const {
        return static_cast<long>(strat_.num_strata()) * per_stratum_;
    }

    // b example indices from stratum i.
    void draw_stratum(std::size_t i, std::vector<std::size_t>& out) {
        out.clear();
        const auto& members = strat_.strata[i];
        for (int k = 0; k < per_stratum_; ++k)
            out.push_back(members[streams_[i].next_below(members.size())]);
    }

private:
    Stratification strat_;
    int per_stratum_;
    std::vector<Rng> streams_;
};

/// Mini-batch gradient: mean of M example gradients drawn by the sampler.
template <typename OracleT>
GradEstimate uniform_grad(UniformSampler& sampler, const OracleT& go,
                                 const TimeSeriesDataset& ds,
                                 const std::vector<TrainingExample>& examples,
                                 const ParameterVector& theta) {
    GradEstimate est;
    est.grad.assign(go.dim(), 0.0);
    for (int k = 0; k < sampler.batch(); ++k)
        go.grad_accumulate(theta, ds, examples[sampler.draw_one()], est.grad.data());
    const double inv = 1.0 / sampler.batch();
    for (double& v : est.grad) v *= inv;
    est.evals = sampler.batch();
    return est;
}

/// Stratified gradient: per-stratum mini-batch means combined with weights
/// w_i = |D_i|/|D|. Costs B*b gradient evaluations per call.
template <typename OracleT>
GradEstimate stratified_grad(StratifiedSampler& sampler, const OracleT& go,
                                    const TimeSeriesDataset& ds,
                                    const std::vector<TrainingExample>& examples,
                                    const ParameterVector& theta) {
    const auto& strat = sampler.stratification();
    const int d = go.dim();
    GradEstimate est;
    est.grad.assign(d, 0.0);
    std::vector<double> part(d);
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < strat.num_strata(); ++i) {
        std::fill(part.begin(), part.end(), 0.0);
        sampler.draw_stratum(i, picks);
        for (std::size_t idx : picks)
            go.grad_accumulate(theta, ds, examples[idx], part.data());
        const double scale = strat.weights[i] / sampler.per_stratum();
        for (int k = 0; k < d; ++k) est.grad[k] += scale * part[k];
    }
    est.evals = sampler.evals_per_draw();
    return est;
}

/// Per-stratum gradient variances and the aggregate sum w_i^2 sigma_i^2.
/// Variances are traces of covariance for a single draw (b = 1).
struct StratumVarianceReport {
    std::vector<double> per_stratum;
    double aggregate = 0;
};

/// Exact within-stratum variances by sweeping every member (b = 1 case).
template <typename OracleT>
StratumVarianceReport exact_stratum_variance(
    const Stratification& strat, const OracleT& go,
    const TimeSeriesDataset& ds, const std::vector<TrainingExample>& examples,
    const ParameterVector& theta) {
    StratumVarianceReport report;
    report.per_stratum.resize(strat.num_strata());
    const int d = go.dim();
    std::vector<double> g(d), mean(d);
    for (std::size_t i = 0; i < strat.num_strata(); ++i) {
        const auto& members = strat.strata[i];
        std::fill(mean.begin(), mean.end(), 0.0);
        double sumsq = 0;
        for (std::size_t idx : members) {
            std::fill(g.begin(), g.end(), 0.0);
            go.grad_accumulate(theta, ds, examples[idx], g.data());
            for (int k = 0; k < d; ++k) {
                mean[k] += g[k];
                sumsq += g[k] * g[k];
            }
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        double mean_norm_sq = 0;
        for (int k = 0; k < d; ++k) {
            mean[k] *= inv;
            mean_norm_sq += mean[k] * mean[k];
        }
        report.per_stratum[i] = std::max(0.0, sumsq * inv - mean_norm_sq);
        report.aggregate += strat.weights[i] * strat.weights[i] * report.per_stratum[i];
    }
    return report;
}

/// Monte Carlo estimate of the same quantities from n_samples single draws
/// per stratum.
template <typename OracleT>
StratumVarianceReport mc_stratum_variance(
    const Stratification& strat, const OracleT& go,
    const TimeSeriesDataset& ds, const std::vector<TrainingExample>& examples,
    const ParameterVector& theta, int n_samples, Rng rng) {
    if (n_samples < 2)
        throw std::invalid_argument("mc_stratum_variance: need n_samples >= 2");
    StratumVarianceReport report;
    report.per_stratum.resize(strat.num_strata());
    const int d = go.dim();
    std::vector<double> g(d), mean(d);
    for (std::size_t i = 0; i < strat.num_strata(); ++i) {
        Rng stream = rng.split(i);
        const auto& members = strat.strata[i];
        std::fill(mean.begin(), mean.end(), 0.0);
        double sumsq = 0;
        for (int s = 0; s < n_samples; ++s) {
            std::fill(g.begin(), g.end(), 0.0);
            std::size_t idx = members[stream.next_below(members.size())];
            go.grad_accumulate(theta, ds, examples[idx], g.data());
            for (int k = 0; k < d; ++k) {
                mean[k] += g[k];
                sumsq += g[k] * g[k];
            }
        }
        const double inv = 1.0 / n_samples;
        double mean_norm_sq = 0;
        for (int k = 0; k < d; ++k) {
            mean[k] *= inv;
            mean_norm_sq += mean[k] * mean[k];
        }
        report.per_stratum[i] = std::max(0.0, (sumsq * inv - mean_norm_sq) *
                                                  n_samples / (n_samples - 1.0));
        report.aggregate += strat.weights[i] * strat.weights[i] * report.per_stratum[i];
    }
    return report;
}

/// Empirical trace of covariance of a gradient estimator over n_trials
/// fresh draws at fixed theta. The sampler is taken by value: estimation
/// consumes its own copy of the stream.
template <typename Sampler, typename DrawFn>
inline double estimate_estimator_variance(Sampler sampler, int n_trials,
                                          DrawFn&& draw_fn, int dim) {
    if (n_trials < 2)
        throw std::invalid_argument("estimate_sampler_variance: need n_trials >= 2");
    std::vector<double> mean(dim, 0.0);
    double sumsq = 0;
    for (int t = 0; t < n_trials; ++t) {
        GradEstimate est = draw_fn(sampler);
        for (int k = 0; k < dim; ++k) {
            mean[k] += est.grad[k];
            sumsq += est.grad[k] * est.grad[k];
        }
    }
    const double inv = 1.0 / n_trials;
    double mean_norm_sq = 0;
    for (int k = 0; k < dim; ++k) {
        mean[k] *= inv;
        mean_norm_sq += mean[k] * mean[k];
    }
    return (sumsq * inv - mean_norm_sq) * n_trials / (n_trials - 1.0);
}

template <typename OracleT>
double estimate_sampler_variance(UniformSampler sampler, const OracleT& go,
                                        const TimeSeriesDataset& ds,
                                        const std::vector<TrainingExample>& examples,
                                        const ParameterVector& theta, int n_trials) {
    return estimate_estimator_variance(
        std::move(sampler), n_trials,
        [&](UniformSampler& s) { return uniform_grad(s, go, ds, examples, theta); },
        go.dim());
}

template <typename OracleT>
double estimate_sampler_variance(StratifiedSampler sampler, const OracleT& go,
                                        const TimeSeriesDataset& ds,
                                        const std::vector<TrainingExample>& examples,
                                        const ParameterVector& theta, int n_trials) {
    return estimate_estimator_variance(
        std::move(sampler), n_trials,
        [&](StratifiedSampler& s) { return stratified_grad(s, go, ds, examples, theta); },
        go.dim());
}

}  // namespace scott
