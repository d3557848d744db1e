#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "scott/dataset.hpp"
#include "scott/models.hpp"
#include "scott/optim.hpp"
#include "scott/oracle.hpp"
#include "scott/samplers.hpp"
#include "scott/stratify.hpp"

// Self-checks behind the `verify` CLI subcommand: the estimators, the
// brute-force enumeration routes and the closed forms are played against
// each other on small instances where everything is exactly computable.
namespace scott::verify {

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

struct SmallInstance {
    TimeSeriesDataset ds;
    std::vector<TrainingExample> examples;
    Stratification strat;
    ParameterVector theta;
};

// Random <= 20-example AR(2) instance with a random partition whose joint
// outcome product stays enumerable.
inline SmallInstance random_instance(Rng& rng) {
    SmallInstance inst;
    inst.ds.context_len = 2;
    inst.ds.pred_len = 1;
    inst.ds.stride = 1;
    const int n_series = 1 + static_cast<int>(rng.next_below(3));
    for (int s = 0; s < n_series; ++s) {
        const int len = 4 + static_cast<int>(rng.next_below(8));
        std::vector<double> z(len);
        for (double& v : z) v = 4.0 * rng.next_double() - 2.0;
        inst.ds.series.push_back(std::move(z));
    }
    inst.examples = extract_examples(inst.ds);
    if (inst.examples.size() > 20) inst.examples.resize(20);

    for (;;) {
        const int b = 1 + static_cast<int>(rng.next_below(
                              std::min<std::size_t>(inst.examples.size(), 6)));
        std::vector<std::vector<std::size_t>> strata(b);
        for (std::size_t i = 0; i < inst.examples.size(); ++i)
            strata[rng.next_below(b)].push_back(i);
        std::vector<std::vector<std::size_t>> nonempty;
        for (auto& s : strata)
            if (!s.empty()) nonempty.push_back(std::move(s));
        double product = 1;
        for (const auto& s : nonempty) product *= static_cast<double>(s.size());
        if (product > 200000.0) continue;
        Stratification st;
        st.strata = std::move(nonempty);
        st.weights.resize(st.strata.size());
        for (std::size_t i = 0; i < st.strata.size(); ++i)
            st.weights[i] = static_cast<double>(st.strata[i].size()) /
                            static_cast<double>(inst.examples.size());
        inst.strat = std::move(st);
        break;
    }
    inst.theta = {2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0};
    return inst;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace detail

/// Unbiasedness and the variance identity of the stratified estimator,
/// checked by exhaustive joint enumeration on randomized small instances.
inline Check check_stratified_moments(int n_instances = 20) {
    Rng rng(20240915);
    const GradientOracle go = GradientOracle::ar(2);
    double worst_mean = 0, worst_var = 0;
    for (int i = 0; i < n_instances; ++i) {
        auto inst = detail::random_instance(rng);
        const auto full = oracle::full_gradient(go, inst.ds, inst.examples, inst.theta);
        const auto joint = oracle::enumerate_joint(inst.strat, go, inst.ds,
                                                   inst.examples, inst.theta);
        const auto fast = oracle::enumerate_stratified(inst.strat, go, inst.ds,
                                                       inst.examples, inst.theta);
        for (std::size_t k = 0; k < full.size(); ++k)
            worst_mean = std::max(worst_mean, std::abs(joint.mean[k] - full[k]));
        worst_var = std::max(worst_var, std::abs(joint.variance - fast.variance));
    }
    Check c;
    c.name = "stratified estimator: exact mean = full gradient, joint variance = sum w_i^2 var_i";
    c.pass = worst_mean <= 1e-12 && worst_var <= 1e-10;
    c.detail = "max mean gap " + detail::fmt(worst_mean) + ", max variance gap " +
               detail::fmt(worst_var);
    return c;
}

/// Anchor error bound E||g - grad f||^2 <= sum w_i^2 sigma_i^2, by
/// enumeration (the two sides are equal for independent per-stratum draws).
inline Check check_anchor_bound(int n_instances = 20) {
    Rng rng(777001);
    const GradientOracle go = GradientOracle::ar(2);
    double worst = -1e300;
    for (int i = 0; i < n_instances; ++i) {
        auto inst = detail::random_instance(rng);
        const auto joint = oracle::enumerate_joint(inst.strat, go, inst.ds,
                                                   inst.examples, inst.theta);
        const auto svar = exact_stratum_variance(inst.strat, go, inst.ds,
                                                 inst.examples, inst.theta);
        // E||g - grad f||^2 = Var[g] since the estimator is unbiased.
        worst = std::max(worst, joint.variance - (svar.aggregate + 1e-10));
    }
    Check c;
    c.name = "anchor error: E||g - grad f||^2 <= sum w_i^2 sigma_i^2";
    c.pass = worst <= 0;
    c.detail = "max slack violation " + detail::fmt(worst);
    return c;
}

/// Adversarial construction: closed-form full gradient and closed-form
/// single-draw variance against direct computation.
inline Check check_adversarial_construction() {
    Check c;
    c.name = "adversarial dataset: closed-form gradient and sampling variance";
    c.pass = true;
    double worst = 0;
    for (int p : {2, 4, 6, 8}) {
        for (double delta : {0.5, 1.0}) {
            const auto ds = gen_adversarial(p, delta, 0.0);
            const auto examples = extract_examples(ds);
            const GradientOracle go = GradientOracle::ar(p);
            const ParameterVector theta(p, 0.0);
            const auto full = oracle::full_gradient(go, ds, examples, theta);
            const int pbar = p / 2;
            const double d2 = delta * delta;
            for (int k = 0; k < p; ++k) {
                const double want = k == 0 ? -d2 / (4.0 * pbar)
                                  : k < pbar ? 0.0
                                             : -d2 / 4.0;
                worst = std::max(worst, std::abs(full[k] - want));
            }
            const auto single = stratify_mod_timestamp(examples, 1);
            const auto joint = oracle::enumerate_joint(single, go, ds, examples, theta);
            worst = std::max(worst,
                             std::abs(joint.variance - oracle::adversarial_variance(p, delta)));
        }
    }
    c.pass = worst <= 1e-10;
    c.detail = "max deviation " + detail::fmt(worst);
    return c;
}

/// Analytic gradients against central finite differences.
inline Check check_gradients(int points_per_kind = 20) {
    Rng rng(5150);
    Check c;
    c.name = "analytic gradients = central finite differences (rel 1e-5)";
    double worst = 0;

    auto probe = [&](const GradientOracle& go, const TimeSeriesDataset& ds) {
        const auto examples = extract_examples(ds);
        for (int i = 0; i < points_per_kind; ++i) {
            ParameterVector theta(go.dim());
            for (double& v : theta) v = 2.0 * rng.next_double() - 1.0;
            const auto& ex = examples[rng.next_below(examples.size())];
            const auto g = go.grad(theta, ds, ex);
            const auto fd = oracle::finite_diff_grad(
                [&](const ParameterVector& t) { return go.loss(t, ds, ex); }, theta, 1e-5);
            for (std::size_t k = 0; k < g.size(); ++k) {
                const double scale = std::max({1.0, std::abs(g[k]), std::abs(fd[k])});
                worst = std::max(worst, std::abs(g[k] - fd[k]) / scale);
            }
        }
    };

    {
        TimeSeriesDataset ds;
        ds.context_len = 3;
        ds.pred_len = 2;
        ds.stride = 1;
        Rng data(99);
        std::vector<double> z(40);
        for (double& v : z) v = 2.0 * data.next_double() - 1.0;
        ds.series.push_back(std::move(z));
        probe(GradientOracle::ar(3), ds);
    }
    for (LossKind loss : {LossKind::kMse, LossKind::kGaussianNll}) {
        TimeSeriesDataset ds;
        ds.context_len = 6;
        ds.pred_len = 2;
        ds.stride = 1;
        Rng data(7);
        std::vector<double> z(30);
        for (double& v : z) v = 2.0 * data.next_double() - 1.0;
        ds.series.push_back(std::move(z));
        FeedforwardLayout layout;
        layout.input = 6;
        layout.hidden = {5, 4};
        layout.pred_len = 2;
        layout.loss = loss;
        probe(GradientOracle::feedforward(layout), ds);
    }
    c.pass = worst <= 1e-5;
    c.detail = "max relative error " + detail::fmt(worst);
    return c;
}

/// Empirical mean of the geometric inner-loop length against E[K] = B.
inline Check check_geometric_inner_length(int n_draws = 100000) {
    Check c;
    c.name = "inner-loop length: empirical mean of Geo(B/(B+1)) within 5% of B";
    c.pass = true;
    std::string detail_s;
    for (int b : {1, 4, 16}) {
        Rng rng(1234 + b);
        double sum = 0;
        for (int i = 0; i < n_draws; ++i)
            sum += static_cast<double>(sample_inner_length(b, rng));
        const double mean = sum / n_draws;
        if (std::abs(mean - b) > 0.05 * b) c.pass = false;
        detail_s += "B=" + std::to_string(b) + ": " + detail::fmt(mean) + "  ";
    }
    c.detail = detail_s;
    return c;
}

/// With finest-grained strata the anchor is the exact full gradient at
/// every outer loop.
inline Check check_finest_anchor(int outer_loops = 50) {
    const auto ds = gen_heterogeneity_toy(2.0, 6);
    const auto examples = extract_examples(ds);
    const GradientOracle go = GradientOracle::ar(1);
    const auto strat = stratify_finest(examples.size());

    double worst = 0;
    long outers_seen = 0;
    OuterHookFn hook = [&](long, const ParameterVector& theta0,
                           const std::vector<double>& anchor, long) {
        const auto full = oracle::full_gradient(go, ds, examples, theta0);
        double err = 0;
        for (std::size_t k = 0; k < full.size(); ++k)
            err += (anchor[k] - full[k]) * (anchor[k] - full[k]);
        worst = std::max(worst, std::sqrt(err));
        ++outers_seen;
    };

    Rng rng(42);
    const long per_outer =
        static_cast<long>(examples.size()) + 2L * 8;  // anchor + likely inner work
    scott_run(go, ds, examples, StratifiedSampler(strat, 1, rng.split(1)),
              UniformSampler(examples.size(), 1, rng.split(2)), ParameterVector{0.0},
              constant_alpha(0.002), InnerMode::fixed(4), per_outer * outer_loops,
              rng.split(3), nullptr, hook);

    Check c;
    c.name = "finest-grained strata: anchor = exact full gradient every outer loop";
    c.pass = outers_seen >= outer_loops && worst <= 1e-12;
    c.detail = std::to_string(outers_seen) + " outer loops, max ||gap|| " +
               detail::fmt(worst);
    return c;
}

inline std::vector<Check> run_all() {
    return {check_stratified_moments(), check_anchor_bound(),
            check_adversarial_construction(), check_gradients(),
            check_geometric_inner_length(), check_finest_anchor()};
}

}  // namespace scott::verify
