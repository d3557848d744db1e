#include <catch2/catch.hpp>

#include <cmath>

#include "scott/dataset.hpp"
#include "scott/models.hpp"
#include "scott/optim.hpp"
#include "scott/oracle.hpp"

using namespace scott;

namespace {

// Oracle wrapper counting gradient evaluations, for checking the
// optimizers' own accounting against reality.
struct CountingOracle {
    const GradientOracle* inner;
    mutable long grad_calls = 0;

    int dim() const { return inner->dim(); }
    double grad_accumulate(const ParameterVector& theta, const TimeSeriesDataset& ds,
                           const TrainingExample& ex, double* out) const {
        ++grad_calls;
        return inner->grad_accumulate(theta, ds, ex, out);
    }
    std::vector<double> grad(const ParameterVector& theta, const TimeSeriesDataset& ds,
                             const TrainingExample& ex) const {
        ++grad_calls;
        return inner->grad(theta, ds, ex);
    }
    double loss(const ParameterVector& theta, const TimeSeriesDataset& ds,
                const TrainingExample& ex) const {
        return inner->loss(theta, ds, ex);
    }
};

// single quadratic example: context 1.0, target a => loss (theta - a)^2
TimeSeriesDataset quadratic_ds(double a) {
    TimeSeriesDataset ds;
    ds.context_len = 1;
    ds.pred_len = 1;
    ds.stride = 1;
    ds.series = {{1.0, a}};
    return ds;
}

}  // namespace

TEST_CASE("geometric inner-loop length", "[optim]") {
    SECTION("B = 1: P(K=0) = 1/2, P(K=1) = 1/4") {
        Rng rng(100);
        const int n = 200000;
        int zeros = 0, ones = 0;
        for (int i = 0; i < n; ++i) {
            const long k = sample_inner_length(1, rng);
            zeros += k == 0;
            ones += k == 1;
        }
        REQUIRE(std::abs(zeros / double(n) - 0.5) < 0.005);
        REQUIRE(std::abs(ones / double(n) - 0.25) < 0.005);
    }
    SECTION("empirical mean tracks B") {
        for (int b : {1, 4, 16}) {
            Rng rng(200 + b);
            double sum = 0;
            const int n = 100000;
            for (int i = 0; i < n; ++i) sum += sample_inner_length(b, rng);
            REQUIRE(std::abs(sum / n - b) < 0.05 * b);
        }
    }
    SECTION("K = 0 occurs and the optimizer survives it") {
        // B = 1 gives K = 0 half the time; anchors must still be recomputed
        const auto ds = gen_heterogeneity_toy(1.0, 2);
        const auto ex = extract_examples(ds);
        const auto go = GradientOracle::ar(1);
        Rng rng(5);
        const auto res = scott_run(go, ds, ex,
                                   StratifiedSampler(stratify_mod_timestamp(ex, 1), 1, rng.split(0)),
                                   UniformSampler(ex.size(), 1, rng.split(1)),
                                   {0.0}, constant_alpha(0.01), InnerMode::geometric(),
                                   200, rng.split(2));
        REQUIRE(res.outer_loops > 20);  // many outer loops -> several K=0 draws
        REQUIRE(res.evals <= 200);
    }
}

TEST_CASE("sgd on a quadratic", "[optim]") {
    const auto ds = quadratic_ds(3.0);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);

    SECTION("small steps converge monotonically toward the optimum") {
        std::vector<double> path;
        sgd_run(go, ds, ex, UniformSampler(ex.size(), 1, Rng(1)), {0.0},
                constant_alpha(0.1), 60,
                [&](long, long, const ParameterVector& t) { path.push_back(t[0]); });
        for (std::size_t i = 1; i < path.size(); ++i) {
            REQUIRE(path[i] >= path[i - 1]);  // approaches 3 from below
            REQUIRE(path[i] <= 3.0);
        }
        REQUIRE(path.back() == Approx(3.0).epsilon(1e-5));
    }
    SECTION("alpha = 0 leaves parameters untouched") {
        const auto res = sgd_run(go, ds, ex, UniformSampler(ex.size(), 1, Rng(1)),
                                 {0.5}, constant_alpha(0.0), 25);
        REQUIRE(res.final_params == ParameterVector{0.5});
    }
}

TEST_CASE("sgd oscillates on the heterogeneous toy at large steps", "[optim]") {
    const auto ds = gen_heterogeneity_toy(8.0, 8);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);

    auto train_loss = [&](const ParameterVector& theta) {
        double total = 0;
        for (const auto& e : ex) total += go.loss(theta, ds, e);
        return total / static_cast<double>(ex.size());
    };

    std::vector<double> losses;
    sgd_run(go, ds, ex, UniformSampler(ex.size(), 1, Rng(3)), {0.0},
            constant_alpha(0.012), 600,
            [&](long, long, const ParameterVector& t) { losses.push_back(train_loss(t)); });
    int increases = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) increases += losses[i] > losses[i - 1];
    REQUIRE(increases >= static_cast<int>(losses.size()) / 10);
}

TEST_CASE("divergence aborts with partial state", "[optim]") {
    const auto ds = quadratic_ds(3.0);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);
    // alpha far above 2/L on a curvature-2 quadratic: |theta| blows up
    const auto res = sgd_run(go, ds, ex, UniformSampler(ex.size(), 1, Rng(1)), {0.0},
                             constant_alpha(1e6), 100000);
    REQUIRE(res.diverged);
    REQUIRE(res.evals < 100000);
}

TEST_CASE("control-variate step equals the anchor on the first inner step", "[optim]") {
    const auto ds = gen_heterogeneity_toy(2.0, 4);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);

    std::vector<double> anchor_seen;
    std::vector<ParameterVector> iterates;
    Rng rng(17);
    const double alpha = 0.005;
    scott_run(go, ds, ex,
              StratifiedSampler(stratify_mod_timestamp(ex, 2), 1, rng.split(0)),
              UniformSampler(ex.size(), 2, rng.split(1)), {0.0}, constant_alpha(alpha),
              InnerMode::fixed(3), 80, rng.split(2),
              [&](long, long, const ParameterVector& t) { iterates.push_back(t); },
              [&](long, const ParameterVector&, const std::vector<double>& anchor, long) {
                  anchor_seen.push_back(anchor[0]);
              });

    REQUIRE(!anchor_seen.empty());
    // iterates[0] is theta0 at the anchor; iterates[1] follows the first
    // inner step, whose direction is exactly the anchor gradient.
    REQUIRE(iterates.size() >= 2);
    REQUIRE(iterates[1][0] == iterates[0][0] - alpha * anchor_seen[0]);
}

TEST_CASE("gradient evaluation accounting is exact", "[optim]") {
    const auto ds = gen_heterogeneity_toy(2.0, 6);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);
    CountingOracle counting{&go};

    SECTION("sgd: evals = steps * M") {
        const auto res = sgd_run(counting, ds, ex, UniformSampler(ex.size(), 3, Rng(2)),
                                 {0.0}, constant_alpha(0.001), 100);
        REQUIRE(res.evals == counting.grad_calls);
        REQUIRE(res.evals == 99);  // 33 steps of 3
    }
    SECTION("scott: evals = sum over outer loops of B*b + 2*M*K_actual") {
        Rng rng(9);
        const int strata = 2, batch = 4;
        const auto res = scott_run(
            counting, ds, ex,
            StratifiedSampler(stratify_mod_timestamp(ex, strata), 1, rng.split(0)),
            UniformSampler(ex.size(), batch, rng.split(1)), {0.0},
            constant_alpha(0.001), InnerMode::geometric(), 500, rng.split(2));
        REQUIRE(res.evals == counting.grad_calls);
        REQUIRE(res.evals <= 500);
    }
    SECTION("random-hash strata: anchor costs exactly B gradients") {
        Rng rng(10);
        const int strata = 5;
        long anchors = 0;
        long last_evals = 0, anchor_evals_total = 0;
        const auto res = scott_run(
            counting, ds, ex,
            StratifiedSampler(stratify_random_hash(ex, strata, 4), 1, rng.split(0)),
            UniformSampler(ex.size(), 1, rng.split(1)), {0.0}, constant_alpha(0.001),
            InnerMode::fixed(2), 200, rng.split(2),
            nullptr,
            [&](long, const ParameterVector&, const std::vector<double>&, long evals) {
                anchor_evals_total += evals - last_evals;
                last_evals = evals + 2 * 2;  // two inner steps of 2*M follow
                ++anchors;
            });
        REQUIRE(res.evals == counting.grad_calls);
        REQUIRE(anchor_evals_total == anchors * strata);
    }
}

TEST_CASE("finest-grained strata give a bias-free anchor", "[optim]") {
    const auto ds = gen_heterogeneity_toy(4.0, 4);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);
    Rng rng(21);
    double worst = 0;
    scott_run(go, ds, ex, StratifiedSampler(stratify_finest(ex.size()), 1, rng.split(0)),
              UniformSampler(ex.size(), 1, rng.split(1)), {0.0}, constant_alpha(0.002),
              InnerMode::geometric(), 600, rng.split(2), nullptr,
              [&](long, const ParameterVector& theta0, const std::vector<double>& anchor,
                  long) {
                  const auto full = oracle::full_gradient(go, ds, ex, theta0);
                  worst = std::max(worst, std::abs(anchor[0] - full[0]));
              });
    REQUIRE(worst <= 1e-12);
}

TEST_CASE("control-variate mean identity by batch enumeration", "[optim]") {
    // E_xi[v] = grad f(theta_k) + (anchor - grad f(theta_0)), enumerated
    // over all M = 1 batches.
    const auto ds = gen_heterogeneity_toy(2.0, 3);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);

    const ParameterVector theta0{0.1}, theta_k{0.35};
    const std::vector<double> anchor{1.23};  // any fixed anchor
    double expected_v = 0;
    for (const auto& e : ex) {
        expected_v += go.grad(theta_k, ds, e)[0] - go.grad(theta0, ds, e)[0] + anchor[0];
    }
    expected_v /= static_cast<double>(ex.size());

    const auto g_k = oracle::full_gradient(go, ds, ex, theta_k);
    const auto g_0 = oracle::full_gradient(go, ds, ex, theta0);
    const double zeta = anchor[0] - g_0[0];
    REQUIRE(expected_v == Approx(g_k[0] + zeta).margin(1e-12));
}

TEST_CASE("early stopping", "[optim]") {
    const auto ds = gen_heterogeneity_toy(2.0, 6);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);
    const auto strat = stratify_mod_timestamp(ex, 2);

    auto run_mode = [&](InnerMode mode, long budget) {
        Rng rng(33);
        std::vector<long> inner_per_outer;
        long current_outer = -1;
        const auto res = scott_run(
            go, ds, ex, StratifiedSampler(strat, 1, rng.split(0)),
            UniformSampler(ex.size(), 1, rng.split(1)), {0.0}, constant_alpha(0.02),
            mode, budget, rng.split(2),
            [&](long, long outer, const ParameterVector&) {
                if (outer != current_outer) {
                    current_outer = outer;
                    inner_per_outer.push_back(0);
                } else {
                    ++inner_per_outer.back();
                }
            });
        return std::pair{res, inner_per_outer};
    };

    SECTION("gamma >= 1 stops after one inner step and warns") {
        auto [res, inner] = run_mode(InnerMode::early_stop(1.5), 300);
        REQUIRE(!res.warnings.empty());
        for (long k : inner) REQUIRE(k <= 1);
    }
    SECTION("tiny gamma runs to the cap, never past it") {
        auto [res, inner] = run_mode(InnerMode::early_stop(1e-12, 7), 400);
        for (long k : inner) REQUIRE(k <= 7);
        bool hit_cap = false;
        for (long k : inner) hit_cap = hit_cap || k == 7;
        REQUIRE(hit_cap);
    }
    SECTION("default cap is 10 * B") {
        auto [res, inner] = run_mode(InnerMode::early_stop(1e-12), 2000);
        for (long k : inner) REQUIRE(k <= 10 * 2);
    }
    SECTION("gamma = 0.125 exits once the direction shrinks enough") {
        auto [res, inner] = run_mode(InnerMode::early_stop(0.125, 50), 3000);
        REQUIRE(res.outer_loops >= 2);
        for (long k : inner) REQUIRE(k <= 50);
    }
    SECTION("gamma <= 0 is rejected") {
        REQUIRE_THROWS(run_mode(InnerMode::early_stop(0.0), 100));
    }
}

TEST_CASE("output selection over outer iterates", "[optim]") {
    const std::vector<ParameterVector> iterates{{1.0}, {2.0}};
    SECTION("single iterate is returned with certainty") {
        Rng rng(1);
        const std::vector<ParameterVector> one{{9.0}};
        for (int i = 0; i < 10; ++i)
            REQUIRE(select_output(one, {0.5}, 4, rng) == ParameterVector{9.0});
    }
    SECTION("weights follow alpha: 1:3 split within 5%") {
        Rng rng(2);
        int picked_second = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i)
            picked_second += select_output(iterates, {1.0, 3.0}, 4, rng)[0] == 2.0;
        REQUIRE(std::abs(picked_second / double(n) - 0.75) < 0.05 * 0.75);
    }
    SECTION("constant alpha is uniform") {
        Rng rng(3);
        int picked_second = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i)
            picked_second += select_output(iterates, {0.7, 0.7}, 4, rng)[0] == 2.0;
        REQUIRE(std::abs(picked_second / double(n) - 0.5) < 0.03);
    }
    SECTION("recorded outer iterates feed selection") {
        const auto ds = gen_heterogeneity_toy(1.0, 3);
        const auto ex = extract_examples(ds);
        const auto go = GradientOracle::ar(1);
        Rng rng(4);
        const auto res = scott_run(go, ds, ex,
                                   StratifiedSampler(stratify_mod_timestamp(ex, 2), 1, rng.split(0)),
                                   UniformSampler(ex.size(), 1, rng.split(1)), {0.0},
                                   constant_alpha(0.01), InnerMode::fixed(1), 120,
                                   rng.split(2), nullptr, nullptr, /*record_outer=*/true);
        REQUIRE(res.outer_iterates.size() == static_cast<std::size_t>(res.outer_loops));
        REQUIRE(res.outer_alphas.size() == res.outer_iterates.size());
        Rng pick(5);
        const auto chosen = select_output(res.outer_iterates, res.outer_alphas, 2, pick);
        REQUIRE(chosen.size() == 1);
    }
}

TEST_CASE("adam-style updates", "[optim]") {
    const auto ds = quadratic_ds(2.0);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);

    SECTION("degenerate betas give sign-sized steps") {
        // beta1 = beta2 = 0: step = alpha * v / (|v| + eps) ~ alpha * sign(v)
        const double alpha = 0.125;
        const auto res = adam_run(go, ds, ex, UniformSampler(ex.size(), 1, Rng(1)),
                                  {0.0}, constant_alpha(alpha), 0.0, 0.0, 1);
        REQUIRE(res.final_params[0] == Approx(alpha).epsilon(1e-6));
    }
    SECTION("zero direction leaves parameters fixed for both variants") {
        // dataset with target 0 and context 1: at theta = 0 the gradient is 0
        const auto ds0 = quadratic_ds(0.0);
        const auto ex0 = extract_examples(ds0);
        const auto adam = adam_run(go, ds0, ex0, UniformSampler(ex0.size(), 1, Rng(1)),
                                   {0.0}, constant_alpha(0.1), 0.9, 0.999, 50);
        REQUIRE(adam.final_params == ParameterVector{0.0});
        const auto ada = adagrad_run(go, ds0, ex0, UniformSampler(ex0.size(), 1, Rng(1)),
                                     {0.0}, constant_alpha(0.1), 50);
        REQUIRE(ada.final_params == ParameterVector{0.0});
    }
    SECTION("s-adam with zero control variate keeps theta constant") {
        const auto ds0 = quadratic_ds(0.0);
        const auto ex0 = extract_examples(ds0);
        Rng rng(6);
        const auto res = s_adam_run(go, ds0, ex0,
                                    StratifiedSampler(stratify_finest(ex0.size()), 1, rng.split(0)),
                                    UniformSampler(ex0.size(), 1, rng.split(1)), {0.0},
                                    constant_alpha(0.1), 0.9, 0.999,
                                    InnerMode::fixed(3), 60, rng.split(2));
        REQUIRE(res.final_params == ParameterVector{0.0});
    }
    SECTION("moment accounting matches the counting oracle") {
        CountingOracle counting{&go};
        Rng rng(7);
        const auto res = s_adagrad_run(counting, ds, ex,
                                       StratifiedSampler(stratify_finest(ex.size()), 1, rng.split(0)),
                                       UniformSampler(ex.size(), 1, rng.split(1)), {0.0},
                                       constant_alpha(0.05), InnerMode::geometric(), 150,
                                       rng.split(2));
        REQUIRE(res.evals == counting.grad_calls);
    }
    SECTION("invalid betas are rejected") {
        REQUIRE_THROWS(adam_run(go, ds, ex, UniformSampler(ex.size(), 1, Rng(1)), {0.0},
                                constant_alpha(0.1), 1.0, 0.999, 10));
    }
}

TEST_CASE("runs are bit-identical across repeats", "[optim]") {
    const auto ds = gen_heterogeneity_toy(2.0, 5, 0.2, 3);
    const auto ex = extract_examples(ds);
    const auto go = GradientOracle::ar(1);
    auto once = [&] {
        Rng rng(88);
        return scott_run(go, ds, ex,
                         StratifiedSampler(stratify_mod_timestamp(ex, 2), 1, rng.split(0)),
                         UniformSampler(ex.size(), 2, rng.split(1)), {0.0},
                         constant_alpha(0.01), InnerMode::geometric(), 400, rng.split(2));
    };
    const auto a = once();
    const auto b = once();
    REQUIRE(a.final_params == b.final_params);
    REQUIRE(a.evals == b.evals);
    REQUIRE(a.outer_loops == b.outer_loops);
}
