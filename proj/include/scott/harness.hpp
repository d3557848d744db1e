#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scott/dataset.hpp"
#include "scott/models.hpp"
#include "scott/optim.hpp"
#include "scott/oracle.hpp"
#include "scott/samplers.hpp"
#include "scott/stratify.hpp"

namespace scott {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One convergence-log row. wall_ms is telemetry and is stripped from
/// emitted CSV by default so that identical (config, seed) runs produce
/// byte-identical files.
struct RunRecord {
    long grad_evals = 0;
    std::optional<long> wall_ms;
    long outer_iter = 0;
    double train_loss = 0;
    std::optional<double> test_loss;
    std::optional<double> sampler_variance;
};

/// A full experiment description, parsed from "key = value" text.
struct RunConfig {
    std::string dataset;    // sinemix:..., het:..., adv:..., synth4:..., csv:...
    std::string model;      // ar:<p> | ff:<h1>x<h2>:<mse|nll>
    std::string optimizer;  // sgd | adam:.. | adagrad | scott:.. | scsg:<B> | svrg | sadam:.. | sadagrad
    std::string strata;     // mod:<P> | hier:weekday-season | random:<B>:<seed> | finest | labels:<path> | truth
    double alpha = 0;
    int batch = 1;           // M
    int per_stratum = 1;     // b
    std::uint64_t seed = 0;
    long budget = 0;
    long log_every = 0;      // 0 = budget / 10
    double split = 0.8;      // train fraction
    bool normalize = false;
    int variance_trials = 0; // 0 disables per-log-point sampler variance
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_spec(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t colon = s.find(':', pos);
        if (colon == std::string::npos) {
            out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, colon - pos));
        pos = colon + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse number '" + s + "' for " + what);
    }
}

inline long parse_long(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse integer '" + s + "' for " + what);
    }
}

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Parses line-based "key = value" text. Unknown keys, malformed values and
/// invariant violations are reported with the offending key and line.
inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, bool> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        const std::string where = "line " + std::to_string(line_no) + ", key '" + key + "'";
        if (seen[key]) throw ConfigError(where + ": duplicate key");
        seen[key] = true;
        if (key == "dataset") cfg.dataset = value;
        else if (key == "model") cfg.model = value;
        else if (key == "optimizer") cfg.optimizer = value;
        else if (key == "strata") cfg.strata = value;
        else if (key == "alpha") cfg.alpha = detail::parse_double(value, where);
        else if (key == "M") cfg.batch = static_cast<int>(detail::parse_long(value, where));
        else if (key == "b") cfg.per_stratum = static_cast<int>(detail::parse_long(value, where));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_long(value, where));
        else if (key == "budget") cfg.budget = detail::parse_long(value, where);
        else if (key == "log_every") cfg.log_every = detail::parse_long(value, where);
        else if (key == "split") cfg.split = detail::parse_double(value, where);
        else if (key == "normalize") {
            if (value == "true") cfg.normalize = true;
            else if (value == "false") cfg.normalize = false;
            else throw ConfigError(where + ": expected true or false");
        } else if (key == "variance_trials")
            cfg.variance_trials = static_cast<int>(detail::parse_long(value, where));
        else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    for (const char* req : {"dataset", "model", "optimizer", "alpha", "budget"})
        if (!seen[req]) throw ConfigError(std::string("missing key: ") + req);

    if (cfg.budget < 1) throw ConfigError("key 'budget': must be >= 1");
    if (cfg.log_every == 0) cfg.log_every = std::max(1L, cfg.budget / 10);
    if (cfg.log_every < 1 || cfg.log_every > cfg.budget)
        throw ConfigError("key 'log_every': need budget >= log_every >= 1");
    if (cfg.alpha < 0) throw ConfigError("key 'alpha': must be >= 0");
    if (cfg.batch < 1) throw ConfigError("key 'M': must be >= 1");
    if (cfg.per_stratum < 1) throw ConfigError("key 'b': must be >= 1");
    if (!(cfg.split > 0 && cfg.split <= 1)) throw ConfigError("key 'split': need 0 < split <= 1");
    if (cfg.variance_trials < 0) throw ConfigError("key 'variance_trials': must be >= 0");
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Registries: dataset specs, model specs, optimizer specs.
// ---------------------------------------------------------------------------

struct LoadedDataset {
    TimeSeriesDataset ds;
    std::vector<int> labels;  // ground-truth strata when the generator has them
};

/// dataset spec grammar:
///   sinemix:<T>[:<seed>[:<noise>]]
///   het:<delta>:<repeats>[:<noise>[:<seed>]]
///   adv:<p>:<delta>[:<c>]
///   synth4:<repeats>[:<seed>[:<noise>]]
///   csv:<path>:<context>:<pred>[:<stride>]
/// Omitted seeds fall back to `default_seed` (the run's data sub-seed).
inline LoadedDataset make_dataset(const std::string& spec, std::uint64_t default_seed) {
    auto f = detail::split_spec(spec);
    auto need = [&](std::size_t lo, std::size_t hi) {
        if (f.size() < lo || f.size() > hi)
            throw ConfigError("dataset spec '" + spec + "': wrong number of fields");
    };
    LoadedDataset out;
    try {
        if (f[0] == "sinemix") {
            need(2, 4);
            const int len = static_cast<int>(detail::parse_long(f[1], spec));
            const std::uint64_t seed =
                f.size() > 2 ? detail::parse_long(f[2], spec) : default_seed;
            const double noise = f.size() > 3 ? detail::parse_double(f[3], spec) : 0.2;
            out.ds = gen_sine_mix_toy(len, seed, noise);
        } else if (f[0] == "het") {
            need(3, 5);
            const double delta = detail::parse_double(f[1], spec);
            const int repeats = static_cast<int>(detail::parse_long(f[2], spec));
            const double noise = f.size() > 3 ? detail::parse_double(f[3], spec) : 0.0;
            const std::uint64_t seed =
                f.size() > 4 ? detail::parse_long(f[4], spec) : default_seed;
            out.ds = gen_heterogeneity_toy(delta, repeats, noise, seed);
        } else if (f[0] == "adv") {
            need(3, 4);
            const int p = static_cast<int>(detail::parse_long(f[1], spec));
            const double delta = detail::parse_double(f[2], spec);
            const double c = f.size() > 3 ? detail::parse_double(f[3], spec) : 0.0;
            out.ds = gen_adversarial(p, delta, c);
        } else if (f[0] == "synth4") {
            need(2, 4);
            const int repeats = static_cast<int>(detail::parse_long(f[1], spec));
            const std::uint64_t seed =
                f.size() > 2 ? detail::parse_long(f[2], spec) : default_seed;
            const double noise = f.size() > 3 ? detail::parse_double(f[3], spec) : 1.0;
            auto [ds, labels] = gen_synthetic_4pattern(repeats, seed, noise);
            out.ds = std::move(ds);
            out.labels = std::move(labels);
        } else if (f[0] == "csv") {
            need(4, 5);
            const int context = static_cast<int>(detail::parse_long(f[2], spec));
            const int pred = static_cast<int>(detail::parse_long(f[3], spec));
            const int stride = f.size() > 4
                                   ? static_cast<int>(detail::parse_long(f[4], spec))
                                   : 1;
            out.ds = load_csv(f[1], context, pred, stride);
        } else {
            throw ConfigError("unknown dataset kind '" + f[0] + "'");
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError("dataset spec '" + spec + "': " + e.what());
    }
    return out;
}

/// model spec grammar: ar:<p> or ff:<h1>x<h2>...:<mse|nll>.
inline GradientOracle make_model(const std::string& spec, const TimeSeriesDataset& ds) {
    auto f = detail::split_spec(spec);
    if (f[0] == "ar" && f.size() == 2)
        return GradientOracle::ar(static_cast<int>(detail::parse_long(f[1], spec)));
    if (f[0] == "ff" && f.size() == 3) {
        FeedforwardLayout layout;
        layout.input = ds.context_len;
        layout.pred_len = ds.pred_len;
        std::stringstream ss(f[1]);
        std::string piece;
        while (std::getline(ss, piece, 'x'))
            layout.hidden.push_back(
                static_cast<int>(detail::parse_long(piece, spec)));
        if (layout.hidden.empty())
            throw ConfigError("model spec '" + spec + "': no hidden widths");
        if (f[2] == "mse") layout.loss = LossKind::kMse;
        else if (f[2] == "nll") layout.loss = LossKind::kGaussianNll;
        else throw ConfigError("model spec '" + spec + "': loss must be mse or nll");
        return GradientOracle::feedforward(layout);
    }
    throw ConfigError("unknown model spec '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Train/test split, run loop, CSV emission.
// ---------------------------------------------------------------------------

struct SplitIndices {
    std::vector<TrainingExample> train;
    std::vector<TrainingExample> test;
    std::vector<int> train_labels;  // aligned with train when labels exist
};

/// Temporal holdout: within each series, the last (1 - fraction) share of
/// examples by t0 becomes the test set. Deterministic.
inline SplitIndices split_train_test(const std::vector<TrainingExample>& examples,
                                     const std::vector<int>& labels, double fraction) {
    if (!(fraction > 0 && fraction <= 1))
        throw std::invalid_argument("split_train_test: need 0 < fraction <= 1");
    // examples arrive series-major with ascending t0
    SplitIndices out;
    std::size_t i = 0;
    while (i < examples.size()) {
        std::size_t j = i;
        while (j < examples.size() && examples[j].series_idx == examples[i].series_idx) ++j;
        const std::size_t n = j - i;
        const std::size_t n_train =
            std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
        for (std::size_t k = i; k < j; ++k) {
            if (k - i < n_train) {
                out.train.push_back(examples[k]);
                if (!labels.empty()) out.train_labels.push_back(labels[k]);
            } else {
                out.test.push_back(examples[k]);
            }
        }
        i = j;
    }
    return out;
}

inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path,
                     bool keep_wall_ms = false) {
    if (records.empty()) throw std::invalid_argument("emit_csv: no records");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "' for writing");
    out << "grad_evals,wall_ms,outer_iter,train_loss,test_loss,sampler_variance\n";
    for (const auto& r : records) {
        out << r.grad_evals << ',';
        if (keep_wall_ms && r.wall_ms) out << *r.wall_ms;
        out << ',' << r.outer_iter << ',' << detail::fmt17(r.train_loss) << ',';
        if (r.test_loss) out << detail::fmt17(*r.test_loss);
        out << ',';
        if (r.sampler_variance) out << detail::fmt17(*r.sampler_variance);
        out << '\n';
    }
}

inline std::vector<RunRecord> parse_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_records_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) ||
        line != "grad_evals,wall_ms,outer_iter,train_loss,test_loss,sampler_variance")
        throw std::runtime_error("parse_records_csv: bad header in '" + path + "'");
    std::vector<RunRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < 6) cells.emplace_back();
        RunRecord r;
        r.grad_evals = std::stol(cells[0]);
        if (!cells[1].empty()) r.wall_ms = std::stol(cells[1]);
        r.outer_iter = std::stol(cells[2]);
        r.train_loss = std::stod(cells[3]);
        if (!cells[4].empty()) r.test_loss = std::stod(cells[4]);
        if (!cells[5].empty()) r.sampler_variance = std::stod(cells[5]);
        records.push_back(r);
    }
    return records;
}

struct RunResult {
    std::vector<RunRecord> records;
    ParameterVector final_params;
    long evals = 0;
    bool diverged = false;
    std::vector<std::string> warnings;
    // Iterate snapshots taken at log points, for offline diagnostics.
    std::vector<ParameterVector> checkpoints;
};

namespace detail {

struct OptimizerSpec {
    enum class Family { kSgd, kAdam, kAdagrad, kScott, kSAdam, kSAdagrad };
    Family family = Family::kSgd;
    InnerMode mode = InnerMode::geometric();
    double beta1 = 0.9, beta2 = 0.999;
    // for scsg:<B>: build a random-hash stratification of this size
    int random_strata = 0;
    bool finest = false;
    bool needs_strata = false;
};

inline OptimizerSpec parse_optimizer(const std::string& spec) {
    auto f = split_spec(spec);
    OptimizerSpec o;
    using Family = OptimizerSpec::Family;
    auto parse_mode = [&](std::size_t at) {
        if (f.size() <= at) return InnerMode::geometric();
        if (f[at] == "geom" && f.size() == at + 1) return InnerMode::geometric();
        if (f[at] == "fixed" && f.size() == at + 2)
            return InnerMode::fixed(parse_long(f[at + 1], spec));
        if (f[at] == "early" && (f.size() == at + 2 || f.size() == at + 3)) {
            const double gamma = parse_double(f[at + 1], spec);
            const long kmax = f.size() == at + 3 ? parse_long(f[at + 2], spec) : 0;
            return InnerMode::early_stop(gamma, kmax);
        }
        throw ConfigError("optimizer spec '" + spec + "': bad inner-loop mode");
    };
    if (f[0] == "sgd" && f.size() == 1) {
        o.family = Family::kSgd;
    } else if (f[0] == "adam" && (f.size() == 1 || f.size() == 3)) {
        o.family = Family::kAdam;
        if (f.size() == 3) {
            o.beta1 = parse_double(f[1], spec);
            o.beta2 = parse_double(f[2], spec);
        }
    } else if (f[0] == "adagrad" && f.size() == 1) {
        o.family = Family::kAdagrad;
    } else if (f[0] == "scott") {
        o.family = Family::kScott;
        o.needs_strata = true;
        o.mode = parse_mode(1);
    } else if (f[0] == "scsg" && f.size() == 2) {
        o.family = Family::kScott;
        o.random_strata = static_cast<int>(parse_long(f[1], spec));
        if (o.random_strata < 1) throw ConfigError("scsg: B must be >= 1");
    } else if (f[0] == "svrg" && f.size() == 1) {
        o.family = Family::kScott;
        o.finest = true;
    } else if (f[0] == "sadam" && (f.size() == 1 || f.size() >= 3)) {
        o.family = Family::kSAdam;
        o.needs_strata = true;
        if (f.size() >= 3) {
            o.beta1 = parse_double(f[1], spec);
            o.beta2 = parse_double(f[2], spec);
        }
        o.mode = parse_mode(3);
    } else if (f[0] == "sadagrad") {
        o.family = Family::kSAdagrad;
        o.needs_strata = true;
        o.mode = parse_mode(1);
    } else {
        throw ConfigError("unknown optimizer spec '" + spec + "'");
    }
    return o;
}

}  // namespace detail

/// Executes one configured run to its gradient-evaluation budget, logging a
/// record every log_every evaluations (plus one initial record).
inline RunResult run(const RunConfig& cfg) {
    Rng root(cfg.seed);
    const std::uint64_t data_seed = root.split(1).next_u64();
    Rng sampler_rng = root.split(2);
    Rng optimizer_rng = root.split(3);

    LoadedDataset loaded = make_dataset(cfg.dataset, data_seed);
    if (cfg.normalize) loaded.ds = normalize_per_series(std::move(loaded.ds));
    const TimeSeriesDataset& ds = loaded.ds;
    const auto all_examples = extract_examples(ds);
    if (all_examples.empty()) throw ConfigError("dataset yields no training examples");

    // Label files cover the full extracted example list (the `gen` sidecar
    // layout); load them before the split so they subset alongside it.
    std::string strata_policy = cfg.strata;
    if (strata_policy.rfind("labels:", 0) == 0) {
        loaded.labels = load_labels(strata_policy.substr(7));
        if (loaded.labels.size() != all_examples.size())
            throw ConfigError("label file covers " + std::to_string(loaded.labels.size()) +
                              " examples, dataset has " +
                              std::to_string(all_examples.size()));
        strata_policy = "truth";
    }

    SplitIndices split = split_train_test(all_examples, loaded.labels, cfg.split);
    if (split.train.empty()) throw ConfigError("train split is empty");

    const GradientOracle go = make_model(cfg.model, ds);
    const detail::OptimizerSpec opt = detail::parse_optimizer(cfg.optimizer);

    using Family = detail::OptimizerSpec::Family;
    const bool anchored = opt.family == Family::kScott || opt.family == Family::kSAdam ||
                          opt.family == Family::kSAdagrad;

    std::optional<Stratification> strat;
    if (anchored) {
        if (opt.random_strata > 0) {
            if (!cfg.strata.empty())
                throw ConfigError("scsg selects its own random-hash strata; drop 'strata'");
            strat = stratify_random_hash(split.train, opt.random_strata,
                                         sampler_rng.split(99).next_u64());
        } else if (opt.finest) {
            if (!cfg.strata.empty())
                throw ConfigError("svrg uses finest-grained strata; drop 'strata'");
            strat = stratify_finest(split.train.size());
        } else {
            if (strata_policy.empty())
                throw ConfigError("optimizer '" + cfg.optimizer + "' requires 'strata'");
            strat = make_stratification(strata_policy, split.train,
                                        split.train_labels.empty() ? nullptr
                                                                   : &split.train_labels);
        }
    }

    ParameterVector theta0 = go.init_params(optimizer_rng.split(7).next_u64());

    // Loss over an example set; gradient-free, so it does not count toward
    // the evaluation budget.
    auto mean_loss = [&](const ParameterVector& theta,
                         const std::vector<TrainingExample>& exs) {
        double total = 0;
        for (const auto& ex : exs) total += go.loss(theta, ds, ex);
        return total / static_cast<double>(exs.size());
    };

    RunResult out;
    const auto t_start = std::chrono::steady_clock::now();
    auto wall_ms = [&] {
        return static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - t_start)
                                     .count());
    };

    auto log_record = [&](long evals, long outer, const ParameterVector& theta) {
        RunRecord r;
        r.grad_evals = evals;
        r.wall_ms = wall_ms();
        r.outer_iter = outer;
        r.train_loss = mean_loss(theta, split.train);
        if (!split.test.empty()) r.test_loss = mean_loss(theta, split.test);
        if (cfg.variance_trials > 0) {
            if (strat) {
                StratifiedSampler probe(*strat, cfg.per_stratum, sampler_rng.split(500));
                r.sampler_variance = estimate_sampler_variance(
                    std::move(probe), go, ds, split.train, theta, cfg.variance_trials);
            } else {
                UniformSampler probe(split.train.size(), cfg.batch, sampler_rng.split(500));
                r.sampler_variance = estimate_sampler_variance(
                    std::move(probe), go, ds, split.train, theta, cfg.variance_trials);
            }
        }
        out.records.push_back(std::move(r));
        out.checkpoints.push_back(theta);
    };

    log_record(0, 0, theta0);

    long next_mark = cfg.log_every;
    ProgressFn progress = [&](long evals, long outer, const ParameterVector& theta) {
        if (evals < next_mark) return;
        log_record(evals, outer, theta);
        while (next_mark <= evals) next_mark += cfg.log_every;
    };

    OptimResult opt_result;
    UniformSampler uniform(split.train.size(), cfg.batch, sampler_rng.split(1));
    switch (opt.family) {
        case Family::kSgd:
            opt_result = sgd_run(go, ds, split.train, uniform, theta0,
                                 constant_alpha(cfg.alpha), cfg.budget, progress);
            break;
        case Family::kAdam:
            opt_result = adam_run(go, ds, split.train, uniform, theta0,
                                  constant_alpha(cfg.alpha), opt.beta1, opt.beta2,
                                  cfg.budget, progress);
            break;
        case Family::kAdagrad:
            opt_result = adagrad_run(go, ds, split.train, uniform, theta0,
                                     constant_alpha(cfg.alpha), cfg.budget, progress);
            break;
        case Family::kScott: {
            StratifiedSampler ss(*strat, cfg.per_stratum, sampler_rng.split(2));
            opt_result = scott_run(go, ds, split.train, std::move(ss), uniform, theta0,
                                   constant_alpha(cfg.alpha), opt.mode, cfg.budget,
                                   optimizer_rng, progress);
            break;
        }
        case Family::kSAdam: {
            StratifiedSampler ss(*strat, cfg.per_stratum, sampler_rng.split(2));
            opt_result = s_adam_run(go, ds, split.train, std::move(ss), uniform, theta0,
                                    constant_alpha(cfg.alpha), opt.beta1, opt.beta2,
                                    opt.mode, cfg.budget, optimizer_rng, progress);
            break;
        }
        case Family::kSAdagrad: {
            StratifiedSampler ss(*strat, cfg.per_stratum, sampler_rng.split(2));
            opt_result = s_adagrad_run(go, ds, split.train, std::move(ss), uniform, theta0,
                                       constant_alpha(cfg.alpha), opt.mode, cfg.budget,
                                       optimizer_rng, progress);
            break;
        }
    }

    // Final record if the last step did not land on a mark.
    if (out.records.back().grad_evals != opt_result.evals)
        log_record(opt_result.evals, opt_result.outer_loops, opt_result.final_params);

    out.final_params = std::move(opt_result.final_params);
    out.evals = opt_result.evals;
    out.warnings = std::move(opt_result.warnings);
    out.diverged = opt_result.diverged || !std::isfinite(out.records.back().train_loss);
    return out;
}

// ---------------------------------------------------------------------------
// Grid search.
// ---------------------------------------------------------------------------

struct GridRow {
    std::string optimizer;
    double alpha = 0;
    std::optional<double> gamma;
    double final_train_loss = 0;
    bool diverged = false;
};

struct GridResult {
    std::vector<GridRow> rows;
    std::map<std::string, GridRow> best;  // per optimizer, lowest final loss
};

/// Runs every grid point with the base config's fixed seed. Optimizers
/// equal to "scott:early" (no gamma) are crossed with the gamma grid;
/// everything else only sweeps alpha. Fails if every point diverged.
inline GridResult grid_search(const RunConfig& base,
                              const std::vector<std::string>& optimizers,
                              const std::vector<double>& alphas,
                              const std::vector<double>& gammas = {},
                              const std::function<void(const GridRow&)>& on_row = nullptr) {
    if (optimizers.empty() || alphas.empty())
        throw ConfigError("grid_search: empty grid");
    GridResult out;
    for (const auto& opt : optimizers) {
        std::vector<std::pair<std::string, std::optional<double>>> variants;
        if (opt == "scott:early") {
            if (gammas.empty())
                throw ConfigError("grid_search: scott:early needs a gamma grid");
            for (double g : gammas)
                variants.emplace_back("scott:early:" + detail::fmt17(g), g);
        } else {
            variants.emplace_back(opt, std::nullopt);
        }
        for (const auto& [opt_spec, gamma] : variants) {
            for (double a : alphas) {
                RunConfig cfg = base;
                cfg.optimizer = opt_spec;
                cfg.alpha = a;
                GridRow row;
                row.optimizer = opt;
                row.alpha = a;
                row.gamma = gamma;
                try {
                    RunResult r = run(cfg);
                    row.diverged = r.diverged;
                    row.final_train_loss = r.records.back().train_loss;
                } catch (const DivergenceError&) {
                    row.diverged = true;
                }
                if (on_row) on_row(row);
                out.rows.push_back(row);
                if (!row.diverged && std::isfinite(row.final_train_loss)) {
                    auto it = out.best.find(opt);
                    if (it == out.best.end() ||
                        row.final_train_loss < it->second.final_train_loss)
                        out.best[opt] = row;
                }
            }
        }
    }
    if (out.best.empty()) throw DivergenceError("grid_search: every grid point diverged");
    return out;
}

/// Step-size grid used for tuning throughout the harness.
inline std::vector<double> default_alpha_grid() {
    return {0.1, 0.05, 0.025, 0.01, 0.005, 0.0025, 0.001, 0.0005, 0.00025, 0.0001};
}

/// Early-stopping threshold grid.
inline std::vector<double> default_gamma_grid() { return {0.1, 0.125, 0.15, 0.2}; }

}  // namespace scott
