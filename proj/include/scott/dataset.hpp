#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scott/rng.hpp"

namespace scott {

/// A training example is a (series, prediction time) pair. Times are
/// 1-based: the context window is z[t0-context_len+1 .. t0] and the target
/// window is z[t0+1 .. t0+pred_len].
struct TrainingExample {
    int series_idx = 0;
    int t0 = 0;
};

/// A collection of real-valued series sharing one windowing scheme.
/// Immutable after construction; generators and loaders validate invariants.
struct TimeSeriesDataset {
    std::vector<std::vector<double>> series;
    // Optional per-series, per-time feature vectors; when present,
    // features[i].size() == series[i].size().
    std::vector<std::vector<std::vector<double>>> features;
    int context_len = 1;
    int pred_len = 1;
    int stride = 1;

    void validate() const {
        if (context_len < 1 || pred_len < 1 || stride < 1)
            throw std::invalid_argument(
                "dataset: context_len, pred_len and stride must be >= 1");
        for (std::size_t i = 0; i < series.size(); ++i) {
            for (double v : series[i])
                if (!std::isfinite(v))
                    throw std::invalid_argument(
                        "dataset: non-finite value in series " +
                        std::to_string(i));
        }
        if (!features.empty()) {
            if (features.size() != series.size())
                throw std::invalid_argument(
                    "dataset: features must cover every series");
            for (std::size_t i = 0; i < series.size(); ++i)
                if (features[i].size() != series[i].size())
                    throw std::invalid_argument(
                        "dataset: feature length mismatch in series " +
                        std::to_string(i));
        }
    }

    std::span<const double> context(const TrainingExample& ex) const {
        const auto& z = series[ex.series_idx];
        return {z.data() + (ex.t0 - context_len), static_cast<std::size_t>(context_len)};
    }

    std::span<const double> target(const TrainingExample& ex) const {
        const auto& z = series[ex.series_idx];
        return {z.data() + ex.t0, static_cast<std::size_t>(pred_len)};
    }
};

/// Enumerates every in-bounds window, series-major then by increasing t0,
/// stepping `stride` timestamps between prediction times. Series too short
/// for a single window contribute nothing.
inline std::vector<TrainingExample> extract_examples(const TimeSeriesDataset& ds) {
    ds.validate();
    std::vector<TrainingExample> out;
    for (std::size_t i = 0; i < ds.series.size(); ++i) {
        const int len = static_cast<int>(ds.series[i].size());
        const int last_t0 = len - ds.pred_len;
        for (int t0 = ds.context_len; t0 <= last_t0; t0 += ds.stride)
            out.push_back({static_cast<int>(i), t0});
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion. Format: a header row of series names, then one row per
// timestamp: integer time index followed by one decimal value per series.
// ---------------------------------------------------------------------------

inline TimeSeriesDataset load_csv(const std::string& path, int context_len,
                                  int pred_len, int stride = 1) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_csv: cannot open '" + path + "'");

    auto split_row = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("load_csv: " + path + ": empty file");
    const std::size_t n_cols = split_row(line).size();
    if (n_cols < 2)
        throw std::runtime_error("load_csv: " + path +
                                 ": header needs a time column and at least one series");

    TimeSeriesDataset ds;
    ds.context_len = context_len;
    ds.pred_len = pred_len;
    ds.stride = stride;
    ds.series.resize(n_cols - 1);

    std::size_t row = 1;  // header was row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_row(line);
        if (cells.size() != n_cols)
            throw std::runtime_error("load_csv: " + path + ": row " +
                                     std::to_string(row) + " has " +
                                     std::to_string(cells.size()) +
                                     " cells, expected " + std::to_string(n_cols));
        for (std::size_t c = 1; c < n_cols; ++c) {
            std::size_t pos = 0;
            double v = 0;
            try {
                v = std::stod(cells[c], &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != cells[c].size() || cells[c].empty())
                throw std::runtime_error("load_csv: " + path + ": row " +
                                         std::to_string(row) + ", col " +
                                         std::to_string(c + 1) +
                                         ": not a number: '" + cells[c] + "'");
            ds.series[c - 1].push_back(v);
        }
    }
    if (ds.series[0].empty())
        throw std::runtime_error("load_csv: " + path + ": no data rows");
    ds.validate();
    return ds;
}

inline void write_csv(const TimeSeriesDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_csv: cannot open '" + path + "' for writing");
    std::size_t len = ds.series.empty() ? 0 : ds.series[0].size();
    for (const auto& s : ds.series)
        if (s.size() != len)
            throw std::runtime_error("write_csv: ragged series cannot be written");
    out << "t";
    for (std::size_t i = 0; i < ds.series.size(); ++i) out << ",s" << (i + 1);
    out << "\n";
    char buf[32];
    for (std::size_t t = 0; t < len; ++t) {
        out << (t + 1);
        for (const auto& s : ds.series) {
            std::snprintf(buf, sizeof(buf), "%.17g", s[t]);
            out << ',' << buf;
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Generators. All deterministic given (parameters, seed).
// ---------------------------------------------------------------------------

/// Single recurring series z_t = sin(t) + cos(2t) + noise_scale * eps_t,
/// t = 1..length. Windowed for an order-2 autoregressive fit by default.
inline TimeSeriesDataset gen_sine_mix_toy(int length, std::uint64_t seed,
                                      double noise_scale = 0.2,
                                      int context_len = 2) {
    if (length < context_len + 1)
        throw std::invalid_argument("gen_sine_mix_toy: length too short for one window");
    TimeSeriesDataset ds;
    ds.context_len = context_len;
    ds.pred_len = 1;
    ds.stride = 1;
    Rng rng(seed);
    std::vector<double> z(length);
    for (int t = 1; t <= length; ++t)
        z[t - 1] = std::sin(static_cast<double>(t)) +
                   std::cos(2.0 * static_cast<double>(t)) +
                   noise_scale * rng.next_gaussian();
    ds.series.push_back(std::move(z));
    ds.validate();
    return ds;
}

/// Single series tiling the length-4 pattern [-1, -delta, 1, delta], with
/// one-in/one-out windows at every timestamp. Odd prediction times pull the
/// order-1 fit toward delta, even ones toward -1/delta, so the example set
/// splits into two groups with far-apart minimizers as delta grows.
inline TimeSeriesDataset gen_heterogeneity_toy(double delta, int n_repeats,
                                               double noise_scale = 0.0,
                                               std::uint64_t seed = 0) {
    if (delta <= 0) throw std::invalid_argument("gen_heterogeneity_toy: delta must be > 0");
    if (n_repeats < 1) throw std::invalid_argument("gen_heterogeneity_toy: n_repeats must be >= 1");
    const double pattern[4] = {-1.0, -delta, 1.0, delta};
    TimeSeriesDataset ds;
    ds.context_len = 1;
    ds.pred_len = 1;
    ds.stride = 1;
    Rng rng(seed);
    std::vector<double> z;
    z.reserve(4 * static_cast<std::size_t>(n_repeats));
    for (int r = 0; r < n_repeats; ++r)
        for (double v : pattern)
            z.push_back(v + noise_scale * rng.next_gaussian());
    ds.series.push_back(std::move(z));
    ds.validate();
    return ds;
}

/// Worst-case dataset for an order-p autoregressive fit: 2*floor(p/2) series
/// of length p+1, each contributing exactly one window, built so that a
/// single-example gradient estimate at theta = 0 has variance growing like
/// delta^4 * p. Requires 2c <= delta so that max |z| <= delta.
///
/// p = 1 has a separate degenerate form (one series, zero sampling
/// variance); it is only produced when explicitly requested.
inline TimeSeriesDataset gen_adversarial(int p, double delta, double c = 0.0,
                                         bool allow_p1 = false) {
    if (p < 1) throw std::invalid_argument("gen_adversarial: p must be >= 1");
    if (p == 1 && !allow_p1)
        throw std::invalid_argument(
            "gen_adversarial: p = 1 is degenerate; pass allow_p1 to generate it");
    if (2.0 * c > delta)
        throw std::invalid_argument("gen_adversarial: construction requires 2c <= delta");

    TimeSeriesDataset ds;
    ds.context_len = p;
    ds.pred_len = 1;
    ds.stride = 1;

    const double h = delta / 2.0;
    if (p == 1) {
        ds.series.push_back({h, h + c});
        ds.validate();
        return ds;
    }

    const int pbar = p / 2;
    // Series 1: [h, 0 x (p-1), h + c].
    {
        std::vector<double> z(p + 1, 0.0);
        z[0] = h;
        z[p] = h + c;
        ds.series.push_back(std::move(z));
    }
    // Series i = 2..pbar: [0 x (i-2), h, -h, 0 x (p-i), c].
    for (int i = 2; i <= pbar; ++i) {
        std::vector<double> z(p + 1, 0.0);
        z[i - 2] = h;
        z[i - 1] = -h;
        z[p] = c;
        ds.series.push_back(std::move(z));
    }
    // Series i = pbar+1..2*pbar: [0 x pbar, h x (p-pbar), h + c].
    for (int i = pbar + 1; i <= 2 * pbar; ++i) {
        std::vector<double> z(p + 1, 0.0);
        for (int j = pbar; j < p; ++j) z[j] = h;
        z[p] = h + c;
        ds.series.push_back(std::move(z));
    }
    ds.validate();
    return ds;
}

/// Four series, each cycling the four base patterns over t = 1..24
/// (sin, linear, quadratic, square root) in a distinct order, tiled
/// `repeats` times plus a 72-point cyclic lead-in so that every pattern
/// block is covered by exactly one prediction window. Windowing is
/// 72-in/24-out with stride 24. Returns the dataset and one ground-truth
/// stratum label per extracted example: label = 4 * series + pattern,
/// 16 distinct labels.
inline std::pair<TimeSeriesDataset, std::vector<int>> gen_synthetic_4pattern(
    int repeats, std::uint64_t seed, double noise_scale = 1.0) {
    if (repeats < 1)
        throw std::invalid_argument("gen_synthetic_4pattern: repeats must be >= 1");

    std::vector<std::vector<double>> patterns(4, std::vector<double>(24));
    for (int t = 1; t <= 24; ++t) {
        const double x = static_cast<double>(t);
        patterns[0][t - 1] = std::sin(x);
        patterns[1][t - 1] = x;
        patterns[2][t - 1] = x * x;
        patterns[3][t - 1] = std::sqrt(x);
    }
    const int orders[4][4] = {
        {0, 1, 2, 3}, {3, 2, 1, 0}, {0, 2, 1, 3}, {3, 1, 2, 0}};

    TimeSeriesDataset ds;
    ds.context_len = 72;
    ds.pred_len = 24;
    ds.stride = 24;
    Rng rng(seed);

    for (int s = 0; s < 4; ++s) {
        // Tile repeats+1 cycles and drop the first block: the 72-point
        // lead-in keeps contexts cyclically consistent and aligns window m
        // (m = 0..4*repeats-1) with pattern orders[s][m % 4].
        std::vector<double> z;
        z.reserve(static_cast<std::size_t>(96) * repeats + 72);
        Rng noise = rng.split(s);
        for (int cycle = 0; cycle <= repeats; ++cycle) {
            for (int block = 0; block < 4; ++block) {
                if (cycle == 0 && block == 0) continue;
                const auto& pat = patterns[orders[s][block]];
                for (double v : pat) z.push_back(v + noise_scale * noise.next_gaussian());
            }
        }
        ds.series.push_back(std::move(z));
    }
    ds.validate();

    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(16) * repeats);
    for (int s = 0; s < 4; ++s)
        for (int m = 0; m < 4 * repeats; ++m)
            labels.push_back(4 * s + orders[s][m % 4]);
    return {std::move(ds), std::move(labels)};
}

/// Per-series z-score normalization; constant series are left centered.
inline TimeSeriesDataset normalize_per_series(TimeSeriesDataset ds) {
    for (auto& z : ds.series) {
        if (z.empty()) continue;
        double mean = 0;
        for (double v : z) mean += v;
        mean /= static_cast<double>(z.size());
        double var = 0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= static_cast<double>(z.size());
        const double sd = std::sqrt(var);
        for (double& v : z) v = sd > 0 ? (v - mean) / sd : v - mean;
    }
    return ds;
}

inline void write_labels(const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_labels: cannot open '" + path + "' for writing");
    for (int l : labels) out << l << "\n";
}

inline std::vector<int> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_labels: cannot open '" + path + "'");
    std::vector<int> labels;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        try {
            std::size_t pos = 0;
            int v = std::stoi(line, &pos);
            if (pos != line.size()) throw std::invalid_argument(line);
            labels.push_back(v);
        } catch (const std::exception&) {
            throw std::runtime_error("load_labels: " + path + ": row " +
                                     std::to_string(row) + ": not an integer: '" +
                                     line + "'");
        }
    }
    return labels;
}

}  // namespace scott
