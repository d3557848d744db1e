#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "scott/dataset.hpp"
#include "scott/rng.hpp"

namespace scott {

/// A partition of example indices into B non-empty strata with weights
/// w_i = |D_i| / |D|. Strata are disjoint and cover every index exactly once.
struct Stratification {
    std::vector<std::vector<std::size_t>> strata;
    std::vector<double> weights;

    std::size_t num_strata() const { return strata.size(); }

    std::size_t total_examples() const {
        std::size_t n = 0;
        for (const auto& s : strata) n += s.size();
        return n;
    }

    void validate(std::size_t n_examples) const {
        if (strata.empty()) throw std::invalid_argument("stratification: no strata");
        if (weights.size() != strata.size())
            throw std::invalid_argument("stratification: weight count mismatch");
        std::vector<char> seen(n_examples, 0);
        double wsum = 0;
        for (std::size_t i = 0; i < strata.size(); ++i) {
            if (strata[i].empty())
                throw std::invalid_argument("stratification: empty stratum");
            for (std::size_t idx : strata[i]) {
                if (idx >= n_examples || seen[idx])
                    throw std::invalid_argument("stratification: not a partition");
                seen[idx] = 1;
            }
            wsum += weights[i];
        }
        for (char s : seen)
            if (!s) throw std::invalid_argument("stratification: uncovered example");
        if (std::abs(wsum - 1.0) > 1e-12)
            throw std::invalid_argument("stratification: weights do not sum to 1");
    }
};

namespace detail {

inline Stratification finalize(std::vector<std::vector<std::size_t>> strata,
                               std::size_t n_examples) {
    Stratification out;
    for (auto& s : strata)
        if (!s.empty()) out.strata.push_back(std::move(s));
    if (out.strata.empty())
        throw std::invalid_argument("stratification: no non-empty strata");
    out.weights.resize(out.strata.size());
    for (std::size_t i = 0; i < out.strata.size(); ++i)
        out.weights[i] = static_cast<double>(out.strata[i].size()) /
                         static_cast<double>(n_examples);
    out.validate(n_examples);
    return out;
}

}  // namespace detail

/// Stratum of an example is t0 mod modulus. Residue classes that occur in
/// the data become strata in residue order; empty classes are dropped and
/// the weights renormalize over the survivors.
inline Stratification stratify_mod_timestamp(const std::vector<TrainingExample>& examples,
                                             int modulus) {
    if (modulus < 1) throw std::invalid_argument("stratify_mod_timestamp: modulus must be >= 1");
    if (examples.empty()) throw std::invalid_argument("stratify_mod_timestamp: no examples");
    std::vector<std::vector<std::size_t>> strata(modulus);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        int r = examples[i].t0 % modulus;
        if (r < 0) r += modulus;
        strata[r].push_back(i);
    }
    return detail::finalize(std::move(strata), examples.size());
}

using HierKey = std::vector<int>;
using HierKeyFn = std::function<HierKey(const TrainingExample&)>;

/// One stratum per distinct key tuple, ordered lexicographically by key.
inline Stratification stratify_hierarchical(const std::vector<TrainingExample>& examples,
                                            const HierKeyFn& key_fn) {
    if (examples.empty()) throw std::invalid_argument("stratify_hierarchical: no examples");
    std::map<HierKey, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < examples.size(); ++i)
        buckets[key_fn(examples[i])].push_back(i);
    std::vector<std::vector<std::size_t>> strata;
    strata.reserve(buckets.size());
    for (auto& [key, idx] : buckets) strata.push_back(std::move(idx));
    return detail::finalize(std::move(strata), examples.size());
}

/// Built-in (weekday, season) key for hourly timestamps:
/// weekday = (t0 / 24) mod 7, season = (t0 / (24 * 90)) mod 4.
inline HierKey weekday_season_key(const TrainingExample& ex) {
    return {(ex.t0 / 24) % 7, (ex.t0 / (24 * 90)) % 4};
}

/// Seeded shuffle followed by round-robin assignment into B strata.
/// Stratum sizes differ by at most one.
inline Stratification stratify_random_hash(const std::vector<TrainingExample>& examples,
                                           int n_strata, std::uint64_t seed) {
    if (examples.empty()) throw std::invalid_argument("stratify_random_hash: no examples");
    if (n_strata < 1 || static_cast<std::size_t>(n_strata) > examples.size())
        throw std::invalid_argument(
            "stratify_random_hash: need 1 <= B <= number of examples");
    std::vector<std::size_t> perm(examples.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(perm);
    std::vector<std::vector<std::size_t>> strata(n_strata);
    for (std::size_t i = 0; i < perm.size(); ++i)
        strata[i % n_strata].push_back(perm[i]);
    return detail::finalize(std::move(strata), examples.size());
}

/// B = |D| singleton strata; every within-stratum variance is exactly zero.
inline Stratification stratify_finest(std::size_t n_examples) {
    if (n_examples == 0) throw std::invalid_argument("stratify_finest: no examples");
    std::vector<std::vector<std::size_t>> strata(n_examples);
    for (std::size_t i = 0; i < n_examples; ++i) strata[i] = {i};
    return detail::finalize(std::move(strata), n_examples);
}

/// One stratum per distinct label, in first-seen order.
inline Stratification stratify_ground_truth(const std::vector<TrainingExample>& examples,
                                            const std::vector<int>& labels) {
    if (examples.empty()) throw std::invalid_argument("stratify_ground_truth: no examples");
    if (labels.size() != examples.size())
        throw std::invalid_argument("stratify_ground_truth: got " +
                                    std::to_string(labels.size()) + " labels for " +
                                    std::to_string(examples.size()) + " examples");
    std::vector<int> order;
    std::map<int, std::size_t> pos;
    std::vector<std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = pos.find(labels[i]);
        if (it == pos.end()) {
            it = pos.emplace(labels[i], strata.size()).first;
            strata.emplace_back();
        }
        strata[it->second].push_back(i);
    }
    return detail::finalize(std::move(strata), examples.size());
}

/// Parses a policy string: "mod:<P>", "hier:weekday-season",
/// "random:<B>:<seed>", "finest", "labels:<path>", or "truth" (use the
/// labels supplied by a generator).
inline Stratification make_stratification(const std::string& policy,
                                          const std::vector<TrainingExample>& examples,
                                          const std::vector<int>* generator_labels = nullptr) {
    auto next_field = [](const std::string& s, std::size_t& pos) {
        std::size_t colon = s.find(':', pos);
        std::string field = colon == std::string::npos ? s.substr(pos)
                                                       : s.substr(pos, colon - pos);
        pos = colon == std::string::npos ? s.size() : colon + 1;
        return field;
    };
    std::size_t pos = 0;
    const std::string head = next_field(policy, pos);
    try {
        if (head == "mod") {
            return stratify_mod_timestamp(examples, std::stoi(next_field(policy, pos)));
        } else if (head == "hier") {
            const std::string key = next_field(policy, pos);
            if (key != "weekday-season")
                throw std::invalid_argument("unknown hierarchical key '" + key + "'");
            return stratify_hierarchical(examples, weekday_season_key);
        } else if (head == "random") {
            int b = std::stoi(next_field(policy, pos));
            std::uint64_t seed = std::stoull(next_field(policy, pos));
            return stratify_random_hash(examples, b, seed);
        } else if (head == "finest") {
            return stratify_finest(examples.size());
        } else if (head == "labels") {
            return stratify_ground_truth(examples, load_labels(policy.substr(pos)));
        } else if (head == "truth") {
            if (!generator_labels)
                throw std::invalid_argument("dataset provides no ground-truth labels");
            return stratify_ground_truth(examples, *generator_labels);
        }
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("stratification '" + policy + "': " + e.what());
    }
    throw std::invalid_argument("unknown stratification policy '" + policy + "'");
}

}  // namespace scott
