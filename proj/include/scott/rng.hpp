#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace scott {

// Counter-based splittable PRNG (splitmix64 output function).
//
// Every stream is a pure function of (key, counter), so child streams split
// off a parent are independent of the order in which they are consumed.
// Runs stay reproducible even if strata are sampled in a different order or
// concurrently.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ kKeyTag)) {}

    // Derives an independent child stream. Children with distinct ids never
    // collide with each other or with the parent.
    Rng split(std::uint64_t stream_id) const {
        Rng child;
        child.key_ = mix(key_ + kGolden * (stream_id + 1));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t next_u64() { return mix(key_ + kGolden * ++counter_); }

    // Uniform on [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe as a log() argument.
    double next_double_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Multiply-shift; bias is O(n / 2^64).
    std::size_t next_below(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller. Consumes exactly two uniforms.
    double next_gaussian() {
        const double u = next_double_pos();
        const double v = next_double();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * kPi * v);
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kKeyTag = 0x5CA1AB1E0DDBA11ULL;
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace scott
