#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "eivsub/errors.hpp"
#include "eivsub/types.hpp"

// Splittable, counter-keyed random streams.  Every consumer derives its own
// stream from (master seed, replication id, stage id), so results are
// identical no matter how work is scheduled across threads.

namespace eivsub::rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Collapse (master, rep, stage) into a single well-mixed key.
inline std::uint64_t derive_key(std::uint64_t master, std::uint64_t rep,
                                std::uint64_t stage) {
    std::uint64_t x = splitmix64(master ^ 0x6A09E667F3BCC909ULL);
    x = splitmix64(x + rep * 0x9E3779B97F4A7C15ULL);
    x = splitmix64(x + stage * 0xD1B54A32D192ED03ULL);
    return x;
}

// xoshiro256++ (Blackman & Vigna), seeded via splitmix64.
class Stream {
public:
    explicit Stream(std::uint64_t key) {
        std::uint64_t x = key;
        for (auto& si : s_) {
            x = splitmix64(x);
            si = x;
        }
        have_spare_ = false;
    }

    std::uint64_t u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1).
    double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1); safe as a log/division argument.
    double uniform01_open() {
        return (static_cast<double>(u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    bool bernoulli(double q) { return uniform01() < q; }

    // Marsaglia polar method with a cached spare.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    double exponential(double mean) { return -mean * std::log(uniform01_open()); }

    // Marsaglia-Tsang; shape < 1 handled by the boosting identity.
    double gamma(double shape, double scale) {
        if (shape <= 0 || scale <= 0)
            throw parameter_error("gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = uniform01_open();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v * scale;
        }
    }

    double chi_squared(double df) { return gamma(0.5 * df, 2.0); }

    // Unbiased bounded integer in [0, n) (Lemire).
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw parameter_error("uniform_int: n must be >= 1");
        unsigned __int128 m = static_cast<unsigned __int128>(u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t t = (-n) % n;
            while (lo < t) {
                m = static_cast<unsigned __int128>(u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline Stream stream(std::uint64_t master, std::uint64_t rep, std::uint64_t stage) {
    return Stream(derive_key(master, rep, stage));
}

// Stage tags so independent uses of the same (master, rep) never collide.
namespace stage {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t pilot_draw = 2;
inline constexpr std::uint64_t main_draw = 3;
inline constexpr std::uint64_t inject = 4;
inline constexpr std::uint64_t draw = 5;
// Perturbation replicate k, retry attempt a (a <= 7).
inline constexpr std::uint64_t weights(std::uint64_t k, std::uint64_t attempt) {
    return 0x1000 + k * 8 + attempt;
}
// Benchmark cell c, sub-stage s.
inline constexpr std::uint64_t bench_cell(std::uint64_t c, std::uint64_t s) {
    return 0x40000000ULL + c * 16 + s;
}
}  // namespace stage

// Draws categories with probability proportional to the given weights.
// Prefix sums are Kahan-accumulated; zero-weight categories are never drawn.
class CategoricalSampler {
public:
    explicit CategoricalSampler(const Vector& probs) : cdf_(probs.size()) {
        if (probs.size() == 0)
            throw empty_dataset_error("CategoricalSampler: empty probability vector");
        double sum = 0.0, comp = 0.0;
        last_positive_ = -1;
        for (Index i = 0; i < probs.size(); ++i) {
            const double pi = probs[i];
            if (pi < 0) throw parameter_error("CategoricalSampler: negative probability");
            if (pi > 0) last_positive_ = i;
            const double t = pi - comp;
            const double next = sum + t;
            comp = (next - sum) - t;
            sum = next;
            cdf_[i] = next;
        }
        total_ = sum;
        if (!(total_ > 0))
            throw degenerate_plan_error("CategoricalSampler: all probabilities zero");
    }

    Index draw(Stream& s) const {
        const double u = s.uniform01() * total_;
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) return last_positive_;
        Index idx = static_cast<Index>(it - cdf_.begin());
        // Guard against landing on a zero-weight slot through rounding.
        while (idx > 0 && cdf_[idx] == cdf_[idx - 1]) --idx;
        return idx;
    }

private:
    std::vector<double> cdf_;
    double total_ = 0.0;
    Index last_positive_ = -1;
};

}  // namespace eivsub::rng
