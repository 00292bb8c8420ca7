#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace fp {

// Self-contained splitmix64 generator. Standard-library distributions are
// implementation-defined, so everything that needs reproducible draws
// (weight init, shuffles, Bernoulli gates, candidate perturbations) goes
// through this.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n == 0 returns 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) return 0;
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller; the second draw of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derives an independent stream seed from a base seed and a tag path,
// e.g. derive(seed, {kStreamEval, round, eval_idx}).
inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    Rng h(seed);
    std::uint64_t out = h.next_u64();
    for (std::uint64_t t : tags) {
        Rng m(out ^ (t + 0x9e3779b97f4a7c15ULL));
        out = m.next_u64();
    }
    return out;
}

// Stream tags used across the run orchestration.
enum Stream : std::uint64_t {
    kStreamData = 1,
    kStreamSplit,
    kStreamPretrain,
    kStreamInitFt,
    kStreamWarm,
    kStreamEval,
    kStreamBo,
    kStreamApply,
    kStreamFt,
    kStreamPool,
    kStreamPerturb,
    kStreamHead,
};

// Van der Corput radical inverse.
inline double radical_inverse(std::uint64_t index, std::uint32_t base) {
    double inv_base = 1.0 / base;
    double scale = inv_base;
    double value = 0.0;
    while (index > 0) {
        value += static_cast<double>(index % base) * scale;
        index /= base;
        scale *= inv_base;
    }
    return value;
}

inline constexpr std::uint32_t kHaltonPrimes[] = {
    2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,  37,  41,  43,  47,
    53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113};

// Halton point (1-based index) in [0,1)^dim with a per-dimension
// Cranley-Patterson rotation. dim is capped by the prime table.
inline void halton_point(std::uint64_t index, const std::vector<double>& rotation,
                         std::vector<double>& out) {
    out.resize(rotation.size());
    for (std::size_t i = 0; i < rotation.size(); ++i) {
        double u = radical_inverse(index, kHaltonPrimes[i]) + rotation[i];
        out[i] = u - std::floor(u);
    }
}

}  // namespace fp
