#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "afrelay/linalg.hpp"

namespace afrelay {

/// Seedable, splittable random stream. Children derived with `split` are
/// independent of the parent's consumption state, so per-trial streams can be
/// built from (seed, index) without sharing any global generator.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    RngStream split(std::uint64_t index) const {
        return RngStream(mix(seed_ ^ mix(index + 0x632be59bd9b4e019ULL)));
    }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t bits() { return engine_(); }

    // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    Complex complex_gaussian(double variance = 1.0) {
        const double scale = std::sqrt(0.5 * variance);
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {scale * re, scale * im};
    }

    CMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double variance = 1.0) {
        CMatrix m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_gaussian(variance);
        return m;
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace afrelay
