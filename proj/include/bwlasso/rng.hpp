// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace bwlasso {

/// Seedable generator whose output sequence is identical on every platform.
///
/// The engine is std::mt19937_64, whose raw 64-bit stream is fixed by the C++
/// standard. The library distributions (std::normal_distribution, ...) are
/// implementation-defined, so every mapping from raw words to values is done
/// here instead:
///   uniform()   = (word >> 11) * 2^-53, in [0, 1)
///   below(n)    = word % n  (callers only use powers of two)
///   gaussian()  = Box-Muller on two uniform() draws, cosine branch only
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) { return next() % n; }

    double gaussian() {
        // 1 - u keeps the log argument in (0, 1].
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Circular complex Gaussian with E|z|^2 = 1.
    std::complex<double> complex_gaussian() {
        const double re = gaussian();
        const double im = gaussian();
        return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace bwlasso
