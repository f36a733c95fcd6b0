#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace ergolab::detail {

// Deterministic random numbers. mt19937_64 output is pinned by the standard;
// the mappings below avoid std::*_distribution, whose streams are
// implementation-defined, so fixed seeds give byte-identical results anywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is fine here: n is tiny relative to 2^64 in
        // all uses, so the bias is far below anything observable.
        return eng_() % n;
    }

    // Standard normal via Box-Muller.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::complex<double> complex_gaussian() {
        return {gaussian(), gaussian()};
    }

    // Random unit vector in C^d.
    std::vector<std::complex<double>> unit_vector(int d) {
        std::vector<std::complex<double>> v(d);
        double norm2 = 0.0;
        for (auto& z : v) {
            z = complex_gaussian();
            norm2 += std::norm(z);
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& z : v) z *= inv;
        return v;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace ergolab::detail
