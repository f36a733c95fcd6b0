#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "ergolab/errors.hpp"

namespace ergolab::detail {

// Iterative radix-2 complex FFT, in place. Size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw input_error("fft: size must be a nonzero power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& z : a) z *= inv;
    }
}

// Biased cross-correlation: out[n] = (1/N) * sum_{k=0}^{N-1-n} f[k+n] * conj(g[k])
// for n = 0..max_lag, where N = f.size() = g.size(). The zero-padded (biased)
// normalization keeps autocorrelations exactly positive semidefinite.
inline std::vector<std::complex<double>> cross_correlation(
        const std::vector<std::complex<double>>& f,
        const std::vector<std::complex<double>>& g,
        std::size_t max_lag) {
    if (f.size() != g.size() || f.empty())
        throw input_error("cross_correlation: sequences must be nonempty and equally long");
    const std::size_t n = f.size();
    if (max_lag >= n)
        throw input_error("cross_correlation: max_lag must be < sequence length");

    // Direct evaluation wins for few lags; FFT wins for many.
    const double direct_cost = static_cast<double>(max_lag + 1) * static_cast<double>(n);
    if (direct_cost < 4.0e7) {
        std::vector<std::complex<double>> out(max_lag + 1);
        for (std::size_t lag = 0; lag <= max_lag; ++lag) {
            std::complex<double> acc(0.0, 0.0);
            for (std::size_t k = 0; k + lag < n; ++k) acc += f[k + lag] * std::conj(g[k]);
            out[lag] = acc / static_cast<double>(n);
        }
        return out;
    }

    std::size_t m = 1;
    while (m < n + max_lag + 1) m <<= 1;
    std::vector<std::complex<double>> fa(m, {0.0, 0.0}), gb(m, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) fa[k] = f[k];
    for (std::size_t k = 0; k < n; ++k) gb[k] = std::conj(g[k]);
    // Correlation via convolution with the reversed conjugate: index shift by n-1.
    std::reverse(gb.begin(), gb.begin() + static_cast<std::ptrdiff_t>(n));
    fft(fa, false);
    fft(gb, false);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= gb[k];
    fft(fa, true);
    std::vector<std::complex<double>> out(max_lag + 1);
    for (std::size_t lag = 0; lag <= max_lag; ++lag)
        out[lag] = fa[n - 1 + lag] / static_cast<double>(n);
    return out;
}

} // namespace ergolab::detail
