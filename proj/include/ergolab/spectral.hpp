#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ergolab/correlation.hpp"
#include "ergolab/errors.hpp"
#include "ergolab/systems.hpp"

namespace ergolab {

// Estimated spectral measure on the circle: an absolutely-continuous part
// sampled on the grid theta_j = j / grid_size plus extracted atoms. The
// accounting identity (1/M) sum density + sum atom masses = total_mass holds
// by construction: atom extraction moves grid mass into the atom list.
struct SpectralEstimate {
    int grid_size = 0;
    std::vector<double> density;
    std::vector<std::pair<double, double>> atoms; // (location, mass)
    double total_mass = 0.0;

    double grid_mass() const {
        double s = 0.0;
        for (double d : density) s += d;
        return s / static_cast<double>(grid_size);
    }

    double atom_mass() const {
        double s = 0.0;
        for (const auto& [loc, m] : atoms) {
            (void)loc;
            s += m;
        }
        return s;
    }
};

namespace detail {

inline std::int64_t symmetric_range(const CorrelationSequence& c) {
    std::int64_t max_lag = 0;
    for (const auto& [n, v] : c.values) {
        (void)v;
        max_lag = std::max(max_lag, std::abs(n));
    }
    std::vector<std::int64_t> needed;
    for (std::int64_t n = -max_lag; n <= max_lag; ++n) needed.push_back(n);
    const auto miss = c.missing(needed);
    if (!miss.empty()) {
        std::ostringstream os;
        os << "spectral estimate: lags must cover a full symmetric range; missing";
        for (std::size_t k = 0; k < miss.size() && k < 8; ++k) os << ' ' << miss[k];
        if (miss.size() > 8) os << " ...";
        throw input_error(os.str());
    }
    return max_lag;
}

} // namespace detail

// Cesaro-weighted trigonometric sum of the coefficients:
//   density(theta_j) = sum_{|n|<=L} (1 - |n|/(L+1)) c(n) e^{-2 pi i n theta_j}.
// The kernel is nonnegative, so positive-definite input gives a nonnegative
// density up to rounding. Grid peaks above 5x the median are treated as
// atoms: their mass is integrated over a +-2/L window and moved out of the
// density, keeping the total equal to c(0).
inline SpectralEstimate fejer_estimate(const CorrelationSequence& c, int grid_size) {
    if (!c.hermitian)
        throw input_error("fejer_estimate: needs an f = g correlation sequence (positive-definite)");
    const std::int64_t max_lag = detail::symmetric_range(c);
    if (grid_size < std::max<std::int64_t>(4 * max_lag, 8))
        throw input_error("fejer_estimate: grid size must be at least max(4L, 8)");

    SpectralEstimate est;
    est.grid_size = grid_size;
    est.total_mass = c.mass.real();
    est.density.assign(static_cast<std::size_t>(grid_size), 0.0);

    const double l1 = static_cast<double>(max_lag) + 1.0;
    for (int j = 0; j < grid_size; ++j) {
        const double theta = static_cast<double>(j) / static_cast<double>(grid_size);
        double d = c.at(0).real();
        for (std::int64_t n = 1; n <= max_lag; ++n) {
            const double w = 1.0 - static_cast<double>(n) / l1;
            // c(-n) = conj(c(n)), so the +-n pair contributes twice the real part
            const Complex term = c.at(n) * detail::unit_phase(-detail::frac(
                                               static_cast<double>(n) * theta));
            d += 2.0 * w * term.real();
        }
        est.density[static_cast<std::size_t>(j)] = d;
    }

    // atom extraction
    std::vector<double> sorted = est.density;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const std::int64_t halfwidth =
        std::max<std::int64_t>(1, (2 * grid_size) / std::max<std::int64_t>(max_lag, 1));
    for (int round = 0; round < 32; ++round) {
        std::size_t peak = 0;
        for (std::size_t j = 1; j < est.density.size(); ++j)
            if (est.density[j] > est.density[peak]) peak = j;
        const double peak_value = est.density[peak];
        if (peak_value <= std::max(5.0 * median, 1e-12 * l1)) break;
        double mass = 0.0;
        for (std::int64_t o = -halfwidth; o <= halfwidth; ++o) {
            const std::size_t j = static_cast<std::size_t>(
                ((static_cast<std::int64_t>(peak) + o) % grid_size + grid_size) % grid_size);
            mass += est.density[j];
            est.density[j] = 0.0;
        }
        mass /= static_cast<double>(grid_size);
        est.atoms.emplace_back(static_cast<double>(peak) / static_cast<double>(grid_size), mass);
    }
    std::sort(est.atoms.begin(), est.atoms.end());
    return est;
}

// (1/N) sum_{n=1..N} |c(n)|^2; tends to the sum of squared atom masses.
inline double wiener_atom_mass(const CorrelationSequence& c, std::int64_t window) {
    if (!c.hermitian)
        throw input_error("wiener_atom_mass: needs an f = g correlation sequence");
    if (window < 1) throw input_error("wiener_atom_mass: window must be positive");
    std::vector<std::int64_t> needed;
    for (std::int64_t n = 1; n <= window; ++n) needed.push_back(n);
    const auto miss = c.missing(needed);
    if (!miss.empty()) throw input_error("wiener_atom_mass: lags 1..N must all be present");
    double s = 0.0;
    for (std::int64_t n = 1; n <= window; ++n) s += std::norm(c.at(n));
    return s / static_cast<double>(window);
}

// Coefficientwise product: the Fourier coefficients of the convolution of the
// two underlying measures.
inline CorrelationSequence convolve_coefficients(const CorrelationSequence& c1,
                                                 const CorrelationSequence& c2) {
    if (c1.values.size() != c2.values.size())
        throw input_error("convolve_coefficients: lag ranges differ");
    for (const auto& [n, v] : c1.values) {
        (void)v;
        if (!c2.values.count(n))
            throw input_error("convolve_coefficients: lag ranges differ");
    }
    CorrelationSequence out;
    out.hermitian = c1.hermitian && c2.hermitian;
    out.centered = c1.centered || c2.centered;
    for (const auto& [n, v] : c1.values) out.values[n] = v * c2.values.at(n);
    out.mass = c1.mass * c2.mass;
    return out;
}

// For each threshold, the least present lag N with sup_{N <= n <= L} |c(n)|
// below it, evaluated over the positive lags the sequence actually holds.
struct RajchmanRow {
    double threshold = 0.0;
    bool attained = false;
    std::int64_t least_start = 0; // valid when attained
    double tail_sup = 0.0;        // sup over lags >= least_start (or over all, when not attained)
};

inline std::vector<RajchmanRow> rajchman_report(const CorrelationSequence& c,
                                                const std::vector<double>& thresholds) {
    std::vector<std::int64_t> lags;
    for (const auto& [n, v] : c.values) {
        (void)v;
        if (n >= 1) lags.push_back(n);
    }
    if (lags.empty()) throw input_error("rajchman_report: needs positive lags");
    std::sort(lags.begin(), lags.end());
    std::vector<double> suffix_sup(lags.size());
    double running = 0.0;
    for (std::size_t i = lags.size(); i-- > 0;) {
        running = std::max(running, std::abs(c.at(lags[i])));
        suffix_sup[i] = running;
    }
    std::vector<RajchmanRow> rows;
    rows.reserve(thresholds.size());
    for (double eps : thresholds) {
        RajchmanRow row;
        row.threshold = eps;
        row.attained = false;
        row.tail_sup = suffix_sup.front();
        for (std::size_t i = 0; i < lags.size(); ++i) {
            if (suffix_sup[i] <= eps) {
                row.attained = true;
                row.least_start = lags[i];
                row.tail_sup = suffix_sup[i];
                break;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace ergolab
