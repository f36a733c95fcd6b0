#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ergolab/correlation.hpp"
#include "ergolab/detail/rng.hpp"
#include "ergolab/errors.hpp"

namespace ergolab {

// Sequence-based stand-ins for limits along ultrafilters:
//   subsequence   - limit of c(n_k) along an explicit index list
//   folner_cesaro - Cesaro averages (1/N) sum_{n<N} |c(n)| over growing windows [0,N)
//   ip_grid       - c over all finite sums of distinct generators (IP-set proxy)
//   tail_sup      - sup |c(n)| over n >= start (strong-mixing proxy)
struct LimitScheme {
    enum class Kind { subsequence, folner_cesaro, ip_grid, tail_sup };

    Kind kind = Kind::subsequence;
    std::vector<std::int64_t> indices;   // subsequence
    std::vector<std::int64_t> windows;   // folner_cesaro: N_1 < N_2 < ...
    std::vector<std::int64_t> generators; // ip_grid
    int depth = 0;                        // ip_grid: uses the first `depth` generators
    std::int64_t start = 0;               // tail_sup

    static LimitScheme subsequence(std::vector<std::int64_t> idx) {
        if (idx.size() < 2) throw input_error("subsequence scheme: need at least 2 indices");
        for (std::size_t k = 0; k + 1 < idx.size(); ++k)
            if (idx[k] >= idx[k + 1])
                throw input_error("subsequence scheme: indices must be strictly increasing");
        LimitScheme s;
        s.kind = Kind::subsequence;
        s.indices = std::move(idx);
        return s;
    }

    static LimitScheme folner_cesaro(std::vector<std::int64_t> win) {
        if (win.empty()) throw input_error("folner_cesaro scheme: need at least one window");
        for (std::size_t k = 0; k + 1 < win.size(); ++k)
            if (win[k] >= win[k + 1])
                throw input_error("folner_cesaro scheme: window lengths must be strictly increasing");
        if (win.front() < 1) throw input_error("folner_cesaro scheme: windows must be >= 1");
        LimitScheme s;
        s.kind = Kind::folner_cesaro;
        s.windows = std::move(win);
        return s;
    }

    static LimitScheme ip_grid(std::vector<std::int64_t> gens, int depth) {
        if (gens.empty() || gens.size() > 20)
            throw input_error("ip_grid scheme: generator count must be in [1, 20]");
        if (depth < 1 || depth > static_cast<int>(gens.size()))
            throw input_error("ip_grid scheme: depth must be in [1, generator count]");
        LimitScheme s;
        s.kind = Kind::ip_grid;
        s.generators = std::move(gens);
        s.depth = depth;
        return s;
    }

    static LimitScheme tail_sup(std::int64_t start) {
        LimitScheme s;
        s.kind = Kind::tail_sup;
        s.start = start;
        return s;
    }

    // All nonempty sums of distinct generators among the first `depth`.
    std::vector<std::int64_t> ip_sums() const {
        std::vector<std::int64_t> sums;
        const std::uint32_t top = 1u << depth;
        sums.reserve(top - 1);
        for (std::uint32_t mask = 1; mask < top; ++mask) {
            std::int64_t s = 0;
            for (int b = 0; b < depth; ++b)
                if (mask & (1u << b)) s += generators[static_cast<std::size_t>(b)];
            sums.push_back(s);
        }
        return sums;
    }

    std::string name() const {
        switch (kind) {
            case Kind::subsequence: return "subsequence";
            case Kind::folner_cesaro: return "folner_cesaro";
            case Kind::ip_grid: return "ip_grid";
            case Kind::tail_sup: return "tail_sup";
        }
        return "?";
    }
};

struct LimitReport {
    Complex value{0.0, 0.0};
    bool converged = false;
    double deviation = 0.0;
    std::int64_t samples_used = 0;
};

namespace detail {

// Last-quarter stabilization over an ordered list of samples: the reported
// value is the final sample; deviation is the largest successive gap in the
// detection window.
inline LimitReport stabilize(const std::vector<Complex>& samples, double tol) {
    LimitReport rep;
    rep.samples_used = static_cast<std::int64_t>(samples.size());
    if (samples.empty()) throw input_error("limit evaluation: no samples");
    const std::size_t window = std::max<std::size_t>(samples.size() / 4, std::min<std::size_t>(samples.size(), 2));
    const std::size_t begin = samples.size() - window;
    double dev = 0.0;
    for (std::size_t k = begin; k + 1 < samples.size(); ++k)
        dev = std::max(dev, std::abs(samples[k + 1] - samples[k]));
    rep.value = samples.back();
    rep.deviation = dev;
    rep.converged = dev <= tol;
    return rep;
}

} // namespace detail

inline LimitReport evaluate_limit(const CorrelationSequence& c, const LimitScheme& scheme, double tol) {
    auto require_lags = [&c](const std::vector<std::int64_t>& lags) {
        const auto miss = c.missing(lags);
        if (!miss.empty()) {
            std::ostringstream os;
            os << "evaluate_limit: missing lags:";
            for (std::size_t k = 0; k < miss.size() && k < 16; ++k) os << ' ' << miss[k];
            if (miss.size() > 16) os << " ... (" << miss.size() << " total)";
            throw input_error(os.str());
        }
    };

    switch (scheme.kind) {
        case LimitScheme::Kind::subsequence: {
            require_lags(scheme.indices);
            std::vector<Complex> samples;
            samples.reserve(scheme.indices.size());
            for (auto n : scheme.indices) samples.push_back(c.at(n));
            return detail::stabilize(samples, tol);
        }
        case LimitScheme::Kind::folner_cesaro: {
            std::vector<std::int64_t> needed;
            needed.reserve(static_cast<std::size_t>(scheme.windows.back()));
            for (std::int64_t n = 0; n < scheme.windows.back(); ++n) needed.push_back(n);
            require_lags(needed);
            std::vector<Complex> averages;
            averages.reserve(scheme.windows.size());
            double running = 0.0;
            std::int64_t upto = 0;
            for (auto w : scheme.windows) {
                for (std::int64_t n = upto; n < w; ++n) running += std::abs(c.at(n));
                upto = w;
                averages.emplace_back(running / static_cast<double>(w), 0.0);
            }
            LimitReport rep = detail::stabilize(averages, tol);
            rep.samples_used = scheme.windows.back();
            return rep;
        }
        case LimitScheme::Kind::ip_grid: {
            const auto sums = scheme.ip_sums();
            require_lags(sums);
            Complex mean(0.0, 0.0);
            for (auto s : sums) mean += c.at(s);
            mean /= static_cast<double>(sums.size());
            double dev = 0.0;
            for (auto s : sums) dev = std::max(dev, std::abs(c.at(s) - mean));
            LimitReport rep;
            rep.value = mean;
            rep.deviation = dev;
            rep.converged = dev <= tol;
            rep.samples_used = static_cast<std::int64_t>(sums.size());
            return rep;
        }
        case LimitScheme::Kind::tail_sup: {
            double sup = 0.0;
            std::int64_t used = 0;
            for (const auto& [lag, val] : c.values) {
                if (lag >= scheme.start) {
                    sup = std::max(sup, std::abs(val));
                    ++used;
                }
            }
            if (used == 0)
                throw input_error("evaluate_limit: tail_sup has no lags >= start");
            LimitReport rep;
            rep.value = Complex(sup, 0.0);
            rep.deviation = 0.0;
            rep.converged = true;
            rep.samples_used = used;
            return rep;
        }
    }
    throw input_error("evaluate_limit: unknown scheme kind");
}

// ---------------------------------------------------------------------------
// Finitary averaging inequality (the one-step Cauchy-Schwarz bound behind the
// van der Corput-style arguments):
//   max_y |(1/N) sum_k <y, x_k>|^2  <=  (1/N^2) sum_{k,k'} <x_k, x_{k'}>
// for unit probes y. The probe set samples "for any y": the standard basis
// plus 32 seeded random unit vectors.

struct VdcInequality {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

inline VdcInequality vdc_inequality_check(const std::vector<std::vector<Complex>>& xs,
                                          std::size_t n_count) {
    if (xs.empty() || xs.size() != n_count)
        throw input_error("vdc_inequality_check: N must equal the number of vectors");
    const std::size_t d = xs.front().size();
    if (d == 0) throw input_error("vdc_inequality_check: vectors must be nonempty");
    for (const auto& x : xs) {
        if (x.size() != d) throw input_error("vdc_inequality_check: inconsistent dimensions");
        double norm2 = 0.0;
        for (const auto& z : x) norm2 += std::norm(z);
        if (std::sqrt(norm2) > 1.0 + 1e-12)
            throw input_error("vdc_inequality_check: a vector has norm > 1");
    }

    // <a, b> = sum a_i conj(b_i).
    auto inner = [d](const std::vector<Complex>& a, const std::vector<Complex>& b) {
        Complex acc(0.0, 0.0);
        for (std::size_t i = 0; i < d; ++i) acc += a[i] * std::conj(b[i]);
        return acc;
    };

    std::vector<Complex> mean(d, Complex(0.0, 0.0));
    for (const auto& x : xs)
        for (std::size_t i = 0; i < d; ++i) mean[i] += x[i];
    for (auto& z : mean) z /= static_cast<double>(n_count);

    std::vector<std::vector<Complex>> probes;
    probes.reserve(d + 32);
    for (std::size_t i = 0; i < d; ++i) {
        std::vector<Complex> e(d, Complex(0.0, 0.0));
        e[i] = Complex(1.0, 0.0);
        probes.push_back(std::move(e));
    }
    ergolab::detail::Rng rng(0x76dc5e11u);
    for (int k = 0; k < 32; ++k) probes.push_back(rng.unit_vector(static_cast<int>(d)));

    VdcInequality out;
    for (const auto& y : probes)
        out.lhs = std::max(out.lhs, std::norm(inner(y, mean)));
    // (1/N^2) sum_{k,k'} <x_k, x_{k'}> = ||mean||^2; evaluated directly.
    out.rhs = inner(mean, mean).real();
    out.holds = out.lhs <= out.rhs + 1e-12;
    return out;
}

// ---------------------------------------------------------------------------
// Conclusion step of the averaging lemma: if the scheme x scheme limit of
// <x_r, x_t> (r != t) has modulus <= tol, then the scheme limit of <y, x_n>
// has modulus <= sqrt(tol) + tol.

struct VdcConclusion {
    bool decided = false;       // both limits converged
    Complex double_limit{0.0, 0.0};
    Complex single_limit{0.0, 0.0};
    bool verdict = false;       // the implication, when decided
};

inline VdcConclusion vdc_conclusion_check(
        const std::map<std::pair<std::int64_t, std::int64_t>, Complex>& c2,
        const LimitScheme& scheme,
        const std::map<std::int64_t, Complex>& y_pairings,
        double tol) {
    if (scheme.kind != LimitScheme::Kind::subsequence)
        throw input_error("vdc_conclusion_check: only subsequence schemes are supported");
    const auto& idx = scheme.indices;
    if (idx.size() < 8) throw input_error("vdc_conclusion_check: need at least 8 indices");

    // Inner limits over t for each r (excluding the diagonal t = r, whose
    // entries are norms, not cross terms), then the outer limit over r.
    std::vector<Complex> outer_samples;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::vector<Complex> inner_samples;
        for (std::size_t t = 0; t < idx.size(); ++t) {
            if (t == r) continue;
            auto it = c2.find({idx[r], idx[t]});
            if (it == c2.end()) {
                std::ostringstream os;
                os << "vdc_conclusion_check: missing pair (" << idx[r] << ", " << idx[t] << ")";
                throw input_error(os.str());
            }
            inner_samples.push_back(it->second);
        }
        const LimitReport inner = detail::stabilize(inner_samples, tol);
        if (!inner.converged) {
            VdcConclusion out;
            out.decided = false;
            return out;
        }
        outer_samples.push_back(inner.value);
    }
    const LimitReport outer = detail::stabilize(outer_samples, tol);

    std::vector<Complex> y_samples;
    for (auto n : idx) {
        auto it = y_pairings.find(n);
        if (it == y_pairings.end()) {
            std::ostringstream os;
            os << "vdc_conclusion_check: missing y pairing at " << n;
            throw input_error(os.str());
        }
        y_samples.push_back(it->second);
    }
    const LimitReport single = detail::stabilize(y_samples, std::sqrt(tol) + tol);

    VdcConclusion out;
    out.decided = outer.converged && single.converged;
    out.double_limit = outer.value;
    out.single_limit = single.value;
    if (out.decided) {
        const bool hypothesis = std::abs(out.double_limit) <= tol;
        const bool conclusion = std::abs(out.single_limit) <= std::sqrt(tol) + tol;
        out.verdict = !hypothesis || conclusion;
    }
    return out;
}

} // namespace ergolab
