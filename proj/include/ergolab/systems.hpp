#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ergolab/correlation.hpp"
#include "ergolab/detail/fft.hpp"
#include "ergolab/detail/rng.hpp"
#include "ergolab/errors.hpp"

namespace ergolab {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

namespace detail {

inline double frac(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r = 0.0;
    if (r < 0.0) r = 0.0;
    return r;
}

inline Complex unit_phase(double turns) {
    const double ang = kTwoPi * turns;
    return Complex(std::cos(ang), std::sin(ang));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Base measures for the skew product: Lebesgue, or the uniform measure on the
// set of points whose base-4 digits are all 0 or 1, truncated at `truncation`
// digits.

struct BaseMeasure {
    enum class Kind { lebesgue, cantor4 };
    Kind kind = Kind::lebesgue;
    int truncation = 40;

    static BaseMeasure lebesgue() { return BaseMeasure{}; }

    static BaseMeasure cantor4(int truncation = 40) {
        if (truncation < 8) throw input_error("cantor4: truncation must be >= 8");
        BaseMeasure b;
        b.kind = Kind::cantor4;
        b.truncation = truncation;
        return b;
    }

    std::string name() const {
        if (kind == Kind::lebesgue) return "lebesgue";
        std::ostringstream os;
        os << "cantor4(" << truncation << ")";
        return os.str();
    }
};

// ---------------------------------------------------------------------------
// Fourier coefficients of the digit-restricted base-4 measure:
//   prod_{k=1..K} (1 + e^{-2 pi i n 4^{-k}}) / 2.
// The value is exactly 0 whenever the least-significant nonzero base-4 digit
// of |n| is 2 (that digit contributes the factor (1 + e^{-pi i}) / 2 = 0), so
// those cases bypass the floating product entirely. Phases are reduced in
// integer arithmetic: {n 4^{-k}} = (n mod 4^k) / 4^k. This makes the scaling
// identity value(4n, K) = value(n, K-1) hold bit for bit.

inline Complex cantor_fourier(std::int64_t n, int truncation = 40) {
    if (truncation < 8) throw input_error("cantor_fourier: truncation must be >= 8");
    if (n == 0) return Complex(1.0, 0.0);
    const std::uint64_t m =
        n < 0 ? static_cast<std::uint64_t>(-(n + 1)) + 1u : static_cast<std::uint64_t>(n);
    std::uint64_t t = m;
    while (t % 4 == 0) t /= 4;
    if (t % 4 == 2) return Complex(0.0, 0.0);
    Complex prod(1.0, 0.0);
    for (int k = 1; k <= truncation; ++k) {
        double phase;
        if (k < 32) {
            const std::uint64_t p4 = std::uint64_t(1) << (2 * k);
            phase = static_cast<double>(m % p4) / static_cast<double>(p4);
        } else {
            phase = static_cast<double>(m) * std::ldexp(1.0, -2 * k);
        }
        prod *= Complex(0.5 * (1.0 + std::cos(kTwoPi * phase)), -0.5 * std::sin(kTwoPi * phase));
    }
    return n < 0 ? std::conj(prod) : prod;
}

// sigma-hat(m) = integral of e^{-2 pi i m x} d(base measure).
inline Complex base_fourier(const BaseMeasure& base, std::int64_t m) {
    if (base.kind == BaseMeasure::Kind::lebesgue)
        return m == 0 ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
    return cantor_fourier(m, base.truncation);
}

// ---------------------------------------------------------------------------
// Observables: characters e^{2 pi i <freq, x>}, symbolic cylinders, and
// interval indicators. `centered` marks mean subtraction; empirical
// evaluations subtract the mean measured on the same window, exact
// evaluations subtract the analytic mean.

struct Observable {
    enum class Kind { character, cylinder, interval_indicator };

    std::string name;
    Kind kind = Kind::character;
    std::vector<std::int64_t> frequencies;
    std::string word;
    std::int64_t offset = 0;
    double a = 0.0;
    double b = 1.0;
    Complex mean{0.0, 0.0};
    bool mean_known = false;
    bool centered = false;

    static Observable character(std::vector<std::int64_t> freqs) {
        if (freqs.empty()) throw input_error("character: need at least one frequency");
        Observable o;
        o.kind = Kind::character;
        o.frequencies = std::move(freqs);
        bool all_zero = true;
        for (auto f : o.frequencies) all_zero = all_zero && f == 0;
        o.mean = all_zero ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
        o.mean_known = true;
        std::ostringstream os;
        os << "e(";
        for (std::size_t i = 0; i < o.frequencies.size(); ++i)
            os << (i ? "," : "") << o.frequencies[i];
        os << ")";
        o.name = os.str();
        return o;
    }

    static Observable cylinder(std::string word, std::int64_t offset = 0) {
        if (word.empty()) throw input_error("cylinder: empty word");
        if (offset < -512 || offset + static_cast<std::int64_t>(word.size()) > 512)
            throw input_error("cylinder: offset out of the supported range [-512, 512]");
        Observable o;
        o.kind = Kind::cylinder;
        o.word = std::move(word);
        o.offset = offset;
        std::ostringstream os;
        os << "[" << o.word << "]";
        if (offset != 0) os << "@" << offset;
        o.name = os.str();
        return o;
    }

    static Observable interval_indicator(double a, double b) {
        if (!(0.0 <= a && a < b && b <= 1.0))
            throw input_error("interval_indicator: need 0 <= a < b <= 1");
        Observable o;
        o.kind = Kind::interval_indicator;
        o.a = a;
        o.b = b;
        o.mean = Complex(b - a, 0.0);
        o.mean_known = true;
        std::ostringstream os;
        os << "1[" << a << "," << b << ")";
        o.name = os.str();
        return o;
    }

    Observable with_centering() const {
        Observable o = *this;
        o.centered = true;
        o.name = "centered " + name;
        return o;
    }

    Observable with_mean(Complex m) const {
        Observable o = *this;
        o.mean = m;
        o.mean_known = true;
        return o;
    }

    // Identity as a function (the display name does not participate).
    bool same_function(const Observable& o) const {
        return kind == o.kind && frequencies == o.frequencies && word == o.word &&
               offset == o.offset && a == o.a && b == o.b && centered == o.centered;
    }
};

// ---------------------------------------------------------------------------
// Systems over the integer action n -> T^n.

struct System {
    enum class Family { rotation, skew_torus, chacon, rudin_shapiro, iet };

    std::string name;
    Family family = Family::rotation;
    double alpha = 0.0;
    bool alpha_likely_rational = false;
    BaseMeasure base;
    std::vector<double> lengths;
    std::vector<int> order; // order[j] = original subinterval placed j-th after the exchange

    static System rotation(double alpha);
    static System skew_torus(BaseMeasure base);
    static System chacon();
    static System rudin_shapiro();
    static System iet(std::vector<double> lengths, std::vector<int> permutation);

    std::string family_name() const {
        switch (family) {
            case Family::rotation: return "rotation";
            case Family::skew_torus: return "skew_torus";
            case Family::chacon: return "chacon";
            case Family::rudin_shapiro: return "rudin_shapiro";
            case Family::iet: return "iet";
        }
        return "?";
    }
};

namespace detail {

// Doubles are all rational; this flags only values indistinguishable from a
// fraction with denominator up to 10^5. The 1e-13 tolerance sits far below
// 1/q^2, so generic irrationals never trip it. Metadata only.
inline bool looks_rational(double alpha) {
    const double x = detail::frac(alpha);
    for (std::int64_t q = 1; q <= 100000; ++q) {
        const double t = x * static_cast<double>(q);
        if (std::abs(t - std::round(t)) < 1e-13 * static_cast<double>(q)) return true;
    }
    return false;
}

// Validates an exchange permutation given either zero-based or one-based and
// returns it zero-based.
inline std::vector<int> normalize_permutation(std::vector<int> perm, std::size_t m) {
    if (perm.size() != m) throw input_error("iet: permutation size must match interval count");
    const bool has_zero = std::find(perm.begin(), perm.end(), 0) != perm.end();
    if (!has_zero) {
        for (auto& v : perm) --v;
    }
    std::vector<char> seen(m, 0);
    for (int v : perm) {
        if (v < 0 || static_cast<std::size_t>(v) >= m || seen[static_cast<std::size_t>(v)])
            throw input_error("iet: permutation is not a bijection of the subintervals");
        seen[static_cast<std::size_t>(v)] = 1;
    }
    return perm;
}

} // namespace detail

inline System System::rotation(double alpha) {
    if (!std::isfinite(alpha)) throw input_error("rotation: alpha must be finite");
    System s;
    s.family = Family::rotation;
    s.alpha = detail::frac(alpha);
    s.alpha_likely_rational = detail::looks_rational(s.alpha);
    std::ostringstream os;
    os << "rotation(" << s.alpha << ")";
    s.name = os.str();
    return s;
}

inline System System::skew_torus(BaseMeasure base) {
    System s;
    s.family = Family::skew_torus;
    s.base = base;
    s.name = "skew_torus(" + base.name() + ")";
    return s;
}

inline System System::chacon() {
    System s;
    s.family = Family::chacon;
    s.name = "chacon";
    return s;
}

inline System System::rudin_shapiro() {
    System s;
    s.family = Family::rudin_shapiro;
    s.name = "rudin_shapiro";
    return s;
}

inline System System::iet(std::vector<double> lengths, std::vector<int> permutation) {
    if (lengths.size() < 2) throw input_error("iet: need at least 2 subintervals");
    double sum = 0.0;
    for (double l : lengths) {
        if (!(l > 0.0)) throw input_error("iet: subinterval lengths must be positive");
        sum += l;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw input_error("iet: lengths must sum to 1 within 1e-12");
    System s;
    s.family = Family::iet;
    s.lengths = std::move(lengths);
    s.order = detail::normalize_permutation(std::move(permutation), s.lengths.size());
    std::ostringstream os;
    os << "iet-" << s.lengths.size();
    s.name = os.str();
    return s;
}

// ---------------------------------------------------------------------------
// Tower heights of the rank-one construction behind the 0 -> 0010, 1 -> 1
// substitution: h_0 = 1, h_{k+1} = 3 h_k + 1. h_39 still fits 64 bits.

inline std::vector<std::int64_t> chacon_heights(int count) {
    if (count < 1) throw input_error("chacon_heights: count must be positive");
    if (count > 40) throw input_error("chacon_heights: count capped at 40 so heights fit 64 bits");
    std::vector<std::int64_t> h(static_cast<std::size_t>(count));
    h[0] = 1;
    for (int k = 1; k < count; ++k) h[static_cast<std::size_t>(k)] = 3 * h[static_cast<std::size_t>(k - 1)] + 1;
    return h;
}

// r_n = (-1)^{number of "11" blocks in binary n}, n = 0..N-1.
inline std::vector<std::int8_t> rudin_shapiro_sequence(std::int64_t n_count) {
    if (n_count < 1) throw input_error("rudin_shapiro_sequence: N must be positive");
    if (n_count > (std::int64_t(1) << 26))
        throw input_error("rudin_shapiro_sequence: N capped at 2^26");
    std::vector<std::int8_t> r(static_cast<std::size_t>(n_count));
    for (std::int64_t n = 0; n < n_count; ++n) {
        const std::uint64_t u = static_cast<std::uint64_t>(n);
        r[static_cast<std::size_t>(n)] =
            (std::popcount(u & (u >> 1)) & 1) ? std::int8_t(-1) : std::int8_t(1);
    }
    return r;
}

namespace detail {

inline int rs_sign(std::uint64_t k) {
    return (std::popcount(k & (k >> 1)) & 1) ? -1 : 1;
}

// Binary radical-inverse coordinate: the adding-machine factor sends the
// orbit index k to this point of [0, 1).
inline double vdc_binary(std::uint64_t k) {
    double v = 0.0;
    double d = 0.5;
    while (k) {
        if (k & 1u) v += d;
        d *= 0.5;
        k >>= 1;
    }
    return v;
}

// Prefix of the fixed point of 0 -> 0010, 1 -> 1 (each iterate is a prefix of
// the next, so plain iteration from "0" converges).
inline std::string chacon_prefix(std::size_t min_len) {
    std::string w = "0";
    while (w.size() < min_len) {
        std::string next;
        next.reserve(w.size() * 4);
        for (char ch : w) {
            if (ch == '0') next += "0010";
            else next += '1';
        }
        w = std::move(next);
    }
    return w;
}

// Precomputed subinterval translations for an interval exchange. Points on a
// discontinuity follow the right-continuous branch.
struct IetMap {
    std::vector<double> starts;
    std::vector<double> shifts;

    IetMap(const std::vector<double>& lengths, const std::vector<int>& order) {
        const std::size_t m = lengths.size();
        starts.resize(m);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            starts[i] = acc;
            acc += lengths[i];
        }
        std::vector<double> image_starts(m);
        acc = 0.0;
        for (std::size_t pos = 0; pos < m; ++pos) {
            image_starts[static_cast<std::size_t>(order[pos])] = acc;
            acc += lengths[static_cast<std::size_t>(order[pos])];
        }
        shifts.resize(m);
        for (std::size_t i = 0; i < m; ++i) shifts[i] = image_starts[i] - starts[i];
    }

    double apply(double x) const {
        auto it = std::upper_bound(starts.begin(), starts.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - starts.begin()) - 1;
        double r = x + shifts[i];
        if (r >= 1.0) r -= 1.0;
        if (r < 0.0) r += 1.0;
        return r;
    }
};

} // namespace detail

inline double iet_apply(const std::vector<double>& lengths, const std::vector<int>& permutation,
                        double x) {
    if (lengths.size() < 2) throw input_error("iet_apply: need at least 2 subintervals");
    double sum = 0.0;
    for (double l : lengths) {
        if (!(l > 0.0)) throw input_error("iet_apply: lengths must be positive");
        sum += l;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw input_error("iet_apply: lengths must sum to 1");
    if (!(0.0 <= x && x < 1.0)) throw input_error("iet_apply: x must lie in [0, 1)");
    const detail::IetMap map(lengths, detail::normalize_permutation(permutation, lengths.size()));
    return map.apply(x);
}

// ---------------------------------------------------------------------------
// Correlation evaluation.

struct Quality {
    enum class Kind { exact, empirical };
    Kind kind = Kind::exact;
    std::int64_t orbit_length = 0;
    std::uint64_t seed = 0;

    static Quality exact() { return Quality{}; }

    static Quality empirical(std::int64_t orbit_length, std::uint64_t seed = 0) {
        Quality q;
        q.kind = Kind::empirical;
        q.orbit_length = orbit_length;
        q.seed = seed;
        return q;
    }
};

namespace detail {

[[noreturn]] inline void unsupported_pair(const System& sys, const Observable& f,
                                          const Observable& g, const char* quality) {
    std::ostringstream os;
    os << "correlation: " << quality << " evaluation does not support system "
       << sys.family_name() << " with observables (" << f.name << ", " << g.name << ")";
    throw capability_error(os.str());
}

inline void require_freq_arity(const Observable& o, std::size_t arity, const char* what) {
    if (o.frequencies.size() != arity) {
        std::ostringstream os;
        os << "correlation: " << what << " characters need exactly " << arity
           << (arity == 1 ? " frequency" : " frequencies");
        throw input_error(os.str());
    }
}

// Exact formulas. Rotation characters: <T^n e_k, e_j> = [k=j] e^{2 pi i k n a}.
// Skew product T(x,y) = (x, y+x) with product measure (base x Lebesgue):
// <T^n e_{d,c}, e_{a,b}> = [c=b] sigma-hat(a - d - c n) under <f,g> = integral
// of f conj(g).
inline CorrelationSequence exact_correlation(const System& sys, const Observable& f,
                                             const Observable& g,
                                             const std::vector<std::int64_t>& lags) {
    if (f.kind != Observable::Kind::character || g.kind != Observable::Kind::character)
        unsupported_pair(sys, f, g, "exact");

    Complex mf(0.0, 0.0), mg(0.0, 0.0);
    std::function<Complex(std::int64_t)> raw;

    if (sys.family == System::Family::rotation) {
        require_freq_arity(f, 1, "rotation");
        require_freq_arity(g, 1, "rotation");
        const std::int64_t k = f.frequencies[0];
        const std::int64_t j = g.frequencies[0];
        const double alpha = sys.alpha;
        mf = k == 0 ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
        mg = j == 0 ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
        raw = [k, j, alpha](std::int64_t n) {
            if (k != j) return Complex(0.0, 0.0);
            return unit_phase(frac(static_cast<double>(k) * static_cast<double>(n) * alpha));
        };
    } else if (sys.family == System::Family::skew_torus) {
        require_freq_arity(f, 2, "skew-product");
        require_freq_arity(g, 2, "skew-product");
        const std::int64_t d = f.frequencies[0], c = f.frequencies[1];
        const std::int64_t a = g.frequencies[0], b = g.frequencies[1];
        const BaseMeasure base = sys.base;
        mf = c == 0 ? base_fourier(base, -d) : Complex(0.0, 0.0);
        mg = b == 0 ? base_fourier(base, -a) : Complex(0.0, 0.0);
        raw = [d, c, a, b, base](std::int64_t n) {
            if (c != b) return Complex(0.0, 0.0);
            const __int128 arg = static_cast<__int128>(a) - d - static_cast<__int128>(c) * n;
            if (arg > std::numeric_limits<std::int64_t>::max() ||
                arg < std::numeric_limits<std::int64_t>::min())
                throw input_error("correlation: frequency * lag overflows 64 bits");
            return base_fourier(base, static_cast<std::int64_t>(arg));
        };
    } else {
        unsupported_pair(sys, f, g, "exact");
    }

    // <T^n(f - mf), g - mg> = c(n) - mf conj(mg); centering either single
    // factor subtracts the same product, since <T^n f, mg> = <mf, g>
    // = mf conj(mg).
    auto value = [&raw, &f, &g, mf, mg](std::int64_t n) {
        Complex v = raw(n);
        if (f.centered || g.centered) v -= mf * std::conj(mg);
        return v;
    };

    CorrelationSequence c;
    c.hermitian = f.same_function(g);
    c.centered = f.centered || g.centered;
    for (auto n : lags) c.values[n] = value(n);
    c.mass = value(0);
    return c;
}

// Observable values along a symbolic or real orbit.
struct OrbitValues {
    std::vector<Complex> f_vals;
    std::vector<Complex> g_vals;
};

inline Complex eval_real_point(const Observable& o, double x) {
    switch (o.kind) {
        case Observable::Kind::character:
            return unit_phase(frac(static_cast<double>(o.frequencies[0]) * x));
        case Observable::Kind::interval_indicator:
            return (o.a <= x && x < o.b) ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
        case Observable::Kind::cylinder:
            break;
    }
    throw input_error("correlation: cylinder observables need a symbolic system");
}

inline Complex eval_symbolic(const Observable& o, const std::string& symbols, std::size_t idx) {
    // idx >= burn-in (1000) and |offset| <= 512, so this never underflows
    const std::size_t base = static_cast<std::size_t>(static_cast<std::int64_t>(idx) + o.offset);
    for (std::size_t i = 0; i < o.word.size(); ++i)
        if (symbols[base + i] != o.word[i]) return Complex(0.0, 0.0);
    return Complex(1.0, 0.0);
}

// Fills observable values for the time-series families. Index k corresponds
// to the orbit point T^{burn + k} x0 (or symbol position), k < len.
inline void fill_time_series(const System& sys, const Observable& f, const Observable& g,
                             std::uint64_t seed, std::size_t burn, std::size_t len,
                             OrbitValues& out) {
    out.f_vals.assign(len, Complex(0.0, 0.0));
    out.g_vals.assign(len, Complex(0.0, 0.0));

    auto check_real_obs = [&](const Observable& o) {
        if (o.kind == Observable::Kind::cylinder) unsupported_pair(sys, f, g, "empirical");
        if (o.kind == Observable::Kind::character) require_freq_arity(o, 1, sys.family_name().c_str());
    };

    switch (sys.family) {
        case System::Family::rotation:
        case System::Family::iet: {
            check_real_obs(f);
            check_real_obs(g);
            double x;
            if (seed == 0) {
                x = std::sqrt(2.0) - 1.0;
            } else {
                Rng rng(seed);
                x = rng.uniform();
            }
            if (sys.family == System::Family::rotation) {
                const double alpha = sys.alpha;
                for (std::size_t k = 0; k < burn; ++k) {
                    x += alpha;
                    if (x >= 1.0) x -= 1.0;
                }
                for (std::size_t k = 0; k < len; ++k) {
                    out.f_vals[k] = eval_real_point(f, x);
                    out.g_vals[k] = eval_real_point(g, x);
                    x += alpha;
                    if (x >= 1.0) x -= 1.0;
                }
            } else {
                const IetMap map(sys.lengths, sys.order);
                for (std::size_t k = 0; k < burn; ++k) x = map.apply(x);
                for (std::size_t k = 0; k < len; ++k) {
                    out.f_vals[k] = eval_real_point(f, x);
                    out.g_vals[k] = eval_real_point(g, x);
                    x = map.apply(x);
                }
            }
            return;
        }
        case System::Family::chacon: {
            if (f.kind != Observable::Kind::cylinder || g.kind != Observable::Kind::cylinder)
                unsupported_pair(sys, f, g, "empirical");
            for (const Observable* o : {&f, &g})
                for (char ch : o->word)
                    if (ch != '0' && ch != '1')
                        throw input_error("correlation: chacon cylinder words use symbols 0 and 1");
            std::size_t start = 0;
            if (seed != 0) {
                Rng rng(seed);
                start = static_cast<std::size_t>(rng.below(1u << 20));
            }
            const std::size_t need = start + burn + len + 1024;
            const std::string symbols = chacon_prefix(need);
            for (std::size_t k = 0; k < len; ++k) {
                out.f_vals[k] = eval_symbolic(f, symbols, start + burn + k);
                out.g_vals[k] = eval_symbolic(g, symbols, start + burn + k);
            }
            return;
        }
        case System::Family::rudin_shapiro: {
            std::uint64_t k0 = 0;
            if (seed != 0) {
                Rng rng(seed);
                k0 = rng.below(1u << 20);
            }
            auto eval_rs = [&](const Observable& o, std::uint64_t k) -> Complex {
                switch (o.kind) {
                    case Observable::Kind::cylinder: {
                        const std::int64_t base =
                            static_cast<std::int64_t>(k) + o.offset;
                        for (std::size_t i = 0; i < o.word.size(); ++i) {
                            const char ch = o.word[i];
                            if (ch != '+' && ch != '-')
                                throw input_error(
                                    "correlation: rudin_shapiro cylinder words use symbols + and -");
                            const int want = ch == '+' ? 1 : -1;
                            if (rs_sign(static_cast<std::uint64_t>(base) + i) != want)
                                return Complex(0.0, 0.0);
                        }
                        return Complex(1.0, 0.0);
                    }
                    case Observable::Kind::interval_indicator: {
                        const double x = vdc_binary(k);
                        return (o.a <= x && x < o.b) ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
                    }
                    case Observable::Kind::character: {
                        require_freq_arity(o, 1, "rudin_shapiro");
                        return unit_phase(frac(static_cast<double>(o.frequencies[0]) * vdc_binary(k)));
                    }
                }
                throw input_error("correlation: unknown observable kind");
            };
            for (std::size_t k = 0; k < len; ++k) {
                const std::uint64_t idx = k0 + burn + k;
                out.f_vals[k] = eval_rs(f, idx);
                out.g_vals[k] = eval_rs(g, idx);
            }
            return;
        }
        default:
            unsupported_pair(sys, f, g, "empirical");
    }
}

inline double spread_of_blocks(const std::vector<Complex>& blocks) {
    Complex mean(0.0, 0.0);
    for (const auto& b : blocks) mean += b;
    mean /= static_cast<double>(blocks.size());
    double s2 = 0.0;
    for (const auto& b : blocks) s2 += std::norm(b - mean);
    s2 /= static_cast<double>(blocks.size() - 1);
    return std::sqrt(s2 / static_cast<double>(blocks.size()));
}

// Zero-padded lag products over the first n_main entries:
//   out(n) = (1/n_main) sum_{k=0}^{n_main-1-n} fv[k+n] conj(gv[k]).
// This makes every f = g sequence exactly positive semidefinite. Block
// spreads use 8 full windows of length n_main/8, which need values up to
// index n_main - 1 + max lag; callers supply arrays of that length.
struct LagEstimator {
    const std::vector<Complex>& fv;
    const std::vector<Complex>& gv;
    std::size_t n_main;

    Complex single(std::int64_t n) const {
        Complex acc(0.0, 0.0);
        const std::size_t un = static_cast<std::size_t>(n);
        for (std::size_t k = 0; k + un < n_main; ++k) acc += fv[k + un] * std::conj(gv[k]);
        return acc / static_cast<double>(n_main);
    }

    // All lags 0..max_lag at once through the FFT.
    std::vector<Complex> batch(std::int64_t max_lag) const {
        std::vector<Complex> fmain(fv.begin(), fv.begin() + static_cast<std::ptrdiff_t>(n_main));
        std::vector<Complex> gmain(gv.begin(), gv.begin() + static_cast<std::ptrdiff_t>(n_main));
        return cross_correlation(fmain, gmain, max_lag);
    }

    std::vector<Complex> blocks(std::int64_t n) const {
        const std::size_t block_len = n_main / 8;
        std::vector<Complex> vals(8, Complex(0.0, 0.0));
        const std::size_t un = static_cast<std::size_t>(n);
        for (std::size_t b = 0; b < 8; ++b) {
            Complex acc(0.0, 0.0);
            const std::size_t lo = b * block_len;
            for (std::size_t k = lo; k < lo + block_len; ++k) acc += fv[k + un] * std::conj(gv[k]);
            vals[b] = acc / static_cast<double>(block_len);
        }
        return vals;
    }

    // Block values for all lags 0..max_lag: per block, one padded FFT pass.
    std::vector<std::vector<Complex>> block_batch(std::int64_t max_lag) const {
        const std::size_t block_len = n_main / 8;
        const std::size_t slice = block_len + static_cast<std::size_t>(max_lag);
        std::vector<std::vector<Complex>> per_block(8);
        for (std::size_t b = 0; b < 8; ++b) {
            const std::size_t lo = b * block_len;
            std::vector<Complex> fs(fv.begin() + static_cast<std::ptrdiff_t>(lo),
                                    fv.begin() + static_cast<std::ptrdiff_t>(lo + slice));
            std::vector<Complex> gs(slice, Complex(0.0, 0.0));
            std::copy(gv.begin() + static_cast<std::ptrdiff_t>(lo),
                      gv.begin() + static_cast<std::ptrdiff_t>(lo + block_len), gs.begin());
            auto out = cross_correlation(fs, gs, max_lag);
            const double rescale = static_cast<double>(slice) / static_cast<double>(block_len);
            for (auto& v : out) v *= rescale;
            per_block[b] = std::move(out);
        }
        return per_block;
    }
};

inline CorrelationSequence orbit_correlation(const System& sys, const Observable& f,
                                             const Observable& g,
                                             const std::vector<std::int64_t>& lags,
                                             const Quality& q) {
    const std::int64_t n_main = q.orbit_length;
    std::int64_t max_abs = 0;
    for (auto n : lags) max_abs = std::max(max_abs, std::abs(n));
    if (max_abs > n_main / 2)
        throw input_error("correlation: max |lag| must be at most orbit_length / 2");

    const std::size_t burn = 1000;
    const std::size_t len = static_cast<std::size_t>(n_main + max_abs);
    OrbitValues vals;
    fill_time_series(sys, f, g, q.seed, burn, len, vals);

    const std::size_t nm = static_cast<std::size_t>(n_main);
    auto center = [nm](std::vector<Complex>& v) {
        Complex mean(0.0, 0.0);
        for (std::size_t k = 0; k < nm; ++k) mean += v[k];
        mean /= static_cast<double>(nm);
        for (auto& z : v) z -= mean;
        return mean;
    };
    if (f.centered) center(vals.f_vals);
    if (g.centered) {
        if (g.same_function(f) && f.centered) {
            // same function: identical arrays either way
            vals.g_vals = vals.f_vals;
        } else {
            center(vals.g_vals);
        }
    }

    const bool herm = f.same_function(g);

    // Requested lags split by sign; for the Hermitian case only one
    // orientation is evaluated and the other is reflected.
    std::vector<std::int64_t> pos, neg;
    for (auto n : lags) (n >= 0 ? pos : neg).push_back(n);
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    std::sort(neg.begin(), neg.end());
    neg.erase(std::unique(neg.begin(), neg.end()), neg.end());
    if (herm) {
        for (auto n : neg)
            if (!std::binary_search(pos.begin(), pos.end(), -n)) pos.push_back(-n);
        std::sort(pos.begin(), pos.end());
        neg.clear();
    }

    CorrelationSequence c;
    c.hermitian = herm;
    c.centered = f.centered || g.centered;

    auto run_side = [&](const std::vector<Complex>& fv, const std::vector<Complex>& gv,
                        const std::vector<std::int64_t>& ns, bool conjugate_out,
                        bool negate_lag) {
        if (ns.empty()) return;
        LagEstimator est{fv, gv, nm};
        const std::int64_t max_n = ns.back();
        const bool use_batch = static_cast<double>(ns.size()) * static_cast<double>(nm) >= 4e7;
        std::vector<Complex> all;
        std::vector<std::vector<Complex>> all_blocks;
        if (use_batch) {
            all = est.batch(max_n);
            all_blocks = est.block_batch(max_n);
        }
        for (auto n : ns) {
            Complex v = use_batch ? all[static_cast<std::size_t>(n)] : est.single(n);
            std::vector<Complex> blocks;
            if (use_batch) {
                blocks.resize(8);
                for (std::size_t b = 0; b < 8; ++b)
                    blocks[b] = all_blocks[b][static_cast<std::size_t>(n)];
            } else {
                blocks = est.blocks(n);
            }
            if (conjugate_out) v = std::conj(v);
            const std::int64_t lag = negate_lag ? -n : n;
            c.values[lag] = v;
            c.stderrs[lag] = spread_of_blocks(blocks);
        }
    };

    // c(n >= 0) directly; c(-n) = conj of the swapped-role estimate at n.
    run_side(vals.f_vals, vals.g_vals, pos, false, false);
    std::vector<std::int64_t> neg_mag;
    for (auto n : neg) neg_mag.push_back(-n);
    std::sort(neg_mag.begin(), neg_mag.end());
    run_side(vals.g_vals, vals.f_vals, neg_mag, true, true);

    if (herm) {
        std::vector<std::pair<std::int64_t, Complex>> reflect;
        for (const auto& [n, v] : c.values)
            if (n > 0) reflect.emplace_back(-n, std::conj(v));
        for (const auto& [n, v] : reflect) {
            c.values[n] = v;
            c.stderrs[n] = c.stderrs[-n];
        }
    }

    LagEstimator mass_est{vals.f_vals, vals.g_vals, nm};
    c.mass = c.values.count(0) ? c.values[0] : mass_est.single(0);

    // Drop lags that were never requested (reflection may have added them).
    std::map<std::int64_t, Complex> wanted;
    std::map<std::int64_t, double> wanted_err;
    for (auto n : lags) {
        wanted[n] = c.values.at(n);
        wanted_err[n] = c.stderrs.at(n);
    }
    c.values = std::move(wanted);
    c.stderrs = std::move(wanted_err);
    return c;
}

// The skew product is not ergodic (the base coordinate never moves), so a
// single orbit cannot see the product measure. The estimator instead draws
// fibers x ~ base, y ~ uniform, runs a short window up each fiber, and
// averages the windows' zero-padded lag products; every f = g output is then
// a mean of positive semidefinite sequences.
inline CorrelationSequence skew_sample_correlation(const System& sys, const Observable& f,
                                                   const Observable& g,
                                                   const std::vector<std::int64_t>& lags,
                                                   const Quality& q) {
    for (const Observable* o : {&f, &g}) {
        if (o->kind == Observable::Kind::cylinder) unsupported_pair(sys, f, g, "empirical");
        if (o->kind == Observable::Kind::character) require_freq_arity(*o, 2, "skew-product");
    }
    std::int64_t max_abs = 0;
    for (auto n : lags) max_abs = std::max(max_abs, std::abs(n));
    const std::int64_t window = std::max<std::int64_t>(4 * (max_abs + 1), 256);
    if (window > (std::int64_t(1) << 20))
        throw input_error("correlation: lag span too large for sampled evaluation; use exact quality");
    const std::int64_t fibers = std::max<std::int64_t>(32, q.orbit_length / window);

    Rng rng(0x5eed0000ull + q.seed);
    const std::size_t w = static_cast<std::size_t>(window);
    const std::size_t m = static_cast<std::size_t>(fibers);

    // interval indicators act on the fiber coordinate y
    auto eval_at = [](const Observable& o, double x, double y) -> Complex {
        if (o.kind == Observable::Kind::interval_indicator)
            return (o.a <= y && y < o.b) ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
        return unit_phase(frac(static_cast<double>(o.frequencies[0]) * x +
                               static_cast<double>(o.frequencies[1]) * y));
    };

    std::vector<Complex> fv(m * w), gv(m * w);
    for (std::size_t i = 0; i < m; ++i) {
        double x;
        if (sys.base.kind == BaseMeasure::Kind::lebesgue) {
            x = rng.uniform();
        } else {
            x = 0.0;
            double digit = 0.25;
            for (int k = 0; k < sys.base.truncation; ++k) {
                if (rng.next_u64() & 1u) x += digit;
                digit *= 0.25;
            }
        }
        double y = rng.uniform();
        for (std::size_t k = 0; k < w; ++k) {
            fv[i * w + k] = eval_at(f, x, y);
            gv[i * w + k] = eval_at(g, x, y);
            y += x;
            if (y >= 1.0) y -= 1.0;
        }
    }

    auto center = [&](std::vector<Complex>& v) {
        Complex mean(0.0, 0.0);
        for (const auto& z : v) mean += z;
        mean /= static_cast<double>(v.size());
        for (auto& z : v) z -= mean;
    };
    if (f.centered) center(fv);
    if (g.centered) {
        if (g.same_function(f) && f.centered) gv = fv;
        else center(gv);
    }

    const bool herm = f.same_function(g);
    std::vector<std::int64_t> pos, neg;
    for (auto n : lags) (n >= 0 ? pos : neg).push_back(n);
    if (herm) {
        for (auto n : neg) pos.push_back(-n);
        neg.clear();
    }
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    std::sort(neg.begin(), neg.end());
    neg.erase(std::unique(neg.begin(), neg.end()), neg.end());

    // per-fiber zero-padded product at lag n >= 0, orientation (A, B):
    //   (1/w) sum_{k=0}^{w-1-n} A[k+n] conj(B[k])
    auto fiber_value = [&](const std::vector<Complex>& av, const std::vector<Complex>& bv,
                           std::size_t i, std::size_t n) {
        Complex acc(0.0, 0.0);
        for (std::size_t k = 0; k + n < w; ++k)
            acc += av[i * w + k + n] * std::conj(bv[i * w + k]);
        return acc / static_cast<double>(w);
    };

    CorrelationSequence c;
    c.hermitian = herm;
    c.centered = f.centered || g.centered;

    auto run = [&](const std::vector<Complex>& av, const std::vector<Complex>& bv,
                   std::int64_t n, bool conjugate_out, std::int64_t lag_out) {
        std::vector<Complex> per_fiber(m);
        Complex total(0.0, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            per_fiber[i] = fiber_value(av, bv, i, static_cast<std::size_t>(n));
            total += per_fiber[i];
        }
        total /= static_cast<double>(m);
        std::vector<Complex> blocks(8, Complex(0.0, 0.0));
        for (std::size_t b = 0; b < 8; ++b) {
            const std::size_t lo = b * m / 8, hi = (b + 1) * m / 8;
            Complex acc(0.0, 0.0);
            for (std::size_t i = lo; i < hi; ++i) acc += per_fiber[i];
            blocks[b] = acc / static_cast<double>(hi - lo);
        }
        Complex v = conjugate_out ? std::conj(total) : total;
        c.values[lag_out] = v;
        c.stderrs[lag_out] = spread_of_blocks(blocks);
    };

    for (auto n : pos) run(fv, gv, n, false, n);
    for (auto n : neg) run(gv, fv, -n, true, n);

    if (herm) {
        std::vector<std::pair<std::int64_t, Complex>> reflect;
        for (const auto& [n, v] : c.values)
            if (n > 0) reflect.emplace_back(-n, std::conj(v));
        for (const auto& [n, v] : reflect) {
            c.values[n] = v;
            c.stderrs[n] = c.stderrs[-n];
        }
    }

    if (c.values.count(0)) {
        c.mass = c.values[0];
    } else {
        Complex acc(0.0, 0.0);
        for (std::size_t i = 0; i < m; ++i) acc += fiber_value(fv, gv, i, 0);
        c.mass = acc / static_cast<double>(m);
    }

    std::map<std::int64_t, Complex> wanted;
    std::map<std::int64_t, double> wanted_err;
    for (auto n : lags) {
        wanted[n] = c.values.at(n);
        wanted_err[n] = c.stderrs.at(n);
    }
    c.values = std::move(wanted);
    c.stderrs = std::move(wanted_err);
    return c;
}

} // namespace detail

inline CorrelationSequence correlation(const System& sys, const Observable& f,
                                       const Observable& g, const std::vector<std::int64_t>& lags,
                                       const Quality& q) {
    if (lags.empty()) throw input_error("correlation: no lags requested");
    if (q.kind == Quality::Kind::exact) {
        const bool ok = (sys.family == System::Family::rotation ||
                         sys.family == System::Family::skew_torus) &&
                        f.kind == Observable::Kind::character &&
                        g.kind == Observable::Kind::character;
        if (!ok) detail::unsupported_pair(sys, f, g, "exact");
        return detail::exact_correlation(sys, f, g, lags);
    }
    if (q.orbit_length < 10000)
        throw input_error("correlation: empirical orbit length must be at least 10^4");
    if (sys.family == System::Family::skew_torus)
        return detail::skew_sample_correlation(sys, f, g, lags, q);
    return detail::orbit_correlation(sys, f, g, lags, q);
}

// ---------------------------------------------------------------------------
// Mean of an observable along the canonical (seeded) orbit, optionally
// shifted in time. Used for measure-preservation checks: the frequency of A
// and of its preimage differ only by the shift.

struct MeanReport {
    Complex value{0.0, 0.0};
    double stderr_value = 0.0;
    std::int64_t samples_used = 0;
};

inline MeanReport empirical_mean(const System& sys, const Observable& f, std::int64_t n_samples,
                                 std::uint64_t seed = 0, std::int64_t time_shift = 0) {
    if (n_samples < 1000) throw input_error("empirical_mean: need at least 1000 samples");
    if (time_shift < 0 || time_shift > (std::int64_t(1) << 20))
        throw input_error("empirical_mean: time shift out of range");

    std::vector<Complex> vals;
    if (sys.family == System::Family::skew_torus) {
        if (f.kind == Observable::Kind::cylinder)
            throw capability_error("empirical_mean: skew product has no cylinder observables");
        if (f.kind == Observable::Kind::character)
            detail::require_freq_arity(f, 2, "skew-product");
        detail::Rng rng(0x5eed0000ull + seed);
        vals.resize(static_cast<std::size_t>(n_samples));
        for (auto& v : vals) {
            double x;
            if (sys.base.kind == BaseMeasure::Kind::lebesgue) {
                x = rng.uniform();
            } else {
                x = 0.0;
                double digit = 0.25;
                for (int k = 0; k < sys.base.truncation; ++k) {
                    if (rng.next_u64() & 1u) x += digit;
                    digit *= 0.25;
                }
            }
            const double y = detail::frac(rng.uniform() + static_cast<double>(time_shift) * x);
            if (f.kind == Observable::Kind::interval_indicator)
                v = (f.a <= y && y < f.b) ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
            else
                v = detail::unit_phase(detail::frac(static_cast<double>(f.frequencies[0]) * x +
                                                    static_cast<double>(f.frequencies[1]) * y));
        }
    } else {
        detail::OrbitValues ov;
        const std::size_t len = static_cast<std::size_t>(n_samples + time_shift);
        detail::fill_time_series(sys, f, f, seed, 1000, len, ov);
        vals.assign(ov.f_vals.begin() + static_cast<std::ptrdiff_t>(time_shift), ov.f_vals.end());
    }

    MeanReport rep;
    rep.samples_used = static_cast<std::int64_t>(vals.size());
    Complex total(0.0, 0.0);
    for (const auto& v : vals) total += v;
    rep.value = total / static_cast<double>(vals.size());
    std::vector<Complex> blocks(8, Complex(0.0, 0.0));
    const std::size_t m = vals.size();
    for (std::size_t b = 0; b < 8; ++b) {
        const std::size_t lo = b * m / 8, hi = (b + 1) * m / 8;
        Complex acc(0.0, 0.0);
        for (std::size_t i = lo; i < hi; ++i) acc += vals[i];
        blocks[b] = acc / static_cast<double>(hi - lo);
    }
    rep.stderr_value = detail::spread_of_blocks(blocks);
    if (f.centered) {
        // subtract the unshifted window mean so the centered observable is
        // the same function at every shift
        MeanReport base = rep;
        if (time_shift != 0) {
            Observable raw = f;
            raw.centered = false;
            base = empirical_mean(sys, raw, n_samples, seed, 0);
            rep.value -= base.value;
        } else {
            rep.value = Complex(0.0, 0.0);
        }
    }
    return rep;
}

} // namespace ergolab
