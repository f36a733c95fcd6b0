#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <sstream>
#include <vector>

#include "ergolab/errors.hpp"

namespace ergolab {

using Complex = std::complex<double>;

// A correlation sequence lag -> <T^n f, g>. When f = g the sequence is
// Hermitian (c(-n) = conj(c(n))) and positive definite; `hermitian` records
// that fact. `mass` is the value at lag 0. Empirical sequences carry
// per-lag standard-error estimates.
struct CorrelationSequence {
    std::map<std::int64_t, Complex> values;
    Complex mass{0.0, 0.0};
    bool centered = false;
    bool hermitian = false;
    std::map<std::int64_t, double> stderrs; // empty for exact sequences

    bool has(std::int64_t lag) const { return values.count(lag) != 0; }

    Complex at(std::int64_t lag) const {
        auto it = values.find(lag);
        if (it != values.end()) return it->second;
        if (hermitian) {
            auto jt = values.find(-lag);
            if (jt != values.end()) return std::conj(jt->second);
        }
        std::ostringstream os;
        os << "correlation sequence: missing lag " << lag;
        throw input_error(os.str());
    }

    double stderr_at(std::int64_t lag) const {
        auto it = stderrs.find(lag);
        if (it != stderrs.end()) return it->second;
        auto jt = stderrs.find(-lag);
        if (hermitian && jt != stderrs.end()) return jt->second;
        return 0.0;
    }

    std::vector<std::int64_t> missing(const std::vector<std::int64_t>& lags) const {
        std::vector<std::int64_t> out;
        for (auto lag : lags) {
            if (has(lag)) continue;
            if (hermitian && values.count(-lag)) continue;
            out.push_back(lag);
        }
        return out;
    }
};

// Convenience constructor from a rule over an explicit lag set.
template <typename F>
CorrelationSequence make_correlation(const std::vector<std::int64_t>& lags, F&& rule,
                                     bool hermitian = true, bool centered = false) {
    CorrelationSequence c;
    c.hermitian = hermitian;
    c.centered = centered;
    for (auto lag : lags) c.values[lag] = rule(lag);
    if (!c.values.count(0)) c.values[0] = rule(0);
    c.mass = c.values[0];
    return c;
}

} // namespace ergolab
