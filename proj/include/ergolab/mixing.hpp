#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ergolab/correlation.hpp"
#include "ergolab/detail/rng.hpp"
#include "ergolab/errors.hpp"
#include "ergolab/limit_schemes.hpp"
#include "ergolab/operator_core.hpp"
#include "ergolab/systems.hpp"

namespace ergolab {

// ---------------------------------------------------------------------------
// Mixing hierarchy verdicts.
// ---------------------------------------------------------------------------

enum class TestOutcome { pass, fail, inconclusive };

inline const char* to_string(TestOutcome t) {
    switch (t) {
        case TestOutcome::pass: return "pass";
        case TestOutcome::fail: return "fail";
        case TestOutcome::inconclusive: return "inconclusive";
    }
    return "?";
}

struct ClassifyBudget {
    std::int64_t orbit_length = 200000; // used when only empirical correlations exist
    std::int64_t max_lag = 4096;
    int ip_families = 3; // seeded finite-sum generator families for the mild test
    int ip_depth = 8;    // generators per family
    std::uint64_t seed = 1;
};

struct MixingVerdict {
    TestOutcome weak = TestOutcome::inconclusive;
    TestOutcome mild_proxy = TestOutcome::inconclusive;
    TestOutcome strong_proxy = TestOutcome::inconclusive;
    std::map<std::string, LimitReport> evidence;
    double tolerance = 0.0;
    std::string diagnostics;
};

namespace detail {

// Failing evidence is decisive (one bad observable obstructs mixing); a pass
// needs every observable to pass.
inline TestOutcome combine_outcomes(const std::vector<TestOutcome>& parts) {
    bool all_pass = !parts.empty();
    for (auto t : parts) {
        if (t == TestOutcome::fail) return TestOutcome::fail;
        all_pass = all_pass && t == TestOutcome::pass;
    }
    return all_pass ? TestOutcome::pass : TestOutcome::inconclusive;
}

inline void require_increasing_positive(const std::vector<std::int64_t>& seq,
                                        const char* who, std::size_t min_count) {
    if (seq.size() < min_count) {
        std::ostringstream os;
        os << who << ": sequence needs at least " << min_count << " entries";
        throw input_error(os.str());
    }
    for (std::size_t k = 0; k < seq.size(); ++k) {
        if (seq[k] < 1) throw input_error(std::string(who) + ": sequence entries must be positive");
        if (k > 0 && seq[k] <= seq[k - 1])
            throw input_error(std::string(who) + ": sequence must be strictly increasing");
    }
}

// The zero-padded estimator attenuates lag n by exactly (1 - |n|/N). That is
// the right convention for spectral work (it keeps the sequence positive
// definite) but it biases pointwise comparisons against limit values, so the
// sequence-limit consumers below divide it back out. Only meaningful for
// empirical estimates; exact sequences carry no padding.
inline void debias_zero_padding(CorrelationSequence& c, std::int64_t orbit_length) {
    if (orbit_length <= 0) return;
    const double n_total = static_cast<double>(orbit_length);
    for (auto& [lag, value] : c.values) {
        const auto a = std::abs(lag);
        if (a == 0 || a >= orbit_length) continue;
        value /= 1.0 - static_cast<double>(a) / n_total;
    }
    for (auto& [lag, se] : c.stderrs) {
        const auto a = std::abs(lag);
        if (a == 0 || a >= orbit_length) continue;
        se /= 1.0 - static_cast<double>(a) / n_total;
    }
}

} // namespace detail

// Tests one system against the mixing hierarchy, using the supplied
// mean-centered observables as witnesses.
//   weak:         Cesaro averages of |c(n)| over growing windows must vanish.
//   mild_proxy:   |c| must vanish on finite-sum grids of seeded generators.
//   strong_proxy: sup |c(n)| over the tail half of the lag range must vanish.
// Comparisons use tolerance 1e-8 when exact correlations are available
// (characters on rotations and skew products) and 0.05 otherwise. A stronger
// test never reports pass while a weaker one missed it; such combinations are
// downgraded to inconclusive. Budget shortfalls yield inconclusive verdicts
// with a note in `diagnostics` instead of throwing.
inline MixingVerdict classify(const System& sys, const std::vector<Observable>& observables,
                              const ClassifyBudget& budget = {}) {
    if (observables.empty()) throw input_error("classify: need at least one observable");
    for (const auto& f : observables)
        if (!f.centered)
            throw input_error("classify: observables must be mean-centered (use with_centering)");

    bool exact = sys.family == System::Family::rotation || sys.family == System::Family::skew_torus;
    for (const auto& f : observables) exact = exact && f.kind == Observable::Kind::character;

    MixingVerdict verdict;
    verdict.tolerance = exact ? 1e-8 : 0.05;
    std::ostringstream notes;

    if (budget.max_lag < 2) {
        verdict.diagnostics = "budget exhausted: max_lag below 2 leaves nothing to test";
        return verdict;
    }
    if (!exact && (budget.orbit_length < 10000 || budget.max_lag > budget.orbit_length / 2)) {
        verdict.diagnostics =
            "budget exhausted: empirical runs need orbit_length >= 10000 and >= 2 * max_lag";
        return verdict;
    }
    const bool can_weak = budget.max_lag >= 64;
    const bool can_mild = budget.ip_families >= 1 && budget.ip_depth >= 2 &&
                          budget.ip_depth <= 10 && budget.max_lag / (2 * budget.ip_depth) >= 1;
    if (!can_weak) notes << "weak test skipped: max_lag below 64; ";
    if (!can_mild) notes << "mild test skipped: finite-sum budget cannot form grids; ";

    const Quality quality =
        exact ? Quality::exact() : Quality::empirical(budget.orbit_length, budget.seed);
    std::vector<std::int64_t> lags(static_cast<std::size_t>(budget.max_lag) + 1);
    std::iota(lags.begin(), lags.end(), 0);

    // Averaging windows grow geometrically so stabilization sees real decay.
    std::vector<std::int64_t> windows;
    if (can_weak) {
        std::int64_t w = 64;
        while (w < budget.max_lag) {
            windows.push_back(w);
            w += std::max<std::int64_t>(w / 2, 1);
        }
        windows.push_back(budget.max_lag);
    }

    std::vector<LimitScheme> families;
    if (can_mild) {
        const std::int64_t bound = budget.max_lag / (2 * budget.ip_depth);
        for (int i = 0; i < budget.ip_families; ++i) {
            detail::Rng rng(0xC1A551F100000000ull + budget.seed * 257 + static_cast<std::uint64_t>(i));
            std::vector<std::int64_t> gens;
            for (int j = 0; j < budget.ip_depth; ++j)
                gens.push_back(1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(bound))));
            families.push_back(LimitScheme::ip_grid(std::move(gens), budget.ip_depth));
        }
    }

    std::vector<TestOutcome> weak_parts, mild_parts, strong_parts;
    for (const auto& f : observables) {
        const CorrelationSequence c = correlation(sys, f, f, lags, quality);

        if (can_weak) {
            const LimitReport rep =
                evaluate_limit(c, LimitScheme::folner_cesaro(windows), verdict.tolerance);
            verdict.evidence[f.name + "/folner"] = rep;
            if (!rep.converged)
                weak_parts.push_back(TestOutcome::inconclusive);
            else
                weak_parts.push_back(std::abs(rep.value) <= verdict.tolerance ? TestOutcome::pass
                                                                              : TestOutcome::fail);
        }

        if (can_mild) {
            bool all_small = true;  // every family has sup |c| within tolerance
            bool any_large = false; // some family is bounded away from zero on its whole grid
            int fi = 0;
            for (const auto& fam : families) {
                double sup = 0.0, low = std::numeric_limits<double>::infinity();
                for (auto s : fam.ip_sums()) {
                    const double v = std::abs(c.at(s));
                    sup = std::max(sup, v);
                    low = std::min(low, v);
                }
                verdict.evidence[f.name + "/ip" + std::to_string(fi++)] =
                    evaluate_limit(c, fam, verdict.tolerance);
                all_small = all_small && sup <= verdict.tolerance;
                any_large = any_large || low > verdict.tolerance;
            }
            mild_parts.push_back(any_large ? TestOutcome::fail
                                           : all_small ? TestOutcome::pass : TestOutcome::inconclusive);
        }

        {
            const LimitReport rep =
                evaluate_limit(c, LimitScheme::tail_sup(budget.max_lag / 2), verdict.tolerance);
            verdict.evidence[f.name + "/tail"] = rep;
            strong_parts.push_back(rep.value.real() <= verdict.tolerance ? TestOutcome::pass
                                                                         : TestOutcome::fail);
        }
    }

    if (can_weak) verdict.weak = detail::combine_outcomes(weak_parts);
    if (can_mild) verdict.mild_proxy = detail::combine_outcomes(mild_parts);
    verdict.strong_proxy = detail::combine_outcomes(strong_parts);

    // Hierarchy consistency: a stronger pass requires the weaker pass.
    if (verdict.mild_proxy == TestOutcome::pass && verdict.weak != TestOutcome::pass) {
        verdict.mild_proxy = TestOutcome::inconclusive;
        notes << "mild pass withheld: weak test did not pass; ";
    }
    if (verdict.strong_proxy == TestOutcome::pass &&
        (verdict.weak != TestOutcome::pass || verdict.mild_proxy == TestOutcome::fail)) {
        verdict.strong_proxy = TestOutcome::inconclusive;
        notes << "strong pass withheld: weaker test did not pass; ";
    }

    verdict.diagnostics = notes.str();
    return verdict;
}

// ---------------------------------------------------------------------------
// Rigidity profiles.
// ---------------------------------------------------------------------------

struct RigidityProfile {
    enum class Kind { rigid, alpha_rigid, alpha_weakly_mixing, none_found };

    Kind kind = Kind::none_found;
    double alpha_hat = 0.0; // best return fraction: mu(A cap T^n A) >= alpha_hat * mu(A)
    double excess = 0.0;    // centered ratio: 0 at independence, 1 at full return
    double wm_alpha = 0.0;  // alpha_weakly_mixing only: fitted alpha = 1 - excess
    std::vector<std::int64_t> sequence; // achieving candidate, as evaluated
    double error_bar = 0.0; // propagated standard error on alpha_hat
    double deviation = 0.0; // max successive gap across the deciding window
    double mass = 0.0;      // mu(A)
    bool converged = false;
};

inline const char* to_string(RigidityProfile::Kind k) {
    switch (k) {
        case RigidityProfile::Kind::rigid: return "rigid";
        case RigidityProfile::Kind::alpha_rigid: return "alpha_rigid";
        case RigidityProfile::Kind::alpha_weakly_mixing: return "alpha_weakly_mixing";
        case RigidityProfile::Kind::none_found: return "none_found";
    }
    return "?";
}

// Scores candidate rigidity sequences against the centered autocorrelation of
// an indicator with the given mass. The liminf along a candidate is proxied
// by the minimum over the last quarter of its evaluated entries. The centered
// ratio  min Re c(n_k) / (mass (1 - mass))  sits at 0 for independence and 1
// for full return; the winning candidate is rescaled to the return-fraction
// normalization  mu(A cap T^n A) >= alpha_hat * mu(A).  Kinds:
//   rigid                 excess >= 0.99
//   alpha_weakly_mixing   excess in (0.01, 0.99) and the tail values stabilized
//   alpha_rigid           excess in (0.01, 0.99), tail still wandering
//   none_found            no candidate pushes the excess above 0.01
inline RigidityProfile rigidity_profile_from(const CorrelationSequence& c, double mass,
                                             const std::vector<std::vector<std::int64_t>>& candidates,
                                             int depth) {
    if (!c.centered) throw input_error("rigidity: needs the centered autocorrelation");
    if (!(mass > 0.0 && mass < 1.0))
        throw input_error("rigidity: indicator mass must lie strictly inside (0,1)");
    if (candidates.empty()) throw input_error("rigidity: need at least one candidate sequence");
    if (depth < 4) throw input_error("rigidity: depth must be at least 4");

    const double scale = mass * (1.0 - mass);
    RigidityProfile best;
    best.mass = mass;
    bool have = false;
    double best_excess = 0.0;

    for (const auto& cand : candidates) {
        std::vector<std::int64_t> used(cand.begin(),
                                       cand.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                                          cand.size(), static_cast<std::size_t>(depth))));
        if (used.size() < 4) continue;
        detail::require_increasing_positive(used, "rigidity", 4);
        const auto miss = c.missing(used);
        if (!miss.empty()) {
            std::ostringstream os;
            os << "rigidity: correlation lacks candidate lag " << miss.front();
            throw input_error(os.str());
        }

        const std::size_t count = used.size();
        const std::size_t window = std::max<std::size_t>(count / 4, 2);
        const std::size_t begin = count - window;
        double low = std::numeric_limits<double>::infinity();
        double dev = 0.0, se = 0.0;
        for (std::size_t k = begin; k < count; ++k) {
            const double v = c.at(used[k]).real();
            low = std::min(low, v);
            se = std::max(se, c.stderr_at(used[k]));
            if (k > begin) dev = std::max(dev, std::abs(v - c.at(used[k - 1]).real()));
        }
        const double excess = low / scale;
        if (!have || excess > best_excess) {
            have = true;
            best_excess = excess;
            best.sequence = std::move(used);
            best.deviation = dev;
            best.error_bar = se / mass;
            best.converged = dev <= std::max(3.0 * se, 0.02 * scale);
        }
    }
    if (!have) throw input_error("rigidity: no candidate kept at least 4 usable entries");

    best.excess = std::clamp(best_excess, 0.0, 1.0);
    best.alpha_hat = std::clamp(mass + best_excess * (1.0 - mass), 0.0, 1.0);
    if (best.excess <= 0.01) {
        best.kind = RigidityProfile::Kind::none_found;
    } else if (best.excess >= 0.99) {
        best.kind = RigidityProfile::Kind::rigid;
    } else if (best.converged) {
        best.kind = RigidityProfile::Kind::alpha_weakly_mixing;
        best.wm_alpha = std::clamp(1.0 - best.excess, 0.0, 1.0);
    } else {
        best.kind = RigidityProfile::Kind::alpha_rigid;
    }
    return best;
}

// Searches candidate sequences for partial rigidity of the indicator f.
// Empirical estimates are debiased back to plain lag averages; candidate
// entries beyond an eighth of the orbit are still dropped so the debiased
// estimator keeps at least 7/8 of the samples behind every retained lag.
inline RigidityProfile rigidity_search(const System& sys, const Observable& f,
                                       const std::vector<std::vector<std::int64_t>>& candidates,
                                       int depth,
                                       const Quality& quality = Quality::empirical(200000)) {
    if (f.kind == Observable::Kind::character)
        throw input_error("rigidity_search: f must be an indicator (interval or cylinder)");
    if (f.centered)
        throw input_error("rigidity_search: pass the raw indicator; centering happens internally");
    if (candidates.empty()) throw input_error("rigidity_search: need at least one candidate sequence");
    if (depth < 4) throw input_error("rigidity_search: depth must be at least 4");

    const bool empirical = quality.kind == Quality::Kind::empirical;
    double mass;
    if (f.mean_known) {
        mass = f.mean.real();
    } else {
        const std::int64_t n_mean =
            std::max<std::int64_t>(empirical ? quality.orbit_length : 0, 100000);
        mass = empirical_mean(sys, f, n_mean, quality.seed).value.real();
    }

    const std::int64_t cap =
        empirical ? quality.orbit_length / 8 : std::numeric_limits<std::int64_t>::max();
    std::vector<std::vector<std::int64_t>> trimmed;
    for (const auto& cand : candidates) {
        std::vector<std::int64_t> t;
        for (auto n : cand) {
            if (n > cap || static_cast<int>(t.size()) == depth) break;
            t.push_back(n);
        }
        if (t.size() >= 4) trimmed.push_back(std::move(t));
    }
    if (trimmed.empty())
        throw input_error("rigidity_search: no candidate keeps 4 entries within an eighth of the orbit");

    std::vector<std::int64_t> lags{0};
    for (const auto& t : trimmed) lags.insert(lags.end(), t.begin(), t.end());
    std::sort(lags.begin(), lags.end());
    lags.erase(std::unique(lags.begin(), lags.end()), lags.end());

    const Observable fc = f.with_centering();
    CorrelationSequence c = correlation(sys, fc, fc, lags, quality);
    if (empirical) detail::debias_zero_padding(c, quality.orbit_length);
    return rigidity_profile_from(c, mass, trimmed, depth);
}

// Denominators of the continued-fraction convergents of alpha (mod 1),
// strictly increasing, capped at max_q. The classical rigidity sequence for
// the rotation by alpha.
inline std::vector<std::int64_t> convergent_denominators(double alpha, std::int64_t max_q) {
    if (max_q < 1) throw input_error("convergent_denominators: max_q must be positive");
    double x = alpha - std::floor(alpha);
    if (x <= 0.0 || x >= 1.0)
        throw input_error("convergent_denominators: alpha reduces to an integer");

    std::vector<std::int64_t> out;
    std::int64_t k_prev = 0, k_cur = 1;
    for (int i = 0; i < 64; ++i) {
        if (x < 1e-14) break;
        x = 1.0 / x;
        const double af = std::floor(x);
        if (af > 9.0e15) break;
        x -= af;
        const std::int64_t a = static_cast<std::int64_t>(af);
        if (k_cur > (std::numeric_limits<std::int64_t>::max() - k_prev) / std::max<std::int64_t>(a, 1))
            break;
        const std::int64_t k_next = a * k_cur + k_prev;
        k_prev = k_cur;
        k_cur = k_next;
        if (k_cur > max_q) break;
        if (out.empty() || k_cur > out.back()) out.push_back(k_cur);
    }
    if (out.empty()) throw input_error("convergent_denominators: no denominator at or below max_q");
    return out;
}

// Autocorrelation of a fresh i.i.d. 0/1 label sequence with success
// probability p: the strongly mixing surrogate. Zero-padded products over a
// window of n_samples keep the sequence exactly positive semidefinite.
inline CorrelationSequence iid_indicator_correlation(double p, const std::vector<std::int64_t>& lags,
                                                     std::int64_t n_samples, std::uint64_t seed = 0,
                                                     bool centered = true) {
    if (!(p > 0.0 && p < 1.0)) throw input_error("iid surrogate: p must lie strictly inside (0,1)");
    if (n_samples < 10000) throw input_error("iid surrogate: need at least 10000 samples");
    if (lags.empty()) throw input_error("iid surrogate: empty lag set");
    std::int64_t max_abs = 0;
    for (auto lag : lags) max_abs = std::max(max_abs, lag < 0 ? -lag : lag);
    if (max_abs > n_samples / 2)
        throw input_error("iid surrogate: |lag| exceeds half the sample count");

    detail::Rng rng(0x11DBA5E500000000ull + seed);
    const std::size_t n_main = static_cast<std::size_t>(n_samples);
    std::vector<Complex> vals(n_main + static_cast<std::size_t>(max_abs));
    for (auto& v : vals) v = rng.uniform() < p ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
    if (centered) {
        Complex total(0.0, 0.0);
        for (std::size_t k = 0; k < n_main; ++k) total += vals[k];
        const Complex mean = total / static_cast<double>(n_main);
        for (auto& v : vals) v -= mean;
    }

    const detail::LagEstimator est{vals, vals, n_main};
    CorrelationSequence c;
    c.centered = centered;
    c.hermitian = true;
    std::vector<std::int64_t> wanted(lags);
    wanted.push_back(0);
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
    for (auto lag : wanted) {
        const std::int64_t n = lag < 0 ? -lag : lag;
        if (!c.values.count(n)) {
            c.values[n] = est.single(n);
            c.stderrs[n] = detail::spread_of_blocks(est.blocks(n));
        }
        if (lag < 0) {
            c.values[lag] = std::conj(c.values[n]);
            c.stderrs[lag] = c.stderrs[n];
        }
    }
    c.mass = c.values[0];
    return c;
}

// ---------------------------------------------------------------------------
// Weak-limit fit along a sequence: finds nonnegative weights a_b, summing to
// one, that best explain  lim c_{f,g}(n_k) = sum_b a_b c_{f,g}(b)  across all
// ordered pairs from a cylinder basis.
// ---------------------------------------------------------------------------

namespace detail {

// Lawson-Hanson active-set nonnegative least squares for small dense systems.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index n = a.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double wtol = 1e-12 * (1.0 + a.norm()) * (1.0 + b.norm());

    auto solve_passive = [&]() -> Eigen::VectorXd {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
        if (idx.empty()) return z;
        Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            ap.col(static_cast<Eigen::Index>(i)) = a.col(idx[i]);
        const Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(b);
        for (std::size_t i = 0; i < idx.size(); ++i) z[idx[i]] = zp[static_cast<Eigen::Index>(i)];
        return z;
    };

    int guard = 0;
    while (true) {
        if (++guard > 100 + 30 * static_cast<int>(n))
            throw convergence_error("nnls: active-set iteration stalled");
        const Eigen::VectorXd w = a.transpose() * (b - a * x);
        Eigen::Index enter = -1;
        double best = wtol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w[j] > best) {
                best = w[j];
                enter = j;
            }
        if (enter < 0) break;
        passive[static_cast<std::size_t>(enter)] = true;

        Eigen::VectorXd z = solve_passive();
        while (true) {
            if (++guard > 100 + 30 * static_cast<int>(n))
                throw convergence_error("nnls: active-set iteration stalled");
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 1e-12) feasible = false;
            if (feasible) break;
            double step = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 1e-12)
                    step = std::min(step, x[j] / (x[j] - z[j]));
            x += step * (z - x);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && x[j] <= 1e-12) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x[j] = 0.0;
                }
            z = solve_passive();
        }
        x = z;
    }
    return x;
}

} // namespace detail

struct WeakLimitFit {
    std::vector<std::int64_t> powers; // -B..B, aligned with weights
    std::vector<double> weights;      // nonnegative, sums to 1
    double residual = 0.0;            // RMS misfit over the basis pairs
    int support = 0;                  // weights at or above 0.01
    double target_deviation = 0.0;    // worst stabilization gap among the targets
};

// Fits the limit of the correlation along `sequence` by a convex combination
// of small powers, over all ordered pairs from a cylinder basis on the
// rank-one substitution system. The limit per pair is proxied by the mean of
// the last quarter of its evaluated entries. Sequence entries beyond an
// eighth of the orbit are dropped (zero-padding attenuation, as in
// rigidity_search). Weights come from nonnegative least squares with a
// weighted sum-to-one row, then exact renormalization.
inline WeakLimitFit chacon_weak_limit_fit(int max_power, const std::vector<std::int64_t>& sequence,
                                          const std::vector<Observable>& basis,
                                          const Quality& quality = Quality::empirical(1000000)) {
    if (max_power < 0 || max_power > 8)
        throw input_error("weak-limit fit: max_power must lie in [0, 8]");
    if (sequence.empty()) throw input_error("weak-limit fit: empty sequence");
    for (std::size_t k = 0; k < sequence.size(); ++k) {
        if (sequence[k] < 0) throw input_error("weak-limit fit: sequence entries must be nonnegative");
        if (k > 0 && sequence[k] <= sequence[k - 1])
            throw input_error("weak-limit fit: sequence must be strictly increasing");
    }
    if (basis.empty()) throw input_error("weak-limit fit: need at least one cylinder observable");
    for (const auto& f : basis) {
        if (f.kind != Observable::Kind::cylinder)
            throw input_error("weak-limit fit: basis observables must be cylinders");
        if (f.centered)
            throw input_error("weak-limit fit: pass raw cylinders; the fit works on raw correlations");
    }

    const System sys = System::chacon();
    const std::int64_t cap = quality.kind == Quality::Kind::empirical
                                 ? quality.orbit_length / 8
                                 : std::numeric_limits<std::int64_t>::max();
    std::vector<std::int64_t> seq;
    for (auto n : sequence)
        if (n <= cap) seq.push_back(n);
    if (seq.empty())
        throw input_error("weak-limit fit: no sequence entry fits within an eighth of the orbit");

    std::vector<std::int64_t> powers;
    for (std::int64_t b = -max_power; b <= max_power; ++b) powers.push_back(b);

    std::vector<std::int64_t> lags(powers);
    lags.insert(lags.end(), seq.begin(), seq.end());
    std::sort(lags.begin(), lags.end());
    lags.erase(std::unique(lags.begin(), lags.end()), lags.end());

    struct PairRow {
        Complex target;
        std::vector<Complex> design;
    };
    std::vector<PairRow> rows;
    double worst_dev = 0.0;
    for (const auto& f : basis)
        for (const auto& g : basis) {
            CorrelationSequence c = correlation(sys, f, g, lags, quality);
            if (quality.kind == Quality::Kind::empirical)
                detail::debias_zero_padding(c, quality.orbit_length);
            std::vector<Complex> samples;
            samples.reserve(seq.size());
            for (auto n : seq) samples.push_back(c.at(n));
            const std::size_t count = samples.size();
            const std::size_t window = std::max<std::size_t>(count / 4, std::min<std::size_t>(count, 2));
            Complex target(0.0, 0.0);
            double dev = 0.0;
            for (std::size_t k = count - window; k < count; ++k) {
                target += samples[k];
                if (k > count - window) dev = std::max(dev, std::abs(samples[k] - samples[k - 1]));
            }
            target /= static_cast<double>(window);
            worst_dev = std::max(worst_dev, dev);

            PairRow row;
            row.target = target;
            for (auto b : powers) row.design.push_back(c.at(b));
            rows.push_back(std::move(row));
        }

    // Two real rows per pair plus one weighted sum-to-one row.
    const Eigen::Index m = static_cast<Eigen::Index>(2 * rows.size() + 1);
    const Eigen::Index ncols = static_cast<Eigen::Index>(powers.size());
    const double constraint_weight = 50.0;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, ncols);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (std::size_t p = 0; p < rows.size(); ++p) {
        const Eigen::Index r = static_cast<Eigen::Index>(2 * p);
        rhs[r] = rows[p].target.real();
        rhs[r + 1] = rows[p].target.imag();
        for (Eigen::Index j = 0; j < ncols; ++j) {
            a(r, j) = rows[p].design[static_cast<std::size_t>(j)].real();
            a(r + 1, j) = rows[p].design[static_cast<std::size_t>(j)].imag();
        }
    }
    for (Eigen::Index j = 0; j < ncols; ++j) a(m - 1, j) = constraint_weight;
    rhs[m - 1] = constraint_weight;

    Eigen::VectorXd x = detail::nnls(a, rhs);
    const double total = x.sum();
    if (total <= 1e-9)
        throw convergence_error("weak-limit fit collapsed to zero weights; enlarge the cylinder basis");
    x /= total;

    WeakLimitFit fit;
    fit.powers = powers;
    fit.weights.assign(x.data(), x.data() + x.size());
    fit.target_deviation = worst_dev;
    double sq = 0.0;
    for (const auto& row : rows) {
        Complex model(0.0, 0.0);
        for (std::size_t j = 0; j < row.design.size(); ++j) model += x[static_cast<Eigen::Index>(j)] * row.design[j];
        sq += std::norm(row.target - model);
    }
    fit.residual = std::sqrt(sq / static_cast<double>(rows.size()));
    for (double wj : fit.weights)
        if (wj >= 0.01) ++fit.support;
    return fit;
}

// ---------------------------------------------------------------------------
// Joint image/kernel splitting for scheme-limit operators of a unitary.
// ---------------------------------------------------------------------------

// Computes the limit operator of each scheme applied to the powers of u, then
// splits C^d into the intersection of their kernels and its orthogonal
// complement. Limits are polynomials in u, hence normal, so the splitting
// agrees with the image/kernel decomposition of each normal limit. Schemes:
//   subsequence    last-quarter stabilization of u^{n_k}
//   folner_cesaro  averages (1/N) sum_{n<N} u^n at the window checkpoints
//   ip_grid        mean of u^s over the finite-sum grid, max deviation checked
//   tail_sup       rejected (it is a scalar diagnostic, not an operator limit)
// A scheme whose iterates do not settle within tol raises convergence_error
// naming the scheme.
inline OrthogonalDecomposition u_split(const CMatrix& u, const std::vector<LimitScheme>& schemes,
                                       double tol = 1e-8) {
    detail::require_square(u, "u_split");
    detail::require_finite(u, "u_split");
    if (!is_unitary(u, std::max(tol, 1e-9)))
        throw input_error("u_split: matrix is not unitary within tol");
    if (schemes.empty()) throw input_error("u_split: need at least one scheme");

    const Eigen::Index d = u.rows();
    std::vector<CMatrix> limits;
    for (const auto& scheme : schemes) {
        switch (scheme.kind) {
            case LimitScheme::Kind::subsequence: {
                const LimitOperatorReport rep = sequence_limit_operator(u, scheme.indices, tol);
                if (!rep.converged) {
                    std::ostringstream os;
                    os << "u_split: scheme " << scheme.name() << " did not converge (residual "
                       << rep.residual << ")";
                    throw convergence_error(os.str());
                }
                limits.push_back(rep.limit);
                break;
            }
            case LimitScheme::Kind::folner_cesaro: {
                if (scheme.windows.back() > (std::int64_t(1) << 20))
                    throw input_error("u_split: averaging window too long");
                std::vector<CMatrix> checkpoints;
                CMatrix sum = CMatrix::Zero(d, d);
                CMatrix pow = CMatrix::Identity(d, d);
                std::int64_t n = 0;
                for (auto w : scheme.windows) {
                    while (n < w) {
                        sum += pow;
                        pow = pow * u;
                        ++n;
                    }
                    checkpoints.push_back(sum / static_cast<double>(w));
                }
                const std::size_t count = checkpoints.size();
                const std::size_t window =
                    std::max<std::size_t>(count / 4, std::min<std::size_t>(count, 2));
                double residual = 0.0;
                for (std::size_t k = count - window; k + 1 < count; ++k)
                    residual = std::max(residual, (checkpoints[k + 1] - checkpoints[k]).norm());
                if (residual > tol) {
                    std::ostringstream os;
                    os << "u_split: scheme " << scheme.name() << " did not converge (residual "
                       << residual << ")";
                    throw convergence_error(os.str());
                }
                limits.push_back(checkpoints.back());
                break;
            }
            case LimitScheme::Kind::ip_grid: {
                const auto sums = scheme.ip_sums();
                if (sums.size() > 1024)
                    throw input_error("u_split: finite-sum grid too large for operator limits");
                std::vector<CMatrix> powers;
                powers.reserve(sums.size());
                for (auto s : sums)
                    powers.push_back(detail::matrix_power(u, static_cast<std::uint64_t>(s)));
                CMatrix mean = CMatrix::Zero(d, d);
                for (const auto& p : powers) mean += p;
                mean /= static_cast<double>(powers.size());
                double devm = 0.0;
                for (const auto& p : powers) devm = std::max(devm, (p - mean).norm());
                if (devm > tol) {
                    std::ostringstream os;
                    os << "u_split: scheme " << scheme.name() << " did not converge (deviation "
                       << devm << ")";
                    throw convergence_error(os.str());
                }
                limits.push_back(mean);
                break;
            }
            case LimitScheme::Kind::tail_sup:
                throw input_error("u_split: scheme " + scheme.name() +
                                  " does not define a limit operator");
        }
    }

    CMatrix stack(d * static_cast<Eigen::Index>(limits.size()), d);
    for (std::size_t i = 0; i < limits.size(); ++i)
        stack.block(static_cast<Eigen::Index>(i) * d, 0, d, d) = limits[i];
    Eigen::JacobiSVD<CMatrix> svd(stack, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double thresh = std::max({tol, 1e-10 * smax, 1e-14});

    CMatrix p_kernel = CMatrix::Zero(d, d);
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= thresh)
            p_kernel += svd.matrixV().col(i) * svd.matrixV().col(i).adjoint();

    OrthogonalDecomposition out;
    out.p_kernel = p_kernel;
    out.p_image = CMatrix::Identity(d, d) - p_kernel;
    out.tolerance = thresh;
    return out;
}

// Number of distinct eigenvalue clusters of u restricted to the image part of
// a splitting; 0 when the image is trivial. The image is u-invariant (the
// limits are polynomials in u), so the restriction stays unitary.
inline int image_block_count(const CMatrix& u, const OrthogonalDecomposition& split,
                             double tol = 1e-6) {
    detail::require_square(u, "image_block_count");
    if (split.p_image.rows() != u.rows() || split.p_image.cols() != u.cols())
        throw input_error("image_block_count: projector dimension mismatch");

    Eigen::SelfAdjointEigenSolver<CMatrix> es(split.p_image);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) > 0.5) keep.push_back(i);
    if (keep.empty()) return 0;

    CMatrix q(u.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i)
        q.col(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(keep[i]);
    const CMatrix restricted = q.adjoint() * u * q;
    Eigen::ComplexEigenSolver<CMatrix> ces(restricted);

    std::vector<Complex> reps;
    for (Eigen::Index i = 0; i < ces.eigenvalues().size(); ++i) {
        const Complex lambda = ces.eigenvalues()(i);
        bool fresh = true;
        for (const auto& r : reps) fresh = fresh && std::abs(lambda - r) > tol;
        if (fresh) reps.push_back(lambda);
    }
    return static_cast<int>(reps.size());
}

// ---------------------------------------------------------------------------
// Alpha-weak-mixing check along a sequence.
// ---------------------------------------------------------------------------

struct PairCorrelation {
    std::string name;
    CorrelationSequence c; // raw correlations <T^n 1_A, 1_B> = mu(A cap T^n B)
    double mass_a = 0.0;   // mu(A)
    double mass_b = 0.0;   // mu(B)
    double mass_ab = 0.0;  // mu(A cap B)
};

struct AlphaMixingRow {
    std::string name;
    double limit = 0.0;
    double target = 0.0;
    double deviation = 0.0;
    bool converged = false;
    bool holds = false;
};

struct AlphaMixingReport {
    double alpha = 0.0;
    double tolerance = 0.0;
    bool decided = false; // every pair stabilized along the sequence
    bool holds = false;   // decided, and every pair is within tolerance
    std::vector<AlphaMixingRow> rows;

    bool passed() const { return decided && holds; }
};

// Checks  lim mu(A cap T^n B) = alpha mu(A) mu(B) + (1 - alpha) mu(A cap B)
// along the sequence, pair by pair. The limit is proxied by last-quarter
// stabilization of the raw correlation values; a pair that fails to stabilize
// marks the report undecided and is flagged in its row.
inline AlphaMixingReport alpha_weak_mixing_check(const std::vector<PairCorrelation>& pairs,
                                                 const std::vector<std::int64_t>& sequence,
                                                 double alpha, double tol) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw input_error("alpha_weak_mixing_check: alpha must lie in [0,1]");
    if (!(tol > 0.0)) throw input_error("alpha_weak_mixing_check: tol must be positive");
    if (pairs.empty()) throw input_error("alpha_weak_mixing_check: need at least one pair");
    detail::require_increasing_positive(sequence, "alpha_weak_mixing_check", 4);

    AlphaMixingReport rep;
    rep.alpha = alpha;
    rep.tolerance = tol;
    rep.decided = true;
    rep.holds = true;
    for (const auto& p : pairs) {
        if (p.c.centered)
            throw input_error("alpha_weak_mixing_check: needs raw (uncentered) correlations");
        for (double m : {p.mass_a, p.mass_b, p.mass_ab})
            if (!(m >= -1e-9 && m <= 1.0 + 1e-9))
                throw input_error("alpha_weak_mixing_check: masses must lie in [0,1]");

        std::vector<Complex> samples;
        samples.reserve(sequence.size());
        for (auto n : sequence) samples.push_back(p.c.at(n));
        const LimitReport lr = detail::stabilize(samples, tol);

        AlphaMixingRow row;
        row.name = p.name;
        row.limit = lr.value.real();
        row.deviation = lr.deviation;
        row.converged = lr.converged;
        row.target = alpha * p.mass_a * p.mass_b + (1.0 - alpha) * p.mass_ab;
        row.holds = row.converged && std::abs(row.limit - row.target) <= tol;
        rep.decided = rep.decided && row.converged;
        rep.holds = rep.holds && row.holds;
        rep.rows.push_back(std::move(row));
    }
    if (!rep.decided) rep.holds = false;
    return rep;
}

// System-level wrapper: builds the pair correlations from indicator
// observables. mu(A) and mu(B) come from known means where available and
// from empirical means otherwise; mu(A cap B) is the lag-0 correlation.
inline AlphaMixingReport alpha_weak_mixing_check(
    const System& sys, const std::vector<std::pair<Observable, Observable>>& pairs,
    const std::vector<std::int64_t>& sequence, double alpha, double tol,
    const Quality& quality = Quality::empirical(200000)) {
    if (pairs.empty()) throw input_error("alpha_weak_mixing_check: need at least one pair");
    detail::require_increasing_positive(sequence, "alpha_weak_mixing_check", 4);

    std::vector<std::int64_t> lags{0};
    lags.insert(lags.end(), sequence.begin(), sequence.end());

    const std::int64_t n_mean = std::max<std::int64_t>(
        quality.kind == Quality::Kind::empirical ? quality.orbit_length : 0, 100000);
    auto indicator_mass = [&](const Observable& o) {
        if (o.kind == Observable::Kind::character)
            throw input_error("alpha_weak_mixing_check: pairs must be indicators (sets)");
        if (o.centered)
            throw input_error("alpha_weak_mixing_check: pass raw indicators, not centered ones");
        if (o.mean_known) return o.mean.real();
        return empirical_mean(sys, o, n_mean, quality.seed).value.real();
    };

    std::vector<PairCorrelation> built;
    for (const auto& [obs_a, obs_b] : pairs) {
        PairCorrelation pc;
        pc.mass_a = indicator_mass(obs_a);
        pc.mass_b = indicator_mass(obs_b);
        pc.c = correlation(sys, obs_a, obs_b, lags, quality);
        if (quality.kind == Quality::Kind::empirical)
            detail::debias_zero_padding(pc.c, quality.orbit_length);
        pc.mass_ab = pc.c.at(0).real();
        pc.name = obs_a.name + "," + obs_b.name;
        built.push_back(std::move(pc));
    }
    return alpha_weak_mixing_check(built, sequence, alpha, tol);
}

} // namespace ergolab
