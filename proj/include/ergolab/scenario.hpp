#pragma once

// Batch experiment driver. A scenario is a named, seeded list of steps; each
// step names an operation and carries its parameters inline. Steps execute in
// order, write CSV artifacts plus one JSON summary per scenario, and may
// carry "expect" blocks whose violations mark the run as failed without
// aborting the remaining steps. Bad parameters (unknown operation, unknown
// system family, malformed fields) are validation errors and abort the run.
//
// Identical scenario + seed produces byte-identical output files: every
// computation below runs single-threaded with fixed iteration order, and all
// floating-point formatting goes through the shortest round-trip form.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ergolab/json_io.hpp"

namespace ergolab {

struct ScenarioStep {
    std::string op;
    json params; // the whole step object; handlers read their fields from it
};

struct Scenario {
    std::string name;
    std::string description;
    std::uint64_t seed = 1;
    std::vector<ScenarioStep> steps;
};

enum class RunStatus { ok, assertion_failed, invalid };

struct RunResult {
    RunStatus status = RunStatus::ok;
    std::string message;               // failure diagnostics, empty on success
    std::vector<std::string> outputs;  // files written, in creation order
    json summary;                      // the summary document (also written to disk)
};

// ---------------------------------------------------------------------------
// Parsing.

inline Scenario parse_scenario(const json& j) {
    if (!j.is_object()) throw input_error("scenario: document must be an object");
    Scenario s;
    s.name = detail::string_field(j, "name", "scenario");
    if (s.name.empty()) throw input_error("scenario: name must not be empty");
    if (j.count("description")) s.description = detail::string_field(j, "description", "scenario");
    if (j.count("seed")) {
        const std::int64_t seed = detail::integer_field(j, "seed", "scenario");
        if (seed < 0) throw input_error("scenario: seed must be nonnegative");
        s.seed = static_cast<std::uint64_t>(seed);
    }
    if (j.count("steps")) {
        const json& steps = j.at("steps");
        if (!steps.is_array()) throw input_error("scenario: steps must be a list");
        for (const auto& step : steps) {
            if (!step.is_object()) throw input_error("scenario: each step must be an object");
            ScenarioStep st;
            st.op = detail::string_field(step, "op", "step");
            st.params = step;
            s.steps.push_back(std::move(st));
        }
    }
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("scenario: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw input_error("scenario: " + path + ": " + e.what());
    }
    return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// Step execution plumbing.

namespace detail {

struct StepContext {
    std::string out_dir;
    std::string scenario;
    std::uint64_t seed = 1;
    int index = 0; // 1-based position in the step list

    std::string artifact_path(const std::string& op, const char* ext) const {
        std::ostringstream os;
        os << out_dir << "/" << scenario << "-step" << (index < 10 ? "0" : "") << index << "-"
           << op << "." << ext;
        return os.str();
    }
};

struct StepResult {
    json summary = json::object();
    std::vector<std::string> artifacts;
    std::vector<std::string> failures; // expectation violations, human readable
};

inline void note_failure(StepResult& r, const StepContext& ctx, const std::string& what) {
    std::ostringstream os;
    os << "step " << ctx.index << ": " << what;
    r.failures.push_back(os.str());
}

// Shared "expect" helpers. Every expectation is optional; present ones are
// checked and violations recorded.
inline void expect_bounds(StepResult& r, const StepContext& ctx, const json& expect,
                          const char* key_le, const char* key_ge, const char* label,
                          double value) {
    if (expect.count(key_le)) {
        const double bound = number_field(expect, key_le, "expect");
        if (!(value <= bound)) {
            std::ostringstream os;
            os << label << " = " << number_string(value) << " exceeds " << number_string(bound);
            note_failure(r, ctx, os.str());
        }
    }
    if (expect.count(key_ge)) {
        const double bound = number_field(expect, key_ge, "expect");
        if (!(value >= bound)) {
            std::ostringstream os;
            os << label << " = " << number_string(value) << " is below " << number_string(bound);
            note_failure(r, ctx, os.str());
        }
    }
}

inline Quality step_quality(const json& params, const StepContext& ctx,
                            std::int64_t default_orbit) {
    if (params.count("quality")) return parse_quality(params.at("quality"), ctx.seed);
    if (params.count("orbit_length"))
        return Quality::empirical(integer_field(params, "orbit_length", "step"), ctx.seed);
    return Quality::empirical(default_orbit, ctx.seed);
}

inline std::vector<std::int64_t> step_lags(const json& params) {
    if (params.count("lags")) return list_field<std::int64_t>(params, "lags", "step");
    if (params.count("lag_range")) {
        const json& r = params.at("lag_range");
        const std::int64_t from = integer_field(r, "from", "lag_range");
        const std::int64_t to = integer_field(r, "to", "lag_range");
        const std::int64_t step = r.count("step") ? integer_field(r, "step", "lag_range") : 1;
        if (step < 1) throw input_error("lag_range: step must be positive");
        if (to < from) throw input_error("lag_range: to must be >= from");
        if ((to - from) / step > 2000000) throw input_error("lag_range: more than 2e6 lags");
        std::vector<std::int64_t> lags;
        for (std::int64_t n = from; n <= to; n += step) lags.push_back(n);
        return lags;
    }
    throw input_error("step: needs \"lags\" or \"lag_range\"");
}

inline CMatrix haar_unitary(Rng& rng, int d) {
    CMatrix g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.complex_gaussian();
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ() * CMatrix::Identity(d, d);
    const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j) {
        const Complex rjj = r(j, j);
        const double m = std::abs(rjj);
        if (m > 0.0) q.col(j) *= rjj / m;
    }
    return q;
}

// ---------------------------------------------------------------------------
// Handlers, one per operation.

inline StepResult run_correlation_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const System sys = parse_system(require_field(p, "system", "correlation step"));
    const Observable f = parse_observable(require_field(p, "f", "correlation step"));
    const Observable g = p.count("g") ? parse_observable(p.at("g")) : f;
    const Quality q = step_quality(p, ctx, 200000);
    const auto lags = step_lags(p);
    const CorrelationSequence c = correlation(sys, f, g, lags, q);
    const std::string path = ctx.artifact_path("correlation", "csv");
    write_correlation_csv(path, c);
    r.artifacts.push_back(path);
    r.summary = json{{"system", system_json(sys)},
                     {"f", observable_json(f)},
                     {"g", observable_json(g)},
                     {"lag_count", lags.size()},
                     {"mass", complex_json(c.mass)}};
    return r;
}

inline StepResult run_limit_report_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const System sys = parse_system(require_field(p, "system", "limit_report step"));
    const Observable f = parse_observable(require_field(p, "f", "limit_report step"));
    const Observable g = p.count("g") ? parse_observable(p.at("g")) : f;
    const LimitScheme scheme = parse_scheme(require_field(p, "scheme", "limit_report step"));
    const Quality q = step_quality(p, ctx, 200000);
    const auto lags = step_lags(p);
    const double tol = p.count("tol") ? number_field(p, "tol", "limit_report step")
                                      : (q.kind == Quality::Kind::exact ? 1e-8 : 0.05);
    const CorrelationSequence c = correlation(sys, f, g, lags, q);
    const LimitReport report = evaluate_limit(c, scheme, tol);
    const std::string path = ctx.artifact_path("limit_report", "csv");
    write_correlation_csv(path, c);
    r.artifacts.push_back(path);
    r.summary = json{{"system", system_json(sys)},
                     {"f", observable_json(f)},
                     {"scheme", scheme_json(scheme)},
                     {"tolerance", tol},
                     {"report", limit_report_json(report)}};
    if (p.count("expect")) {
        const json& e = p.at("expect");
        if (e.count("converged") && e.at("converged").get<bool>() != report.converged)
            note_failure(r, ctx, std::string("limit convergence expected ") +
                         (e.at("converged").get<bool>() ? "true" : "false"));
        expect_bounds(r, ctx, e, "abs_value_le", "abs_value_ge", "|limit|", std::abs(report.value));
    }
    return r;
}

inline StepResult run_spectral_estimate_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const System sys = parse_system(require_field(p, "system", "spectral step"));
    const Observable f = parse_observable(require_field(p, "f", "spectral step"));
    const std::int64_t max_lag = integer_field(p, "max_lag", "spectral step");
    const std::int64_t grid = integer_field(p, "grid_size", "spectral step");
    if (max_lag < 1 || max_lag > 100000)
        throw input_error("spectral step: max_lag must be in [1, 1e5]");
    if (grid < 8 || grid > 1000000) throw input_error("spectral step: grid_size out of range");
    const Quality q = step_quality(p, ctx, 200000);
    std::vector<std::int64_t> lags(static_cast<std::size_t>(max_lag) + 1);
    std::iota(lags.begin(), lags.end(), 0);
    const CorrelationSequence c = correlation(sys, f, f, lags, q);
    const SpectralEstimate est = fejer_estimate(c, static_cast<int>(grid));
    const std::string path = ctx.artifact_path("density", "csv");
    write_density_csv(path, est);
    r.artifacts.push_back(path);
    r.summary = json{{"system", system_json(sys)},
                     {"f", observable_json(f)},
                     {"estimate", spectral_json(est)}};
    if (p.count("expect")) {
        const json& e = p.at("expect");
        const double min_density = *std::min_element(est.density.begin(), est.density.end());
        const double mass_dev =
            std::abs(est.grid_mass() + est.atom_mass() - est.total_mass);
        expect_bounds(r, ctx, e, "", "min_density_ge", "min density", min_density);
        expect_bounds(r, ctx, e, "mass_dev_le", "", "mass accounting deviation", mass_dev);
    }
    return r;
}

inline StepResult run_classify_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const System sys = parse_system(require_field(p, "system", "classify step"));
    const json& obs_list = require_field(p, "observables", "classify step");
    if (!obs_list.is_array() || obs_list.empty())
        throw input_error("classify step: observables must be a nonempty list");
    std::vector<Observable> obs;
    for (const auto& oj : obs_list) obs.push_back(parse_observable(oj));
    ClassifyBudget budget;
    budget.seed = ctx.seed;
    if (p.count("orbit_length"))
        budget.orbit_length = integer_field(p, "orbit_length", "classify step");
    if (p.count("max_lag")) budget.max_lag = integer_field(p, "max_lag", "classify step");
    if (p.count("ip_families"))
        budget.ip_families = static_cast<int>(integer_field(p, "ip_families", "classify step"));
    if (p.count("ip_depth"))
        budget.ip_depth = static_cast<int>(integer_field(p, "ip_depth", "classify step"));
    const MixingVerdict v = classify(sys, obs, budget);
    r.summary = json{{"system", system_json(sys)}, {"verdict", verdict_json(v)}};
    if (p.count("expect")) {
        const json& e = p.at("expect");
        const auto check = [&](const char* key, TestOutcome got) {
            if (!e.count(key)) return;
            const std::string want = string_field(e, key, "expect");
            if (want != to_string(got))
                note_failure(r, ctx, std::string(key) + " expected " + want + ", got " +
                             to_string(got));
        };
        check("weak", v.weak);
        check("mild_proxy", v.mild_proxy);
        check("strong_proxy", v.strong_proxy);
    }
    return r;
}

inline std::vector<std::int64_t> candidate_sequence(const json& cj, const System& sys) {
    const std::string kind = string_field(cj, "kind", "candidates");
    if (kind == "denominators") {
        double alpha;
        if (cj.count("alpha")) {
            alpha = number_field(cj, "alpha", "candidates");
        } else if (sys.family == System::Family::rotation) {
            alpha = sys.alpha;
        } else {
            throw input_error("candidates: denominators need an alpha or a rotation system");
        }
        return convergent_denominators(alpha, integer_field(cj, "max_q", "candidates"));
    }
    if (kind == "chacon_heights")
        return chacon_heights(static_cast<int>(integer_field(cj, "count", "candidates")));
    if (kind == "powers") {
        const std::int64_t base = integer_field(cj, "base", "candidates");
        const std::int64_t max = integer_field(cj, "max", "candidates");
        const std::int64_t from = cj.count("from") ? integer_field(cj, "from", "candidates") : base;
        if (base < 2) throw input_error("candidates: power base must be at least 2");
        if (from < 1 || max < from) throw input_error("candidates: need 1 <= from <= max");
        std::vector<std::int64_t> out;
        for (std::int64_t v = from; v <= max; v *= base) {
            out.push_back(v);
            if (v > max / base) break;
        }
        return out;
    }
    if (kind == "list") return list_field<std::int64_t>(cj, "entries", "candidates");
    throw input_error("candidates: unknown kind \"" + kind + "\"");
}

inline void check_profile_expectations(StepResult& r, const StepContext& ctx, const json& p,
                                       const RigidityProfile& prof) {
    if (!p.count("expect")) return;
    const json& e = p.at("expect");
    if (e.count("kind")) {
        const std::string want = string_field(e, "kind", "expect");
        if (want != to_string(prof.kind))
            note_failure(r, ctx, "profile kind expected " + want + ", got " + to_string(prof.kind));
    }
    expect_bounds(r, ctx, e, "alpha_hat_le", "alpha_hat_ge", "alpha_hat", prof.alpha_hat);
    expect_bounds(r, ctx, e, "error_bar_le", "", "error bar", prof.error_bar);
}

inline StepResult run_rigidity_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const System sys = parse_system(require_field(p, "system", "rigidity step"));
    const Observable f = parse_observable(require_field(p, "observable", "rigidity step"));
    const json& cands = require_field(p, "candidates", "rigidity step");
    if (!cands.is_array() || cands.empty())
        throw input_error("rigidity step: candidates must be a nonempty list");
    std::vector<std::vector<std::int64_t>> lists;
    for (const auto& cj : cands) lists.push_back(candidate_sequence(cj, sys));
    const int depth = static_cast<int>(integer_field(p, "depth", "rigidity step"));
    const Quality q = step_quality(p, ctx, 200000);
    const RigidityProfile prof = rigidity_search(sys, f, lists, depth, q);
    r.summary = json{{"system", system_json(sys)},
                     {"observable", observable_json(f)},
                     {"profile", profile_json(prof)}};
    check_profile_expectations(r, ctx, p, prof);
    return r;
}

inline StepResult run_rigidity_iid_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const double prob = number_field(p, "p", "rigidity_iid step");
    const std::int64_t samples = integer_field(p, "samples", "rigidity_iid step");
    auto lags = list_field<std::int64_t>(p, "lags", "rigidity_iid step");
    const int depth = static_cast<int>(integer_field(p, "depth", "rigidity_iid step"));
    std::vector<std::int64_t> with_zero{0};
    with_zero.insert(with_zero.end(), lags.begin(), lags.end());
    const CorrelationSequence c =
        iid_indicator_correlation(prob, with_zero, samples, ctx.seed, true);
    const RigidityProfile prof = rigidity_profile_from(c, prob, {lags}, depth);
    r.summary = json{{"p", prob}, {"samples", samples}, {"profile", profile_json(prof)}};
    check_profile_expectations(r, ctx, p, prof);
    return r;
}

inline StepResult run_weak_limit_fit_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const int max_power = static_cast<int>(integer_field(p, "max_power", "weak_limit_fit step"));
    std::vector<std::int64_t> seq;
    if (p.count("heights_count")) {
        seq = chacon_heights(
            static_cast<int>(integer_field(p, "heights_count", "weak_limit_fit step")));
    } else {
        seq = list_field<std::int64_t>(p, "sequence", "weak_limit_fit step");
    }
    const json& basis_list = require_field(p, "basis", "weak_limit_fit step");
    if (!basis_list.is_array() || basis_list.empty())
        throw input_error("weak_limit_fit step: basis must be a nonempty list of words");
    std::vector<Observable> basis;
    for (const auto& w : basis_list) {
        if (!w.is_string()) throw input_error("weak_limit_fit step: basis entries must be words");
        basis.push_back(Observable::cylinder(w.get<std::string>()));
    }
    const Quality q = step_quality(p, ctx, 1000000);
    const WeakLimitFit fit = chacon_weak_limit_fit(max_power, seq, basis, q);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < fit.powers.size(); ++k)
        rows.push_back({std::to_string(fit.powers[k]), number_string(fit.weights[k])});
    const std::string path = ctx.artifact_path("weak_limit_fit", "csv");
    write_csv(path, "power,weight", rows);
    r.artifacts.push_back(path);
    r.summary = json{{"fit", fit_json(fit)}};
    if (p.count("expect")) {
        const json& e = p.at("expect");
        expect_bounds(r, ctx, e, "residual_le", "", "fit residual", fit.residual);
        expect_bounds(r, ctx, e, "support_le", "", "fit support", fit.support);
    }
    return r;
}

inline bool lowest_base4_digit_is_2(std::int64_t n) {
    n = n < 0 ? -n : n;
    while (n != 0 && n % 4 == 0) n /= 4;
    return n % 4 == 2;
}

inline StepResult run_cantor_identities_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const std::int64_t max_abs_n = integer_field(p, "max_abs_n", "cantor step");
    const double scaling_tol = number_field(p, "scaling_tol", "cantor step");
    const std::int64_t factor_span = integer_field(p, "factor_span", "cantor step");
    const int factor_j = static_cast<int>(integer_field(p, "factor_j", "cantor step"));
    const double factor_tol = number_field(p, "factor_tol", "cantor step");
    if (max_abs_n < 1 || max_abs_n > 1000000)
        throw input_error("cantor step: max_abs_n out of range");
    if (factor_j < 1 || factor_j > 30) throw input_error("cantor step: factor_j out of range");

    std::int64_t rule_mismatches = 0;
    double worst_scaling = 0.0;
    std::vector<std::vector<std::string>> rows;
    for (std::int64_t n = 0; n <= max_abs_n; ++n) {
        const Complex v = cantor_fourier(n);
        const bool vanishes = std::abs(v) == 0.0;
        if (vanishes != lowest_base4_digit_is_2(n)) ++rule_mismatches;
        const Complex neg = cantor_fourier(-n);
        if ((std::abs(neg) == 0.0) != lowest_base4_digit_is_2(-n)) ++rule_mismatches;
        worst_scaling = std::max(worst_scaling, std::abs(cantor_fourier(4 * n) - v));
        worst_scaling = std::max(worst_scaling, std::abs(cantor_fourier(-4 * n) - neg));
        rows.push_back({std::to_string(n), number_string(v.real()), number_string(v.imag()),
                        number_string(std::abs(v)), vanishes ? "1" : "0"});
    }
    double worst_factor = 0.0;
    const std::int64_t scale = std::int64_t(1) << (2 * factor_j);
    for (std::int64_t m = -factor_span; m <= factor_span; ++m)
        for (std::int64_t n = -factor_span; n <= factor_span; ++n)
            worst_factor = std::max(worst_factor,
                std::abs(cantor_fourier(m * scale + n) - cantor_fourier(n) * cantor_fourier(m)));

    const std::string path = ctx.artifact_path("cantor_fourier", "csv");
    write_csv(path, "n,re,im,modulus,vanishes", rows);
    r.artifacts.push_back(path);
    r.summary = json{{"max_abs_n", max_abs_n},
                     {"digit_rule_mismatches", rule_mismatches},
                     {"worst_scaling_deviation", worst_scaling},
                     {"worst_factorization_deviation", worst_factor}};
    if (rule_mismatches != 0)
        note_failure(r, ctx, "vanishing rule mismatches: " + std::to_string(rule_mismatches));
    if (!(worst_scaling <= scaling_tol))
        note_failure(r, ctx, "4-adic scaling deviation " + number_string(worst_scaling) +
                     " exceeds " + number_string(scaling_tol));
    if (!(worst_factor <= factor_tol))
        note_failure(r, ctx, "factorization deviation " + number_string(worst_factor) +
                     " exceeds " + number_string(factor_tol));
    return r;
}

inline StepResult run_cantor_rajchman_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const std::int64_t max_lag = integer_field(p, "max_lag", "rajchman step");
    const std::int64_t power_base = integer_field(p, "power_base", "rajchman step");
    const std::int64_t power_max = integer_field(p, "power_max", "rajchman step");
    const auto thresholds = list_field<double>(p, "thresholds", "rajchman step");
    if (max_lag < 8 || max_lag > 1000000) throw input_error("rajchman step: max_lag out of range");
    if (power_base < 2) throw input_error("rajchman step: power_base must be at least 2");

    std::vector<std::int64_t> lags;
    for (std::int64_t n = 1; n <= max_lag; ++n) lags.push_back(n);
    for (std::int64_t v = power_base; v <= power_max && v > 0; v *= power_base) {
        lags.push_back(v);
        if (v > power_max / power_base) break;
    }
    std::sort(lags.begin(), lags.end());
    lags.erase(std::unique(lags.begin(), lags.end()), lags.end());
    const CorrelationSequence c =
        make_correlation(lags, [](std::int64_t n) { return cantor_fourier(n); });
    const auto rows = rajchman_report(c, thresholds);

    std::vector<std::vector<std::string>> csv_rows;
    json row_json = json::array();
    for (const auto& row : rows) {
        csv_rows.push_back({number_string(row.threshold), row.attained ? "1" : "0",
                            std::to_string(row.least_start), number_string(row.tail_sup)});
        row_json.push_back(json{{"threshold", row.threshold},
                                {"attained", row.attained},
                                {"least_start", row.least_start},
                                {"tail_sup", row.tail_sup}});
    }
    const std::string path = ctx.artifact_path("rajchman", "csv");
    write_csv(path, "threshold,attained,least_start,tail_sup", csv_rows);
    r.artifacts.push_back(path);
    r.summary = json{{"rows", row_json}};
    if (p.count("expect_unattained")) {
        for (const double want : list_field<double>(p, "expect_unattained", "rajchman step")) {
            bool found = false;
            for (const auto& row : rows)
                if (row.threshold == want) {
                    found = true;
                    if (row.attained)
                        note_failure(r, ctx, "threshold " + number_string(want) +
                                     " unexpectedly attained");
                }
            if (!found)
                note_failure(r, ctx, "threshold " + number_string(want) + " not in report");
        }
    }
    return r;
}

inline StepResult run_skew_limit_table_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const int power = static_cast<int>(integer_field(p, "power", "skew step"));
    const std::int64_t max_freq = integer_field(p, "max_freq", "skew step");
    const double tol = number_field(p, "tol", "skew step");
    if (power < 1 || power > 20) throw input_error("skew step: power must be in [1, 20]");
    if (max_freq < 1 || max_freq > 8) throw input_error("skew step: max_freq must be in [1, 8]");

    const System sys = System::skew_torus(BaseMeasure::cantor4());
    const std::int64_t n = std::int64_t(1) << (2 * power);
    double worst_dev = 0.0, worst_half_row = 0.0;
    std::vector<std::vector<std::string>> rows;
    for (std::int64_t a = -max_freq; a <= max_freq; ++a)
        for (std::int64_t b = -max_freq; b <= max_freq; ++b)
            for (std::int64_t c = -max_freq; c <= max_freq; ++c)
                for (std::int64_t d = -max_freq; d <= max_freq; ++d) {
                    const Observable f = Observable::character({d, c});
                    const Observable g = Observable::character({a, b});
                    const Complex got =
                        correlation(sys, f, g, {n}, Quality::exact()).at(n);
                    const Complex want = b == c
                        ? cantor_fourier(a - d) * cantor_fourier(-c)
                        : Complex(0.0, 0.0);
                    const double dev = std::abs(got - want);
                    worst_dev = std::max(worst_dev, dev);
                    if (((c % 4) + 4) % 4 == 2)
                        worst_half_row = std::max(worst_half_row, std::abs(got));
                    rows.push_back({std::to_string(a), std::to_string(b), std::to_string(c),
                                    std::to_string(d), number_string(got.real()),
                                    number_string(got.imag()), number_string(dev)});
                }
    const std::string path = ctx.artifact_path("skew_limits", "csv");
    write_csv(path, "a,b,c,d,re,im,limit_deviation", rows);
    r.artifacts.push_back(path);
    r.summary = json{{"power", power},
                     {"max_freq", max_freq},
                     {"worst_limit_deviation", worst_dev},
                     {"worst_mixing_row_modulus", worst_half_row}};
    if (!(worst_dev <= tol))
        note_failure(r, ctx, "limit deviation " + number_string(worst_dev) + " exceeds " +
                     number_string(tol));
    if (!(worst_half_row <= tol))
        note_failure(r, ctx, "mixing-row modulus " + number_string(worst_half_row) +
                     " exceeds " + number_string(tol));
    return r;
}

inline StepResult run_rs_autocorrelation_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const int log2_count = static_cast<int>(integer_field(p, "log2_count", "rs step"));
    const std::int64_t max_lag = integer_field(p, "max_lag", "rs step");
    const double bound = number_field(p, "bound", "rs step");
    if (log2_count < 8 || log2_count > 24) throw input_error("rs step: log2_count must be in [8, 24]");
    if (max_lag < 1 || max_lag > 4096) throw input_error("rs step: max_lag must be in [1, 4096]");

    const std::int64_t n_count = std::int64_t(1) << log2_count;
    const auto signs = rudin_shapiro_sequence(n_count + max_lag);
    double worst = 0.0;
    std::vector<std::vector<std::string>> rows;
    for (std::int64_t lag = 1; lag <= max_lag; ++lag) {
        std::int64_t s = 0;
        for (std::int64_t k = 0; k < n_count; ++k)
            s += static_cast<std::int64_t>(signs[static_cast<std::size_t>(k + lag)]) *
                 signs[static_cast<std::size_t>(k)];
        const double v = static_cast<double>(s) / static_cast<double>(n_count);
        worst = std::max(worst, std::abs(v));
        rows.push_back({std::to_string(lag), number_string(v)});
    }
    const std::string path = ctx.artifact_path("rs_autocorrelation", "csv");
    write_csv(path, "lag,value", rows);
    r.artifacts.push_back(path);
    r.summary = json{{"count", n_count}, {"max_lag", max_lag}, {"worst_abs", worst}};
    if (!(worst <= bound))
        note_failure(r, ctx, "autocorrelation " + number_string(worst) + " exceeds " +
                     number_string(bound));
    return r;
}

inline StepResult run_vdc_suite_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const std::int64_t trials = integer_field(p, "trials", "vdc step");
    const int dim = static_cast<int>(integer_field(p, "dim", "vdc step"));
    const std::int64_t vectors = integer_field(p, "vectors", "vdc step");
    const double tol = number_field(p, "tol", "vdc step");
    if (trials < 1 || trials > 100000) throw input_error("vdc step: trials out of range");
    if (dim < 1 || dim > 64) throw input_error("vdc step: dim must be in [1, 64]");
    if (vectors < 2 || vectors > 512) throw input_error("vdc step: vectors must be in [2, 512]");

    Rng rng(0x7DC0FFEEull * 2654435761u + ctx.seed);
    std::int64_t violations = 0;
    double worst_excess = -1.0;
    for (std::int64_t t = 0; t < trials; ++t) {
        std::vector<std::vector<Complex>> xs;
        for (std::int64_t k = 0; k < vectors; ++k) xs.push_back(rng.unit_vector(dim));
        const VdcInequality v = vdc_inequality_check(xs, static_cast<std::size_t>(vectors));
        const double excess = v.lhs - v.rhs;
        worst_excess = std::max(worst_excess, excess);
        if (excess > tol) ++violations;
    }

    // Conclusion checks on two fixed models: nearly orthogonal vectors (the
    // hypothesis holds, so the single limit must be small too) and constant
    // vectors (the hypothesis fails, so the implication is vacuous).
    std::vector<std::int64_t> idx(16);
    std::iota(idx.begin(), idx.end(), 1);
    const LimitScheme scheme = LimitScheme::subsequence(idx);
    std::map<std::pair<std::int64_t, std::int64_t>, Complex> c2_orth, c2_const;
    std::map<std::int64_t, Complex> y_orth, y_const;
    for (auto a : idx) {
        y_orth[a] = a == 1 ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
        y_const[a] = Complex(1.0, 0.0);
        for (auto b : idx) {
            c2_orth[{a, b}] = a == b ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
            c2_const[{a, b}] = Complex(1.0, 0.0);
        }
    }
    const VdcConclusion orth = vdc_conclusion_check(c2_orth, scheme, y_orth, 1e-6);
    const VdcConclusion cons = vdc_conclusion_check(c2_const, scheme, y_const, 1e-6);

    r.summary = json{{"trials", trials},
                     {"violations", violations},
                     {"worst_excess", worst_excess},
                     {"orthogonal_model",
                      json{{"decided", orth.decided}, {"verdict", orth.verdict}}},
                     {"constant_model",
                      json{{"decided", cons.decided}, {"verdict", cons.verdict}}}};
    if (violations != 0)
        note_failure(r, ctx, std::to_string(violations) + " averaging inequality violations");
    if (!orth.decided || !orth.verdict)
        note_failure(r, ctx, "orthogonal conclusion model failed");
    if (!cons.decided || !cons.verdict)
        note_failure(r, ctx, "constant conclusion model failed");
    return r;
}

inline StepResult run_operator_suite_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const std::int64_t trials = integer_field(p, "trials", "operator step");
    const int max_dim = static_cast<int>(integer_field(p, "max_dim", "operator step"));
    const double identity_tol = number_field(p, "identity_tol", "operator step");
    const double power_tol = p.count("power_tol")
        ? number_field(p, "power_tol", "operator step") : 1e-8;
    if (trials < 1 || trials > 100000) throw input_error("operator step: trials out of range");
    if (max_dim < 2 || max_dim > 64) throw input_error("operator step: max_dim must be in [2, 64]");

    Rng rng(0x0B5E55EDull * 2654435761u + ctx.seed);
    double worst_identity = 0.0;
    std::int64_t normal_failures = 0, power_failures = 0, projection_failures = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        const int d = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_dim - 1)));
        const CMatrix u = haar_unitary(rng, d);
        CMatrix diag = CMatrix::Zero(d, d);
        for (int j = 0; j < d; ++j) {
            // Moduli either exactly zero or bounded away from zero, so the
            // rank thresholds inside the decomposition are unambiguous.
            const bool null_eig = rng.below(4) == 0;
            const double modulus = null_eig ? 0.0 : 0.3 + 0.7 * rng.uniform();
            diag(j, j) = std::polar(modulus, 2.0 * M_PI * rng.uniform());
        }
        const CMatrix v = u * diag * u.adjoint();
        if (!check_normal(v, 1e-8)) ++normal_failures;
        const OrthogonalDecomposition dec = image_kernel_decomposition(v);
        worst_identity = std::max(
            worst_identity,
            operator_norm(dec.p_image + dec.p_kernel - CMatrix::Identity(d, d)));
        for (int n : {2, 3, 5})
            if (!kernel_power_invariance(v, n, power_tol)) ++power_failures;
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
        const CMatrix q = haar_unitary(rng, d).leftCols(k);
        if (!assert_projection_from_idempotent_contraction(q * q.adjoint(), 1e-9))
            ++projection_failures;
    }
    r.summary = json{{"trials", trials},
                     {"worst_identity_deviation", worst_identity},
                     {"normal_check_failures", normal_failures},
                     {"kernel_power_failures", power_failures},
                     {"projection_failures", projection_failures}};
    if (!(worst_identity <= identity_tol))
        note_failure(r, ctx, "projector identity deviation " + number_string(worst_identity) +
                     " exceeds " + number_string(identity_tol));
    if (normal_failures != 0)
        note_failure(r, ctx, std::to_string(normal_failures) + " normality check failures");
    if (power_failures != 0)
        note_failure(r, ctx, std::to_string(power_failures) + " kernel power invariance failures");
    if (projection_failures != 0)
        note_failure(r, ctx, std::to_string(projection_failures) + " projection check failures");
    return r;
}

inline StepResult run_u_split_demo_step(const json& p, const StepContext& ctx) {
    (void)p;
    StepResult r;
    const double alpha = std::sqrt(2.0) - 1.0;
    std::vector<std::int64_t> windows;
    for (std::int64_t w = 1024; w <= (std::int64_t(1) << 18); w *= 2) windows.push_back(w);

    // Averaging along growing windows kills the irrational-phase block and
    // keeps the eigenvalue-1 block.
    CMatrix u = CMatrix::Zero(2, 2);
    u(0, 0) = Complex(1.0, 0.0);
    u(1, 1) = std::polar(1.0, 2.0 * M_PI * alpha);
    const OrthogonalDecomposition split = u_split(u, {LimitScheme::folner_cesaro(windows)}, 1e-2);
    CMatrix want = CMatrix::Zero(2, 2);
    want(0, 0) = Complex(1.0, 0.0);
    const double sep_dev = operator_norm(split.p_image - want);
    const int blocks = image_block_count(u, split);

    // The split must agree with the plain image/kernel decomposition of the
    // limit operator itself (here the limit is diag(1, 0)).
    const OrthogonalDecomposition direct = image_kernel_decomposition(want);
    const double match_dev = operator_norm(split.p_image - direct.p_image);

    // All-identity limits leave nothing in the kernel.
    CMatrix u3 = CMatrix::Zero(2, 2);
    u3(0, 0) = Complex(1.0, 0.0);
    u3(1, 1) = std::polar(1.0, 2.0 * M_PI / 3.0);
    std::vector<std::int64_t> multiples;
    for (int k = 1; k <= 12; ++k) multiples.push_back(3 * k);
    const OrthogonalDecomposition ident =
        u_split(u3, {LimitScheme::subsequence(multiples)}, 1e-9);
    const double ident_kernel = operator_norm(ident.p_kernel);

    // All-zero limits put everything in the kernel.
    CMatrix u4 = CMatrix::Zero(2, 2);
    u4(0, 0) = std::polar(1.0, 2.0 * M_PI * 0.3612986);
    u4(1, 1) = std::polar(1.0, 2.0 * M_PI * (std::sqrt(3.0) - 1.0));
    const OrthogonalDecomposition zero =
        u_split(u4, {LimitScheme::folner_cesaro(windows)}, 1e-2);
    const double zero_image = operator_norm(zero.p_image);

    r.summary = json{{"separation", decomposition_json(split)},
                     {"separation_deviation", sep_dev},
                     {"image_block_count", blocks},
                     {"decomposition_match_deviation", match_dev},
                     {"identity_case_kernel_norm", ident_kernel},
                     {"zero_case_image_norm", zero_image}};
    if (!(sep_dev <= 0.05))
        note_failure(r, ctx, "block separation deviation " + number_string(sep_dev));
    if (blocks != 1) note_failure(r, ctx, "expected 1 image block, got " + std::to_string(blocks));
    if (!(match_dev <= 0.05))
        note_failure(r, ctx, "split disagrees with the direct decomposition");
    if (!(ident_kernel <= 1e-6))
        note_failure(r, ctx, "identity-limit case left a nontrivial kernel");
    if (!(zero_image <= 1e-6))
        note_failure(r, ctx, "zero-limit case left a nontrivial image");
    return r;
}

inline FiniteSystem parse_finite_system(const json& j) {
    if (!j.is_object()) throw input_error("finite system: descriptor must be an object");
    const std::string kind = string_field(j, "kind", "finite system");
    if (kind == "cyclic")
        return FiniteSystem::cyclic(
            static_cast<std::size_t>(integer_field(j, "n", "finite system")));
    if (kind == "explicit") {
        const auto map64 = list_field<std::int64_t>(j, "map", "finite system");
        std::vector<std::size_t> map;
        for (auto v : map64) {
            if (v < 0) throw input_error("finite system: map entries must be nonnegative");
            map.push_back(static_cast<std::size_t>(v));
        }
        const json& mj = require_field(j, "measure", "finite system");
        if (!mj.is_array()) throw input_error("finite system: measure must be a list");
        std::vector<Rational> measure;
        for (const auto& e : mj) {
            if (!e.is_string())
                throw input_error("finite system: measure entries must be fraction strings");
            measure.emplace_back(e.get<std::string>());
        }
        return FiniteSystem::from(map, measure);
    }
    throw input_error("finite system: unknown kind \"" + kind + "\"");
}

inline StepResult run_disjointness_table_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const std::int64_t max_size = integer_field(p, "max_size", "disjointness step");
    if (max_size < 2 || max_size > 12)
        throw input_error("disjointness step: max_size must be in [2, 12]");
    std::vector<std::vector<std::string>> rows;
    std::int64_t mismatches = 0;
    for (std::int64_t m = 2; m <= max_size; ++m)
        for (std::int64_t n = 2; n <= max_size; ++n) {
            const auto x = FiniteSystem::cyclic(static_cast<std::size_t>(m));
            const auto y = FiniteSystem::cyclic(static_cast<std::size_t>(n));
            const JoiningPolytope poly = joining_polytope(x, y);
            const bool disjoint = poly.dimension == 0;
            const bool coprime = std::gcd(m, n) == 1;
            if (disjoint != coprime) ++mismatches;
            rows.push_back({std::to_string(m), std::to_string(n),
                            std::to_string(poly.dimension), disjoint ? "1" : "0",
                            coprime ? "1" : "0"});
        }
    const std::string path = ctx.artifact_path("disjointness", "csv");
    write_csv(path, "m,n,dimension,disjoint,coprime", rows);
    r.artifacts.push_back(path);
    r.summary = json{{"max_size", max_size}, {"mismatches", mismatches}};
    if (mismatches != 0)
        note_failure(r, ctx, std::to_string(mismatches) +
                     " cells where disjointness disagrees with coprimality");
    return r;
}

inline StepResult run_footnote_demo_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const FiniteSystem x = parse_finite_system(require_field(p, "x", "footnote step"));
    const FiniteSystem y = parse_finite_system(require_field(p, "y", "footnote step"));
    const Rational t_max = footnote_t_max(x, y);
    const RationalMatrix lambda = footnote_joining(x, y);
    const RationalMatrix product = product_coupling(x, y);
    const bool valid = is_joining(lambda, x, y);
    const bool is_product = lambda == product;
    const RationalMatrix markov = markov_from_joining(lambda, x, y);

    bool intertwines = true;
    for (std::size_t i = 0; i < x.size; ++i)
        for (std::size_t j = 0; j < y.size; ++j)
            if (markov.at(y.map[j], x.map[i]) != markov.at(j, i)) intertwines = false;

    r.summary = json{{"x", finite_system_json(x)},
                     {"y", finite_system_json(y)},
                     {"t_max", rational_string(t_max)},
                     {"joining", matrix_json(lambda)},
                     {"is_joining", valid},
                     {"equals_product", is_product},
                     {"markov", matrix_json(markov)},
                     {"markov_intertwines", intertwines}};
    const std::string path = ctx.artifact_path("footnote_joining", "csv");
    write_coupling_csv(path, lambda);
    r.artifacts.push_back(path);
    if (!valid) note_failure(r, ctx, "footnote construction is not a joining");
    if (is_product) note_failure(r, ctx, "footnote construction equals the product");
    if (!intertwines) note_failure(r, ctx, "markov operator fails to intertwine");
    return r;
}

inline StepResult run_extreme_joinings_step(const json& p, const StepContext& ctx) {
    StepResult r;
    const FiniteSystem x = parse_finite_system(require_field(p, "x", "extreme step"));
    const FiniteSystem y = parse_finite_system(require_field(p, "y", "extreme step"));
    const std::int64_t budget = p.count("budget")
        ? integer_field(p, "budget", "extreme step") : 200000;
    const ExtremeJoinings ext = extreme_joinings(x, y, budget);
    json vertices = json::array();
    std::int64_t invalid = 0;
    for (const auto& v : ext.vertices) {
        vertices.push_back(matrix_json(v));
        if (!is_joining(v, x, y)) ++invalid;
    }
    r.summary = json{{"count", ext.vertices.size()},
                     {"complete", ext.complete},
                     {"vertices", vertices}};
    if (invalid != 0)
        note_failure(r, ctx, std::to_string(invalid) + " vertices fail the joining check");
    if (p.count("expect")) {
        const json& e = p.at("expect");
        if (e.count("count")) {
            const std::int64_t want = integer_field(e, "count", "expect");
            if (want != static_cast<std::int64_t>(ext.vertices.size()))
                note_failure(r, ctx, "vertex count expected " + std::to_string(want) + ", got " +
                             std::to_string(ext.vertices.size()));
        }
        if (e.count("complete") && e.at("complete").get<bool>() != ext.complete)
            note_failure(r, ctx, "enumeration completeness flag mismatch");
    }
    return r;
}

using StepHandler = std::function<StepResult(const json&, const StepContext&)>;

inline const std::map<std::string, StepHandler>& step_registry() {
    static const std::map<std::string, StepHandler> registry{
        {"correlation", run_correlation_step},
        {"limit_report", run_limit_report_step},
        {"spectral_estimate", run_spectral_estimate_step},
        {"classify", run_classify_step},
        {"rigidity", run_rigidity_step},
        {"rigidity_iid", run_rigidity_iid_step},
        {"weak_limit_fit", run_weak_limit_fit_step},
        {"cantor_identities", run_cantor_identities_step},
        {"cantor_rajchman", run_cantor_rajchman_step},
        {"skew_limit_table", run_skew_limit_table_step},
        {"rs_autocorrelation", run_rs_autocorrelation_step},
        {"vdc_suite", run_vdc_suite_step},
        {"operator_suite", run_operator_suite_step},
        {"u_split_demo", run_u_split_demo_step},
        {"disjointness_table", run_disjointness_table_step},
        {"footnote_demo", run_footnote_demo_step},
        {"extreme_joinings", run_extreme_joinings_step},
    };
    return registry;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Runner.

inline RunResult run_scenario(const Scenario& s, const std::string& out_dir) {
    RunResult result;
    result.summary = json{{"scenario", s.name}, {"seed", s.seed}};
    if (s.steps.empty()) {
        result.status = RunStatus::ok;
        return result; // an empty scenario writes nothing
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        result.status = RunStatus::invalid;
        result.message = "cannot create output directory " + out_dir + ": " + ec.message();
        return result;
    }

    json step_summaries = json::array();
    std::vector<std::string> failures;
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const ScenarioStep& step = s.steps[k];
        detail::StepContext ctx;
        ctx.out_dir = out_dir;
        ctx.scenario = s.name;
        ctx.seed = s.seed;
        ctx.index = static_cast<int>(k + 1);

        const auto& registry = detail::step_registry();
        const auto it = registry.find(step.op);
        if (it == registry.end()) {
            result.status = RunStatus::invalid;
            result.message = "step " + std::to_string(k + 1) + ": unknown operation \"" +
                             step.op + "\"";
            return result;
        }
        detail::StepResult sr;
        try {
            sr = it->second(step.params, ctx);
        } catch (const input_error& e) {
            result.status = RunStatus::invalid;
            result.message = "step " + std::to_string(k + 1) + " (" + step.op + "): " + e.what();
            return result;
        } catch (const capability_error& e) {
            result.status = RunStatus::invalid;
            result.message = "step " + std::to_string(k + 1) + " (" + step.op + "): " + e.what();
            return result;
        } catch (const convergence_error& e) {
            failures.push_back("step " + std::to_string(k + 1) + " (" + step.op +
                               ") did not converge: " + e.what());
            step_summaries.push_back(json{{"op", step.op}, {"error", e.what()}});
            continue;
        }
        for (const auto& a : sr.artifacts) result.outputs.push_back(a);
        for (const auto& f : sr.failures) failures.push_back(f);
        json entry{{"op", step.op}, {"result", sr.summary}};
        if (!sr.failures.empty()) entry["failures"] = sr.failures;
        step_summaries.push_back(std::move(entry));
    }

    result.summary["steps"] = step_summaries;
    result.summary["status"] = failures.empty() ? "ok" : "failed";
    if (!failures.empty()) result.summary["failures"] = failures;

    const std::string summary_path = out_dir + "/" + s.name + ".json";
    std::ofstream out(summary_path, std::ios::binary);
    if (!out) {
        result.status = RunStatus::invalid;
        result.message = "cannot write " + summary_path;
        return result;
    }
    out << result.summary.dump(2) << "\n";
    out.close();
    result.outputs.push_back(summary_path);

    if (!failures.empty()) {
        result.status = RunStatus::assertion_failed;
        std::ostringstream os;
        for (std::size_t k = 0; k < failures.size(); ++k)
            os << (k ? "; " : "") << failures[k];
        result.message = os.str();
    }
    return result;
}

// ---------------------------------------------------------------------------
// Built-in scenarios reproducing the library's worked examples.

inline const std::vector<Scenario>& builtin_scenarios() {
    static const std::vector<Scenario> scenarios = [] {
        const char* text = R"JSON([
{
  "name": "cantor-example-4.4",
  "description": "Fourier coefficients of the digit-restricted base-4 measure: the vanishing rule, the 4-adic scaling identity, asymptotic factorization, and failure of the Rajchman property along powers of 4.",
  "seed": 1,
  "steps": [
    {"op": "cantor_identities", "max_abs_n": 4096, "scaling_tol": 1e-8,
     "factor_span": 16, "factor_j": 12, "factor_tol": 1e-3},
    {"op": "cantor_rajchman", "max_lag": 1024, "power_base": 4, "power_max": 16777216,
     "thresholds": [0.5, 0.35], "expect_unattained": [0.5, 0.35]}
  ]
},
{
  "name": "skew-torus-example-4.5",
  "description": "Skew product over the base-4 measure: exact correlations along powers of 4 converge to the product of Fourier coefficients, and the frequency rows 2 mod 4 converge to zero.",
  "seed": 1,
  "steps": [
    {"op": "skew_limit_table", "power": 14, "max_freq": 3, "tol": 1e-3}
  ]
},
{
  "name": "chacon-example-4.2",
  "description": "The rank-one substitution system: empirically weakly mixing, not strongly mixing along tower heights, with the height-sequence limit fitted as a two-term convex combination of powers.",
  "seed": 1,
  "steps": [
    {"op": "classify", "system": {"family": "chacon"},
     "observables": [
       {"kind": "cylinder", "word": "0", "centered": true},
       {"kind": "cylinder", "word": "00", "centered": true}],
     "orbit_length": 200000, "max_lag": 8192,
     "expect": {"weak": "pass", "strong_proxy": "fail"}},
    {"op": "weak_limit_fit", "max_power": 2, "heights_count": 11,
     "basis": ["0", "00", "010"], "orbit_length": 1000000,
     "expect": {"residual_le": 0.05, "support_le": 3}},
    {"op": "limit_report", "system": {"family": "chacon"},
     "f": {"kind": "cylinder", "word": "00", "centered": true},
     "lags": [1, 4, 13, 40, 121, 364, 1093, 3280, 9841, 29524, 88573],
     "scheme": {"kind": "tail_sup", "start": 1093},
     "quality": {"kind": "empirical", "orbit_length": 1000000},
     "expect": {"abs_value_ge": 0.1}}
  ]
},
{
  "name": "rudin-shapiro-example-4.3",
  "description": "The Rudin-Shapiro subshift: flat empirical autocorrelation of the sign sequence over a dyadic window, and a rigidity profile along powers of 2 seen by an odometer-coordinate observable.",
  "seed": 1,
  "steps": [
    {"op": "rs_autocorrelation", "log2_count": 20, "max_lag": 64, "bound": 0.02},
    {"op": "rigidity", "system": {"family": "rudin_shapiro"},
     "observable": {"kind": "interval", "a": 0.0, "b": 0.5},
     "candidates": [{"kind": "powers", "base": 2, "from": 2, "max": 131072}],
     "depth": 16, "quality": {"kind": "empirical", "orbit_length": 1048576},
     "expect": {"alpha_hat_ge": 0.4}}
  ]
},
{
  "name": "vdc-lemma-7.1",
  "description": "The Hilbert-space averaging inequality on random vector families, plus the finitary implication check on orthogonal and constant models.",
  "seed": 1,
  "steps": [
    {"op": "vdc_suite", "trials": 1000, "dim": 8, "vectors": 24, "tol": 1e-12}
  ]
},
{
  "name": "image-kernel-lemma",
  "description": "Normal-operator image/kernel decompositions on random matrices: projector identity, kernel power invariance, idempotent contractions, and the block-separating splitting of a unitary with one averaging scheme.",
  "seed": 1,
  "steps": [
    {"op": "operator_suite", "trials": 200, "max_dim": 16, "identity_tol": 1e-9},
    {"op": "u_split_demo"}
  ]
},
{
  "name": "finite-disjointness",
  "description": "Exact joining polytopes of finite cyclic systems: disjointness coincides with coprimality, the correlated non-product joining of two non-ergodic systems validates, and the two-by-two polytope has exactly the two deterministic couplings as vertices.",
  "seed": 1,
  "steps": [
    {"op": "disjointness_table", "max_size": 8},
    {"op": "footnote_demo",
     "x": {"kind": "explicit", "map": [1, 0, 3, 2],
           "measure": ["1/8", "1/8", "3/8", "3/8"]},
     "y": {"kind": "explicit", "map": [1, 0, 2],
           "measure": ["1/4", "1/4", "1/2"]}},
    {"op": "extreme_joinings", "x": {"kind": "cyclic", "n": 2},
     "y": {"kind": "cyclic", "n": 2},
     "expect": {"count": 2, "complete": true}}
  ]
},
{
  "name": "rigidity-profiles",
  "description": "Rigidity searches across the built-in systems: the rotation is rigid along convergent denominators, the rank-one system returns a partial fraction of its mass along tower heights, an independent-label surrogate finds nothing, and the Rudin-Shapiro odometer coordinate is rigid along powers of 2.",
  "seed": 1,
  "steps": [
    {"op": "rigidity", "system": {"family": "rotation", "alpha": 0.41421356237309503},
     "observable": {"kind": "interval", "a": 0.0, "b": 0.5},
     "candidates": [{"kind": "denominators", "max_q": 20000}],
     "depth": 16, "quality": {"kind": "empirical", "orbit_length": 1000000},
     "expect": {"kind": "rigid", "alpha_hat_ge": 0.99}},
    {"op": "rigidity", "system": {"family": "chacon"},
     "observable": {"kind": "cylinder", "word": "00"},
     "candidates": [{"kind": "chacon_heights", "count": 11}],
     "depth": 16, "quality": {"kind": "empirical", "orbit_length": 1000000},
     "expect": {"alpha_hat_ge": 0.55, "alpha_hat_le": 0.75}},
    {"op": "rigidity_iid", "p": 0.5, "samples": 200000,
     "lags": [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024], "depth": 10,
     "expect": {"kind": "none_found"}},
    {"op": "rigidity", "system": {"family": "rudin_shapiro"},
     "observable": {"kind": "interval", "a": 0.0, "b": 0.5},
     "candidates": [{"kind": "powers", "base": 2, "from": 2, "max": 131072}],
     "depth": 16, "quality": {"kind": "empirical", "orbit_length": 1048576},
     "expect": {"alpha_hat_ge": 0.4}}
  ]
}
])JSON";
        std::vector<Scenario> list;
        for (const auto& j : json::parse(text)) list.push_back(parse_scenario(j));
        return list;
    }();
    return scenarios;
}

inline std::vector<std::string> list_builtin_scenarios() {
    std::vector<std::string> names;
    for (const auto& s : builtin_scenarios()) names.push_back(s.name);
    return names;
}

inline const Scenario* find_builtin_scenario(const std::string& name) {
    for (const auto& s : builtin_scenarios())
        if (s.name == name) return &s;
    return nullptr;
}

inline json describe_scenario(const Scenario& s) {
    json steps = json::array();
    for (const auto& st : s.steps) steps.push_back(st.params);
    return json{{"name", s.name},
                {"description", s.description},
                {"seed", s.seed},
                {"steps", steps}};
}

} // namespace ergolab
