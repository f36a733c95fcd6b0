#pragma once

// JSON and CSV interchange: serializers for the result types the library
// produces, parsers for the descriptor objects scenario files use, and the
// CSV writers the batch runner emits. All floating-point output goes through
// std::to_chars (shortest round-trip form), so identical inputs produce
// byte-identical files.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ergolab/errors.hpp"
#include "ergolab/joinings.hpp"
#include "ergolab/limit_schemes.hpp"
#include "ergolab/mixing.hpp"
#include "ergolab/operator_core.hpp"
#include "ergolab/spectral.hpp"
#include "ergolab/systems.hpp"

namespace ergolab {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Number and matrix formatting.

inline std::string number_string(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) throw input_error("number_string: value does not format");
    return std::string(buf, p);
}

inline std::string rational_string(const Rational& q) {
    return numerator(q).str() + "/" + denominator(q).str();
}

inline json complex_json(const Complex& z) {
    return json::array({z.real(), z.imag()});
}

inline json matrix_json(const CMatrix& m) {
    json entries = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) entries.push_back(complex_json(m(i, j)));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", entries}};
}

inline json matrix_json(const RationalMatrix& m) {
    json entries = json::array();
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) entries.push_back(rational_string(m.at(i, j)));
    return json{{"rows", m.rows}, {"cols", m.cols}, {"entries", entries}};
}

// ---------------------------------------------------------------------------
// Result serializers.

inline json limit_report_json(const LimitReport& r) {
    return json{{"value", complex_json(r.value)},
                {"converged", r.converged},
                {"deviation", r.deviation},
                {"samples_used", r.samples_used}};
}

inline json scheme_json(const LimitScheme& s) {
    switch (s.kind) {
        case LimitScheme::Kind::subsequence:
            return json{{"kind", "subsequence"}, {"indices", s.indices}};
        case LimitScheme::Kind::folner_cesaro:
            return json{{"kind", "folner_cesaro"}, {"windows", s.windows}};
        case LimitScheme::Kind::ip_grid:
            return json{{"kind", "ip_grid"}, {"generators", s.generators}, {"depth", s.depth}};
        case LimitScheme::Kind::tail_sup:
            return json{{"kind", "tail_sup"}, {"start", s.start}};
    }
    throw input_error("scheme_json: unknown scheme kind");
}

inline json verdict_json(const MixingVerdict& v) {
    json evidence = json::object();
    for (const auto& [name, report] : v.evidence) evidence[name] = limit_report_json(report);
    return json{{"weak", to_string(v.weak)},
                {"mild_proxy", to_string(v.mild_proxy)},
                {"strong_proxy", to_string(v.strong_proxy)},
                {"tolerance", v.tolerance},
                {"diagnostics", v.diagnostics},
                {"evidence", evidence}};
}

inline json profile_json(const RigidityProfile& p) {
    json j{{"kind", to_string(p.kind)},
           {"alpha_hat", p.alpha_hat},
           {"excess", p.excess},
           {"sequence", p.sequence},
           {"error_bar", p.error_bar},
           {"deviation", p.deviation},
           {"mass", p.mass},
           {"converged", p.converged}};
    if (p.kind == RigidityProfile::Kind::alpha_weakly_mixing) j["wm_alpha"] = p.wm_alpha;
    return j;
}

inline json fit_json(const WeakLimitFit& f) {
    return json{{"powers", f.powers},
                {"weights", f.weights},
                {"residual", f.residual},
                {"support", f.support},
                {"target_deviation", f.target_deviation}};
}

inline json spectral_json(const SpectralEstimate& e) {
    json atoms = json::array();
    for (const auto& [loc, mass] : e.atoms) atoms.push_back(json{{"location", loc}, {"mass", mass}});
    return json{{"grid_size", e.grid_size},
                {"total_mass", e.total_mass},
                {"grid_mass", e.grid_mass()},
                {"atom_mass", e.atom_mass()},
                {"atoms", atoms}};
}

inline json decomposition_json(const OrthogonalDecomposition& d) {
    return json{{"p_image", matrix_json(d.p_image)},
                {"p_kernel", matrix_json(d.p_kernel)},
                {"tolerance", d.tolerance}};
}

inline json finite_system_json(const FiniteSystem& s) {
    json measure = json::array();
    for (const auto& q : s.measure) measure.push_back(rational_string(q));
    return json{{"size", s.size}, {"map", s.map}, {"measure", measure}};
}

inline json alpha_mixing_json(const AlphaMixingReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back(json{{"name", row.name},
                            {"limit", complex_json(row.limit)},
                            {"target", row.target},
                            {"deviation", row.deviation},
                            {"converged", row.converged},
                            {"holds", row.holds}});
    return json{{"alpha", r.alpha},
                {"tolerance", r.tolerance},
                {"decided", r.decided},
                {"holds", r.holds},
                {"rows", rows}};
}

inline json system_json(const System& s) {
    json j{{"family", s.family_name()}};
    switch (s.family) {
        case System::Family::rotation:
            j["alpha"] = s.alpha;
            break;
        case System::Family::skew_torus:
            j["base"] = s.base.kind == BaseMeasure::Kind::lebesgue ? "lebesgue" : "cantor4";
            break;
        case System::Family::iet:
            j["lengths"] = s.lengths;
            j["permutation"] = s.order;
            break;
        default:
            break;
    }
    return j;
}

inline json observable_json(const Observable& o) {
    json j;
    switch (o.kind) {
        case Observable::Kind::character:
            j = json{{"kind", "character"}, {"frequencies", o.frequencies}};
            break;
        case Observable::Kind::cylinder:
            j = json{{"kind", "cylinder"}, {"word", o.word}, {"offset", o.offset}};
            break;
        case Observable::Kind::interval_indicator:
            j = json{{"kind", "interval"}, {"a", o.a}, {"b", o.b}};
            break;
    }
    j["centered"] = o.centered;
    return j;
}

// ---------------------------------------------------------------------------
// Descriptor parsers. Validation failures throw input_error naming the bad
// field; the batch runner treats those as scenario validation errors.

namespace detail {

inline const json& require_field(const json& j, const char* key, const char* where) {
    auto it = j.find(key);
    if (it == j.end())
        throw input_error(std::string(where) + ": missing field \"" + key + "\"");
    return *it;
}

inline double number_field(const json& j, const char* key, const char* where) {
    const json& v = require_field(j, key, where);
    if (!v.is_number())
        throw input_error(std::string(where) + ": field \"" + key + "\" must be a number");
    return v.get<double>();
}

inline std::int64_t integer_field(const json& j, const char* key, const char* where) {
    const json& v = require_field(j, key, where);
    if (!v.is_number_integer())
        throw input_error(std::string(where) + ": field \"" + key + "\" must be an integer");
    return v.get<std::int64_t>();
}

inline std::string string_field(const json& j, const char* key, const char* where) {
    const json& v = require_field(j, key, where);
    if (!v.is_string())
        throw input_error(std::string(where) + ": field \"" + key + "\" must be a string");
    return v.get<std::string>();
}

template <typename T>
std::vector<T> list_field(const json& j, const char* key, const char* where) {
    const json& v = require_field(j, key, where);
    if (!v.is_array())
        throw input_error(std::string(where) + ": field \"" + key + "\" must be a list");
    std::vector<T> out;
    for (const auto& e : v) {
        if constexpr (std::is_integral_v<T>) {
            if (!e.is_number_integer())
                throw input_error(std::string(where) + ": field \"" + key +
                                  "\" must hold integers");
        } else {
            if (!e.is_number())
                throw input_error(std::string(where) + ": field \"" + key +
                                  "\" must hold numbers");
        }
        out.push_back(e.get<T>());
    }
    return out;
}

} // namespace detail

inline System parse_system(const json& j) {
    if (!j.is_object()) throw input_error("system: descriptor must be an object");
    const std::string family = detail::string_field(j, "family", "system");
    if (family == "rotation") return System::rotation(detail::number_field(j, "alpha", "system"));
    if (family == "chacon") return System::chacon();
    if (family == "rudin_shapiro") return System::rudin_shapiro();
    if (family == "skew_torus") {
        const std::string base = detail::string_field(j, "base", "system");
        if (base == "lebesgue") return System::skew_torus(BaseMeasure::lebesgue());
        if (base == "cantor4") return System::skew_torus(BaseMeasure::cantor4());
        throw input_error("system: unknown base measure \"" + base + "\"");
    }
    if (family == "iet") {
        const auto lengths = detail::list_field<double>(j, "lengths", "system");
        const auto perm64 = detail::list_field<std::int64_t>(j, "permutation", "system");
        std::vector<int> perm(perm64.begin(), perm64.end());
        return System::iet(lengths, perm);
    }
    throw input_error("system: unknown family \"" + family + "\"");
}

inline Observable parse_observable(const json& j) {
    if (!j.is_object()) throw input_error("observable: descriptor must be an object");
    const std::string kind = detail::string_field(j, "kind", "observable");
    Observable o;
    if (kind == "character") {
        o = Observable::character(detail::list_field<std::int64_t>(j, "frequencies", "observable"));
    } else if (kind == "cylinder") {
        const std::int64_t offset = j.count("offset")
            ? detail::integer_field(j, "offset", "observable") : 0;
        o = Observable::cylinder(detail::string_field(j, "word", "observable"), offset);
    } else if (kind == "interval") {
        o = Observable::interval_indicator(detail::number_field(j, "a", "observable"),
                                           detail::number_field(j, "b", "observable"));
    } else {
        throw input_error("observable: unknown kind \"" + kind + "\"");
    }
    if (j.count("centered") && j.at("centered").get<bool>()) o = o.with_centering();
    return o;
}

inline LimitScheme parse_scheme(const json& j) {
    if (!j.is_object()) throw input_error("scheme: descriptor must be an object");
    const std::string kind = detail::string_field(j, "kind", "scheme");
    if (kind == "subsequence")
        return LimitScheme::subsequence(detail::list_field<std::int64_t>(j, "indices", "scheme"));
    if (kind == "folner_cesaro")
        return LimitScheme::folner_cesaro(detail::list_field<std::int64_t>(j, "windows", "scheme"));
    if (kind == "ip_grid") {
        auto gens = detail::list_field<std::int64_t>(j, "generators", "scheme");
        const int depth = j.count("depth")
            ? static_cast<int>(detail::integer_field(j, "depth", "scheme"))
            : static_cast<int>(gens.size());
        return LimitScheme::ip_grid(std::move(gens), depth);
    }
    if (kind == "tail_sup")
        return LimitScheme::tail_sup(detail::integer_field(j, "start", "scheme"));
    throw input_error("scheme: unknown kind \"" + kind + "\"");
}

inline Quality parse_quality(const json& j, std::uint64_t default_seed) {
    if (!j.is_object()) throw input_error("quality: descriptor must be an object");
    const std::string kind = detail::string_field(j, "kind", "quality");
    if (kind == "exact") return Quality::exact();
    if (kind == "empirical") {
        const std::int64_t orbit = detail::integer_field(j, "orbit_length", "quality");
        const std::uint64_t seed = j.count("seed")
            ? static_cast<std::uint64_t>(detail::integer_field(j, "seed", "quality"))
            : default_seed;
        return Quality::empirical(orbit, seed);
    }
    throw input_error("quality: unknown kind \"" + kind + "\"");
}

// ---------------------------------------------------------------------------
// CSV writers.

inline void write_csv(const std::string& path, const std::string& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("write_csv: cannot open " + path);
    out << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k > 0) out << ",";
            out << row[k];
        }
        out << "\n";
    }
    if (!out) throw input_error("write_csv: write failed for " + path);
}

inline void write_correlation_csv(const std::string& path, const CorrelationSequence& c) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [lag, value] : c.values) {
        rows.push_back({std::to_string(lag), number_string(value.real()),
                        number_string(value.imag()), number_string(c.stderr_at(lag))});
    }
    write_csv(path, "lag,re,im,stderr", rows);
}

inline void write_density_csv(const std::string& path, const SpectralEstimate& e) {
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < e.grid_size; ++k) {
        const double theta = static_cast<double>(k) / static_cast<double>(e.grid_size);
        rows.push_back({number_string(theta), number_string(e.density[static_cast<std::size_t>(k)])});
    }
    write_csv(path, "theta,density", rows);
}

inline void write_coupling_csv(const std::string& path, const RationalMatrix& m) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < m.rows; ++i) {
        std::vector<std::string> row;
        row.push_back(std::to_string(i));
        for (std::size_t j = 0; j < m.cols; ++j)
            row.push_back(number_string(static_cast<double>(m.at(i, j))));
        rows.push_back(std::move(row));
    }
    std::string header = "row";
    for (std::size_t j = 0; j < m.cols; ++j) header += ",col" + std::to_string(j);
    write_csv(path, header, rows);
}

} // namespace ergolab
