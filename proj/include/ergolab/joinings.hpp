#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "ergolab/errors.hpp"

namespace ergolab {

// Exact joining computations for finite systems. Disjointness is a yes/no
// claim, so everything here runs in rational arithmetic with zero tolerance.
using Rational = boost::multiprecision::cpp_rational;

struct RationalMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Rational> a;

    RationalMatrix() = default;
    RationalMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, Rational(0)) {}

    Rational& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    const Rational& at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    bool operator==(const RationalMatrix& o) const {
        return rows == o.rows && cols == o.cols && a == o.a;
    }
};

// ---------------------------------------------------------------------------
// Finite measure-preserving systems: a permutation with an invariant,
// strictly positive probability vector. Zero-measure states are rejected at
// construction (normalize the support first), so the Markov-operator
// division convention below is never exercised by constructed systems.
// ---------------------------------------------------------------------------

struct FiniteSystem {
    std::size_t size = 0;
    std::vector<std::size_t> map;  // state i moves to map[i]
    std::vector<Rational> measure; // strictly positive, invariant, sums to one

    static FiniteSystem from(std::vector<std::size_t> map, std::vector<Rational> measure) {
        FiniteSystem s;
        s.size = map.size();
        if (s.size == 0) throw input_error("finite system: need at least one state");
        if (measure.size() != s.size)
            throw input_error("finite system: measure length must match the state count");
        std::vector<bool> hit(s.size, false);
        for (auto t : map) {
            if (t >= s.size || hit[t]) throw input_error("finite system: map must be a permutation");
            hit[t] = true;
        }
        Rational total(0);
        for (const auto& m : measure) {
            if (m <= 0) throw input_error("finite system: states must carry positive measure");
            total += m;
        }
        if (total != 1) throw input_error("finite system: measure must sum to one exactly");
        for (std::size_t i = 0; i < s.size; ++i)
            if (measure[map[i]] != measure[i])
                throw input_error("finite system: measure is not invariant under the map");
        s.map = std::move(map);
        s.measure = std::move(measure);
        return s;
    }

    // The rotation on Z_n with uniform measure.
    static FiniteSystem cyclic(std::size_t n) {
        if (n == 0) throw input_error("finite system: need at least one state");
        std::vector<std::size_t> map(n);
        for (std::size_t i = 0; i < n; ++i) map[i] = (i + 1) % n;
        std::vector<Rational> measure(n, Rational(1, static_cast<unsigned>(n)));
        return from(std::move(map), std::move(measure));
    }

    static FiniteSystem one_point() { return cyclic(1); }

    std::vector<std::vector<std::size_t>> cycles() const {
        std::vector<std::vector<std::size_t>> out;
        std::vector<bool> seen(size, false);
        for (std::size_t i = 0; i < size; ++i) {
            if (seen[i]) continue;
            std::vector<std::size_t> cyc;
            std::size_t j = i;
            while (!seen[j]) {
                seen[j] = true;
                cyc.push_back(j);
                j = map[j];
            }
            out.push_back(std::move(cyc));
        }
        return out;
    }

    // With full support, ergodicity is exactly "the map is a single cycle".
    bool is_ergodic() const { return cycles().size() == 1; }

    // The ergodic decomposition: one uniform cycle per component, paired with
    // its total mass. Invariance forces the measure to be constant on each
    // cycle, so the component measures are uniform.
    std::vector<std::pair<FiniteSystem, Rational>> ergodic_components() const {
        std::vector<std::pair<FiniteSystem, Rational>> out;
        for (const auto& cyc : cycles()) {
            const std::size_t len = cyc.size();
            std::vector<std::size_t> cmap(len);
            for (std::size_t k = 0; k < len; ++k) cmap[k] = (k + 1) % len;
            std::vector<Rational> cmeasure(len, Rational(1, static_cast<unsigned>(len)));
            out.emplace_back(from(std::move(cmap), std::move(cmeasure)),
                             Rational(static_cast<unsigned>(len)) * measure[cyc.front()]);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Couplings.
// ---------------------------------------------------------------------------

inline RationalMatrix product_coupling(const FiniteSystem& x, const FiniteSystem& y) {
    RationalMatrix lambda(x.size, y.size);
    for (std::size_t i = 0; i < x.size; ++i)
        for (std::size_t j = 0; j < y.size; ++j) lambda.at(i, j) = x.measure[i] * y.measure[j];
    return lambda;
}

inline RationalMatrix diagonal_coupling(const FiniteSystem& x) {
    RationalMatrix lambda(x.size, x.size);
    for (std::size_t i = 0; i < x.size; ++i) lambda.at(i, i) = x.measure[i];
    return lambda;
}

// Exact feasibility: nonnegative, both marginals correct, invariant under the
// product map.
inline bool is_joining(const RationalMatrix& lambda, const FiniteSystem& x, const FiniteSystem& y) {
    if (lambda.rows != x.size || lambda.cols != y.size) return false;
    for (const auto& v : lambda.a)
        if (v < 0) return false;
    for (std::size_t i = 0; i < x.size; ++i) {
        Rational row(0);
        for (std::size_t j = 0; j < y.size; ++j) row += lambda.at(i, j);
        if (row != x.measure[i]) return false;
    }
    for (std::size_t j = 0; j < y.size; ++j) {
        Rational col(0);
        for (std::size_t i = 0; i < x.size; ++i) col += lambda.at(i, j);
        if (col != y.measure[j]) return false;
    }
    for (std::size_t i = 0; i < x.size; ++i)
        for (std::size_t j = 0; j < y.size; ++j)
            if (lambda.at(x.map[i], y.map[j]) != lambda.at(i, j)) return false;
    return true;
}

namespace detail {

// Orbits of the product permutation (i,j) -> (Tx i, Sy j) over the cell grid.
// Invariance of a coupling says exactly "constant on these orbits", so the
// joining constraints reduce to one variable per orbit.
struct ProductOrbits {
    std::size_t n = 0, m = 0;
    std::vector<std::size_t> orbit_of; // cell i*m+j -> orbit index
    std::vector<std::vector<std::size_t>> members;

    ProductOrbits(const FiniteSystem& x, const FiniteSystem& y) : n(x.size), m(y.size) {
        orbit_of.assign(n * m, static_cast<std::size_t>(-1));
        for (std::size_t cell = 0; cell < n * m; ++cell) {
            if (orbit_of[cell] != static_cast<std::size_t>(-1)) continue;
            const std::size_t id = members.size();
            members.emplace_back();
            std::size_t i = cell / m, j = cell % m;
            while (orbit_of[i * m + j] == static_cast<std::size_t>(-1)) {
                orbit_of[i * m + j] = id;
                members[id].push_back(i * m + j);
                i = x.map[i];
                j = y.map[j];
            }
        }
    }
};

// Marginal constraints in orbit coordinates: row i of the augmented system
// counts, per orbit, how many of its cells lie in grid row i (then grid
// column j), with the measures on the right-hand side.
struct OrbitSystem {
    std::size_t n_rows = 0; // n + m constraints
    std::size_t n_cols = 0; // one per orbit
    std::vector<std::vector<Rational>> a;
    std::vector<Rational> b;

    OrbitSystem(const FiniteSystem& x, const FiniteSystem& y, const ProductOrbits& orbits) {
        const std::size_t n = x.size, m = y.size;
        n_rows = n + m;
        n_cols = orbits.members.size();
        a.assign(n_rows, std::vector<Rational>(n_cols, Rational(0)));
        b.assign(n_rows, Rational(0));
        for (std::size_t o = 0; o < n_cols; ++o)
            for (auto cell : orbits.members[o]) {
                a[cell / m][o] += 1;
                a[n + cell % m][o] += 1;
            }
        for (std::size_t i = 0; i < n; ++i) b[i] = x.measure[i];
        for (std::size_t j = 0; j < m; ++j) b[n + j] = y.measure[j];
    }
};

// Reduced row echelon form in place; returns the pivot column per pivot row.
inline std::vector<std::size_t> rref(std::vector<std::vector<Rational>>& mat, std::size_t cols) {
    std::vector<std::size_t> pivot_cols;
    std::size_t row = 0;
    for (std::size_t col = 0; col < cols && row < mat.size(); ++col) {
        std::size_t sel = row;
        while (sel < mat.size() && mat[sel][col] == 0) ++sel;
        if (sel == mat.size()) continue;
        std::swap(mat[row], mat[sel]);
        const Rational inv = mat[row][col];
        for (auto& v : mat[row]) v /= inv;
        for (std::size_t r = 0; r < mat.size(); ++r) {
            if (r == row || mat[r][col] == 0) continue;
            const Rational factor = mat[r][col];
            for (std::size_t c = 0; c < mat[r].size(); ++c) mat[r][c] -= factor * mat[row][c];
        }
        pivot_cols.push_back(col);
        ++row;
    }
    return pivot_cols;
}

inline RationalMatrix expand_orbit_values(const ProductOrbits& orbits,
                                          const std::vector<Rational>& values) {
    RationalMatrix out(orbits.n, orbits.m);
    for (std::size_t o = 0; o < orbits.members.size(); ++o)
        for (auto cell : orbits.members[o]) out.at(cell / orbits.m, cell % orbits.m) = values[o];
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// The joining polytope.
// ---------------------------------------------------------------------------

struct JoiningPolytope {
    std::vector<RationalMatrix> basis; // directions with zero marginals, invariant
    RationalMatrix product;            // always feasible, strictly positive
    int dimension = 0;                 // affine dimension of the joining set
};

// Solves the joining constraints exactly. The solution set of the equalities
// is product + span(basis); because the product coupling is strictly positive
// (no zero-measure states), the nonnegative slice has the same affine
// dimension as that span, so dimension = nullity of the constraint system in
// orbit coordinates.
inline JoiningPolytope joining_polytope(const FiniteSystem& x, const FiniteSystem& y) {
    if (x.size > 64 || y.size > 64)
        throw input_error("joining_polytope: sizes above 64 are not supported");

    const detail::ProductOrbits orbits(x, y);
    detail::OrbitSystem sys(x, y, orbits);
    const std::size_t k = sys.n_cols;

    auto mat = sys.a;
    const auto pivot_cols = detail::rref(mat, k);

    JoiningPolytope poly;
    poly.product = product_coupling(x, y);
    poly.dimension = static_cast<int>(k - pivot_cols.size());

    // One basis direction per free column: set that free variable to one,
    // solve the pivots, leave other free variables at zero.
    std::vector<bool> is_pivot(k, false);
    for (auto c : pivot_cols) is_pivot[c] = true;
    for (std::size_t free = 0; free < k; ++free) {
        if (is_pivot[free]) continue;
        std::vector<Rational> dir(k, Rational(0));
        dir[free] = 1;
        for (std::size_t p = 0; p < pivot_cols.size(); ++p) dir[pivot_cols[p]] = -mat[p][free];
        poly.basis.push_back(detail::expand_orbit_values(orbits, dir));
    }
    return poly;
}

inline bool is_disjoint(const FiniteSystem& x, const FiniteSystem& y) {
    return joining_polytope(x, y).dimension == 0;
}

// ---------------------------------------------------------------------------
// The Markov-operator side of the correspondence.
// ---------------------------------------------------------------------------

// M[j][i] = lambda(i,j) / nu(j): the conditional-expectation operator of the
// coupling, with rows indexed by states of y. Rows sum to one, entries are
// nonnegative, and the exact intertwining M[Sy j][Tx i] = M[j][i] follows
// from the invariance of lambda. Convention: a zero-measure column would get
// a uniform row; constructed systems never carry zero-measure states, so the
// branch is defensive only.
inline RationalMatrix markov_from_joining(const RationalMatrix& lambda, const FiniteSystem& x,
                                          const FiniteSystem& y) {
    if (!is_joining(lambda, x, y))
        throw input_error("markov_from_joining: lambda is not a joining of the two systems");
    RationalMatrix mk(y.size, x.size);
    for (std::size_t j = 0; j < y.size; ++j) {
        if (y.measure[j] == 0) {
            for (std::size_t i = 0; i < x.size; ++i)
                mk.at(j, i) = Rational(1, static_cast<unsigned>(x.size));
            continue;
        }
        for (std::size_t i = 0; i < x.size; ++i) mk.at(j, i) = lambda.at(i, j) / y.measure[j];
    }
    return mk;
}

// ---------------------------------------------------------------------------
// Extreme joinings by exact basis enumeration.
// ---------------------------------------------------------------------------

struct ExtremeJoinings {
    std::vector<RationalMatrix> vertices;
    bool complete = true; // false when the enumeration budget ran out
};

namespace detail {

// Solves a[:, support] c = b exactly when the selected columns are
// independent; reports consistency and nonnegativity of the unique solution.
inline bool solve_on_support(const OrbitSystem& sys, const std::vector<std::size_t>& support,
                             std::vector<Rational>& out) {
    std::vector<std::vector<Rational>> mat(sys.n_rows,
                                           std::vector<Rational>(support.size() + 1, Rational(0)));
    for (std::size_t r = 0; r < sys.n_rows; ++r) {
        for (std::size_t c = 0; c < support.size(); ++c) mat[r][c] = sys.a[r][support[c]];
        mat[r][support.size()] = sys.b[r];
    }
    const auto pivots = rref(mat, support.size());
    if (pivots.size() != support.size()) return false; // dependent columns
    // Rows below the pivots must have vanished entirely for consistency.
    for (std::size_t r = pivots.size(); r < sys.n_rows; ++r)
        if (mat[r][support.size()] != 0) return false;
    std::vector<Rational> sol(support.size());
    for (std::size_t p = 0; p < pivots.size(); ++p) sol[pivots[p]] = mat[p][support.size()];
    for (const auto& v : sol)
        if (v < 0) return false;
    out = std::move(sol);
    return true;
}

} // namespace detail

// Enumerates every vertex of the joining polytope, exactly. A vertex is the
// unique solution supported on an independent set of orbit columns, so the
// search walks independent supports depth-first, records each consistent
// nonnegative solution, and deduplicates. The budget counts support
// evaluations; exceeding it flags the list as partial.
inline ExtremeJoinings extreme_joinings(const FiniteSystem& x, const FiniteSystem& y,
                                        std::int64_t budget = 200000) {
    if (x.size > 10 || y.size > 10)
        throw input_error("extreme_joinings: sizes above 10 are not supported");
    if (budget < 1) throw input_error("extreme_joinings: budget must be positive");

    const detail::ProductOrbits orbits(x, y);
    const detail::OrbitSystem sys(x, y, orbits);
    const std::size_t k = sys.n_cols;

    auto mat = sys.a;
    const std::size_t rank = detail::rref(mat, k).size();

    ExtremeJoinings out;
    std::vector<std::vector<Rational>> found;
    std::vector<std::size_t> support;
    std::int64_t spent = 0;

    auto record = [&](const std::vector<Rational>& partial) {
        std::vector<Rational> full(k, Rational(0));
        for (std::size_t c = 0; c < support.size(); ++c) full[support[c]] = partial[c];
        if (std::find(found.begin(), found.end(), full) == found.end()) found.push_back(full);
    };

    auto dfs = [&](auto&& self, std::size_t next) -> void {
        if (spent >= budget) {
            out.complete = false;
            return;
        }
        ++spent;
        std::vector<Rational> sol;
        if (detail::solve_on_support(sys, support, sol)) record(sol);
        if (support.size() >= rank) return;
        for (std::size_t col = next; col < k; ++col) {
            support.push_back(col);
            // Only extend along independent column sets; dependent supports
            // cannot pin a vertex.
            std::vector<std::vector<Rational>> probe(sys.n_rows,
                                                     std::vector<Rational>(support.size()));
            for (std::size_t r = 0; r < sys.n_rows; ++r)
                for (std::size_t c = 0; c < support.size(); ++c) probe[r][c] = sys.a[r][support[c]];
            if (detail::rref(probe, support.size()).size() == support.size())
                self(self, col + 1);
            support.pop_back();
            if (!out.complete) return;
        }
    };
    dfs(dfs, 0);

    for (const auto& values : found) out.vertices.push_back(detail::expand_orbit_values(orbits, values));
    return out;
}

// True when the coupled system (the product permutation carrying lambda) has
// no nontrivial invariant set: exactly one product orbit holds positive mass.
inline bool is_ergodic_coupling(const RationalMatrix& lambda, const FiniteSystem& x,
                                const FiniteSystem& y) {
    if (!is_joining(lambda, x, y))
        throw input_error("is_ergodic_coupling: lambda is not a joining of the two systems");
    const detail::ProductOrbits orbits(x, y);
    std::size_t charged = 0;
    for (const auto& members : orbits.members) {
        bool positive = false;
        for (auto cell : members)
            positive = positive || lambda.at(cell / y.size, cell % y.size) > 0;
        charged += positive ? 1 : 0;
    }
    return charged == 1;
}

// ---------------------------------------------------------------------------
// The non-ergodic witness: when both systems have a nontrivial invariant
// set, lambda_t = product + t * correction is a joining for every t in
// (0, t_max) and differs from the product, so the systems are not disjoint.
// The correction kernel is mu(i) nu(j) (1_A(i) - a)(1_B(j) - b) for invariant
// sets A, B of masses a, b; both its marginals vanish and it inherits
// invariance from A and B.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<bool> first_cycle_indicator(const FiniteSystem& s) {
    std::vector<bool> in(s.size, false);
    const auto cycles = s.cycles();
    for (auto state : cycles.front()) in[state] = true;
    return in;
}

} // namespace detail

inline Rational footnote_t_max(const FiniteSystem& x, const FiniteSystem& y) {
    if (x.is_ergodic() || y.is_ergodic())
        throw input_error("footnote joining: both systems must be non-ergodic");
    const auto in_a = detail::first_cycle_indicator(x);
    const auto in_b = detail::first_cycle_indicator(y);
    Rational a(0), b(0);
    for (std::size_t i = 0; i < x.size; ++i)
        if (in_a[i]) a += x.measure[i];
    for (std::size_t j = 0; j < y.size; ++j)
        if (in_b[j]) b += y.measure[j];
    // Entry positivity fails first where (1_A - a)(1_B - b) is most negative.
    const Rational cap1 = Rational(1) / (b * (Rational(1) - a));
    const Rational cap2 = Rational(1) / (a * (Rational(1) - b));
    return cap1 < cap2 ? cap1 : cap2;
}

inline RationalMatrix footnote_joining(const FiniteSystem& x, const FiniteSystem& y,
                                       const Rational& t) {
    const Rational t_max = footnote_t_max(x, y);
    if (!(t > 0 && t < t_max))
        throw input_error("footnote joining: t must lie strictly between 0 and t_max");
    const auto in_a = detail::first_cycle_indicator(x);
    const auto in_b = detail::first_cycle_indicator(y);
    Rational a(0), b(0);
    for (std::size_t i = 0; i < x.size; ++i)
        if (in_a[i]) a += x.measure[i];
    for (std::size_t j = 0; j < y.size; ++j)
        if (in_b[j]) b += y.measure[j];

    RationalMatrix lambda(x.size, y.size);
    for (std::size_t i = 0; i < x.size; ++i)
        for (std::size_t j = 0; j < y.size; ++j) {
            const Rational da = (in_a[i] ? Rational(1) : Rational(0)) - a;
            const Rational db = (in_b[j] ? Rational(1) : Rational(0)) - b;
            lambda.at(i, j) = x.measure[i] * y.measure[j] * (Rational(1) + t * da * db);
        }
    return lambda;
}

inline RationalMatrix footnote_joining(const FiniteSystem& x, const FiniteSystem& y) {
    return footnote_joining(x, y, footnote_t_max(x, y) / 2);
}

} // namespace ergolab
