#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "ergolab/errors.hpp"

namespace ergolab {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Orthogonal splitting H = cl(Im V) (+) Ker V, as a pair of projectors.
struct OrthogonalDecomposition {
    CMatrix p_image;
    CMatrix p_kernel;
    double tolerance = 0.0;
};

// Result of detecting the limit of u^{n_k} along an index sequence.
struct LimitOperatorReport {
    CMatrix limit;
    bool converged = false;
    double residual = 0.0; // max successive deviation over the detection window
};

namespace detail {

inline void require_finite(const CMatrix& m, const char* who) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const auto z = m(i, j);
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw input_error(std::string(who) + ": non-finite matrix entry");
        }
}

inline void require_square(const CMatrix& m, const char* who) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw input_error(std::string(who) + ": matrix must be square with dim >= 1");
}

inline double commutator_norm(const CMatrix& m) {
    const CMatrix c = m * m.adjoint() - m.adjoint() * m;
    return c.norm();
}

// u^n by binary exponentiation, n >= 0.
inline CMatrix matrix_power(const CMatrix& u, std::uint64_t n) {
    CMatrix acc = CMatrix::Identity(u.rows(), u.cols());
    CMatrix base = u;
    while (n > 0) {
        if (n & 1u) acc = acc * base;
        base = base * base;
        n >>= 1;
    }
    return acc;
}

} // namespace detail

// True iff ||m m* - m* m||_F <= tol.
inline bool check_normal(const CMatrix& m, double tol) {
    detail::require_square(m, "check_normal");
    detail::require_finite(m, "check_normal");
    if (tol < 0.0) throw input_error("check_normal: tol must be >= 0");
    return detail::commutator_norm(m) <= tol;
}

// For normal v, the kernel and closed image are orthogonal complements.
// p_kernel projects onto the span of right singular vectors with singular
// value <= tol; p_image is the complement.
inline OrthogonalDecomposition image_kernel_decomposition(const CMatrix& v, double tol) {
    detail::require_square(v, "image_kernel_decomposition");
    detail::require_finite(v, "image_kernel_decomposition");
    const double comm = detail::commutator_norm(v);
    if (comm > tol) {
        std::ostringstream os;
        os << "image_kernel_decomposition: operator is not normal within tol; "
              "commutator Frobenius norm = " << comm;
        throw precondition_error(os.str());
    }
    const Eigen::Index d = v.rows();
    Eigen::JacobiSVD<CMatrix> svd(v, Eigen::ComputeFullV);
    CMatrix p_kernel = CMatrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (svd.singularValues()(i) <= tol) {
            const CVector w = svd.matrixV().col(i);
            p_kernel += w * w.adjoint();
        }
    }
    OrthogonalDecomposition dec;
    dec.p_kernel = p_kernel;
    dec.p_image = CMatrix::Identity(d, d) - p_kernel;
    dec.tolerance = tol;
    return dec;
}

// Relative-threshold convenience: singular values <= 1e-10 * sigma_max count as zero.
inline OrthogonalDecomposition image_kernel_decomposition(const CMatrix& v) {
    Eigen::JacobiSVD<CMatrix> svd(v);
    const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    return image_kernel_decomposition(v, 1e-10 * std::max(smax, 1.0));
}

inline int rank_at_threshold(const CMatrix& m, double tol) {
    Eigen::JacobiSVD<CMatrix> svd(m);
    int r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > tol) ++r;
    return r;
}

// Testable form of Ker(V) = Ker(V^n) for normal V: equal ranks at threshold tol.
inline bool kernel_power_invariance(const CMatrix& v, int n, double tol) {
    detail::require_square(v, "kernel_power_invariance");
    detail::require_finite(v, "kernel_power_invariance");
    if (n < 1)
        throw input_error("kernel_power_invariance: n must be >= 1 (n = 0 compares against the identity, which is vacuous)");
    if (!check_normal(v, std::max(tol, 1e-9) * std::max(1.0, v.norm())))
        throw precondition_error("kernel_power_invariance: operator is not normal within tol");
    const CMatrix vn = detail::matrix_power(v, static_cast<std::uint64_t>(n));
    return rank_at_threshold(v, tol) == rank_at_threshold(vn, tol);
}

inline double operator_norm(const CMatrix& m) {
    Eigen::JacobiSVD<CMatrix> svd(m);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

// An idempotent contraction is an orthogonal projection: checks
// ||v* - v|| <= C * tol with documented slack C = 10 * dim.
inline bool assert_projection_from_idempotent_contraction(const CMatrix& v, double tol) {
    detail::require_square(v, "assert_projection_from_idempotent_contraction");
    detail::require_finite(v, "assert_projection_from_idempotent_contraction");
    const double opnorm = operator_norm(v);
    const double idem = (v * v - v).norm();
    const bool norm_ok = opnorm <= 1.0 + tol;
    const bool idem_ok = idem <= tol;
    if (!norm_ok || !idem_ok) {
        std::ostringstream os;
        os << "assert_projection_from_idempotent_contraction: hypothesis failed:";
        if (!norm_ok) os << " operator norm = " << opnorm << " > 1 + tol;";
        if (!idem_ok) os << " ||v^2 - v|| = " << idem << " > tol;";
        throw precondition_error(os.str());
    }
    const double c = 10.0 * static_cast<double>(v.rows());
    return (v.adjoint() - v).norm() <= c * tol;
}

inline bool is_unitary(const CMatrix& u, double tol) {
    const CMatrix d = u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols());
    return d.norm() <= tol;
}

// Detects the limit of u^{n_k} over the final quarter of the index list.
// The limit is the last iterate (no averaging); converged iff successive
// iterates over the window differ by <= tol in Frobenius norm.
inline LimitOperatorReport sequence_limit_operator(const CMatrix& u,
                                                   const std::vector<std::int64_t>& indices,
                                                   double tol) {
    detail::require_square(u, "sequence_limit_operator");
    detail::require_finite(u, "sequence_limit_operator");
    if (!is_unitary(u, std::max(tol, 1e-9)))
        throw input_error("sequence_limit_operator: matrix is not unitary within tol");
    if (indices.size() < 8)
        throw input_error("sequence_limit_operator: need at least 8 indices");
    for (std::size_t k = 0; k + 1 < indices.size(); ++k)
        if (indices[k] >= indices[k + 1])
            throw input_error("sequence_limit_operator: indices must be strictly increasing");

    // Negative indices use u^{-n} = (u*)^n.
    const std::size_t count = indices.size();
    const std::size_t window_start = count - std::max<std::size_t>(count / 4, 2);

    std::vector<CMatrix> window;
    CMatrix cur;
    std::int64_t cur_n = 0;
    bool have_cur = false;
    for (std::size_t k = 0; k < count; ++k) {
        const std::int64_t n = indices[k];
        if (!have_cur) {
            cur = (n >= 0) ? detail::matrix_power(u, static_cast<std::uint64_t>(n))
                           : detail::matrix_power(u.adjoint().eval(), static_cast<std::uint64_t>(-n));
            cur_n = n;
            have_cur = true;
        } else {
            const std::int64_t gap = n - cur_n;
            cur = cur * ((gap >= 0) ? detail::matrix_power(u, static_cast<std::uint64_t>(gap))
                                    : detail::matrix_power(u.adjoint().eval(), static_cast<std::uint64_t>(-gap)));
            cur_n = n;
        }
        if (k >= window_start) window.push_back(cur);
    }

    LimitOperatorReport rep;
    rep.limit = window.back();
    double residual = 0.0;
    for (std::size_t k = 0; k + 1 < window.size(); ++k)
        residual = std::max(residual, (window[k + 1] - window[k]).norm());
    rep.residual = residual;
    rep.converged = residual <= tol;
    return rep;
}

// Paired duality check: the limit along (-n_k), computed as powers of u*,
// equals the adjoint of the limit along (n_k).
inline bool limit_adjoint_duality(const CMatrix& u,
                                  const std::vector<std::int64_t>& indices,
                                  double tol) {
    const LimitOperatorReport fwd = sequence_limit_operator(u, indices, tol);
    const LimitOperatorReport bwd = sequence_limit_operator(u.adjoint().eval(), indices, tol);
    if (!fwd.converged || !bwd.converged) return false;
    return (bwd.limit - fwd.limit.adjoint()).norm() <= 10.0 * tol;
}

} // namespace ergolab
