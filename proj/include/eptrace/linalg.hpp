#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "eptrace/types.hpp"

namespace eptrace {

struct EigenPair {
    cplx value{};
    CVector right;
    CVector left;
    cplx c_norm{};        // c_product(left, right)
    double h_norm = 0.0;  // h_product(right, right)
    bool near_defective = false;
    bool normalized = false;
};

struct EigenSystem {
    std::size_t matrix_dim = 0;
    std::vector<EigenPair> pairs;
    double max_residual = 0.0;

    std::vector<cplx> values() const {
        std::vector<cplx> v;
        v.reserve(pairs.size());
        for (const auto& p : pairs) v.push_back(p.value);
        return v;
    }
    std::size_t defect_count() const {
        return static_cast<std::size_t>(
            std::count_if(pairs.begin(), pairs.end(), [](const EigenPair& p) { return p.near_defective; }));
    }
};

/// Bilinear product sum_m u_m v_m, no conjugation.
inline cplx c_product(const CVector& u, const CVector& v) {
    if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "c_product");
    cplx s{};
    for (std::size_t m = 0; m < u.size(); ++m) s += u[m] * v[m];
    return s;
}

/// Hermitian product sum_m conj(u_m) v_m.
inline cplx h_product(const CVector& u, const CVector& v) {
    if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "h_product");
    cplx s{};
    for (std::size_t m = 0; m < u.size(); ++m) s += std::conj(u[m]) * v[m];
    return s;
}

namespace detail {

// Unitary G = [[c, s], [-conj(s), c]] with G (a, b)^T = (r, 0)^T.
struct Givens {
    double c = 1.0;
    cplx s{};
};

inline Givens make_givens(cplx a, cplx b) {
    const double abs_b = std::abs(b);
    if (abs_b == 0.0) return {1.0, {}};
    const double abs_a = std::abs(a);
    if (abs_a == 0.0) return {0.0, std::conj(b) / abs_b};
    const double nrm = std::hypot(abs_a, abs_b);
    return {abs_a / nrm, (a / abs_a) * std::conj(b) / nrm};
}

// rows p, q <- G * rows p, q over columns [c0, c1)
inline void rotate_rows(CMatrix& m, const Givens& g, std::size_t p, std::size_t q, std::size_t c0, std::size_t c1) {
    for (std::size_t j = c0; j < c1; ++j) {
        const cplx x = m(p, j), y = m(q, j);
        m(p, j) = g.c * x + g.s * y;
        m(q, j) = -std::conj(g.s) * x + g.c * y;
    }
}

// columns p, q <- columns p, q * G^H over rows [r0, r1)
inline void rotate_cols(CMatrix& m, const Givens& g, std::size_t p, std::size_t q, std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
        const cplx x = m(i, p), y = m(i, q);
        m(i, p) = x * g.c + y * std::conj(g.s);
        m(i, q) = -x * g.s + y * g.c;
    }
}

// Householder reduction to upper Hessenberg form, A = Q H Q^H.
inline void hessenberg(CMatrix& h, CMatrix& q) {
    const std::size_t n = h.rows();
    if (n < 3) return;
    std::vector<cplx> v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double tail = 0.0;
        for (std::size_t i = k + 2; i < n; ++i) tail += std::norm(h(i, k));
        if (tail == 0.0) continue;
        const cplx x0 = h(k + 1, k);
        const double xnorm = std::sqrt(tail + std::norm(x0));
        const cplx phase = std::abs(x0) == 0.0 ? cplx{1.0} : x0 / std::abs(x0);
        const cplx alpha = -phase * xnorm;
        std::fill(v.begin(), v.end(), cplx{});
        v[k + 1] = x0 - alpha;
        for (std::size_t i = k + 2; i < n; ++i) v[i] = h(i, k);
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) vnorm2 += std::norm(v[i]);
        if (vnorm2 == 0.0) continue;
        // H <- P H P with P = I - 2 v v^H / (v^H v)
        for (std::size_t j = 0; j < n; ++j) {
            cplx s{};
            for (std::size_t i = k + 1; i < n; ++i) s += std::conj(v[i]) * h(i, j);
            s *= 2.0 / vnorm2;
            for (std::size_t i = k + 1; i < n; ++i) h(i, j) -= v[i] * s;
        }
        for (std::size_t i = 0; i < n; ++i) {
            cplx s{};
            for (std::size_t j = k + 1; j < n; ++j) s += h(i, j) * v[j];
            s *= 2.0 / vnorm2;
            for (std::size_t j = k + 1; j < n; ++j) h(i, j) -= s * std::conj(v[j]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            cplx s{};
            for (std::size_t j = k + 1; j < n; ++j) s += q(i, j) * v[j];
            s *= 2.0 / vnorm2;
            for (std::size_t j = k + 1; j < n; ++j) q(i, j) -= s * std::conj(v[j]);
        }
        h(k + 1, k) = alpha;
        for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
    }
}

// Eigenvalue of [[a, b], [c, d]] nearer to d.
inline cplx wilkinson_shift(cplx a, cplx b, cplx c, cplx d) {
    const cplx half = 0.5 * (a - d);
    const cplx disc = std::sqrt(half * half + b * c);
    const cplx l1 = 0.5 * (a + d) + disc;
    const cplx l2 = 0.5 * (a + d) - disc;
    return std::abs(l1 - d) < std::abs(l2 - d) ? l1 : l2;
}

// Triangularize the 2x2 diagonal block at (k, k+1) with one rotation.
inline void split_block(CMatrix& t, CMatrix& q, std::size_t k) {
    const std::size_t n = t.rows();
    const cplx a = t(k, k), b = t(k, k + 1), c = t(k + 1, k), d = t(k + 1, k + 1);
    if (c == cplx{}) return;
    const cplx half = 0.5 * (a - d);
    const cplx disc = std::sqrt(half * half + b * c);
    const cplx lambda = 0.5 * (a + d) + disc;
    // eigenvector of the block for lambda; c != 0 so this is nonzero
    cplx x0 = lambda - d, x1 = c;
    const cplx y0 = b, y1 = lambda - a;
    if (std::norm(y0) + std::norm(y1) > std::norm(x0) + std::norm(x1)) {
        x0 = y0;
        x1 = y1;
    }
    const Givens g = make_givens(x0, x1);
    rotate_rows(t, g, k, k + 1, k, n);
    rotate_cols(t, g, k, k + 1, 0, k + 2);
    rotate_cols(q, g, k, k + 1, 0, n);
    t(k + 1, k) = 0.0;
}

// Complex Schur decomposition A = Q T Q^H by single-shift implicit QR on the
// Hessenberg form. Returns false if the iteration cap was hit.
inline bool schur(CMatrix& t, CMatrix& q, int max_sweeps_per_value = 60) {
    const std::size_t n = t.rows();
    q = CMatrix::identity(n);
    hessenberg(t, q);
    if (n == 1) return true;

    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double tiny = std::numeric_limits<double>::min() / eps;
    std::size_t hi = n - 1;
    int iter = 0;
    int total = 0;
    const int cap = max_sweeps_per_value * static_cast<int>(n);

    while (true) {
        // find lo: start of the unreduced block ending at hi
        std::size_t lo = hi;
        while (lo > 0) {
            const double sub = std::abs(t(lo, lo - 1));
            double ref = std::abs(t(lo, lo)) + std::abs(t(lo - 1, lo - 1));
            if (ref == 0.0) ref = t.frobenius_norm();
            if (sub <= eps * ref || sub < tiny) {
                t(lo, lo - 1) = 0.0;
                break;
            }
            --lo;
        }
        if (lo == hi) {
            if (hi == 0) break;
            --hi;
            iter = 0;
            continue;
        }
        if (lo + 1 == hi) {
            split_block(t, q, lo);
            if (hi < 2) break;
            hi -= 2;
            iter = 0;
            continue;
        }
        if (++total > cap) return false;
        ++iter;

        cplx shift;
        if (iter % 11 == 0) {
            // exceptional shift
            shift = t(hi, hi) + 0.75 * std::abs(t(hi, hi - 1)) + 0.25 * std::abs(t(hi - 1, hi - 2));
        } else {
            shift = wilkinson_shift(t(hi - 1, hi - 1), t(hi - 1, hi), t(hi, hi - 1), t(hi, hi));
        }

        cplx x = t(lo, lo) - shift;
        cplx y = t(lo + 1, lo);
        for (std::size_t k = lo; k < hi; ++k) {
            const Givens g = make_givens(x, y);
            const std::size_t c0 = k > lo ? k - 1 : lo;
            rotate_rows(t, g, k, k + 1, c0, n);
            rotate_cols(t, g, k, k + 1, 0, std::min(k + 3, hi + 1));
            rotate_cols(q, g, k, k + 1, 0, n);
            if (k > lo) t(k + 1, k - 1) = 0.0;
            if (k + 1 < hi) {
                x = t(k + 1, k);
                y = t(k + 2, k);
            }
        }
    }
    return true;
}

inline void normalize_with_phase(CVector& v) {
    const double nrm = v.norm();
    if (nrm == 0.0) return;
    v /= nrm;
    // largest-magnitude component gets argument in (-pi/2, pi/2]; ties go to the lowest index
    std::size_t imax = 0;
    double amax = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (a > amax * (1.0 + 1e-12)) {
            amax = a;
            imax = i;
        }
    }
    const cplx lead = v[imax];
    v *= std::conj(lead) / std::abs(lead);
}

inline bool is_complex_symmetric(const CMatrix& m, double tol) {
    const double scale = std::max(m.frobenius_norm(), std::numeric_limits<double>::min());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
    return true;
}

inline void flip_to_phase_convention(CVector& right, CVector& left) {
    std::size_t imax = 0;
    double amax = -1.0;
    for (std::size_t i = 0; i < right.size(); ++i) {
        const double a = std::abs(right[i]);
        if (a > amax * (1.0 + 1e-12)) {
            amax = a;
            imax = i;
        }
    }
    const double arg = std::arg(right[imax]);
    constexpr double half_pi = 1.5707963267948966;
    if (arg <= -half_pi || arg > half_pi) {
        right *= -1.0;
        left *= -1.0;
    }
}

}  // namespace detail

/// General complex eigendecomposition with right eigenvectors of M and left
/// eigenvectors of M^T, both returned with unit Hermitian norm. Works on
/// defective input: repeated values and nearly parallel vectors are allowed.
inline EigenSystem eig_general(const CMatrix& m, const Tolerances& tol = {}) {
    if (!m.square() || m.rows() == 0) throw Error(ErrorCode::DimensionMismatch, "eig_general needs a square matrix");
    if (!m.all_finite()) throw Error(ErrorCode::InvalidInput, "eig_general: non-finite entries");
    const std::size_t n = m.rows();

    CMatrix t = m;
    CMatrix q;
    if (!detail::schur(t, q)) {
        throw Error(ErrorCode::NonConvergence, "QR iteration cap hit for N=" + std::to_string(n));
    }

    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double tnorm = t.frobenius_norm();
    const double smin = std::max(eps * tnorm, std::numeric_limits<double>::min());
    const CMatrix q_conj = [&] {
        CMatrix c = q;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) c(i, j) = std::conj(q(i, j));
        return c;
    }();

    auto guarded = [smin](cplx d) {
        return std::abs(d) < smin ? cplx{smin} : d;
    };

    EigenSystem sys;
    sys.matrix_dim = n;
    sys.pairs.resize(n);
    std::vector<cplx> y(n), w(n);
    for (std::size_t k = 0; k < n; ++k) {
        const cplx lambda = t(k, k);
        // T y = lambda y, back substitution
        std::fill(y.begin(), y.end(), cplx{});
        y[k] = 1.0;
        for (std::size_t ii = k; ii-- > 0;) {
            cplx s{};
            for (std::size_t j = ii + 1; j <= k; ++j) s += t(ii, j) * y[j];
            y[ii] = -s / guarded(t(ii, ii) - lambda);
        }
        // T^T w = lambda w, forward substitution
        std::fill(w.begin(), w.end(), cplx{});
        w[k] = 1.0;
        for (std::size_t j = k + 1; j < n; ++j) {
            cplx s{};
            for (std::size_t i = k; i < j; ++i) s += t(i, j) * w[i];
            w[j] = -s / guarded(t(j, j) - lambda);
        }
        EigenPair& p = sys.pairs[k];
        p.value = lambda;
        p.right = q * CVector(y);
        p.left = q_conj * CVector(w);
        detail::normalize_with_phase(p.right);
        detail::normalize_with_phase(p.left);
    }

    if (detail::is_complex_symmetric(m, eps)) {
        for (auto& p : sys.pairs) p.left = p.right;
    }

    const CMatrix mt = m.transpose();
    const double mnorm = m.frobenius_norm();
    for (auto& p : sys.pairs) {
        p.c_norm = c_product(p.left, p.right);
        p.h_norm = std::real(h_product(p.right, p.right));
        const double r_res = (m * p.right - p.value * p.right).norm();
        const double l_res = (mt * p.left - p.value * p.left).norm();
        sys.max_residual = std::max({sys.max_residual, r_res, l_res});
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const cplx va = sys.pairs[a].value, vb = sys.pairs[b].value;
        if (va.real() != vb.real()) return va.real() < vb.real();
        return va.imag() < vb.imag();
    });
    std::vector<EigenPair> sorted;
    sorted.reserve(n);
    for (auto i : order) sorted.push_back(std::move(sys.pairs[i]));
    sys.pairs = std::move(sorted);

    if (sys.max_residual > tol.tol_eig * std::max(mnorm, std::numeric_limits<double>::min())) {
        throw Error(ErrorCode::NonConvergence,
                    "eigenvector residual " + std::to_string(sys.max_residual) + " exceeds tolerance");
    }
    return sys;
}

/// Scales each pair so that c_product(left, right) = 1. Pairs whose raw
/// |c_norm| falls below tol_defect * sqrt(h(left) h(right)) are flagged
/// near-defective and keep their unit Hermitian norms.
inline EigenSystem biorthonormalize(EigenSystem sys, const Tolerances& tol = {}) {
    for (auto& p : sys.pairs) {
        const double hl = std::real(h_product(p.left, p.left));
        const double hr = std::real(h_product(p.right, p.right));
        const cplx c = c_product(p.left, p.right);
        if (std::abs(c) < tol.tol_defect * std::sqrt(hl * hr)) {
            p.near_defective = true;
            p.normalized = false;
            p.c_norm = c;
            p.h_norm = hr;
            continue;
        }
        const cplx s = std::sqrt(c);
        p.right /= s;
        p.left /= s;
        detail::flip_to_phase_convention(p.right, p.left);
        p.c_norm = c_product(p.left, p.right);
        p.h_norm = std::real(h_product(p.right, p.right));
        p.near_defective = false;
        p.normalized = true;
    }
    return sys;
}

/// Solves M x = b by LU with partial pivoting and one refinement step.
inline CVector solve_linear(const CMatrix& m, const CVector& b, const Tolerances& tol = {}) {
    if (!m.square() || m.rows() != b.size() || b.size() == 0)
        throw Error(ErrorCode::DimensionMismatch, "solve_linear");
    const std::size_t n = m.rows();
    CMatrix lu = m;
    std::vector<std::size_t> piv(n);
    const double scale = m.max_abs();
    const double pivot_floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(scale, 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > best) {
                best = std::abs(lu(i, k));
                p = i;
            }
        if (best <= pivot_floor) throw Error(ErrorCode::Singular, "pivot below threshold at column " + std::to_string(k));
        piv[k] = p;
        if (p != k)
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
        for (std::size_t i = k + 1; i < n; ++i) {
            lu(i, k) /= lu(k, k);
            const cplx f = lu(i, k);
            if (f == cplx{}) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
        }
    }
    auto substitute = [&](CVector rhs) {
        for (std::size_t k = 0; k < n; ++k)
            if (piv[k] != k) std::swap(rhs[k], rhs[piv[k]]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) rhs[i] -= lu(i, j) * rhs[j];
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = i + 1; j < n; ++j) rhs[i] -= lu(i, j) * rhs[j];
            rhs[i] /= lu(i, i);
        }
        return rhs;
    };
    CVector x = substitute(b);
    CVector r = b - m * x;
    const CVector dx = substitute(r);
    for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
    const double res = (m * x - b).norm();
    if (!x.all_finite() || res > tol.tol_solve * b.norm()) {
        throw Error(ErrorCode::Singular, "residual " + std::to_string(res) + " after refinement");
    }
    return x;
}

}  // namespace eptrace
