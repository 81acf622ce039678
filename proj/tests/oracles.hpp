#pragma once

// Test-only reference computations. Nothing here calls the library's
// eigensolver or linear solver.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "eptrace/types.hpp"

namespace oracle {

using eptrace::cplx;
using eptrace::CMatrix;
using eptrace::CVector;

inline cplx det(CMatrix a) {
    const std::size_t n = a.rows();
    cplx d{1.0};
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
        if (a(p, k) == cplx{}) return {};
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
            d = -d;
        }
        d *= a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const cplx f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
    return d;
}

/// Coefficients c[0..n] (c[n] = 1) of det(zI - M), by sampling the
/// determinant on a circle of radius r and inverting the DFT.
inline std::vector<cplx> char_poly(const CMatrix& m) {
    const std::size_t n = m.rows();
    const double r = std::max(1.0, m.frobenius_norm() / std::sqrt(static_cast<double>(n)));
    std::vector<cplx> samples(n);
    for (std::size_t j = 0; j < n; ++j) {
        const cplx z = std::polar(r, 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(n));
        CMatrix a = -1.0 * m;
        for (std::size_t i = 0; i < n; ++i) a(i, i) += z;
        samples[j] = det(a) - std::pow(z, static_cast<int>(n));
    }
    std::vector<cplx> c(n + 1);
    for (std::size_t k = 0; k < n; ++k) {
        cplx s{};
        for (std::size_t j = 0; j < n; ++j)
            s += samples[j] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(j * k) / static_cast<double>(n));
        c[k] = s / static_cast<double>(n) / std::pow(r, static_cast<int>(k));
    }
    c[n] = 1.0;
    return c;
}

inline cplx horner(const std::vector<cplx>& c, cplx z) {
    cplx s{};
    for (std::size_t k = c.size(); k-- > 0;) s = s * z + c[k];
    return s;
}

/// All roots of a monic polynomial by Aberth-Ehrlich iteration.
inline std::vector<cplx> poly_roots(const std::vector<cplx>& c) {
    const std::size_t n = c.size() - 1;
    std::vector<cplx> dc(n);
    for (std::size_t k = 1; k <= n; ++k) dc[k - 1] = static_cast<double>(k) * c[k];
    double bound = 0.0;
    for (std::size_t k = 0; k < n; ++k) bound = std::max(bound, std::abs(c[k]));
    bound = 1.0 + bound;
    std::vector<cplx> z(n);
    for (std::size_t k = 0; k < n; ++k)
        z[k] = std::polar(0.5 * bound, 2.0 * M_PI * (static_cast<double>(k) + 0.25) / static_cast<double>(n));
    for (int it = 0; it < 500; ++it) {
        double worst = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const cplx ratio = horner(c, z[k]) / horner(dc, z[k]);
            cplx sum{};
            for (std::size_t j = 0; j < n; ++j)
                if (j != k) sum += 1.0 / (z[k] - z[j]);
            const cplx w = ratio / (1.0 - ratio * sum);
            z[k] -= w;
            worst = std::max(worst, std::abs(w));
        }
        if (worst < 1e-15 * bound) break;
    }
    return z;
}

/// Largest distance in a greedy nearest-neighbour pairing of two multisets.
inline double multiset_distance(std::vector<cplx> a, std::vector<cplx> b) {
    double worst = 0.0;
    for (const cplx x : a) {
        auto it = std::min_element(b.begin(), b.end(), [&](cplx p, cplx q) { return std::abs(p - x) < std::abs(q - x); });
        worst = std::max(worst, std::abs(*it - x));
        b.erase(it);
    }
    return worst;
}

inline cplx gauss(std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

inline CMatrix random_matrix(std::mt19937_64& rng, std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = gauss(rng);
    return m;
}

inline CMatrix random_real_symmetric(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double x = nd(rng);
            m(i, j) = x;
            m(j, i) = x;
        }
    return m;
}

inline CMatrix random_complex_symmetric(std::mt19937_64& rng, std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const cplx x = gauss(rng);
            m(i, j) = x;
            m(j, i) = x;
        }
    return m;
}

inline CVector random_vector(std::mt19937_64& rng, std::size_t n) {
    CVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

/// Smallest pairwise eigenvalue distance.
inline double min_gap(const std::vector<cplx>& v) {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < v.size(); ++a)
        for (std::size_t b = a + 1; b < v.size(); ++b) g = std::min(g, std::abs(v[a] - v[b]));
    return g;
}

}  // namespace oracle
