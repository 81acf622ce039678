#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eptrace/assignment.hpp"
#include "eptrace/hamiltonian.hpp"
#include "eptrace/linalg.hpp"
#include "eptrace/types.hpp"

namespace eptrace {

/// Callable mapping a real parameter pair (x, y) to a square matrix.
template <class F>
concept MatrixFamily = std::invocable<const F&, double, double> &&
                       std::convertible_to<std::invoke_result_t<const F&, double, double>, CMatrix>;

using Family = std::function<CMatrix(double, double)>;

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

struct Domain {
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;

    bool contains(Point2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
    friend bool operator==(const Domain&, const Domain&) = default;
};

/// Rectangular grid; points are visited row-major with y as the outer
/// index and x as the inner index.
struct Grid2 {
    std::vector<double> xs;
    std::vector<double> ys;

    std::size_t size() const { return xs.size() * ys.size(); }
    Point2 at(std::size_t row, std::size_t col) const { return {xs[col], ys[row]}; }

    static std::vector<double> linspace(double lo, double hi, std::size_t n) {
        if (n == 0) return {};
        if (n == 1) return {lo};
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        v.back() = hi;
        return v;
    }
};

// ---------------------------------------------------------------------------
// Phase rigidity and external mixing

/// r = c(phi, phi) / h(phi, phi). Invariant under phi -> s phi.
inline cplx phase_rigidity(const CVector& phi) {
    const double h = std::real(h_product(phi, phi));
    if (!(h > 0.0)) throw Error(ErrorCode::ZeroVector, "phase rigidity of a zero vector");
    return c_product(phi, phi) / h;
}

inline cplx phase_rigidity(const EigenPair& pair) { return phase_rigidity(pair.right); }

/// Orthonormal eigenbasis of H0, columns sorted by ascending energy.
inline CMatrix closed_basis(const ClosedSystem& cs) {
    const std::size_t n = cs.dim();
    if (cs.levels()) {
        // diagonal H0: the basis is the identity permuted into ascending order
        const auto& lv = *cs.levels();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lv[a] < lv[b]; });
        CMatrix basis(n, n);
        for (std::size_t k = 0; k < n; ++k) basis(order[k], k) = 1.0;
        return basis;
    }
    const EigenSystem sys = eig_general(cs.h0());
    // Gram-Schmidt repairs degenerate subspaces
    std::vector<CVector> cols;
    for (const auto& p : sys.pairs) {
        CVector v = p.right;
        for (const auto& u : cols) {
            const cplx proj = h_product(u, v);
            for (std::size_t i = 0; i < n; ++i) v[i] -= proj * u[i];
        }
        detail::normalize_with_phase(v);
        cols.push_back(std::move(v));
    }
    CMatrix basis(n, n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) basis(i, k) = cols[k][i];
    return basis;
}

struct MixingResult {
    CMatrix b;                 // b(k, m) = <basis_m | phi_k>
    double max_offdiag = 0.0;  // max_{k != m} |b(k, m)|
    std::vector<std::size_t> near_defective;  // states whose normalization was skipped
};

/// Components of the c-normalized eigenfunctions along an orthonormal basis
/// (columns of `basis`). Off-diagonal weight measures external mixing; it
/// diverges as a pair approaches an exceptional point.
inline MixingResult mixing_matrix(const EigenSystem& sys, const CMatrix& basis) {
    const std::size_t n = sys.matrix_dim;
    if (basis.rows() != n || basis.cols() != n) throw Error(ErrorCode::DimensionMismatch, "mixing basis shape");
    MixingResult out{CMatrix(n, n), 0.0, {}};
    for (std::size_t k = 0; k < n; ++k) {
        const auto& p = sys.pairs[k];
        if (p.near_defective) out.near_defective.push_back(k);
        for (std::size_t m = 0; m < n; ++m) {
            cplx s{};
            for (std::size_t i = 0; i < n; ++i) s += std::conj(basis(i, m)) * p.right[i];
            out.b(k, m) = s;
            if (k != m) out.max_offdiag = std::max(out.max_offdiag, std::abs(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exceptional points

/// Couplings at which the two-level eigenvalues coalesce: omega = +-i (eps1 - eps2)/2.
inline std::pair<cplx, cplx> ep_two_level(double e1, double gamma1, double e2, double gamma2) {
    const cplx eps1{e1, 0.5 * gamma1}, eps2{e2, 0.5 * gamma2};
    if (eps1 == eps2) throw Error(ErrorCode::DegenerateInput, "eps1 == eps2: every omega = 0 point is degenerate");
    const cplx w = I_unit * (eps1 - eps2) * 0.5;
    return {w, -w};
}

struct EPCandidate {
    Point2 params;
    std::size_t i = 0, j = 1;  // indices in the sorted spectrum at params
    double gap = 0.0;
    double min_rigidity = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Thrown when the search cannot reach a coalescence; carries the best point.
class EPSearchError : public Error {
public:
    EPSearchError(ErrorCode code, const std::string& what, EPCandidate best)
        : Error(code, what), best_(best) {}
    const EPCandidate& best() const noexcept { return best_; }

private:
    EPCandidate best_;
};

struct EPSearchOptions {
    std::optional<std::pair<std::size_t, std::size_t>> pair;  // default: closest pair at the seed
    int max_iter = 100;
    Tolerances tol{};
};

namespace detail {

struct PairEval {
    cplx disc{};  // (lambda_a - lambda_b)^2
    cplx la{}, lb{};
    std::size_t a = 0, b = 1;
    EigenSystem sys;
};

inline std::pair<std::size_t, std::size_t> closest_pair(const std::vector<cplx>& vals) {
    std::pair<std::size_t, std::size_t> best{0, 1};
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < vals.size(); ++a)
        for (std::size_t b = a + 1; b < vals.size(); ++b)
            if (std::abs(vals[a] - vals[b]) < g) {
                g = std::abs(vals[a] - vals[b]);
                best = {a, b};
            }
    return best;
}

// pair (a, b) minimizing |lambda_a - ta| + |lambda_b - tb|
inline std::pair<std::size_t, std::size_t> track_pair(const std::vector<cplx>& vals, cplx ta, cplx tb) {
    std::pair<std::size_t, std::size_t> best{0, 1};
    double score = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < vals.size(); ++a)
        for (std::size_t b = 0; b < vals.size(); ++b) {
            if (a == b) continue;
            const double s = std::abs(vals[a] - ta) + std::abs(vals[b] - tb);
            if (s < score) {
                score = s;
                best = {std::min(a, b), std::max(a, b)};
            }
        }
    return best;
}

}  // namespace detail

/// Locates a coalescence of two eigenvalues of a 2-parameter family.
/// Drives the analytic discriminant d = (lambda_a - lambda_b)^2, whose modulus
/// is gap^2, to zero with a damped Gauss-Newton iteration on (Re d, Im d)
/// using central finite differences. Acceptance needs both a vanishing gap
/// and a vanishing phase rigidity; a small gap with |r| near 1 is a
/// Hermitian-type (diabolic) degeneracy and is returned unconverged.
template <MatrixFamily F>
EPCandidate ep_search(const F& family, const Domain& domain, Point2 seed, const EPSearchOptions& opt = {}) {
    if (!domain.contains(seed)) throw EPSearchError(ErrorCode::LeftDomain, "seed outside domain", {seed});
    const Tolerances& tol = opt.tol;

    const EigenSystem seed_sys = eig_general(family(seed.x, seed.y), tol);
    const std::size_t n = seed_sys.matrix_dim;
    if (n < 2) throw Error(ErrorCode::DimensionMismatch, "ep_search needs N >= 2");
    auto values = seed_sys.values();
    auto [ia, ib] = opt.pair ? *opt.pair : detail::closest_pair(values);
    if (ia >= n || ib >= n || ia == ib) throw Error(ErrorCode::InvalidInput, "invalid pair hint");
    cplx ta = values[ia], tb = values[ib];
    const double scale = std::max(1.0, CMatrix(family(seed.x, seed.y)).frobenius_norm());
    const double gap_tol = tol.tol_ep_gap * scale;

    auto evaluate = [&](Point2 p, cplx track_a, cplx track_b) {
        detail::PairEval ev;
        ev.sys = eig_general(family(p.x, p.y), tol);
        const auto vals = ev.sys.values();
        std::tie(ev.a, ev.b) = detail::track_pair(vals, track_a, track_b);
        ev.la = vals[ev.a];
        ev.lb = vals[ev.b];
        const cplx d = ev.la - ev.lb;
        ev.disc = d * d;
        return ev;
    };
    auto disc_at = [&](Point2 p, cplx track_a, cplx track_b) { return evaluate(p, track_a, track_b).disc; };

    Point2 x = seed;
    detail::PairEval cur = evaluate(x, ta, tb);
    ta = cur.la;
    tb = cur.lb;
    double grad_x = 0.0, grad_y = 0.0;  // gradient of |d|^2 / 2 at x
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (std::abs(cur.disc) == 0.0) break;
        const double hx = tol.fd_step * std::max(1.0, std::abs(x.x));
        const double hy = tol.fd_step * std::max(1.0, std::abs(x.y));
        const cplx dx = (disc_at({x.x + hx, x.y}, ta, tb) - disc_at({x.x - hx, x.y}, ta, tb)) / (2.0 * hx);
        const cplx dy = (disc_at({x.x, x.y + hy}, ta, tb) - disc_at({x.x, x.y - hy}, ta, tb)) / (2.0 * hy);
        // J = [[Re dx, Re dy], [Im dx, Im dy]]
        const double j11 = dx.real(), j12 = dy.real(), j21 = dx.imag(), j22 = dy.imag();
        const double f1 = cur.disc.real(), f2 = cur.disc.imag();
        grad_x = j11 * f1 + j21 * f2;
        grad_y = j12 * f1 + j22 * f2;
        const double det = j11 * j22 - j12 * j21;
        const double jscale = std::abs(j11) + std::abs(j12) + std::abs(j21) + std::abs(j22);
        double sx, sy;
        if (std::abs(det) > 1e-10 * jscale * jscale) {
            sx = -(j22 * f1 - j12 * f2) / det;
            sy = -(-j21 * f1 + j11 * f2) / det;
        } else {
            // rank-deficient J: minimum-norm least-squares step along the
            // dominant direction of J^T J
            const double a = j11 * j11 + j21 * j21, b = j11 * j12 + j21 * j22, c = j12 * j12 + j22 * j22;
            const double tr = a + c;
            if (tr == 0.0) break;
            const double lam = 0.5 * (tr + std::sqrt((a - c) * (a - c) + 4.0 * b * b));
            double ux = b, uy = lam - a;
            if (std::hypot(ux, uy) == 0.0) {
                ux = lam - c;
                uy = b;
            }
            const double un = std::hypot(ux, uy);
            ux /= un;
            uy /= un;
            const double proj = (grad_x * ux + grad_y * uy) / lam;
            sx = -proj * ux;
            sy = -proj * uy;
        }
        // backtracking: accept the first step inside the domain that decreases |d|
        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k < 40; ++k, t *= 0.5) {
            const Point2 trial{x.x + t * sx, x.y + t * sy};
            if (!domain.contains(trial)) continue;
            detail::PairEval ev = evaluate(trial, ta, tb);
            if (std::abs(ev.disc) < std::abs(cur.disc)) {
                x = trial;
                cur = std::move(ev);
                ta = cur.la;
                tb = cur.lb;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        if (t * std::hypot(sx, sy) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::hypot(x.x, x.y)))
            break;
    }

    EPCandidate out;
    out.params = x;
    out.i = cur.a;
    out.j = cur.b;
    out.gap = std::abs(cur.la - cur.lb);
    out.iterations = it;
    out.min_rigidity = std::min(std::abs(phase_rigidity(cur.sys.pairs[cur.a])),
                                std::abs(phase_rigidity(cur.sys.pairs[cur.b])));
    out.converged = out.gap <= gap_tol && out.min_rigidity <= tol.tol_ep_rig;
    if (out.gap > gap_tol) {
        // stuck: either the descent direction points out of the domain or
        // |d| has a nonzero local minimum (avoided crossing)
        const double gn = std::hypot(grad_x, grad_y);
        const double probe = 1e-6 * std::max({1.0, domain.x_max - domain.x_min, domain.y_max - domain.y_min});
        if (gn > 0.0 && !domain.contains({x.x - probe * grad_x / gn, x.y - probe * grad_y / gn}))
            throw EPSearchError(ErrorCode::LeftDomain, "descent leaves the parameter domain", out);
        throw EPSearchError(ErrorCode::StalledAtNonzeroGap, "search stalled at gap " + std::to_string(out.gap), out);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Branch tracing

struct Trajectory {
    std::vector<Point2> path;
    std::vector<std::vector<cplx>> branches;    // branches[b][step]
    std::vector<std::vector<double>> rigidity;  // |r| per branch per step
    std::vector<std::vector<double>> overlaps;  // overlaps[step][b], step >= 1; row 0 is all ones
    std::vector<std::size_t> ambiguous_steps;
    bool closed = false;
    std::vector<std::size_t> permutation;  // final branch b ends on initial branch permutation[b]
};

namespace detail {

inline std::vector<std::size_t> match_vectors(const std::vector<CVector>& prev, const std::vector<CVector>& next,
                                              std::vector<double>& scores) {
    const std::size_t n = prev.size();
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) cost[a][b] = -std::abs(h_product(prev[a], next[b]));
    auto assignment = solve_assignment(cost);
    scores.assign(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) scores[a] = -cost[a][assignment[a]];
    return assignment;
}

}  // namespace detail

/// Follows every eigenvalue along a parameter path, labelling branches by the
/// optimal assignment of Hermitian eigenvector overlaps between steps.
/// Closed paths report the branch permutation accumulated around the loop.
template <MatrixFamily F>
Trajectory trace_branches(const F& family, std::span<const Point2> path, const Tolerances& tol = {}) {
    if (path.empty()) throw Error(ErrorCode::InvalidInput, "empty path");
    Trajectory tr;
    tr.path.assign(path.begin(), path.end());

    EigenSystem sys = eig_general(family(path[0].x, path[0].y), tol);
    const std::size_t n = sys.matrix_dim;
    tr.branches.assign(n, {});
    tr.rigidity.assign(n, {});
    std::vector<CVector> current(n), initial(n);
    for (std::size_t b = 0; b < n; ++b) {
        current[b] = sys.pairs[b].right;
        tr.branches[b].push_back(sys.pairs[b].value);
        tr.rigidity[b].push_back(std::abs(phase_rigidity(sys.pairs[b])));
    }
    initial = current;
    tr.overlaps.push_back(std::vector<double>(n, 1.0));

    std::vector<double> scores;
    for (std::size_t step = 1; step < path.size(); ++step) {
        sys = eig_general(family(path[step].x, path[step].y), tol);
        std::vector<CVector> next(n);
        for (std::size_t k = 0; k < n; ++k) next[k] = sys.pairs[k].right;
        const auto assign = detail::match_vectors(current, next, scores);
        bool ambiguous = false;
        for (std::size_t b = 0; b < n; ++b) {
            const auto& pr = sys.pairs[assign[b]];
            tr.branches[b].push_back(pr.value);
            tr.rigidity[b].push_back(std::abs(phase_rigidity(pr)));
            current[b] = pr.right;
            if (scores[b] < tol.overlap_min) ambiguous = true;
        }
        if (ambiguous) tr.ambiguous_steps.push_back(step);
        tr.overlaps.push_back(scores);
    }

    const Point2 first = path.front(), last = path.back();
    const double span_scale = std::max({1.0, std::abs(first.x), std::abs(first.y)});
    tr.closed = path.size() > 1 && std::hypot(first.x - last.x, first.y - last.y) <= 1e-12 * span_scale;
    if (tr.closed) {
        std::vector<double> closing;
        tr.permutation = detail::match_vectors(current, initial, closing);
    }
    return tr;
}

/// Closed circular path around `center` with `steps` segments; the last
/// point repeats the first exactly.
inline std::vector<Point2> circle_path(Point2 center, double radius, std::size_t steps) {
    if (steps < 3) throw Error(ErrorCode::InvalidInput, "loop needs at least 3 steps");
    std::vector<Point2> path(steps + 1);
    for (std::size_t k = 0; k < steps; ++k) {
        const double th = 2.0 * pi * static_cast<double>(k) / static_cast<double>(steps);
        path[k] = {center.x + radius * std::cos(th), center.y + radius * std::sin(th)};
    }
    path[steps] = path[0];
    return path;
}

// ---------------------------------------------------------------------------
// Grid scans

struct RigidityEntry {
    cplx r{};
    double abs_r = 0.0;
    bool near_defective = false;
};

struct RigidityPoint {
    Point2 params;
    std::vector<RigidityEntry> states;
    bool failed = false;
    std::string note;
};

struct RigidityMap {
    Grid2 grid;
    std::vector<RigidityPoint> points;  // row-major, y outer
};

/// Phase rigidity of every state on every grid point. Per-point failures
/// are recorded, not thrown. Points are independent and could be evaluated
/// concurrently; results are assembled in grid order.
template <MatrixFamily F>
RigidityMap rigidity_map(const F& family, const Grid2& grid, const Tolerances& tol = {}) {
    RigidityMap map{grid, {}};
    map.points.reserve(grid.size());
    for (std::size_t row = 0; row < grid.ys.size(); ++row)
        for (std::size_t col = 0; col < grid.xs.size(); ++col) {
            RigidityPoint pt;
            pt.params = grid.at(row, col);
            try {
                const EigenSystem sys = biorthonormalize(eig_general(family(pt.params.x, pt.params.y), tol), tol);
                for (const auto& p : sys.pairs) {
                    const cplx r = phase_rigidity(p);
                    pt.states.push_back({r, std::abs(r), p.near_defective});
                }
            } catch (const Error& e) {
                pt.failed = true;
                pt.note = e.what();
            }
            map.points.push_back(std::move(pt));
        }
    return map;
}

struct OrthogonalityPoint {
    Point2 params;
    std::size_t i = 0, j = 0;
    double overlap = 0.0;  // |h(right_i, right_j)|
    bool on_grid = true;
};

namespace detail {

template <MatrixFamily F>
double pair_overlap(const F& family, Point2 p, std::size_t i, std::size_t j, const Tolerances& tol) {
    const EigenSystem sys = eig_general(family(p.x, p.y), tol);
    return std::abs(h_product(sys.pairs[i].right, sys.pairs[j].right));
}

}  // namespace detail

/// Points where two right eigenvectors are Hermitian-orthogonal. Grid points
/// are tested directly; each grid edge is then refined with a golden-section
/// minimization of |h(right_i, right_j)| and interior minima below tol_orth
/// are reported. Edges whose endpoints are both already orthogonal for the
/// pair are not refined.
template <MatrixFamily F>
std::vector<OrthogonalityPoint> orthogonality_scan(const F& family, const Grid2& grid, double tol_orth,
                                                   const Tolerances& tol = {}) {
    std::vector<OrthogonalityPoint> out;
    const std::size_t rows = grid.ys.size(), cols = grid.xs.size();
    if (rows == 0 || cols == 0) return out;
    const std::size_t n = eig_general(family(grid.xs[0], grid.ys[0]), tol).matrix_dim;
    const std::size_t npairs = n * (n - 1) / 2;
    // overlaps at grid nodes, [node][pair]
    std::vector<std::vector<double>> node(rows * cols, std::vector<double>(npairs, 0.0));
    auto pair_index = [n](std::size_t i, std::size_t j) { return i * n - i * (i + 1) / 2 + (j - i - 1); };

    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const Point2 p = grid.at(r, c);
            const EigenSystem sys = eig_general(family(p.x, p.y), tol);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double ov = std::abs(h_product(sys.pairs[i].right, sys.pairs[j].right));
                    node[r * cols + c][pair_index(i, j)] = ov;
                    if (ov < tol_orth) out.push_back({p, i, j, ov, true});
                }
        }

    auto refine = [&](std::size_t a, std::size_t b) {
        const Point2 pa = grid.at(a / cols, a % cols), pb = grid.at(b / cols, b % cols);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const std::size_t k = pair_index(i, j);
                if (node[a][k] < tol_orth && node[b][k] < tol_orth) continue;
                auto f = [&](double s) {
                    return detail::pair_overlap(family, {pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y)}, i, j, tol);
                };
                constexpr double g = 0.6180339887498949;
                double lo = 0.0, hi = 1.0;
                double s1 = hi - g * (hi - lo), s2 = lo + g * (hi - lo);
                double f1 = f(s1), f2 = f(s2);
                for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
                    if (f1 < f2) {
                        hi = s2;
                        s2 = s1;
                        f2 = f1;
                        s1 = hi - g * (hi - lo);
                        f1 = f(s1);
                    } else {
                        lo = s1;
                        s1 = s2;
                        f1 = f2;
                        s2 = lo + g * (hi - lo);
                        f2 = f(s2);
                    }
                }
                const double s = 0.5 * (lo + hi);
                const double fs = f(s);
                if (fs < tol_orth && s > 1e-9 && s < 1.0 - 1e-9)
                    out.push_back({{pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y)}, i, j, fs, false});
            }
    };
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c + 1 < cols; ++c) refine(r * cols + c, r * cols + c + 1);
    for (std::size_t r = 0; r + 1 < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) refine(r * cols + c, (r + 1) * cols + c);
    return out;
}

// ---------------------------------------------------------------------------

/// Size of the largest eigenvalue cluster under single linkage with
/// threshold tol_cluster.
inline std::size_t coalescence_order(std::span<const cplx> values, double tol_cluster) {
    const std::size_t n = values.size();
    if (n == 0) return 0;
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
        return parent[a] == a ? a : parent[a] = find(parent[a]);
    };
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (std::abs(values[a] - values[b]) <= tol_cluster) parent[find(a)] = find(b);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t a = 0; a < n; ++a) ++count[find(a)];
    return *std::max_element(count.begin(), count.end());
}

inline std::size_t coalescence_order(const EigenSystem& sys, double tol_cluster) {
    const auto v = sys.values();
    return coalescence_order(std::span<const cplx>(v), tol_cluster);
}

// ---------------------------------------------------------------------------
// Named parameter families

enum class TwoLevelParam { e1, gamma1, e2, gamma2, omega_re, omega_im };

inline TwoLevelParams with_param(TwoLevelParams p, TwoLevelParam which, double value) {
    switch (which) {
        case TwoLevelParam::e1: p.e1 = value; break;
        case TwoLevelParam::gamma1: p.gamma1 = value; break;
        case TwoLevelParam::e2: p.e2 = value; break;
        case TwoLevelParam::gamma2: p.gamma2 = value; break;
        case TwoLevelParam::omega_re: p.omega = {value, p.omega.imag()}; break;
        case TwoLevelParam::omega_im: p.omega = {p.omega.real(), value}; break;
    }
    return p;
}

/// Two-level Hamiltonian with two of its real parameters exposed as (x, y).
inline Family two_level_family(TwoLevelParams base, TwoLevelParam x, TwoLevelParam y) {
    return [base, x, y](double xv, double yv) {
        return build_two_level(with_param(with_param(base, x, xv), y, yv)).matrix;
    };
}

}  // namespace eptrace
