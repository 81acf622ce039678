#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "eptrace/hamiltonian.hpp"
#include "eptrace/linalg.hpp"
#include "eptrace/types.hpp"

namespace eptrace {

struct SMatrix {
    double energy = 0.0;
    CMatrix entries;  // C x C
};

namespace detail {

// columns of (E - H)^-1 V
inline CMatrix green_times(const CMatrix& h, const CMatrix& v, double energy, const Tolerances& tol) {
    const std::size_t n = h.rows();
    CMatrix a = -1.0 * h;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += energy;
    CMatrix x(n, v.cols());
    try {
        for (std::size_t c = 0; c < v.cols(); ++c) {
            const CVector col = solve_linear(a, v.column(c), tol);
            for (std::size_t i = 0; i < n; ++i) x(i, c) = col[i];
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Singular)
            throw Error(ErrorCode::PoleProximity, "E = " + std::to_string(energy) + " too close to a pole");
        throw;
    }
    return x;
}

}  // namespace detail

/// S(E) = I - i alpha V^H (E - H_eff)^-1 V with H_eff = H0 - (i/2) alpha V V^H.
/// Unitary at every real E that is not a pole.
inline SMatrix s_matrix(const ClosedSystem& cs, const ChannelSet& ch, double alpha, double energy,
                        const Tolerances& tol = {}) {
    const EffectiveHamiltonian h = build_wideband(cs, ch, alpha);
    const std::size_t nc = ch.channels();
    SMatrix s{energy, CMatrix::identity(nc)};
    if (alpha == 0.0) return s;
    const CMatrix x = detail::green_times(h.matrix, ch.v(), energy, tol);
    const CMatrix vh = ch.v().adjoint();
    const CMatrix k = vh * x;
    const cplx f{0.0, -alpha};
    for (std::size_t a = 0; a < nc; ++a)
        for (std::size_t b = 0; b < nc; ++b) s.entries(a, b) += f * k(a, b);
    return s;
}

/// S-matrix of the energy-dependent model restricted to channels open at E:
/// S_cc' = delta_cc' - 2 pi i sqrt(rho_c rho_c') [V^T (E - H_eff(E))^-1 V]_cc'.
/// Rows and columns of closed channels are left as identity. Not unitary in
/// general near band edges.
inline SMatrix s_matrix_energy_dependent(const ClosedSystem& cs, const ChannelSet& ch, double energy,
                                         const Tolerances& tol = {}) {
    const EffectiveHamiltonian h = build_energy_dependent(cs, ch, energy);
    const std::size_t nc = ch.channels();
    SMatrix s{energy, CMatrix::identity(nc)};
    const CMatrix x = detail::green_times(h.matrix, ch.v(), energy, tol);
    const CMatrix k = ch.v().transpose() * x;
    for (std::size_t a = 0; a < nc; ++a) {
        const Band& ba = ch.bands()[a];
        if (!(energy > ba.e_min && energy < ba.e_max)) continue;
        for (std::size_t b = 0; b < nc; ++b) {
            const Band& bb = ch.bands()[b];
            if (!(energy > bb.e_min && energy < bb.e_max)) continue;
            s.entries(a, b) -= cplx{0.0, 2.0 * pi * std::sqrt(ba.rho * bb.rho)} * k(a, b);
        }
    }
    return s;
}

/// max |(S^H S - I)_ab|
inline double unitarity_defect(const SMatrix& s) {
    const CMatrix p = s.entries.adjoint() * s.entries;
    double worst = 0.0;
    for (std::size_t a = 0; a < p.rows(); ++a)
        for (std::size_t b = 0; b < p.cols(); ++b)
            worst = std::max(worst, std::abs(p(a, b) - (a == b ? cplx{1.0} : cplx{})));
    return worst;
}

struct CrossSection {
    std::vector<double> energies;
    std::vector<double> values;  // |delta_cc' - S_cc'|^2; 0 where flagged
    std::vector<std::size_t> pole_flags;  // grid indices where the solve hit a pole or band edge
    std::vector<ErrorCode> flag_codes;    // PoleProximity or BandEdge, parallel to pole_flags
};

enum class CouplingModel { wideband, energy_dependent };

/// sigma_{c -> c'}(E) = |delta_cc' - S_cc'(E)|^2 on an increasing grid.
inline CrossSection cross_section(const ClosedSystem& cs, const ChannelSet& ch, double alpha,
                                  std::span<const double> grid, std::size_t from, std::size_t to,
                                  const Tolerances& tol = {}, CouplingModel model = CouplingModel::wideband) {
    if (from >= ch.channels() || to >= ch.channels()) throw Error(ErrorCode::InvalidInput, "channel index out of range");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw Error(ErrorCode::InvalidInput, "energy grid must be strictly increasing");
    CrossSection xs;
    xs.energies.assign(grid.begin(), grid.end());
    xs.values.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        try {
            const SMatrix s = model == CouplingModel::wideband ? s_matrix(cs, ch, alpha, grid[i], tol)
                                                                : s_matrix_energy_dependent(cs, ch, grid[i], tol);
            const cplx t = (from == to ? cplx{1.0} : cplx{}) - s.entries(to, from);
            xs.values.push_back(std::norm(t));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PoleProximity && e.code() != ErrorCode::BandEdge) throw;
            xs.values.push_back(0.0);
            xs.pole_flags.push_back(i);
            xs.flag_codes.push_back(e.code());
        }
    }
    return xs;
}

struct TrappingSweep {
    std::vector<double> alphas;
    std::vector<std::vector<double>> widths;  // per alpha, descending
    std::vector<double> sum_rule_residuals;   // |sum Gamma - alpha sum|v|^2|
    std::vector<std::size_t> growing;         // per interval [a_i, a_{i+1}]: widths that increased
};

/// Widths Gamma_k = -2 Im lambda_k of the wideband Hamiltonian along an
/// increasing coupling grid, with the width sum rule and a per-interval
/// count of growing widths (compared rank by rank).
inline TrappingSweep trapping_sweep(const ClosedSystem& cs, const ChannelSet& ch, std::span<const double> alphas,
                                    const Tolerances& tol = {}) {
    if (alphas.size() < 2) throw Error(ErrorCode::InvalidInput, "trapping sweep needs at least two coupling values");
    for (std::size_t i = 1; i < alphas.size(); ++i)
        if (!(alphas[i] > alphas[i - 1])) throw Error(ErrorCode::InvalidInput, "coupling grid must be increasing");
    TrappingSweep sw;
    sw.alphas.assign(alphas.begin(), alphas.end());
    const double weight = ch.coupling_weight();
    for (double alpha : alphas) {
        const EigenSystem sys = eig_general(build_wideband(cs, ch, alpha).matrix, tol);
        std::vector<double> g;
        g.reserve(sys.matrix_dim);
        for (const auto& p : sys.pairs) g.push_back(width(p.value));
        std::sort(g.begin(), g.end(), std::greater<>());
        double sum = 0.0;
        for (double x : g) sum += x;
        sw.sum_rule_residuals.push_back(std::abs(sum - alpha * weight));
        sw.widths.push_back(std::move(g));
    }
    for (std::size_t i = 0; i + 1 < sw.widths.size(); ++i) {
        std::size_t up = 0;
        for (std::size_t k = 0; k < sw.widths[i].size(); ++k)
            if (sw.widths[i + 1][k] > sw.widths[i][k]) ++up;
        sw.growing.push_back(up);
    }
    return sw;
}

/// Interior local maxima whose topographic prominence is at least
/// prominence * max(values). The grid must resolve the narrowest peak.
inline std::size_t peak_count(const CrossSection& xs, double prominence) {
    const auto& v = xs.values;
    const std::size_t n = v.size();
    if (n < 3) return 0;
    const double vmax = *std::max_element(v.begin(), v.end());
    if (!(vmax > 0.0)) return 0;
    const double threshold = prominence * vmax;
    std::size_t count = 0;
    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(v[i] > v[i - 1])) {
            ++i;
            continue;
        }
        // plateau [i, j]
        std::size_t j = i;
        while (j + 1 < n && v[j + 1] == v[i]) ++j;
        if (j + 1 >= n || !(v[j + 1] < v[i])) {
            i = j + 1;
            continue;
        }
        const double h = v[i];
        double left_min = h;
        for (std::size_t k = i; k-- > 0;) {
            if (v[k] > h) break;
            left_min = std::min(left_min, v[k]);
        }
        double right_min = h;
        for (std::size_t k = j + 1; k < n; ++k) {
            if (v[k] > h) break;
            right_min = std::min(right_min, v[k]);
        }
        if (h - std::max(left_min, right_min) >= threshold) ++count;
        i = j + 1;
    }
    return count;
}

}  // namespace eptrace
