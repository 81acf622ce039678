#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eptrace/linalg.hpp"
#include "eptrace/types.hpp"

namespace eptrace {

inline constexpr double pi = 3.14159265358979323846;

/// Hermitian H0 of the closed system. Built either from a full matrix or
/// from a list of real levels (diagonal H0); the level list is kept so a
/// configuration can be echoed in the form it was given.
class ClosedSystem {
public:
    static ClosedSystem from_levels(std::vector<double> levels) {
        if (levels.empty()) throw Error(ErrorCode::InvalidInput, "closed system needs at least one level");
        for (double e : levels)
            if (!std::isfinite(e)) throw Error(ErrorCode::InvalidInput, "non-finite level");
        ClosedSystem cs;
        cs.h0_ = CMatrix::diagonal(std::span<const double>(levels));
        cs.levels_ = std::move(levels);
        return cs;
    }

    static ClosedSystem from_matrix(CMatrix h0) {
        if (!h0.square() || h0.rows() == 0) throw Error(ErrorCode::DimensionMismatch, "H0 must be square");
        if (!h0.all_finite()) throw Error(ErrorCode::InvalidInput, "H0 has non-finite entries");
        const double scale = std::max(h0.max_abs(), std::numeric_limits<double>::min());
        for (std::size_t i = 0; i < h0.rows(); ++i)
            for (std::size_t j = i; j < h0.cols(); ++j)
                if (std::abs(h0(i, j) - std::conj(h0(j, i))) > 1e-12 * scale)
                    throw Error(ErrorCode::InvalidInput, "H0 is not Hermitian");
        ClosedSystem cs;
        cs.h0_ = std::move(h0);
        return cs;
    }

    std::size_t dim() const noexcept { return h0_.rows(); }
    const CMatrix& h0() const noexcept { return h0_; }
    const std::optional<std::vector<double>>& levels() const noexcept { return levels_; }

    friend bool operator==(const ClosedSystem&, const ClosedSystem&) = default;

private:
    CMatrix h0_;
    std::optional<std::vector<double>> levels_;
};

/// Constant level density rho on [e_min, e_max].
struct Band {
    double e_min = -1.0;
    double e_max = 1.0;
    double rho = 1.0;

    friend bool operator==(const Band&, const Band&) = default;
};

/// Couplings V (N x C, column c couples channel c) and, optionally, one band
/// per channel. Bands are required only by the energy-dependent builder.
class ChannelSet {
public:
    ChannelSet() = default;
    explicit ChannelSet(CMatrix v, std::vector<Band> bands = {}) : v_(std::move(v)), bands_(std::move(bands)) {
        if (v_.rows() == 0 || v_.cols() == 0) throw Error(ErrorCode::InvalidInput, "coupling matrix needs N, C >= 1");
        if (!v_.all_finite()) throw Error(ErrorCode::InvalidInput, "coupling matrix has non-finite entries");
        if (!bands_.empty() && bands_.size() != v_.cols())
            throw Error(ErrorCode::DimensionMismatch, "one band per channel required");
        for (const auto& b : bands_) {
            if (!(b.e_min < b.e_max)) throw Error(ErrorCode::InvalidInput, "band needs e_min < e_max");
            if (!(b.rho > 0.0)) throw Error(ErrorCode::InvalidInput, "band level density must be positive");
        }
    }

    std::size_t states() const noexcept { return v_.rows(); }
    std::size_t channels() const noexcept { return v_.cols(); }
    const CMatrix& v() const noexcept { return v_; }
    const std::vector<Band>& bands() const noexcept { return bands_; }

    /// sum_{k,c} |v_kc|^2
    double coupling_weight() const {
        const double f = v_.frobenius_norm();
        return f * f;
    }

    friend bool operator==(const ChannelSet&, const ChannelSet&) = default;

private:
    CMatrix v_;
    std::vector<Band> bands_;
};

struct TwoLevelParams {
    double e1 = 0.0;
    double gamma1 = 0.0;
    double e2 = 0.0;
    double gamma2 = 0.0;
    cplx omega{};

    cplx eps1() const { return {e1, 0.5 * gamma1}; }
    cplx eps2() const { return {e2, 0.5 * gamma2}; }

    friend bool operator==(const TwoLevelParams&, const TwoLevelParams&) = default;
};

enum class HamiltonianKind { wideband, energy_dependent, two_level };

struct EffectiveHamiltonian {
    CMatrix matrix;
    HamiltonianKind kind = HamiltonianKind::wideband;
    double parameter = 0.0;  // alpha for wideband, E for energy_dependent
};

inline void check_dims(const ClosedSystem& cs, const ChannelSet& ch) {
    if (cs.dim() != ch.states())
        throw Error(ErrorCode::DimensionMismatch,
                    "H0 is " + std::to_string(cs.dim()) + "x" + std::to_string(cs.dim()) + " but V has " +
                        std::to_string(ch.states()) + " rows");
}

/// H0 - (i/2) alpha V V^H.
inline EffectiveHamiltonian build_wideband(const ClosedSystem& cs, const ChannelSet& ch, double alpha) {
    check_dims(cs, ch);
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidInput, "alpha must be finite and >= 0");
    EffectiveHamiltonian h{cs.h0(), HamiltonianKind::wideband, alpha};
    if (alpha == 0.0) return h;
    const CMatrix& v = ch.v();
    const cplx f = cplx{0.0, -0.5 * alpha};
    const std::size_t n = ch.states();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            cplx s{};
            for (std::size_t c = 0; c < ch.channels(); ++c) s += v(i, c) * std::conj(v(j, c));
            h.matrix(i, j) += f * s;
        }
    return h;
}

/// Continuum self-energy of one band: principal value rho ln|(E-e_min)/(e_max-E)|
/// plus the residuum -i pi rho inside the band.
inline cplx band_self_energy(const Band& b, double energy) {
    const double edge = 1e-9 * (b.e_max - b.e_min);
    if (std::abs(energy - b.e_min) < edge || std::abs(energy - b.e_max) < edge)
        throw Error(ErrorCode::BandEdge, "E = " + std::to_string(energy) + " at a band edge");
    const double shift = b.rho * std::log(std::abs(energy - b.e_min) / std::abs(b.e_max - energy));
    const bool inside = energy > b.e_min && energy < b.e_max;
    return {shift, inside ? -pi * b.rho : 0.0};
}

/// H0 + sum_c v_c v_c^T F_c(E).
inline EffectiveHamiltonian build_energy_dependent(const ClosedSystem& cs, const ChannelSet& ch, double energy) {
    check_dims(cs, ch);
    if (ch.bands().size() != ch.channels())
        throw Error(ErrorCode::InvalidInput, "energy-dependent coupling needs one band per channel");
    if (!std::isfinite(energy)) throw Error(ErrorCode::InvalidInput, "energy must be finite");
    EffectiveHamiltonian h{cs.h0(), HamiltonianKind::energy_dependent, energy};
    const CMatrix& v = ch.v();
    const std::size_t n = ch.states();
    for (std::size_t c = 0; c < ch.channels(); ++c) {
        const cplx f = band_self_energy(ch.bands()[c], energy);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) h.matrix(i, j) += f * (v(i, c) * v(j, c));
    }
    return h;
}

struct PoleResult {
    cplx value{};         // eigenvalue at the converged energy
    double energy = 0.0;  // self-consistent real energy
    int iterations = 0;
    bool converged = false;
    std::string note;     // reason when not converged
};

/// Self-consistent resonance energies of the energy-dependent Hamiltonian:
/// for each state, iterate E <- Re lambda_k(H(E)) starting from the k-th
/// eigenvalue of H0, following the eigenvalue nearest the previous one.
inline std::vector<PoleResult> solve_poles(const ClosedSystem& cs, const ChannelSet& ch, int max_iter, double tol_fix,
                                           const Tolerances& tol = {}) {
    check_dims(cs, ch);
    const auto start = eig_general(cs.h0(), tol).values();
    std::vector<PoleResult> out;
    out.reserve(start.size());
    for (const cplx e0 : start) {
        PoleResult pr;
        cplx tracked = e0;
        double energy = e0.real();
        try {
            for (int it = 1; it <= max_iter; ++it) {
                const auto values = eig_general(build_energy_dependent(cs, ch, energy).matrix, tol).values();
                const cplx lambda = *std::min_element(values.begin(), values.end(), [&](cplx a, cplx b) {
                    return std::abs(a - tracked) < std::abs(b - tracked);
                });
                const double next = lambda.real();
                tracked = lambda;
                pr.iterations = it;
                pr.value = lambda;
                const double step = std::abs(next - energy);
                energy = next;
                if (step < tol_fix) {
                    pr.converged = true;
                    break;
                }
            }
            if (!pr.converged) pr.note = "iteration cap reached";
        } catch (const Error& e) {
            pr.converged = false;
            pr.note = e.what();
        }
        pr.energy = energy;
        out.push_back(std::move(pr));
    }
    return out;
}

/// [[e1 + (i/2) gamma1, omega], [omega, e2 + (i/2) gamma2]]
inline EffectiveHamiltonian build_two_level(const TwoLevelParams& p) {
    CMatrix m{{p.eps1(), p.omega}, {p.omega, p.eps2()}};
    return {std::move(m), HamiltonianKind::two_level, 0.0};
}

/// (eps1+eps2)/2 +- sqrt(((eps1-eps2)/2)^2 + omega^2), principal branch.
inline std::pair<cplx, cplx> two_level_eigs(const TwoLevelParams& p) {
    const cplx mean = 0.5 * (p.eps1() + p.eps2());
    const cplx half = 0.5 * (p.eps1() - p.eps2());
    const cplx root = std::sqrt(half * half + p.omega * p.omega);
    return {mean + root, mean - root};
}

/// Gamma_k = -2 Im lambda_k.
inline double width(cplx lambda) { return -2.0 * lambda.imag(); }

}  // namespace eptrace
