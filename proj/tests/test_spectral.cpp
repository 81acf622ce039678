#include <gtest/gtest.h>

#include <random>

#include "eptrace/spectral.hpp"
#include "oracles.hpp"

using namespace eptrace;

namespace {

const TwoLevelParams kEPBase{1.0, 0.0, -1.0, 0.0, 0.0};

Family omega_plane() { return two_level_family(kEPBase, TwoLevelParam::omega_re, TwoLevelParam::omega_im); }

}  // namespace

TEST(PhaseRigidity, Examples) {
    EXPECT_EQ(phase_rigidity(CVector{1.0, 0.0}), cplx(1.0));
    const double s = 1.0 / std::sqrt(2.0);
    EXPECT_LT(std::abs(phase_rigidity(CVector{s, s * I_unit})), 1e-16);
    EXPECT_THROW(phase_rigidity(CVector(3)), Error);

    std::mt19937_64 rng(1);
    for (const auto& p : eig_general(oracle::random_real_symmetric(rng, 5)).pairs)
        EXPECT_NEAR(std::abs(phase_rigidity(p)), 1.0, 1e-12);

    const EigenSystem near = eig_general(build_two_level({1.0, 0.0, -1.0, 0.0, 0.999 * I_unit}).matrix);
    for (const auto& p : near.pairs) EXPECT_LT(std::abs(phase_rigidity(p)), 0.1);
}

TEST(PhaseRigidity, BoundedAndScaleInvariant) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 2000; ++trial) {
        const CVector v = oracle::random_vector(rng, 1 + trial % 12);
        const cplx r = phase_rigidity(v);
        EXPECT_LE(std::abs(r), 1.0 + 1e-12);
        // complex rescaling rotates r by (c/|c|)^2; only |r| is invariant
        const cplx c = oracle::gauss(rng);
        EXPECT_LT(std::abs(std::abs(phase_rigidity(c * v)) - std::abs(r)), 1e-13);
        EXPECT_LT(std::abs(phase_rigidity(c * v) - r * (c * c) / std::norm(c)), 1e-13);
        const double s = 0.1 + std::abs(c);
        EXPECT_LT(std::abs(phase_rigidity(cplx{s} * v) - r), 1e-13);
    }
}

TEST(Mixing, ClosedSystemIsIdentity) {
    const ClosedSystem cs = ClosedSystem::from_levels({0.4, -0.3, 1.1});
    const ChannelSet ch(CMatrix(3, 2));
    const EigenSystem sys = biorthonormalize(eig_general(build_wideband(cs, ch, 1.0).matrix));
    const MixingResult mx = mixing_matrix(sys, closed_basis(cs));
    EXPECT_EQ(mx.b, CMatrix::identity(3));
    EXPECT_EQ(mx.max_offdiag, 0.0);
}

TEST(Mixing, HermitianMatrixGivesUnitary) {
    std::mt19937_64 rng(3);
    const CMatrix h0 = oracle::random_real_symmetric(rng, 5);
    const ClosedSystem cs = ClosedSystem::from_matrix(h0);
    const EigenSystem sys = biorthonormalize(eig_general(h0));
    const MixingResult mx = mixing_matrix(sys, closed_basis(cs));
    const CMatrix u = mx.b * mx.b.adjoint();
    EXPECT_LT((u - CMatrix::identity(5)).max_abs(), 1e-12);
    EXPECT_LT((mx.b - CMatrix::identity(5)).max_abs(), 1e-12);
}

TEST(Mixing, BlowsUpNearEP) {
    const auto [w_ep, w_ep_minus] = ep_two_level(1.0, 0.0, -1.0, 0.0);
    (void)w_ep_minus;
    const EigenSystem sys = biorthonormalize(eig_general(build_two_level({1.0, 0.0, -1.0, 0.0, 0.999 * w_ep}).matrix));
    const MixingResult mx = mixing_matrix(sys, CMatrix::identity(2));
    EXPECT_GT(mx.max_offdiag, 1.0);
    EXPECT_TRUE(mx.near_defective.empty());

    Tolerances loose;
    loose.tol_defect = 0.1;
    const EigenSystem flagged =
        biorthonormalize(eig_general(build_two_level({1.0, 0.0, -1.0, 0.0, 0.999 * w_ep}).matrix), loose);
    EXPECT_EQ(mixing_matrix(flagged, CMatrix::identity(2)).near_defective.size(), 2u);
}

TEST(Mixing, GrowsAsRigidityVanishes) {
    double last = 0.0;
    for (double f : {0.5, 0.9, 0.99, 0.999}) {
        const EigenSystem sys = biorthonormalize(eig_general(build_two_level({1.0, 0.0, -1.0, 0.0, f * I_unit}).matrix));
        const double m = mixing_matrix(sys, CMatrix::identity(2)).max_offdiag;
        EXPECT_GT(m, last);
        last = m;
    }
}

TEST(EPTwoLevel, Examples) {
    const auto [a, b] = ep_two_level(1.0, 0.0, -1.0, 0.0);
    EXPECT_EQ(a, I_unit);
    EXPECT_EQ(b, -I_unit);
    const auto [c, d] = ep_two_level(0.0, 2.0, 0.0, 0.0);
    EXPECT_EQ(c, cplx(-0.5));
    EXPECT_EQ(d, cplx(0.5));
    EXPECT_THROW(ep_two_level(0.3, 0.1, 0.3, 0.1), Error);
}

TEST(EPTwoLevel, EigenvaluesCoincide) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        TwoLevelParams p{u(rng), u(rng), u(rng), u(rng), 0.0};
        const auto [wp, wm] = ep_two_level(p.e1, p.gamma1, p.e2, p.gamma2);
        for (cplx w : {wp, wm}) {
            p.omega = w;
            const auto [l1, l2] = two_level_eigs(p);
            EXPECT_LT(std::abs(l1 - l2), 1e-12);
        }
    }
}

TEST(EPSearch, ConvergesToAnalyticEP) {
    const EPCandidate ep = ep_search(omega_plane(), {-1.0, 1.0, 0.0, 2.0}, {0.1, 0.8});
    EXPECT_TRUE(ep.converged);
    EXPECT_LT(std::hypot(ep.params.x - 0.0, ep.params.y - 1.0), 1e-6);
    EXPECT_LT(ep.gap, 1e-8);
    EXPECT_LT(ep.min_rigidity, 1e-3);
    // substituting back reproduces the gap
    const auto vals = eig_general(omega_plane()(ep.params.x, ep.params.y)).values();
    EXPECT_LE(std::abs(vals[0] - vals[1]), 1e-8 * 2.0);
}

TEST(EPSearch, RealCouplingEP) {
    // e1 = e2, gamma1 = 2, gamma2 = 0: EPs at omega = -+1/2 on the real axis
    const Family f = two_level_family({0.0, 2.0, 0.0, 0.0, 0.0}, TwoLevelParam::omega_re, TwoLevelParam::omega_im);
    const EPCandidate ep = ep_search(f, {0.0, 2.0, -1.0, 1.0}, {0.8, 0.2});
    EXPECT_TRUE(ep.converged);
    EXPECT_LT(std::hypot(ep.params.x - 0.5, ep.params.y), 1e-6);
}

TEST(EPSearch, HermitianFamilyStalls) {
    const Family f = [](double x, double y) {
        const double c = 0.5 + y * y;
        return CMatrix{{x, c}, {c, -x}};
    };
    try {
        ep_search(f, {-2.0, 2.0, -2.0, 2.0}, {0.7, -0.4});
        FAIL() << "expected a stall";
    } catch (const EPSearchError& e) {
        EXPECT_EQ(e.code(), ErrorCode::StalledAtNonzeroGap);
        EXPECT_GT(e.best().gap, 0.5);
    }
}

TEST(EPSearch, DiabolicPointIsNotAnEP) {
    // real symmetric family with a genuine crossing at (0, 0)
    const Family f = [](double x, double y) { return CMatrix{{x, y}, {y, -x}}; };
    try {
        const EPCandidate c = ep_search(f, {-1.0, 1.0, -1.0, 1.0}, {0.3, 0.2});
        EXPECT_FALSE(c.converged);
        EXPECT_GT(c.min_rigidity, 0.99);
    } catch (const EPSearchError& e) {
        EXPECT_EQ(e.code(), ErrorCode::StalledAtNonzeroGap);
        EXPECT_FALSE(e.best().converged);
    }
}

TEST(EPSearch, BlockDiagonalEmbeddingKeepsEP) {
    const Family f = [](double x, double y) {
        const CMatrix b = build_two_level({1.0, 0.0, -1.0, 0.0, {x, y}}).matrix;
        CMatrix m(3, 3);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) m(i, j) = b(i, j);
        m(2, 2) = 10.0;
        return m;
    };
    const EPCandidate ep = ep_search(f, {-1.0, 1.0, 0.0, 2.0}, {0.1, 0.8});
    EXPECT_TRUE(ep.converged);
    EXPECT_LT(std::hypot(ep.params.x, ep.params.y - 1.0), 1e-6);
    EXPECT_EQ(ep.i, 0u);
    EXPECT_EQ(ep.j, 1u);
}

TEST(EPSearch, LeftDomain) {
    try {
        ep_search(omega_plane(), {-0.5, 0.5, 0.0, 0.5}, {0.1, 0.3});
        FAIL();
    } catch (const EPSearchError& e) {
        EXPECT_EQ(e.code(), ErrorCode::LeftDomain);
    }
    try {
        ep_search(omega_plane(), {-0.5, 0.5, 0.0, 0.5}, {3.0, 0.3});
        FAIL();
    } catch (const EPSearchError& e) {
        EXPECT_EQ(e.code(), ErrorCode::LeftDomain);
    }
}

TEST(TraceBranches, ConstantFamily) {
    const Family f = [](double, double) { return CMatrix{{1.0, 0.2}, {0.3, -1.0}}; };
    const auto path = circle_path({0.0, 0.0}, 1.0, 16);
    const Trajectory tr = trace_branches(f, std::span<const Point2>(path));
    EXPECT_TRUE(tr.closed);
    EXPECT_EQ(tr.permutation, (std::vector<std::size_t>{0, 1}));
    for (const auto& row : tr.overlaps)
        for (double o : row) EXPECT_NEAR(o, 1.0, 1e-12);
    EXPECT_TRUE(tr.ambiguous_steps.empty());
}

TEST(TraceBranches, EncirclingEPSwapsBranches) {
    for (double radius : {0.05, 0.1, 0.2}) {
        const auto path = circle_path({0.0, 1.0}, radius, 400);
        const Trajectory tr = trace_branches(omega_plane(), std::span<const Point2>(path));
        ASSERT_TRUE(tr.closed);
        EXPECT_EQ(tr.permutation, (std::vector<std::size_t>{1, 0})) << "radius " << radius;
        EXPECT_TRUE(tr.ambiguous_steps.empty()) << "radius " << radius;
        // eigenvalues continue onto the other sheet
        EXPECT_LT(std::abs(tr.branches[0].back() - tr.branches[1].front()), 1e-12);
    }
}

TEST(TraceBranches, NonEnclosingLoopIsIdentity) {
    for (double radius : {0.05, 0.1, 0.2}) {
        const auto path = circle_path({0.0, 2.0}, radius, 400);
        const Trajectory tr = trace_branches(omega_plane(), std::span<const Point2>(path));
        EXPECT_EQ(tr.permutation, (std::vector<std::size_t>{0, 1}));
    }
}

TEST(TraceBranches, OpenPathHasNoPermutation) {
    std::vector<Point2> path;
    for (int k = 0; k <= 20; ++k) path.push_back({0.0, 0.05 * k});
    const Trajectory tr = trace_branches(omega_plane(), std::span<const Point2>(path));
    EXPECT_FALSE(tr.closed);
    EXPECT_TRUE(tr.permutation.empty());
    EXPECT_EQ(tr.branches[0].size(), path.size());
}

TEST(TraceBranches, LargeJumpFlagsAmbiguity) {
    // x = 0: diagonal; x = 1: rotated into the DFT basis, where every overlap is 1/sqrt(3)
    const Family f = [](double x, double) {
        const CMatrix d = CMatrix::diagonal(std::vector<cplx>{1.0, 2.0, 3.0});
        if (x < 0.5) return d;
        CMatrix u(3, 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) u(i, j) = std::polar(1.0 / std::sqrt(3.0), 2.0 * pi * i * j / 3.0);
        return u * d * u.adjoint();
    };
    const std::vector<Point2> path{{0.0, 0.0}, {1.0, 0.0}};
    const Trajectory tr = trace_branches(f, std::span<const Point2>(path));
    EXPECT_EQ(tr.ambiguous_steps, (std::vector<std::size_t>{1}));
}

TEST(RigidityMap, HermitianFamilyIsRigid) {
    const Family f = [](double x, double y) { return CMatrix{{x, y}, {y, 1.0 - x}}; };
    Grid2 g{Grid2::linspace(-1.0, 1.0, 7), Grid2::linspace(-1.0, 1.0, 5)};
    const RigidityMap m = rigidity_map(f, g);
    ASSERT_EQ(m.points.size(), 35u);
    EXPECT_EQ(m.points[1].params, (Point2{g.xs[1], g.ys[0]}));  // x is the inner index
    for (const auto& pt : m.points)
        for (const auto& s : pt.states) EXPECT_NEAR(s.abs_r, 1.0, 1e-10);
}

TEST(RigidityMap, DipsAtEP) {
    // omega purely imaginary, im in [0, 2]
    const Family f = two_level_family(kEPBase, TwoLevelParam::omega_re, TwoLevelParam::omega_im);
    Grid2 g{{0.0}, Grid2::linspace(0.0, 2.0, 41)};
    const RigidityMap m = rigidity_map(f, g);
    double best = 1.0;
    double best_y = -1.0;
    for (const auto& pt : m.points)
        for (const auto& s : pt.states) {
            EXPECT_LE(s.abs_r, 1.0 + 1e-12);
            if (s.abs_r < best) {
                best = s.abs_r;
                best_y = pt.params.y;
            }
        }
    EXPECT_LT(best, 0.05);
    EXPECT_NEAR(best_y, 1.0, 0.05 + 1e-12);
}

TEST(RigidityMap, FarDetunedIsNearlyRigid) {
    const Family f = two_level_family({0.0, 0.0, 0.0, 0.0, 0.05}, TwoLevelParam::e1, TwoLevelParam::e2);
    Grid2 g{Grid2::linspace(5.0, 6.0, 5), Grid2::linspace(-6.0, -5.0, 5)};
    for (const auto& pt : rigidity_map(f, g).points)
        for (const auto& s : pt.states) EXPECT_GT(s.abs_r, 0.99);
}

TEST(OrthogonalityScan, HermitianFamilyEverywhere) {
    const Family f = [](double x, double y) { return CMatrix{{x, y}, {y, -x}}; };
    Grid2 g{Grid2::linspace(0.1, 1.0, 4), Grid2::linspace(0.1, 1.0, 3)};
    const auto pts = orthogonality_scan(f, g, 1e-6);
    std::size_t on_grid = 0;
    for (const auto& p : pts)
        if (p.on_grid) ++on_grid;
    EXPECT_EQ(on_grid, 12u);
    EXPECT_EQ(pts.size(), 12u);
}

TEST(OrthogonalityScan, UnequalWidthsRealCouplingHasNone) {
    const Family f = two_level_family({1.0, 0.4, -1.0, 0.0, 0.0}, TwoLevelParam::omega_re, TwoLevelParam::e1);
    Grid2 g{Grid2::linspace(0.05, 0.5, 6), Grid2::linspace(0.5, 1.5, 6)};
    EXPECT_TRUE(orthogonality_scan(f, g, 1e-6).empty());
}

TEST(OrthogonalityScan, FindsNormalityLine) {
    // a - d = 2 + 0.5i; the matrix is normal (so eigenvectors are orthogonal)
    // exactly where Im((a - d) conj(omega)) = 0.
    const TwoLevelParams base{1.0, 0.5, -1.0, -0.5, 0.0};
    const Family f = two_level_family(base, TwoLevelParam::omega_re, TwoLevelParam::omega_im);
    Grid2 g{Grid2::linspace(0.13, 0.93, 5), Grid2::linspace(0.02, 0.52, 4)};
    const auto pts = orthogonality_scan(f, g, 1e-6);
    ASSERT_FALSE(pts.empty());
    const cplx amd = base.eps1() - base.eps2();
    // independent oracle: bisection on the sign of Im((a - d) conj(omega)) along each horizontal edge
    std::size_t expected = 0;
    for (double y : g.ys)
        for (std::size_t c = 0; c + 1 < g.xs.size(); ++c) {
            auto s = [&](double x) { return (amd * std::conj(cplx{x, y})).imag(); };
            double lo = g.xs[c], hi = g.xs[c + 1];
            if (s(lo) * s(hi) >= 0.0) continue;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                (s(lo) * s(mid) <= 0.0 ? hi : lo) = mid;
            }
            ++expected;
            const double xr = 0.5 * (lo + hi);
            const bool found = std::any_of(pts.begin(), pts.end(), [&](const OrthogonalityPoint& p) {
                return std::hypot(p.params.x - xr, p.params.y - y) < 1e-6;
            });
            EXPECT_TRUE(found) << "crossing at (" << xr << ", " << y << ")";
        }
    EXPECT_GT(expected, 0u);
    for (const auto& p : pts) {
        EXPECT_LT(p.overlap, 1e-6);
        EXPECT_LT(std::abs((amd * std::conj(cplx{p.params.x, p.params.y})).imag()), 1e-6);
    }
}

TEST(CoalescenceOrder, Examples) {
    const std::vector<cplx> distinct{0.0, 1.0, 2.0 * I_unit};
    EXPECT_EQ(coalescence_order(std::span<const cplx>(distinct), 1e-6), 1u);
    const EigenSystem ep = eig_general(CMatrix{{1.0, I_unit}, {I_unit, -1.0}});
    EXPECT_EQ(coalescence_order(ep, 1e-6), 2u);
    EXPECT_EQ(coalescence_order(eig_general(CMatrix(3, 3)), 1e-12), 3u);
}

TEST(CoalescenceOrder, MonotoneInThreshold) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const auto vals = eig_general(oracle::random_matrix(rng, 8)).values();
        std::size_t last = 0;
        for (double t = 1e-3; t < 100.0; t *= 1.7) {
            const std::size_t k = coalescence_order(std::span<const cplx>(vals), t);
            EXPECT_GE(k, last);
            last = k;
        }
        EXPECT_EQ(last, 8u);
    }
}
