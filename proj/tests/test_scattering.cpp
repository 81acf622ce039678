#include <gtest/gtest.h>

#include <random>

#include "eptrace/scattering.hpp"
#include "oracles.hpp"

using namespace eptrace;

namespace {

ChannelSet random_channels(std::mt19937_64& rng, std::size_t n, std::size_t c) {
    CMatrix v(n, c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k) v(i, k) = oracle::gauss(rng);
    return ChannelSet(v);
}

ClosedSystem ladder(std::size_t n) {
    std::vector<double> lv(n);
    for (std::size_t k = 0; k < n; ++k) lv[k] = static_cast<double>(k);
    return ClosedSystem::from_levels(lv);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i / (n - 1.0));
    return g;
}

std::vector<double> lin_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1.0);
    return g;
}

}  // namespace

TEST(SMatrix, NoCouplingIsIdentity) {
    std::mt19937_64 rng(1);
    const ClosedSystem cs = ladder(4);
    const SMatrix s = s_matrix(cs, random_channels(rng, 4, 3), 0.0, 1.3);
    EXPECT_EQ(s.entries, CMatrix::identity(3));
}

TEST(SMatrix, ScalarClosedForm) {
    const double e0 = 0.4, g = 0.8, alpha = 0.6;
    const ClosedSystem cs = ClosedSystem::from_levels({e0});
    const ChannelSet ch(CMatrix{{g}});
    const cplx half{0.0, 0.5 * alpha * g * g};
    for (double e : {-1.0, 0.0, 0.3, 0.5, 2.0}) {
        const cplx s = s_matrix(cs, ch, alpha, e).entries(0, 0);
        const cplx expected = (e - e0 - half) / (e - e0 + half);
        EXPECT_LT(std::abs(s - expected), 1e-14);
        EXPECT_NEAR(std::abs(s), 1.0, 1e-14);
    }
    EXPECT_LT(std::abs(s_matrix(cs, ch, alpha, e0).entries(0, 0) + 1.0), 1e-14);
}

TEST(SMatrix, UnitarityRandom) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ue(-3.0, 3.0), ua(0.01, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 12, c = 1 + trial % 4;
        const ClosedSystem cs = ClosedSystem::from_matrix(oracle::random_real_symmetric(rng, n));
        const SMatrix s = s_matrix(cs, random_channels(rng, n, c), ua(rng), ue(rng));
        EXPECT_LT(unitarity_defect(s), 1e-10);
    }
}

TEST(SMatrix, PoleProximity) {
    // degenerate pair with identical couplings: one state is fully trapped at E = 0
    const ClosedSystem cs = ClosedSystem::from_levels({0.0, 0.0});
    const ChannelSet ch(CMatrix{{1.0}, {1.0}});
    try {
        s_matrix(cs, ch, 1.0, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PoleProximity);
    }
}

TEST(SMatrixEnergyDependent, ScalarAndClosedChannels) {
    const double e0 = 0.1, g = 0.3;
    const Band b{-1.0, 1.0, 0.5};
    const ClosedSystem cs = ClosedSystem::from_levels({e0});
    const ChannelSet ch(CMatrix{{g}}, {b});
    // inside the band the one-channel energy-dependent S is unitary
    for (double e : {-0.5, 0.0, 0.1, 0.7}) {
        const SMatrix s = s_matrix_energy_dependent(cs, ch, e);
        EXPECT_LT(unitarity_defect(s), 1e-12);
        const cplx f = band_self_energy(b, e);
        const cplx expected = 1.0 - cplx{0.0, 2.0 * pi * b.rho} * g * g / (e - e0 - g * g * f);
        EXPECT_LT(std::abs(s.entries(0, 0) - expected), 1e-13);
    }
    // outside the band the channel is closed
    EXPECT_EQ(s_matrix_energy_dependent(cs, ch, 3.0).entries(0, 0), cplx(1.0));
}

TEST(CrossSection, ScalarUnitaryMaximum) {
    const double e0 = 0.4;
    const ClosedSystem cs = ClosedSystem::from_levels({e0});
    const ChannelSet ch(CMatrix{{0.5}});
    const std::vector<double> grid{-1.0, e0, 1.0};
    const CrossSection xs = cross_section(cs, ch, 0.2, grid, 0, 0);
    EXPECT_NEAR(xs.values[1], 4.0, 1e-13);
    for (double v : xs.values) EXPECT_GE(v, 0.0);
}

TEST(CrossSection, NoCouplingIsZero) {
    std::mt19937_64 rng(3);
    const auto grid = lin_grid(-1.0, 4.0, 101);
    const CrossSection xs = cross_section(ladder(4), random_channels(rng, 4, 2), 0.0, grid, 0, 1);
    for (double v : xs.values) EXPECT_EQ(v, 0.0);
}

TEST(CrossSection, GridValidationAndFlags) {
    const ClosedSystem cs = ClosedSystem::from_levels({0.0, 0.0});
    const ChannelSet ch(CMatrix{{1.0}, {1.0}});
    const std::vector<double> bad{0.0, 0.0};
    EXPECT_THROW(cross_section(cs, ch, 1.0, bad, 0, 0), Error);
    EXPECT_THROW(cross_section(cs, ch, 1.0, std::vector<double>{0.0, 1.0}, 0, 2), Error);
    const std::vector<double> grid{-0.5, 0.0, 0.5};
    const CrossSection xs = cross_section(cs, ch, 1.0, grid, 0, 0);
    EXPECT_EQ(xs.pole_flags, (std::vector<std::size_t>{1}));
}

TEST(CrossSection, IsolatedResonancesResolved) {
    const ClosedSystem cs = ladder(10);
    const ChannelSet ch(CMatrix(10, 1, 1.0));
    const auto grid = lin_grid(-3.0, 12.0, 30001);
    const CrossSection xs = cross_section(cs, ch, 0.05, grid, 0, 0);
    EXPECT_EQ(peak_count(xs, 0.05), 10u);
}

TEST(PeakCount, Basics) {
    CrossSection mono;
    mono.energies = lin_grid(0.0, 1.0, 50);
    for (double e : mono.energies) mono.values.push_back(e * e);
    EXPECT_EQ(peak_count(mono, 0.05), 0u);

    CrossSection lor;
    lor.energies = lin_grid(-5.0, 5.0, 1001);
    for (double e : lor.energies) lor.values.push_back(1.0 / (e * e + 0.1));
    EXPECT_EQ(peak_count(lor, 0.05), 1u);

    // a plateau top counts once; a small ripple on a shoulder does not count
    CrossSection plateau;
    plateau.values = {0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.99, 1.0, 0.5, 0.0};
    plateau.energies = lin_grid(0.0, 1.0, plateau.values.size());
    EXPECT_EQ(peak_count(plateau, 0.05), 1u);
    EXPECT_EQ(peak_count(plateau, 0.001), 2u);
}

TEST(PeakCount, RegimeTransitionMonotone) {
    const ClosedSystem cs = ladder(10);
    const ChannelSet ch(CMatrix(10, 1, 1.0));  // Gamma_mean = alpha for unit couplings
    const auto grid = lin_grid(-3.0, 12.0, 30001);
    std::size_t last = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> counts;
    for (double alpha : {0.05, 0.5, 5.0, 50.0}) {
        const std::size_t k = peak_count(cross_section(cs, ch, alpha, grid, 0, 0), 0.05);
        EXPECT_LE(k, last) << "alpha " << alpha;
        last = k;
        counts.push_back(k);
    }
    EXPECT_EQ(counts.front(), 10u);
    EXPECT_LT(counts.back(), 10u);
}

TEST(Trapping, RankOneDegenerate) {
    const ClosedSystem cs = ClosedSystem::from_levels({0.0, 0.0});
    const ChannelSet ch(CMatrix{{1.0}, {1.0}});
    const auto alphas = lin_grid(0.5, 3.0, 6);
    const TrappingSweep sw = trapping_sweep(cs, ch, alphas);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        EXPECT_NEAR(sw.widths[i][0], 2.0 * alphas[i], 1e-12);
        EXPECT_NEAR(sw.widths[i][1], 0.0, 1e-12);
    }
}

TEST(Trapping, SumRuleAndPositivity) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 11, c = 1 + trial % 4;
        const ClosedSystem cs = ClosedSystem::from_matrix(oracle::random_real_symmetric(rng, n));
        const ChannelSet ch = random_channels(rng, n, c);
        const TrappingSweep sw = trapping_sweep(cs, ch, log_grid(1e-2, 1e3, 30));
        for (std::size_t i = 0; i < sw.alphas.size(); ++i) {
            EXPECT_LT(sw.sum_rule_residuals[i], 1e-10 * sw.alphas[i] * ch.coupling_weight());
            for (double g : sw.widths[i]) EXPECT_GE(g, -1e-10 * std::max(1.0, sw.alphas[i] * ch.coupling_weight()));
            EXPECT_TRUE(std::is_sorted(sw.widths[i].begin(), sw.widths[i].end(), std::greater<>()));
        }
    }
}

TEST(Trapping, StrongCouplingBifurcation) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> lv(10);
    for (auto& e : lv) e = u(rng);
    const ClosedSystem cs = ClosedSystem::from_levels(lv);
    const ChannelSet ch = random_channels(rng, 10, 2);
    const auto alphas = log_grid(1e2, 1e3, 11);
    const TrappingSweep sw = trapping_sweep(cs, ch, alphas);
    for (std::size_t g : sw.growing) EXPECT_EQ(g, 2u);
}

TEST(Trapping, Validation) {
    const ClosedSystem cs = ladder(2);
    const ChannelSet ch(CMatrix(2, 1, 1.0));
    EXPECT_THROW(trapping_sweep(cs, ch, std::vector<double>{1.0}), Error);
    EXPECT_THROW(trapping_sweep(cs, ch, std::vector<double>{1.0, 0.5}), Error);
}
