#include <gtest/gtest.h>

#include <cmath>

#include "electroseis/carleman.hpp"
#include "electroseis/staggered.hpp"

using namespace electroseis;

namespace {

const Vec3 kStar{-2.0, 0.5, 0.5};

DomainGrid cube(long long n = 16) {
    DomainConfig cfg;
    cfg.n = {n, n, n};
    return build_domain(cfg);
}

CarlemanWeight canonical(const DomainGrid& dg) {
    Array3 one(dg.grid.node_shape(), 1.0);
    return build_weight(dg.domain, dg.grid, {{"unit", &one}}, kStar, 0.5, 11.0, 0.1);
}

struct ScaledWave {
    SpaceTimeBump b;
    double s;
    WaveSample operator()(const Vec3& x, double t) const {
        WaveSample w = b(x, t);
        w.u *= s;
        for (double& g : w.grad) g *= s;
        w.utt *= s;
        w.lap *= s;
        return w;
    }
};

}  // namespace

TEST(Pseudoconvexity, ConstantSpeedGivesUniformMargin) {
    const auto dg = cube(8);
    Array3 c(dg.grid.node_shape(), 2.5);
    const auto r = check_pseudoconvexity(dg.grid, c, kStar, 0.3);
    for (double m : r.margin.values()) EXPECT_DOUBLE_EQ(m, 0.7);
    EXPECT_TRUE(r.passed());
}

TEST(Pseudoconvexity, SquaredDistanceSpeedFailsEverywhere) {
    const auto dg = cube(8);
    const Array3 c = sample_nodes(dg.grid, [](const Vec3& x) { return norm2(x - kStar); });
    for (double c0 : {0.1, 0.5, 0.9}) {
        const auto r = check_pseudoconvexity(dg.grid, c, kStar, c0);
        // grad c.(x - x*)/(2c) = 1 identically; the difference stencils are exact on quadratics
        for (double m : r.margin.values()) EXPECT_NEAR(m, -c0, 1e-12);
        EXPECT_FALSE(r.passed());
    }
}

TEST(Pseudoconvexity, LinearSpeedWorstCorner) {
    const auto dg = cube(10);
    const Array3 c = sample_nodes(dg.grid, [](const Vec3& x) { return 1.0 + 0.1 * x[0]; });
    const auto r = check_pseudoconvexity(dg.grid, c, kStar, 0.5);
    EXPECT_NEAR(r.min_margin, 0.5 - 0.1 * 3.0 / (2.0 * 1.1), 1e-12);
    EXPECT_EQ(r.worst[0], 10u);
    EXPECT_TRUE(r.passed());
}

TEST(Pseudoconvexity, RejectsNonPositiveSpeed) {
    const auto dg = cube(4);
    Array3 c(dg.grid.node_shape(), 1.0);
    c(2, 2, 2) = 0.0;
    EXPECT_THROW(check_pseudoconvexity(dg.grid, c, kStar, 0.5), ValidationError);
    Array3 one(dg.grid.node_shape(), 1.0);
    EXPECT_THROW(check_pseudoconvexity(dg.grid, one, kStar, 1.0), ValidationError);
}

TEST(Weight, CanonicalGeometry) {
    const auto dg = cube();
    const CarlemanWeight w = canonical(dg);
    EXPECT_DOUBLE_EQ(w.d2_min, 4.0);
    EXPECT_DOUBLE_EQ(w.d2_max, 9.5);  // corner (1, 0 or 1, 0 or 1): 9 + 0.25 + 0.25
    // Phi from a grid scan agrees with the corner value at t = 0
    double grid_max = 0.0;
    for (std::size_t k = 0; k <= 16; ++k)
        for (std::size_t j = 0; j <= 16; ++j)
            for (std::size_t i = 0; i <= 16; ++i)
                for (int q = -8; q <= 8; ++q) grid_max = std::max(grid_max, w.phi(dg.grid.node(i, j, k), q / 8.0));
    EXPECT_NEAR(grid_max, w.Phi, 1e-12 * w.Phi);
    EXPECT_NEAR(w.Phi, std::exp(0.1 * 9.5), 1e-12);
    EXPECT_TRUE(weight_violation(w, dg.grid, 200).empty());
    EXPECT_GT(w.epsilon, 0.0);
    EXPECT_GT(w.delta, 0.0);
}

TEST(Weight, PsiSignsAndLevelBands) {
    const auto dg = cube(8);
    const CarlemanWeight w = canonical(dg);
    for (std::size_t k = 0; k <= 8; ++k)
        for (std::size_t j = 0; j <= 8; ++j)
            for (std::size_t i = 0; i <= 8; ++i) {
                const Vec3 x = dg.grid.node(i, j, k);
                EXPECT_LT(w.psi(x, w.T), 0.0);
                EXPECT_LT(w.psi(x, -w.T), 0.0);
                EXPECT_GE(w.psi(x, 0.0), 0.0);
                EXPECT_GT(w.phi(x, 0.999 * w.delta), 1.0 - w.epsilon);
                EXPECT_LT(w.phi(x, -(w.T - 0.999 * w.delta)), 1.0 - 2.0 * w.epsilon);
            }
}

TEST(Weight, MonotoneInAbsoluteTime) {
    const auto dg = cube(6);
    const CarlemanWeight w = canonical(dg);
    for (std::size_t k = 0; k <= 6; ++k)
        for (std::size_t j = 0; j <= 6; ++j)
            for (std::size_t i = 0; i <= 6; ++i) {
                const Vec3 x = dg.grid.node(i, j, k);
                for (int a = 0; a <= 20; ++a)
                    for (int b = a; b <= 20; ++b) {
                        const double t1 = a / 20.0, t2 = b / 20.0;
                        EXPECT_GE(w.phi(x, t1), w.phi(x, -t2));
                        EXPECT_GE(w.phi(x, -t1), w.phi(x, t2));
                    }
            }
}

TEST(Weight, SigmaThresholdAndErrors) {
    const auto dg = cube(8);
    Array3 one(dg.grid.node_shape(), 1.0);
    const std::vector<SpeedField> sp{{"unit", &one}};
    // T = 1: psi(x, T) < 0 on the far corners needs sigma > max |x - x*|^2 = 9.5
    EXPECT_THROW(build_weight(dg.domain, dg.grid, sp, kStar, 0.5, 9.4, 0.1), ValidationError);
    EXPECT_THROW(build_weight(dg.domain, dg.grid, sp, kStar, 0.5, 9.5, 0.1), ValidationError);
    EXPECT_NO_THROW(build_weight(dg.domain, dg.grid, sp, kStar, 0.5, 9.6, 0.1));
    EXPECT_NO_THROW(build_weight(dg.domain, dg.grid, sp, kStar, 0.5, 10.2, 0.1));
    EXPECT_THROW(build_weight(dg.domain, dg.grid, sp, {0.5, 0.5, 0.5}, 0.5, 11.0, 0.1), ValidationError);
    EXPECT_THROW(build_weight(dg.domain, dg.grid, sp, {1.0, 0.5, 0.5}, 0.5, 11.0, 0.1), ValidationError);
    const Array3 bad = sample_nodes(dg.grid, [](const Vec3& x) { return norm2(x - kStar); });
    EXPECT_THROW(build_weight(dg.domain, dg.grid, {{"bad", &bad}}, kStar, 0.5, 11.0, 0.1), ValidationError);
}

TEST(Weight, ScanFindsOnlySigmaAboveCornerDistance) {
    const auto dg = cube(6);
    Array3 one(dg.grid.node_shape(), 1.0);
    const std::vector<SpeedField> sp{{"unit", &one}};
    const WeightScan s = scan_weights(dg.domain, dg.grid, sp, kStar, 0.5, 1.0, 100.0, 0.01, 1.0, 9);
    EXPECT_EQ(s.tried, 81u);
    ASSERT_FALSE(s.feasible.empty());
    for (const auto& [sigma, theta] : s.feasible) EXPECT_GT(sigma, 9.5);
    // every sigma above 9.5 on the log grid (10, 17.8, 31.6, 56.2, 100) is feasible for all theta
    EXPECT_EQ(s.feasible.size(), 5u * 9u);
    EXPECT_THROW(scan_weights(dg.domain, dg.grid, sp, kStar, 0.5, 1.0, 9.0, 0.01, 1.0, 5), ValidationError);
}

TEST(Probe, TauGrid) {
    const auto t = tau_grid();
    ASSERT_EQ(t.size(), 16u);
    EXPECT_DOUBLE_EQ(t.front(), 1.0);
    EXPECT_NEAR(t.back(), 64.0, 1e-12);
    for (std::size_t q = 1; q < t.size(); ++q) EXPECT_NEAR(t[q] / t[q - 1], std::pow(64.0, 1.0 / 15.0), 1e-12);
}

TEST(Probe, ZeroFieldsGiveZeroRatio) {
    const auto dg = cube(8);
    const CarlemanWeight w = canonical(dg);
    const auto tau = tau_grid();
    SpaceTimeBump b;
    b.amplitude = 0.0;
    const auto r = probe_wave_carleman(w, dg.domain, b, b.support(), [](const Vec3&) { return 1.0; }, tau, 4);
    for (std::size_t k = 0; k < tau.size(); ++k) {
        EXPECT_EQ(r.lhs[k], 0.0);
        EXPECT_EQ(r.rhs[k], 0.0);
        EXPECT_EQ(r.ratio[k], 0.0);
    }
    EXPECT_TRUE(r.bounded);
    GradientBump g;
    g.amplitude = 0.0;
    EXPECT_EQ(probe_div_curl(w, dg.domain, g, g.support(), tau, 4).max_ratio, 0.0);
    OscillatingBump o;
    o.amplitude = 0.0;
    EXPECT_EQ(probe_time_trace(w, dg.domain, o, tau, 4).max_ratio, 0.0);
}

TEST(Probe, WaveBumpBoundedAndScaleInvariant) {
    const auto dg = cube(8);
    const CarlemanWeight w = canonical(dg);
    const auto tau = tau_grid();
    SpaceTimeBump b;
    auto c = [](const Vec3&) { return 1.0; };
    const auto r1 = probe_wave_carleman(w, dg.domain, b, b.support(), c, tau);
    const auto r10 = probe_wave_carleman(w, dg.domain, ScaledWave{b, 10.0}, b.support(), c, tau);
    EXPECT_TRUE(r1.has_knee);
    EXPECT_TRUE(r1.bounded);
    EXPECT_LE(r1.max_ratio, 2.0 * r1.ratio[r1.knee]);
    for (std::size_t k = 0; k < tau.size(); ++k) {
        EXPECT_GT(r1.lhs[k], 0.0);
        EXPECT_GT(r1.rhs[k], 0.0);
        EXPECT_NEAR(r10.ratio[k], r1.ratio[k], 1e-12 * r1.ratio[k]);
    }
}

TEST(Probe, WaveWithVariableSpeed) {
    const auto dg = cube(8);
    const CarlemanWeight w = canonical(dg);
    SpaceTimeBump b;
    const auto r =
        probe_wave_carleman(w, dg.domain, b, b.support(), [](const Vec3& x) { return 1.0 + 0.1 * x[0]; }, tau_grid());
    EXPECT_TRUE(r.bounded);
}

TEST(Probe, SupportTouchingBoundaryRejected) {
    const auto dg = cube(8);
    const CarlemanWeight w = canonical(dg);
    SpaceTimeBump b;
    b.center = {0.2, 0.5, 0.5};
    EXPECT_THROW(probe_wave_carleman(w, dg.domain, b, b.support(), [](const Vec3&) { return 1.0; }, tau_grid(), 4),
                 ValidationError);
    SpaceTimeBump late;
    late.t0 = 0.6;
    EXPECT_THROW(probe_wave_carleman(w, dg.domain, late, late.support(), [](const Vec3&) { return 1.0; }, tau_grid(), 4),
                 ValidationError);
    GradientBump g;
    g.radius = 0.5;
    EXPECT_THROW(probe_div_curl(w, dg.domain, g, g.support(), tau_grid(), 4), ValidationError);
}

TEST(Probe, DivCurlGradientBump) {
    const auto dg = cube(8);
    const CarlemanWeight w = canonical(dg);
    const auto tau = tau_grid();
    GradientBump g;
    // curl of a gradient vanishes pointwise
    const VectorSample s = g({0.55, 0.42, 0.61});
    EXPECT_NEAR(s.J[0][1], s.J[1][0], 1e-14);
    EXPECT_NEAR(s.J[0][2], s.J[2][0], 1e-14);
    const auto r1 = probe_div_curl(w, dg.domain, g, g.support(), tau);
    GradientBump g10 = g;
    g10.amplitude = 10.0;
    const auto r10 = probe_div_curl(w, dg.domain, g10, g10.support(), tau);
    EXPECT_TRUE(r1.bounded);
    for (std::size_t k = 0; k < tau.size(); ++k) EXPECT_NEAR(r10.ratio[k], r1.ratio[k], 1e-12 * r1.ratio[k]);
}

TEST(Probe, TimeTraceConstantInTime) {
    const auto dg = cube(8);
    const CarlemanWeight w = canonical(dg);
    const auto tau = tau_grid();
    OscillatingBump o;
    o.k = 0.0;
    const auto r = probe_time_trace(w, dg.domain, o, tau, 8);
    // ratio = 1 / (tau (2T - 2 delta)) exactly
    for (std::size_t k = 0; k < tau.size(); ++k)
        EXPECT_NEAR(r.ratio[k], 1.0 / (tau[k] * (2.0 * w.T - 2.0 * w.delta)), 1e-12 * r.ratio[k]);
    EXPECT_TRUE(r.bounded);
}

TEST(Probe, TimeTraceOscillatory) {
    const auto dg = cube(8);
    const CarlemanWeight w = canonical(dg);
    const auto tau = tau_grid();
    OscillatingBump o;
    const auto r1 = probe_time_trace(w, dg.domain, o, tau);
    OscillatingBump o10 = o;
    o10.amplitude = 10.0;
    const auto r10 = probe_time_trace(w, dg.domain, o10, tau);
    EXPECT_TRUE(r1.bounded);
    for (std::size_t k = 0; k < tau.size(); ++k) EXPECT_NEAR(r10.ratio[k], r1.ratio[k], 1e-12 * r1.ratio[k]);
}
