#include <gtest/gtest.h>

#include <cmath>

#include "electroseis/domain_grid.hpp"

using namespace electroseis;

namespace {

DomainGrid unit_cube(long long n, double w = 0.125, long long nt = 64) {
    DomainConfig c;
    c.n = {n, n, n};
    c.shell_width = w;
    c.nt = nt;
    return build_domain(c);
}

}  // namespace

TEST(DomainGrid, UnitCubeShellMask) {
    const auto dg = unit_cube(32);
    const auto& g = dg.grid;
    EXPECT_EQ(dg.regions.cells.size() + 0u, 32u * 32u * 32u);
    EXPECT_EQ(dg.regions.interior_cells, 24u * 24u * 24u);  // [0.125, 0.875]^3 at h = 1/32
    EXPECT_EQ(dg.regions.shell_cells + dg.regions.interior_cells, 32u * 32u * 32u);
    for (std::size_t k = 0; k < 32; ++k)
        for (std::size_t j = 0; j < 32; ++j)
            for (std::size_t i = 0; i < 32; ++i) {
                const bool inside = i >= 4 && i < 28 && j >= 4 && j < 28 && k >= 4 && k < 28;
                EXPECT_EQ(dg.regions.cell(g, i, j, k), inside ? Region::interior : Region::shell);
            }
    EXPECT_EQ(dg.regions.node(g, 4, 10, 10), NodeRegion::interface);
    EXPECT_EQ(dg.regions.node(g, 5, 10, 10), NodeRegion::interior);
    EXPECT_EQ(dg.regions.node(g, 3, 10, 10), NodeRegion::shell);
}

TEST(DomainGrid, Spacing) {
    const auto dg = unit_cube(16);
    for (int a = 0; a < 3; ++a) EXPECT_EQ(dg.grid.h[a], 0.0625);
    EXPECT_EQ(dg.grid.node_count(), 17u * 17u * 17u);
}

TEST(DomainGrid, Errors) {
    EXPECT_THROW(unit_cube(32, 0.6), ValidationError);
    try {
        unit_cube(32, 0.6);
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("empty interior"), std::string::npos);
    }
    DomainConfig c;
    c.n = {8, 0, 8};
    EXPECT_THROW(build_domain(c), ValidationError);
    c.n = {8, 8, 8};
    c.upper = {1.0, -1.0, 1.0};
    EXPECT_THROW(build_domain(c), ValidationError);
    c.upper = {1.0, 1.0, 1.0};
    c.delta = 2.0;
    EXPECT_THROW(build_domain(c), ValidationError);
}

TEST(DomainGrid, TimeStep) {
    Grid g = unit_cube(8).grid;
    g = with_time_step(g, 1.0, 0.3);
    EXPECT_EQ(g.nt, 4u);
    EXPECT_DOUBLE_EQ(g.dt, 0.25);
}

TEST(Cutoff, PlateauAndSupport) {
    const auto dg = unit_cube(32);
    const Cutoff c = build_cutoff(dg.domain, dg.grid);
    EXPECT_EQ(c({0.5, 0.5, 0.5}, 0.0), 1.0);
    EXPECT_EQ(c({0.0, 0.3, 0.7}, 0.2), 0.0);
    EXPECT_EQ(c({0.5, 1.0, 0.5}, 0.0), 0.0);
    EXPECT_EQ(c.temporal(1.0), 0.0);
    EXPECT_EQ(c.temporal(-1.0), 0.0);
    EXPECT_EQ(c.temporal(0.9), 1.0);
    // within one cell of the boundary
    EXPECT_EQ(c.spatial({1.0 / 32.0, 0.5, 0.5}), 0.0);
}

TEST(Cutoff, BandMidpointIsHalf) {
    const auto dg = unit_cube(32);
    const Cutoff c = build_cutoff(dg.domain, dg.grid);
    const double h = 1.0 / 32.0, w = 0.125;
    const double mid = 0.5 * (h + w);
    // quintic smoothstep at s = 1/2 by hand: 6/32 - 15/16 + 10/8
    const double oracle = 6.0 / 32.0 - 15.0 / 16.0 + 10.0 / 8.0;
    EXPECT_NEAR(c.spatial({mid, 0.5, 0.5}), oracle, 1e-15);
    EXPECT_NEAR(c.spatial({mid, 0.5, 0.5}), 0.5, 1e-15);
}

TEST(Cutoff, RangeAndEqualsOneOnInterior) {
    const auto dg = unit_cube(32);
    const auto& g = dg.grid;
    const Cutoff c = build_cutoff(dg.domain, g);
    for (double v : c.chi1.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    for (std::size_t k = 0; k <= 32; ++k)
        for (std::size_t j = 0; j <= 32; ++j)
            for (std::size_t i = 0; i <= 32; ++i)
                if (dg.regions.node(g, i, j, k) != NodeRegion::shell) {
                    EXPECT_EQ(c.chi1(i, j, k), 1.0);
                }
    for (std::size_t n = 0; n <= g.nt; ++n) {
        const double t = static_cast<double>(n) * g.dt;
        if (t <= dg.domain.T - dg.domain.delta) {
            EXPECT_EQ(c.chi2[n], 1.0);
        }
    }
    EXPECT_EQ(c.chi2.back(), 0.0);
}

TEST(Cutoff, SecondDifferencesScaleWithBandWidth) {
    // K = max|d2 chi| * width^2 / h^2 must not grow with resolution
    std::vector<double> K;
    for (long long n : {32, 64}) {
        const auto dg = unit_cube(n);
        const auto& g = dg.grid;
        const Cutoff c = build_cutoff(dg.domain, g);
        const double width = dg.domain.shell_width - g.h[0];
        double m = 0.0;
        for (std::size_t i = 1; i < g.n[0]; ++i)
            m = std::max(m, std::abs(c.chi1(i + 1, n / 2, n / 2) - 2.0 * c.chi1(i, n / 2, n / 2) + c.chi1(i - 1, n / 2, n / 2)));
        K.push_back(m * width * width / (g.h[0] * g.h[0]));
    }
    // the continuum bound is max|S''| = 10/sqrt(3)
    for (double k : K) EXPECT_LT(k, 10.0 / std::sqrt(3.0) * 1.05);
    EXPECT_LT(std::abs(K[0] - K[1]), 0.5 * K[1]);
}

TEST(Cutoff, RejectsThinBands) {
    const auto coarse = unit_cube(16);  // band = 1 cell
    EXPECT_THROW(build_cutoff(coarse.domain, coarse.grid), ValidationError);
    const auto few_steps = unit_cube(32, 0.125, 20);  // delta/dt = 2
    EXPECT_THROW(build_cutoff(few_steps.domain, few_steps.grid), ValidationError);
}

TEST(Smoothstep, DerivativesMatchDifferences) {
    const double e = 1e-6;
    for (double s : {0.1, 0.3, 0.5, 0.77}) {
        EXPECT_NEAR(smoothstep5_d1(s), (smoothstep5(s + e) - smoothstep5(s - e)) / (2 * e), 1e-8);
        EXPECT_NEAR(smoothstep5_d2(s), (smoothstep5_d1(s + e) - smoothstep5_d1(s - e)) / (2 * e), 1e-7);
    }
}
