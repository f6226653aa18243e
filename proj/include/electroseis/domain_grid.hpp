#pragma once

// Computational box, its measurement shell, the space-time sampling and the
// smooth cutoff that localizes fields to the interior.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "core.hpp"

namespace electroseis {

/// Axis-aligned box Omega, the boundary shell omega of width shell_width
/// (max-norm distance to the boundary) and the time horizon.
struct Domain {
    Vec3 lower{0.0, 0.0, 0.0};
    Vec3 upper{1.0, 1.0, 1.0};
    double shell_width = 0.125;
    double T = 1.0;      ///< final time
    double delta = 0.1;  ///< temporal transition width of the cutoff

    double extent(int axis) const { return upper[axis] - lower[axis]; }
    double min_extent() const { return std::min({extent(0), extent(1), extent(2)}); }

    /// Max-norm distance from x to the boundary of the box.
    double boundary_distance(const Vec3& x) const {
        double d = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) d = std::min({d, x[a] - lower[a], upper[a] - x[a]});
        return d;
    }
};

/// Uniform sampling of the box: node (i,j,k) sits at lower + (i h1, j h2, k h3).
struct Grid {
    std::array<std::size_t, 3> n{0, 0, 0};  ///< cell counts
    Vec3 h{0.0, 0.0, 0.0};
    Vec3 origin{0.0, 0.0, 0.0};
    double dt = 0.0;
    std::size_t nt = 0;

    Index3 node_shape() const { return {n[0] + 1, n[1] + 1, n[2] + 1}; }
    std::size_t node_count() const { return (n[0] + 1) * (n[1] + 1) * (n[2] + 1); }
    double h_min() const { return std::min({h[0], h[1], h[2]}); }
    double cell_volume() const { return h[0] * h[1] * h[2]; }

    Vec3 node(std::size_t i, std::size_t j, std::size_t k) const {
        return {origin[0] + static_cast<double>(i) * h[0], origin[1] + static_cast<double>(j) * h[1],
                origin[2] + static_cast<double>(k) * h[2]};
    }
    /// Midpoint of the edge leaving node idx along axis e.
    Vec3 edge(int e, std::size_t i, std::size_t j, std::size_t k) const {
        Vec3 x = node(i, j, k);
        x[e] += 0.5 * h[e];
        return x;
    }
    /// Center of the face with normal f whose lowest corner is node idx.
    Vec3 face(int f, std::size_t i, std::size_t j, std::size_t k) const {
        Vec3 x = node(i, j, k);
        for (int a = 0; a < 3; ++a)
            if (a != f) x[a] += 0.5 * h[a];
        return x;
    }
    Vec3 cell(std::size_t i, std::size_t j, std::size_t k) const {
        Vec3 x = node(i, j, k);
        for (int a = 0; a < 3; ++a) x[a] += 0.5 * h[a];
        return x;
    }

    bool is_boundary_node(std::size_t i, std::size_t j, std::size_t k) const {
        return i == 0 || j == 0 || k == 0 || i == n[0] || j == n[1] || k == n[2];
    }
};

enum class Region : std::uint8_t { shell = 0, interior = 1 };

/// Node classification relative to the interior Omega_0 = {dist > w}.
enum class NodeRegion : std::uint8_t { shell = 0, interface = 1, interior = 2 };

struct RegionMasks {
    std::vector<Region> cells;     ///< one label per cell, x-fastest
    std::vector<NodeRegion> nodes; ///< one label per node, x-fastest
    std::size_t shell_cells = 0;
    std::size_t interior_cells = 0;

    NodeRegion node(const Grid& g, std::size_t i, std::size_t j, std::size_t k) const {
        return nodes[i + (g.n[0] + 1) * (j + (g.n[1] + 1) * k)];
    }
    Region cell(const Grid& g, std::size_t i, std::size_t j, std::size_t k) const {
        return cells[i + g.n[0] * (j + g.n[1] * k)];
    }
};

struct DomainConfig {
    Vec3 lower{0.0, 0.0, 0.0};
    Vec3 upper{1.0, 1.0, 1.0};
    double shell_width = 0.125;
    double T = 1.0;
    double delta = 0.1;
    std::array<long long, 3> n{32, 32, 32};
    long long nt = 0;  ///< 0: chosen later from the CFL bounds
};

struct DomainGrid {
    Domain domain;
    Grid grid;
    RegionMasks regions;
};

inline RegionMasks label_regions(const Domain& d, const Grid& g) {
    RegionMasks m;
    m.cells.resize(g.n[0] * g.n[1] * g.n[2]);
    m.nodes.resize(g.node_count());
    const double tol = 1e-9 * g.h_min();
    for (std::size_t k = 0; k < g.n[2]; ++k)
        for (std::size_t j = 0; j < g.n[1]; ++j)
            for (std::size_t i = 0; i < g.n[0]; ++i) {
                const bool shell = d.boundary_distance(g.cell(i, j, k)) < d.shell_width;
                m.cells[i + g.n[0] * (j + g.n[1] * k)] = shell ? Region::shell : Region::interior;
                ++(shell ? m.shell_cells : m.interior_cells);
            }
    for (std::size_t k = 0; k <= g.n[2]; ++k)
        for (std::size_t j = 0; j <= g.n[1]; ++j)
            for (std::size_t i = 0; i <= g.n[0]; ++i) {
                const double dist = d.boundary_distance(g.node(i, j, k));
                NodeRegion r = NodeRegion::interface;
                if (dist < d.shell_width - tol)
                    r = NodeRegion::shell;
                else if (dist > d.shell_width + tol)
                    r = NodeRegion::interior;
                m.nodes[i + (g.n[0] + 1) * (j + (g.n[1] + 1) * k)] = r;
            }
    return m;
}

inline DomainGrid build_domain(const DomainConfig& cfg) {
    Domain d;
    d.lower = cfg.lower;
    d.upper = cfg.upper;
    d.shell_width = cfg.shell_width;
    d.T = cfg.T;
    d.delta = cfg.delta;
    for (int a = 0; a < 3; ++a) {
        if (!(d.upper[a] > d.lower[a])) throw ValidationError("domain: upper corner must exceed lower corner");
        if (cfg.n[a] <= 0) throw ValidationError("grid: nonpositive spacing (cell count must be positive)");
    }
    if (!(d.shell_width > 0.0)) throw ValidationError("domain: shell width must be positive");
    if (!(2.0 * d.shell_width < d.min_extent())) throw ValidationError("domain: empty interior (shell too wide)");
    if (!(d.T > 0.0)) throw ValidationError("domain: final time must be positive");
    if (!(d.delta > 0.0 && d.delta < d.T)) throw ValidationError("domain: transition width must lie in (0, T)");

    Grid g;
    g.origin = d.lower;
    for (int a = 0; a < 3; ++a) {
        g.n[a] = static_cast<std::size_t>(cfg.n[a]);
        g.h[a] = d.extent(a) / static_cast<double>(g.n[a]);
    }
    if (cfg.nt < 0) throw ValidationError("grid: step count must be nonnegative");
    if (cfg.nt > 0) {
        g.nt = static_cast<std::size_t>(cfg.nt);
        g.dt = d.T / static_cast<double>(g.nt);
    }
    RegionMasks masks = label_regions(d, g);
    if (masks.interior_cells == 0) throw ValidationError("domain: empty interior at this resolution");
    return {d, g, std::move(masks)};
}

/// Sets nt = ceil(T / dt_max) and dt = T / nt.
inline Grid with_time_step(Grid g, double T, double dt_max) {
    if (!(dt_max > 0.0)) throw ValidationError("time step bound must be positive");
    g.nt = static_cast<std::size_t>(std::ceil(T / dt_max - 1e-12));
    g.nt = std::max<std::size_t>(g.nt, 1);
    g.dt = T / static_cast<double>(g.nt);
    return g;
}

/// Quintic smoothstep 6s^5 - 15s^4 + 10s^3, clamped to [0, 1].
inline double smoothstep5(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}
inline double smoothstep5_d1(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return 30.0 * s * s * (1.0 - s) * (1.0 - s);
}
inline double smoothstep5_d2(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
}

/// chi(x,t) = chi1(x) chi2(t).
///
/// chi1 is a product of per-axis ramps rising from 0 at one cell off the
/// boundary to 1 at the shell width; chi2 is even in t, 1 on [-T+delta,
/// T-delta] and 0 at |t| = T.
struct Cutoff {
    Array3 chi1;
    std::vector<double> chi2;  ///< at t_n = n dt, n = 0..nt
    Domain domain;
    Grid grid;

    // the tolerances keep the plateau exactly 1 up to its rounded edge
    double spatial(const Vec3& x) const {
        double v = 1.0;
        for (int a = 0; a < 3; ++a) {
            const double da = std::min(x[a] - domain.lower[a], domain.upper[a] - x[a]);
            if (da >= domain.shell_width - 1e-9 * grid.h[a]) continue;
            v *= smoothstep5((da - grid.h[a]) / (domain.shell_width - grid.h[a]));
        }
        return v;
    }
    double temporal(double t) const {
        const double r = domain.T - std::abs(t);
        if (r >= domain.delta - 1e-12 * domain.T) return 1.0;
        return smoothstep5(r / domain.delta);
    }
    double operator()(const Vec3& x, double t) const { return spatial(x) * temporal(t); }
};

inline Cutoff build_cutoff(const Domain& d, const Grid& g) {
    for (int a = 0; a < 3; ++a) {
        const double band_cells = (d.shell_width - g.h[a]) / g.h[a];
        if (band_cells < 3.0 - 1e-9)
            throw ValidationError("cutoff: spatial transition band thinner than 3 cells");
    }
    if (!(g.dt > 0.0)) throw ValidationError("cutoff: time step not set");
    if (d.delta / g.dt < 3.0 - 1e-9) throw ValidationError("cutoff: temporal transition band thinner than 3 steps");

    Cutoff c{Array3(g.node_shape()), {}, d, g};
    for (std::size_t k = 0; k <= g.n[2]; ++k)
        for (std::size_t j = 0; j <= g.n[1]; ++j)
            for (std::size_t i = 0; i <= g.n[0]; ++i) c.chi1(i, j, k) = c.spatial(g.node(i, j, k));
    c.chi2.resize(g.nt + 1);
    for (std::size_t n = 0; n <= g.nt; ++n) c.chi2[n] = c.temporal(static_cast<double>(n) * g.dt);
    return c;
}

}  // namespace electroseis
