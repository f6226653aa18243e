#pragma once

// Biot subsystem on the collocated node grid:
//   rho u'' + rho_f w'' - div tau = F_u
//   rho_f u'' + rho_e w'' + (eta/kappa) w' + grad p = xi D + F_w
// with tau = (lambda div u + C div w) I + G (grad u + grad u^T), p = -(C div u + M div w).
//
// Spatial derivatives use the second-order summation-by-parts pair: D is
// central inside and one-sided at the ends, and the divergence applied to
// tau and p is its negative H-adjoint. The traction-free and drained
// conditions are then natural, and (L r, r')_H equals the discrete bilinear
// form exactly, which makes the leapfrog energy non-increasing.

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "core.hpp"
#include "domain_grid.hpp"
#include "parameters.hpp"
#include "staggered.hpp"

namespace electroseis {

/// Per-node coefficients of the Biot system.
struct BiotCoefficients {
    Array3 rho, rho_f, rho_e, b, lambda, G, C, M;  ///< b = eta / kappa
    double max_speed2 = 0.0;  ///< max of the four speed-squared fields
};

inline BiotCoefficients biot_coefficients(const ParameterFields& f) {
    const AdmissibilityReport r = check_admissibility(f);
    if (!r.passed()) throw ValidationError("biot: parameters are not admissible");
    BiotCoefficients c{f.rho, f.rho_f, f.rho_e, Array3(f.shape()), f.lambda, f.G, f.C, f.M, 0.0};
    for (std::size_t n = 0; n < f.mu.size(); ++n) {
        c.b.values()[n] = f.eta.values()[n] / f.kappa.values()[n];
        const NodeDiagonalization d = diagonalize(f.at(n));
        c.max_speed2 = std::max({c.max_speed2, d.c, d.lambda1, d.lambda2});
    }
    return c;
}

/// dt <= cfl h_min / sqrt(max speed^2).
inline double biot_dt_max(const Grid& g, const BiotCoefficients& c, double cfl = 0.4) {
    return cfl * g.h_min() / std::sqrt(c.max_speed2);
}

namespace sbp {

/// First derivative along an axis: central inside, one-sided at the ends.
inline Array3 diff(const Grid& g, const Array3& f, int axis) {
    Array3 out(f.shape());
    const std::size_t N = g.n[axis];
    const double h = g.h[axis];
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Index3 p{i, j, k};
        const std::size_t m = p[axis];
        if (m == 0)
            out[p] = (f[detail::shifted(p, axis, 1)] - f[p]) / h;
        else if (m == N)
            out[p] = (f[p] - f[detail::shifted(p, axis, -1)]) / h;
        else
            out[p] = (f[detail::shifted(p, axis, 1)] - f[detail::shifted(p, axis, -1)]) / (2.0 * h);
    });
    return out;
}

/// Negative H-adjoint of diff: (adj(g), v)_H = -(g, diff(v))_H for all v.
inline Array3 adjoint_div(const Grid& g, const Array3& f, int axis) {
    Array3 out(f.shape());
    const std::size_t N = g.n[axis];
    const double h = g.h[axis];
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Index3 p{i, j, k};
        const std::size_t m = p[axis];
        if (m == 0)
            out[p] = (f[p] + f[detail::shifted(p, axis, 1)]) / h;
        else if (m == N)
            out[p] = -(f[p] + f[detail::shifted(p, axis, -1)]) / h;
        else
            out[p] = (f[detail::shifted(p, axis, 1)] - f[detail::shifted(p, axis, -1)]) / (2.0 * h);
    });
    return out;
}

/// Diagonal quadrature weights of the SBP norm (trapezoid in each direction).
inline Array3 norm_weights(const Grid& g) {
    Array3 w(g.node_shape());
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Index3 p{i, j, k};
        double v = 1.0;
        for (int a = 0; a < 3; ++a) v *= (p[a] == 0 || p[a] == g.n[a]) ? 0.5 * g.h[a] : g.h[a];
        w[p] = v;
    });
    return w;
}

}  // namespace sbp

/// Symmetric stress: components xx, yy, zz, yz, xz, xy.
struct Stress {
    std::array<Array3, 6> tau;
    Array3 p;

    const Array3& at(int i, int j) const { return tau[static_cast<std::size_t>(i == j ? i : 6 - i - j)]; }
    Array3& at(int i, int j) { return tau[static_cast<std::size_t>(i == j ? i : 6 - i - j)]; }
    bool operator==(const Stress&) const = default;
};

/// Displacement gradient grad[i][j] = D_j u_i.
using Gradient = std::array<std::array<Array3, 3>, 3>;

inline Gradient gradient(const Grid& g, const VectorField& u) {
    Gradient out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i][j] = sbp::diff(g, u[i], j);
    return out;
}

inline Array3 divergence(const Grid& g, const VectorField& u) {
    Array3 d = sbp::diff(g, u[0], 0);
    d += sbp::diff(g, u[1], 1);
    d += sbp::diff(g, u[2], 2);
    return d;
}

/// (tau, p) from (u, w).
inline Stress constitutive(const Grid& g, const VectorField& u, const VectorField& w, const BiotCoefficients& c) {
    const Gradient gu = gradient(g, u);
    const Array3 du = gu[0][0] + gu[1][1] + gu[2][2];
    const Array3 dw = divergence(g, w);
    Stress s{{Array3(u.shape()), Array3(u.shape()), Array3(u.shape()), Array3(u.shape()), Array3(u.shape()),
              Array3(u.shape())},
             Array3(u.shape())};
    for (std::size_t n = 0; n < du.size(); ++n) {
        const double lam = c.lambda.values()[n], G = c.G.values()[n], C = c.C.values()[n], M = c.M.values()[n];
        const double a = du.values()[n], b = dw.values()[n];
        const double iso = lam * a + C * b;
        for (int i = 0; i < 3; ++i) s.tau[i].values()[n] = iso + 2.0 * G * gu[i][i].values()[n];
        s.at(1, 2).values()[n] = G * (gu[1][2].values()[n] + gu[2][1].values()[n]);
        s.at(0, 2).values()[n] = G * (gu[0][2].values()[n] + gu[2][0].values()[n]);
        s.at(0, 1).values()[n] = G * (gu[0][1].values()[n] + gu[1][0].values()[n]);
        s.p.values()[n] = -(C * a + M * b);
    }
    return s;
}

/// L r = (-div tau, grad p) with the adjoint divergence.
inline std::pair<VectorField, VectorField> apply_operator(const Grid& g, const Stress& s) {
    VectorField lu(s.p.shape()), lw(s.p.shape());
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) lu[i] -= sbp::adjoint_div(g, s.at(i, j), j);
        lw[i] = sbp::adjoint_div(g, s.p, i);
    }
    return {std::move(lu), std::move(lw)};
}

struct BiotState {
    VectorField u, w;            ///< level n
    VectorField u_prev, w_prev;  ///< level n-1
    Stress stress;               ///< constitutive cache for level n
    std::size_t level = 0;
    double t = 0.0;
};

/// Zero displacements; optional initial velocities (tests only) define the
/// backward level through r - dt v.
inline BiotState init_biot(const Grid& g, const BiotCoefficients& c, double dt, const VectorField* u0 = nullptr,
                           const VectorField* w0 = nullptr, const VectorField* vu0 = nullptr,
                           const VectorField* vw0 = nullptr) {
    BiotState s;
    const Index3 shape = g.node_shape();
    s.u = u0 ? *u0 : VectorField(shape);
    s.w = w0 ? *w0 : VectorField(shape);
    s.u_prev = s.u;
    s.w_prev = s.w;
    if (vu0) s.u_prev -= dt * *vu0;
    if (vw0) s.w_prev -= dt * *vw0;
    s.stress = constitutive(g, s.u, s.w, c);
    return s;
}

/// Body forces added to the right-hand sides (manufactured solutions).
struct BiotForce {
    VectorField fu, fw;
};

/// Inverse of the per-node update matrix (rho, rho_f; rho_f, rho_e + b dt/2) / dt^2,
/// row-major. The determinant is (rho0 + rho b dt/2)/dt^4 > 0.
inline std::array<double, 4> biot_block_inverse(double rho, double rho_f, double rho_e, double b, double dt) {
    const double idt2 = 1.0 / (dt * dt);
    const double m11 = rho * idt2, m12 = rho_f * idt2, m22 = rho_e * idt2 + b / (2.0 * dt);
    const double det = m11 * m22 - m12 * m12;
    return {m22 / det, -m12 / det, -m12 / det, m11 / det};
}

struct BiotOptions {
    double cfl = 0.4;
    double blowup = 1e100;
};

/// One step. source is xi D at nodes (level n); it may be null.
///
/// Level 0 uses the Taylor start r1 = r0 + dt v0 + dt^2/2 A^{-1}(F - L r0 - B v0)
/// with v0 = (r0 - r_prev)/dt; later levels use the centered scheme
/// A (r+ - 2r + r-)/dt^2 + B (r+ - r-)/(2dt) + L r = F solved node by node.
inline void step_biot_inplace(BiotState& s, const VectorField* source, const BiotCoefficients& c, const Grid& g,
                              double dt, const BiotForce* body = nullptr, const BiotOptions& opt = {}) {
    if (!(dt > 0.0)) throw NumericalError("biot: time step must be positive");
    const double lim = biot_dt_max(g, c, opt.cfl);
    if (dt > lim * (1.0 + 1e-12))
        throw NumericalError("biot: CFL violated (dt = " + std::to_string(dt) + ", limit " + std::to_string(lim) + ")");

    auto [lu, lw] = apply_operator(g, s.stress);
    VectorField un(s.u.shape()), wn(s.u.shape());
    const bool start = s.level == 0;
    const double idt2 = 1.0 / (dt * dt);
    for (int i = 0; i < 3; ++i) {
        const auto& U = s.u[i].values();
        const auto& W = s.w[i].values();
        const auto& Up = s.u_prev[i].values();
        const auto& Wp = s.w_prev[i].values();
        auto& Un = un[i].values();
        auto& Wn = wn[i].values();
        parallel_for(0, U.size(), [&](std::size_t n) {
            const double rho = c.rho.values()[n], rf = c.rho_f.values()[n], re = c.rho_e.values()[n];
            const double b = c.b.values()[n];
            double fu = -lu[i].values()[n], fw = -lw[i].values()[n];
            if (source) fw += (*source)[i].values()[n];
            if (body) {
                fu += body->fu[i].values()[n];
                fw += body->fw[i].values()[n];
            }
            if (start) {
                const double vu = (U[n] - Up[n]) / dt, vw = (W[n] - Wp[n]) / dt;
                fw -= b * vw;
                const double det = rho * re - rf * rf;
                const double au = (re * fu - rf * fw) / det;
                const double aw = (rho * fw - rf * fu) / det;
                Un[n] = U[n] + dt * vu + 0.5 * dt * dt * au;
                Wn[n] = W[n] + dt * vw + 0.5 * dt * dt * aw;
                return;
            }
            // rhs = F - L r + A(2r - r-)/dt^2 + B r-/(2dt)
            const double ru = fu + idt2 * (rho * (2.0 * U[n] - Up[n]) + rf * (2.0 * W[n] - Wp[n]));
            const double rw = fw + idt2 * (rf * (2.0 * U[n] - Up[n]) + re * (2.0 * W[n] - Wp[n])) + b * Wp[n] / (2.0 * dt);
            const auto inv = biot_block_inverse(rho, rf, re, b, dt);
            Un[n] = inv[0] * ru + inv[1] * rw;
            Wn[n] = inv[2] * ru + inv[3] * rw;
        });
    }
    s.u_prev = std::move(s.u);
    s.w_prev = std::move(s.w);
    s.u = std::move(un);
    s.w = std::move(wn);
    s.stress = constitutive(g, s.u, s.w, c);
    ++s.level;
    s.t += dt;

    bool ok = true;
    for (int i = 0; i < 3 && ok; ++i) ok = all_finite(s.u[i]) && all_finite(s.w[i]);
    if (!ok || std::max(s.u.max_abs(), s.w.max_abs()) > opt.blowup)
        throw NumericalError("biot: blow-up detected at step " + std::to_string(s.level));
}

inline BiotState step_biot(BiotState s, const VectorField* source, const BiotCoefficients& c, const Grid& g, double dt,
                           const BiotForce* body = nullptr, const BiotOptions& opt = {}) {
    step_biot_inplace(s, source, c, g, dt, body, opt);
    return s;
}

/// Discrete bilinear form: H-weighted div u (lambda div u' + C div w') +
/// div w (C div u' + M div w') + 2G e(u):e(u').
inline double biot_bilinear(const Grid& g, const BiotCoefficients& c, const VectorField& u, const VectorField& w,
                            const VectorField& u2, const VectorField& w2) {
    const Gradient a = gradient(g, u), b = gradient(g, u2);
    const Array3 dw = divergence(g, w), dw2 = divergence(g, w2);
    const Array3 H = sbp::norm_weights(g);
    double s = 0.0;
    for (std::size_t n = 0; n < H.size(); ++n) {
        const double du = a[0][0].values()[n] + a[1][1].values()[n] + a[2][2].values()[n];
        const double du2 = b[0][0].values()[n] + b[1][1].values()[n] + b[2][2].values()[n];
        const double lam = c.lambda.values()[n], G = c.G.values()[n], C = c.C.values()[n], M = c.M.values()[n];
        double ee = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double e1 = 0.5 * (a[i][j].values()[n] + a[j][i].values()[n]);
                const double e2 = 0.5 * (b[i][j].values()[n] + b[j][i].values()[n]);
                ee += e1 * e2;
            }
        const double v = du * (lam * du2 + C * dw2.values()[n]) + dw.values()[n] * (C * du2 + M * dw2.values()[n]) +
                         2.0 * G * ee;
        s += H.values()[n] * v;
    }
    return s;
}

/// H-weighted (A v, v) for v = (vu, vw).
inline double biot_kinetic(const Grid& g, const BiotCoefficients& c, const VectorField& vu, const VectorField& vw) {
    const Array3 H = sbp::norm_weights(g);
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (std::size_t n = 0; n < H.size(); ++n) {
            const double a = vu[i].values()[n], b = vw[i].values()[n];
            s += H.values()[n] *
                 (c.rho.values()[n] * a * a + 2.0 * c.rho_f.values()[n] * a * b + c.rho_e.values()[n] * b * b);
        }
    return s;
}

/// E^n = ||(r^n - r^{n-1})/dt||_A^2 + B_h(r^n, r^{n-1}).
///
/// Without sources E^{n+1} - E^n = -(b (w^{n+1}-w^{n-1}), w^{n+1}-w^{n-1})_H / (2 dt) <= 0.
inline double energy_monitor(const BiotState& s, const BiotCoefficients& c, const Grid& g, double dt) {
    const VectorField vu = (1.0 / dt) * (s.u - s.u_prev);
    const VectorField vw = (1.0 / dt) * (s.w - s.w_prev);
    return biot_kinetic(g, c, vu, vw) + biot_bilinear(g, c, s.u, s.w, s.u_prev, s.w_prev);
}

/// xi D at nodes from an edge-staggered D.
inline VectorField coupling_source(const Grid& g, const Array3& xi, const VectorField& D_edges) {
    VectorField d = edges_to_nodes(g, D_edges);
    for (int i = 0; i < 3; ++i)
        for (std::size_t n = 0; n < xi.size(); ++n) d[i].values()[n] *= xi.values()[n];
    return d;
}

/// Applies nt steps; source(level) supplies xi D at that level (may return null).
inline BiotState run_biot(BiotState s, const std::function<const VectorField*(std::size_t)>& source,
                          const BiotCoefficients& c, const Grid& g, double dt, std::size_t nt, std::size_t stride,
                          const std::function<void(const BiotState&)>& observer, const BiotOptions& opt = {}) {
    if (stride == 0) throw ValidationError("biot: snapshot stride must be positive");
    if (observer) observer(s);
    for (std::size_t n = 0; n < nt; ++n) {
        step_biot_inplace(s, source ? source(s.level) : nullptr, c, g, dt, nullptr, opt);
        if (observer && s.level % stride == 0) observer(s);
    }
    return s;
}

}  // namespace electroseis
