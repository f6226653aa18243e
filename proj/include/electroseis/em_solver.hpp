#pragma once

// Maxwell subsystem: dD/dt - curl(alpha B) + gamma D = 0, dB/dt + curl(beta D) = 0
// on the Yee grid with n x D = 0 and n . B = 0 on the box boundary.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "core.hpp"
#include "domain_grid.hpp"
#include "parameters.hpp"
#include "staggered.hpp"

namespace electroseis {

/// Coefficients sampled at the staggered positions they multiply.
struct EmCoefficients {
    VectorField beta_e;   ///< beta on edges
    VectorField gamma_e;  ///< gamma on edges
    VectorField alpha_f;  ///< alpha on faces
    double max_speed2 = 0.0;  ///< max over nodes of alpha beta
};

inline EmCoefficients em_coefficients(const Grid& g, const ParameterFields& f) {
    if (!f.derived) throw ValidationError("em: parameters not derived");
    EmCoefficients c{average_to_edges(g, f.beta), average_to_edges(g, f.gamma), average_to_faces(g, f.alpha), 0.0};
    for (std::size_t n = 0; n < f.alpha.size(); ++n)
        c.max_speed2 = std::max(c.max_speed2, f.alpha.values()[n] * f.beta.values()[n]);
    return c;
}

/// dt <= cfl h_min / sqrt(max alpha beta).
inline double em_dt_max(const Grid& g, const EmCoefficients& c, double cfl = 0.5) {
    return cfl * g.h_min() / std::sqrt(c.max_speed2);
}

/// Radial bump A (1 - |x-c|^2/R^2)^4 with compact support.
inline double bump4(const Vec3& x, const Vec3& c, double R, double A) {
    const double s = norm2(x - c) / (R * R);
    if (s >= 1.0) return 0.0;
    const double q = 1.0 - s;
    return A * q * q * q * q;
}

/// Discrete curl of psi e3 with psi sampled on z-faces: an edge field whose
/// staggered divergence vanishes identically.
inline VectorField vortex_edge_field(const Grid& g, const Vec3& c, double R, double A) {
    VectorField pot(g.node_shape());
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        if (face_exists(g, 2, {i, j, k})) pot[2](i, j, k) = bump4(g.face(2, i, j, k), c, R, A);
    });
    return curl_face_to_edge(g, pot, false);
}

/// Discrete curl of psi e3 with psi sampled on z-edges: a face field with
/// zero cell divergence.
inline VectorField vortex_face_field(const Grid& g, const Vec3& c, double R, double A) {
    VectorField pot(g.node_shape());
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        if (edge_exists(g, 2, {i, j, k})) pot[2](i, j, k) = bump4(g.edge(2, i, j, k), c, R, A);
    });
    return curl_edge_to_face(g, pot);
}

struct EmState {
    VectorField D;  ///< edges
    VectorField B;  ///< faces
    std::size_t level = 0;
    double t = 0.0;
};

struct EmInitReport {
    double div_D = 0.0;           ///< max |div D| over interior nodes
    double div_B = 0.0;           ///< max |div B| over cells not touching the boundary
    double div_B_boundary = 0.0;  ///< max |div B| over boundary cells (after the n.B projection)
    double tolerance = 0.0;
};

struct EmInit {
    EmState state;
    EmInitReport report;
};

inline bool cell_touches_boundary(const Grid& g, std::size_t i, std::size_t j, std::size_t k) {
    return i == 0 || j == 0 || k == 0 || i + 1 == g.n[0] || j + 1 == g.n[1] || k + 1 == g.n[2];
}

/// Projects D0, B0 onto the boundary conditions and verifies solenoidality.
///
/// Zeroing n.B of a field with nonzero normal trace leaves a divergence in
/// the boundary cells; that layer is reported separately and not checked.
inline EmInit init_em(const Grid& g, VectorField D0, VectorField B0, double rel_tol = 1e-10) {
    if (D0.shape() != g.node_shape() || B0.shape() != g.node_shape())
        throw ValidationError("em: initial field shape does not match the grid");
    zero_tangential_edges(g, D0);
    zero_normal_faces(g, B0);
    EmInitReport r;
    const Array3 dd = div_edges(g, D0);
    const Array3 db = div_faces(g, B0);
    r.div_D = dd.max_abs();
    for (std::size_t k = 0; k < g.n[2]; ++k)
        for (std::size_t j = 0; j < g.n[1]; ++j)
            for (std::size_t i = 0; i < g.n[0]; ++i) {
                double& slot = cell_touches_boundary(g, i, j, k) ? r.div_B_boundary : r.div_B;
                slot = std::max(slot, std::abs(db(i, j, k)));
            }
    const double scale_D = D0.max_abs() / g.h_min();
    const double scale_B = B0.max_abs() / g.h_min();
    r.tolerance = rel_tol;
    if (r.div_D > rel_tol * scale_D)
        throw ValidationError("em: initial D is not divergence free (max |div D| = " + std::to_string(r.div_D) + ")");
    if (r.div_B > rel_tol * scale_B)
        throw ValidationError("em: initial B is not divergence free (max |div B| = " + std::to_string(r.div_B) + ")");
    return {{std::move(D0), std::move(B0), 0, 0.0}, r};
}

struct EmOptions {
    double cfl = 0.5;
    double blowup = 1e100;  ///< max |field| beyond which the run is declared unstable
};

/// One kick-drift-kick step: half B kick, semi-implicit D update, half B kick.
/// Equivalent to the standard Yee leapfrog with both fields at integer levels.
inline void step_em_inplace(EmState& s, const EmCoefficients& c, const Grid& g, double dt, const EmOptions& opt = {}) {
    if (!(dt > 0.0)) throw NumericalError("em: time step must be positive");
    if (dt > em_dt_max(g, c, opt.cfl) * (1.0 + 1e-12))
        throw NumericalError("em: CFL violated (dt = " + std::to_string(dt) + ", limit " + std::to_string(em_dt_max(g, c, opt.cfl)) + ")");

    s.B -= (0.5 * dt) * curl_edge_to_face(g, hadamard(c.beta_e, s.D));
    const VectorField cb = curl_face_to_edge(g, hadamard(c.alpha_f, s.B));
    for (int e = 0; e < 3; ++e) {
        auto& d = s.D[e].values();
        const auto& gm = c.gamma_e[e].values();
        const auto& r = cb[e].values();
        for (std::size_t n = 0; n < d.size(); ++n) {
            const double h = 0.5 * gm[n] * dt;
            d[n] = ((1.0 - h) * d[n] + dt * r[n]) / (1.0 + h);
        }
    }
    zero_tangential_edges(g, s.D);
    s.B -= (0.5 * dt) * curl_edge_to_face(g, hadamard(c.beta_e, s.D));
    ++s.level;
    s.t += dt;

    bool ok = true;
    for (int c = 0; c < 3 && ok; ++c) ok = all_finite(s.D[c]) && all_finite(s.B[c]);
    if (!ok || std::max(s.D.max_abs(), s.B.max_abs()) > opt.blowup)
        throw NumericalError("em: blow-up detected at step " + std::to_string(s.level));
}

inline EmState step_em(EmState s, const EmCoefficients& c, const Grid& g, double dt, const EmOptions& opt = {}) {
    step_em_inplace(s, c, g, dt, opt);
    return s;
}

/// (beta D, D) + (alpha B^{n-1/2}, B^{n+1/2}): exactly conserved by the
/// lossless scheme and non-increasing when gamma >= 0.
inline double em_energy(const EmState& s, const EmCoefficients& c, const Grid& g, double dt) {
    const VectorField k = (0.5 * dt) * curl_edge_to_face(g, hadamard(c.beta_e, s.D));
    return weighted_dot(g, c.beta_e, s.D, s.D) + weighted_dot(g, c.alpha_f, s.B + k, s.B - k);
}

/// Plain (beta D, D) + (alpha B, B) at one level.
inline double em_energy_plain(const EmState& s, const EmCoefficients& c, const Grid& g) {
    return weighted_dot(g, c.beta_e, s.D, s.D) + weighted_dot(g, c.alpha_f, s.B, s.B);
}

/// Applies nt steps; the observer sees the initial state and every stride-th state.
inline EmState run_em(EmState s, const EmCoefficients& c, const Grid& g, double dt, std::size_t nt, std::size_t stride,
                      const std::function<void(const EmState&)>& observer, const EmOptions& opt = {}) {
    if (stride == 0) throw ValidationError("em: snapshot stride must be positive");
    if (observer) observer(s);
    for (std::size_t n = 0; n < nt; ++n) {
        step_em_inplace(s, c, g, dt, opt);
        if (observer && s.level % stride == 0) observer(s);
    }
    return s;
}

inline std::vector<EmState> run_em(const EmState& s, const EmCoefficients& c, const Grid& g, double dt, std::size_t nt,
                                   std::size_t stride = 1, const EmOptions& opt = {}) {
    std::vector<EmState> out;
    run_em(s, c, g, dt, nt, stride, [&](const EmState& x) { out.push_back(x); }, opt);
    return out;
}

}  // namespace electroseis
