#pragma once

// Reconstruction of the electromagnetic parameter differences from two twin
// experiments. With both parameter sets sharing the initial data, the
// difference fields satisfy at t = 0
//
//   dD/dt = grad(alpha) x B0 + alpha curl B0 - gamma D0
//   dB/dt = -grad(beta) x D0 - beta curl D0
//   xi D0 = -rho1 d2u/dt2
//
// which per node is M (grad alpha, gamma, grad beta) = N (alpha, beta) + b
// with 12 rows (two experiments, D then B). All fields here are node-centred.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "biot_solver.hpp"
#include "core.hpp"
#include "domain_grid.hpp"
#include "em_solver.hpp"
#include "parameters.hpp"
#include "staggered.hpp"

namespace electroseis {

namespace stencil {

/// f'(0) from f(0..4 dt), fourth order.
inline constexpr std::array<double, 5> d1 = {-25.0 / 12.0, 48.0 / 12.0, -36.0 / 12.0, 16.0 / 12.0, -3.0 / 12.0};
/// f''(0) from f(0..5 dt), fourth order.
inline constexpr std::array<double, 6> d2 = {45.0 / 12.0,  -154.0 / 12.0, 214.0 / 12.0,
                                             -156.0 / 12.0, 61.0 / 12.0,  -10.0 / 12.0};

}  // namespace stencil

inline constexpr std::size_t min_snapshot_levels = 6;

/// Node-centred first derivative: central inside, second-order one-sided at the ends.
inline Array3 node_diff(const Grid& g, const Array3& f, int axis) {
    Array3 out(f.shape());
    const std::size_t n = g.n[axis];
    const double h = g.h[axis];
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Index3 p{i, j, k};
        auto at = [&](std::size_t q) {
            Index3 r = p;
            r[axis] = q;
            return f[r];
        };
        const std::size_t m = p[axis];
        double v;
        if (n == 1)
            v = (at(1) - at(0)) / h;
        else if (m == 0)
            v = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
        else if (m == n)
            v = (3.0 * at(n) - 4.0 * at(n - 1) + at(n - 2)) / (2.0 * h);
        else
            v = (at(m + 1) - at(m - 1)) / (2.0 * h);
        out[p] = v;
    });
    return out;
}

inline VectorField node_gradient(const Grid& g, const Array3& f) {
    VectorField out;
    for (int a = 0; a < 3; ++a) out[a] = node_diff(g, f, a);
    return out;
}

inline VectorField node_curl(const Grid& g, const VectorField& v) {
    VectorField out(v.shape());
    for (int i = 0; i < 3; ++i) {
        const int a = (i + 1) % 3, b = (i + 2) % 3;
        out[i] = node_diff(g, v[b], a) - node_diff(g, v[a], b);
    }
    return out;
}

/// Initial data of one experiment at nodes, with the curls used by N.
struct InitialData {
    VectorField D0, B0;
    VectorField curl_D0, curl_B0;
};

/// Node data; curls by central differences.
inline InitialData initial_data_from_nodes(const Grid& g, VectorField D0, VectorField B0) {
    InitialData d;
    d.curl_D0 = node_curl(g, D0);
    d.curl_B0 = node_curl(g, B0);
    d.D0 = std::move(D0);
    d.B0 = std::move(B0);
    return d;
}

/// Staggered data (D on edges, B on faces); the curls use the Yee operators
/// before interpolation so they match what the solver sees.
inline InitialData initial_data_from_staggered(const Grid& g, const VectorField& D_edges, const VectorField& B_faces) {
    InitialData d;
    d.D0 = edges_to_nodes(g, D_edges);
    d.B0 = faces_to_nodes(g, B_faces);
    d.curl_D0 = faces_to_nodes(g, curl_edge_to_face(g, D_edges));
    d.curl_B0 = edges_to_nodes(g, curl_face_to_edge(g, B_faces, false));
    return d;
}

/// Snapshots of the difference fields (set 2 minus set 1) of one experiment.
struct ExperimentData {
    InitialData init;
    std::vector<VectorField> D, B, u;  ///< levels 0, 1, ... at spacing dt
};

struct Measurement {
    double dt = 0.0;
    std::array<ExperimentData, 2> exp;
};

struct InitialDerivatives {
    std::array<VectorField, 2> dD, dB, ddu;
    std::array<std::array<VectorField, 3>, 2> grad_ddu;  ///< grad_ddu[j][k] = d/dx_k of ddu[j]
};

namespace detail {

template <std::size_t L>
VectorField apply_time_stencil(const std::vector<VectorField>& f, const std::array<double, L>& w, double scale) {
    VectorField out(f[0].shape());
    for (int c = 0; c < 3; ++c) {
        auto& o = out[c].values();
        for (std::size_t l = 0; l < L; ++l) {
            const auto& v = f[l][c].values();
            for (std::size_t n = 0; n < o.size(); ++n) o[n] += w[l] * v[n];
        }
        for (double& x : o) x *= scale;
    }
    return out;
}

}  // namespace detail

inline InitialDerivatives estimate_initial_derivatives(const Grid& g, const Measurement& m) {
    if (!(m.dt > 0.0)) throw ValidationError("inverse: snapshot spacing must be positive");
    InitialDerivatives r;
    for (int j = 0; j < 2; ++j) {
        const ExperimentData& e = m.exp[j];
        const std::size_t levels = std::min({e.D.size(), e.B.size(), e.u.size()});
        if (levels < min_snapshot_levels)
            throw ValidationError("inverse: experiment " + std::to_string(j + 1) + " has " + std::to_string(levels) +
                                  " snapshot levels, at least " + std::to_string(min_snapshot_levels) + " are needed");
        for (const auto* series : {&e.D, &e.B, &e.u})
            for (const auto& f : *series)
                if (f.shape() != g.node_shape()) throw ValidationError("inverse: snapshot shape does not match the grid");
        r.dD[j] = detail::apply_time_stencil(e.D, stencil::d1, 1.0 / m.dt);
        r.dB[j] = detail::apply_time_stencil(e.B, stencil::d1, 1.0 / m.dt);
        r.ddu[j] = detail::apply_time_stencil(e.u, stencil::d2, 1.0 / (m.dt * m.dt));
        for (int k = 0; k < 3; ++k)
            for (int c = 0; c < 3; ++c) r.grad_ddu[j][k][c] = node_diff(g, r.ddu[j][c], k);
    }
    return r;
}

using Mat12x7 = Eigen::Matrix<double, 12, 7>;
using Mat12x2 = Eigen::Matrix<double, 12, 2>;
using Mat7x12 = Eigen::Matrix<double, 7, 12>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Vec7 = Eigen::Matrix<double, 7, 1>;

/// M, N, b at one point. Columns of M: (d1 alpha, d2 alpha, d3 alpha, gamma,
/// d1 beta, d2 beta, d3 beta); rows: D then B of experiment 1, then experiment 2.
struct NodeSystem {
    Mat12x7 M = Mat12x7::Zero();
    Mat12x2 N = Mat12x2::Zero();
    Vec12 b = Vec12::Zero();
};

inline NodeSystem node_system(const std::array<Vec3, 2>& D0, const std::array<Vec3, 2>& B0,
                              const std::array<Vec3, 2>& curl_D0, const std::array<Vec3, 2>& curl_B0,
                              const std::array<Vec3, 2>& dD, const std::array<Vec3, 2>& dB) {
    NodeSystem s;
    for (int j = 0; j < 2; ++j) {
        const int r0 = 6 * j;
        for (int i = 0; i < 3; ++i) {
            Vec3 e{0.0, 0.0, 0.0};
            e[i] = 1.0;
            const Vec3 eb = cross(e, B0[j]);
            const Vec3 ed = cross(e, D0[j]);
            for (int c = 0; c < 3; ++c) {
                s.M(r0 + c, i) = eb[c];
                s.M(r0 + 3 + c, 4 + i) = -ed[c];
            }
        }
        for (int c = 0; c < 3; ++c) {
            s.M(r0 + c, 3) = -D0[j][c];
            s.N(r0 + c, 0) = -curl_B0[j][c];
            s.N(r0 + 3 + c, 1) = curl_D0[j][c];
            s.b(r0 + c) = dD[j][c];
            s.b(r0 + 3 + c) = dB[j][c];
        }
    }
    return s;
}

struct SystemOptions {
    double sigma_min = 1e-6;  ///< smallest admissible sigma_min(M) / ||M||
    double xi_block_tol = 1e-12;  ///< smallest admissible sum_j |D0_j|^2 relative to its maximum
};

struct ReconstructionSystem {
    Grid grid;
    std::vector<std::size_t> nodes;  ///< linear indices of the Omega_0 nodes
    std::vector<Mat12x7> M;
    std::vector<Mat12x2> N;
    std::vector<Vec12> b;
    std::vector<Mat7x12> pinv;
    std::vector<double> sigma_min;  ///< absolute smallest singular value per node
    std::vector<double> sigma_max;
    double min_sigma_ratio = 0.0;
    Index3 worst{0, 0, 0};
    // xi blocks
    std::array<VectorField, 2> D0;
    std::array<VectorField, 2> ddu;
    std::array<std::array<VectorField, 3>, 2> grad_ddu;
    Array3 rho1;
    double options_sigma_min = 0.0;
    double xi_block_tol = 0.0;

    Vec7 solve(std::size_t q, const Vec12& rhs) const { return pinv[q] * rhs; }
};

inline Index3 node_index(const Index3& shape, std::size_t n) {
    return {n % shape[0], (n / shape[0]) % shape[1], n / (shape[0] * shape[1])};
}

inline std::vector<std::size_t> interior_nodes(const Grid& g, const RegionMasks& regions) {
    if (regions.nodes.size() != g.node_count()) throw ValidationError("inverse: region masks do not match the grid");
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < regions.nodes.size(); ++n)
        if (regions.nodes[n] == NodeRegion::interior) out.push_back(n);
    if (out.empty()) throw ValidationError("inverse: Omega_0 contains no grid nodes");
    return out;
}

inline Vec3 at(const VectorField& f, std::size_t n) { return {f[0].values()[n], f[1].values()[n], f[2].values()[n]}; }

inline ReconstructionSystem assemble_system(const Grid& g, const RegionMasks& regions,
                                            const std::array<InitialData, 2>& init, const InitialDerivatives& der,
                                            const Array3& rho1, const SystemOptions& opt = {}) {
    const Index3 shape = g.node_shape();
    for (int j = 0; j < 2; ++j) {
        const InitialData& d = init[j];
        for (const auto* f : {&d.D0, &d.B0, &d.curl_D0, &d.curl_B0, &der.dD[j], &der.dB[j], &der.ddu[j]})
            if (f->shape() != shape)
                throw ValidationError("inverse: data of experiment " + std::to_string(j + 1) + " missing or misshaped");
    }
    if (rho1.shape() != shape) throw ValidationError("inverse: rho1 field does not match the grid");

    ReconstructionSystem s;
    s.grid = g;
    s.nodes = interior_nodes(g, regions);
    const std::size_t count = s.nodes.size();
    s.M.resize(count);
    s.N.resize(count);
    s.b.resize(count);
    s.pinv.resize(count);
    s.sigma_min.resize(count);
    s.sigma_max.resize(count);
    parallel_for(0, count, [&](std::size_t q) {
        const std::size_t n = s.nodes[q];
        std::array<Vec3, 2> D0, B0, cD, cB, dD, dB;
        for (int j = 0; j < 2; ++j) {
            D0[j] = at(init[j].D0, n);
            B0[j] = at(init[j].B0, n);
            cD[j] = at(init[j].curl_D0, n);
            cB[j] = at(init[j].curl_B0, n);
            dD[j] = at(der.dD[j], n);
            dB[j] = at(der.dB[j], n);
        }
        const NodeSystem ns = node_system(D0, B0, cD, cB, dD, dB);
        s.M[q] = ns.M;
        s.N[q] = ns.N;
        s.b[q] = ns.b;
        Eigen::JacobiSVD<Mat12x7> svd(ns.M, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        s.sigma_max[q] = sv(0);
        s.sigma_min[q] = sv(6);
        Mat7x12 p = Mat7x12::Zero();
        if (sv(6) > 0.0) {
            const Eigen::Matrix<double, 12, 7> U = svd.matrixU().leftCols<7>();
            p = svd.matrixV() * sv.cwiseInverse().asDiagonal() * U.transpose();
        }
        s.pinv[q] = p;
    });

    s.min_sigma_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < count; ++q) {
        const double ratio = s.sigma_max[q] > 0.0 ? s.sigma_min[q] / s.sigma_max[q] : 0.0;
        if (ratio < s.min_sigma_ratio) {
            s.min_sigma_ratio = ratio;
            s.worst = node_index(shape, s.nodes[q]);
        }
    }
    if (s.min_sigma_ratio < opt.sigma_min)
        throw NumericalError("inverse: system is degenerate at node " + to_string(s.worst) + " (sigma_min/||M|| = " +
                             std::to_string(s.min_sigma_ratio) + ")");

    for (int j = 0; j < 2; ++j) {
        s.D0[j] = init[j].D0;
        s.ddu[j] = der.ddu[j];
        s.grad_ddu[j] = der.grad_ddu[j];
    }
    s.rho1 = rho1;
    s.options_sigma_min = opt.sigma_min;
    s.xi_block_tol = opt.xi_block_tol;
    return s;
}

struct XiRecovery {
    Array3 xi;
    VectorField grad_xi;     ///< least squares on the differentiated relation
    VectorField grad_xi_fd;  ///< central differences of xi
    double cross_check_max = 0.0;  ///< max |grad_xi - grad_xi_fd| over nodes whose stencil stays in Omega_0
    double cross_check_rel = 0.0;  ///< same difference in relative l2
};

/// Per-node least squares over the six equations D0_j xi = -rho1 ddu_j, and
/// the same for each derivative of that relation.
inline XiRecovery recover_xi(const ReconstructionSystem& s) {
    const Grid& g = s.grid;
    const Index3 shape = g.node_shape();
    XiRecovery r{Array3(shape), VectorField(shape), VectorField(shape), 0.0, 0.0};

    double block_max = 0.0;
    std::vector<double> block(s.nodes.size());
    for (std::size_t q = 0; q < s.nodes.size(); ++q) {
        const std::size_t n = s.nodes[q];
        block[q] = norm2(at(s.D0[0], n)) + norm2(at(s.D0[1], n));
        block_max = std::max(block_max, block[q]);
    }
    for (std::size_t q = 0; q < s.nodes.size(); ++q)
        if (!(block[q] > s.xi_block_tol * block_max) || block_max == 0.0)
            throw NumericalError("inverse: xi block degenerate (|D0_1|^2 + |D0_2|^2 = " + std::to_string(block[q]) +
                                 ") at node " + to_string(node_index(shape, s.nodes[q])));

    for (std::size_t q = 0; q < s.nodes.size(); ++q) {
        const std::size_t n = s.nodes[q];
        const double rho1 = s.rho1.values()[n];
        double num = 0.0;
        for (int j = 0; j < 2; ++j) num += dot(at(s.D0[j], n), -rho1 * at(s.ddu[j], n));
        r.xi.values()[n] = num / block[q];
    }

    std::array<std::array<VectorField, 3>, 2> dD0;  // dD0[j][k] = d/dx_k D0_j
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 3; ++k)
            for (int c = 0; c < 3; ++c) dD0[j][k][c] = node_diff(g, s.D0[j][c], k);
    const VectorField drho1 = node_gradient(g, s.rho1);

    for (std::size_t q = 0; q < s.nodes.size(); ++q) {
        const std::size_t n = s.nodes[q];
        const double rho1 = s.rho1.values()[n];
        const double xi = r.xi.values()[n];
        for (int k = 0; k < 3; ++k) {
            const double dr = drho1[k].values()[n];
            double num = 0.0;
            for (int j = 0; j < 2; ++j) {
                const Vec3 rhs = (-dr) * at(s.ddu[j], n) - rho1 * at(s.grad_ddu[j][k], n) - xi * at(dD0[j][k], n);
                num += dot(at(s.D0[j], n), rhs);
            }
            r.grad_xi[k].values()[n] = num / block[q];
        }
    }

    std::vector<char> inside(g.node_count(), 0);
    for (std::size_t n : s.nodes) inside[n] = 1;
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t n : s.nodes) {
        const Index3 p = node_index(shape, n);
        bool full = true;
        for (int k = 0; k < 3; ++k) {
            Index3 lo = p, hi = p;
            --lo[k];
            ++hi[k];
            const std::size_t nl = r.xi.linear(lo[0], lo[1], lo[2]);
            const std::size_t nh = r.xi.linear(hi[0], hi[1], hi[2]);
            r.grad_xi_fd[k].values()[n] = (r.xi.values()[nh] - r.xi.values()[nl]) / (2.0 * g.h[k]);
            full = full && inside[nl] && inside[nh];
        }
        if (!full) continue;
        for (int k = 0; k < 3; ++k) {
            const double d = r.grad_xi[k].values()[n] - r.grad_xi_fd[k].values()[n];
            r.cross_check_max = std::max(r.cross_check_max, std::abs(d));
            diff2 += d * d;
            ref2 += r.grad_xi_fd[k].values()[n] * r.grad_xi_fd[k].values()[n];
        }
    }
    r.cross_check_rel = ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
    return r;
}

struct PoissonOptions {
    double rel_tol = 1e-10;
    std::size_t max_iter = 20000;
    bool wide = true;  ///< false: compact 7-point Laplacian
};

struct PoissonReport {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

/// Solves Delta a = div g on the listed nodes with a = 0 elsewhere by
/// conjugate gradients. g is read only on the listed nodes (zero outside) and
/// div g uses central differences. The default Laplacian is div o grad with
/// central differences, so a is the least-squares potential of g and a
/// central-difference gradient is recovered exactly.
inline Array3 poisson_from_gradient(const Grid& g, const std::vector<std::size_t>& nodes, const VectorField& grad,
                                    const PoissonOptions& opt = {}, PoissonReport* report = nullptr) {
    const Index3 shape = g.node_shape();
    const std::size_t count = nodes.size();
    std::vector<long> slot(g.node_count(), -1);
    for (std::size_t q = 0; q < count; ++q) {
        const Index3 p = node_index(shape, nodes[q]);
        bool margin = true;
        for (int a = 0; a < 3; ++a) margin = margin && p[a] >= 2 && p[a] + 2 <= g.n[a];
        if (!margin) throw ValidationError("inverse: Poisson unknowns need two nodes of margin to the grid boundary " + to_string(p));
        slot[nodes[q]] = static_cast<long>(q);
    }
    const std::array<std::size_t, 3> stride{1, shape[0], shape[0] * shape[1]};
    const std::array<double, 3> ih2{1.0 / (g.h[0] * g.h[0]), 1.0 / (g.h[1] * g.h[1]), 1.0 / (g.h[2] * g.h[2])};

    auto grad_at = [&](int c, std::size_t n) { return slot[n] >= 0 ? grad[c].values()[n] : 0.0; };
    // -div g as the right-hand side of the SPD system (-Delta) a = -div g
    std::vector<double> rhs(count, 0.0);
    parallel_for(0, count, [&](std::size_t q) {
        const std::size_t n = nodes[q];
        const Index3 p = node_index(shape, n);
        double d = 0.0;
        for (int k = 0; k < 3; ++k) {
            if (p[k] == 0 || p[k] == g.n[k]) continue;
            d += (grad_at(k, n + stride[k]) - grad_at(k, n - stride[k])) / (2.0 * g.h[k]);
        }
        rhs[q] = -d;
    });

    // wide: normal equations of the central-difference gradient taken at every
    // non-boundary node, with zero data outside the listed nodes
    const std::size_t total = g.node_count();
    std::vector<double> gx(opt.wide ? 3 * total : 0);
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        auto xv = [&](std::size_t n) { return slot[n] >= 0 ? x[static_cast<std::size_t>(slot[n])] : 0.0; };
        if (opt.wide) {
            parallel_for(1, shape[2] - 1, [&](std::size_t k) {
                for (std::size_t j = 1; j + 1 < shape[1]; ++j)
                    for (std::size_t i = 1; i + 1 < shape[0]; ++i) {
                        const std::size_t n = i + shape[0] * (j + shape[1] * k);
                        for (int a = 0; a < 3; ++a)
                            gx[3 * n + a] = (xv(n + stride[a]) - xv(n - stride[a])) / (2.0 * g.h[a]);
                    }
            });
            parallel_for(0, count, [&](std::size_t q) {
                const std::size_t n = nodes[q];
                double v = 0.0;
                for (int a = 0; a < 3; ++a)
                    v += (gx[3 * (n - stride[a]) + a] - gx[3 * (n + stride[a]) + a]) / (2.0 * g.h[a]);
                y[q] = v;
            });
            return;
        }
        parallel_for(0, count, [&](std::size_t q) {
            const std::size_t n = nodes[q];
            double v = 0.0;
            for (int k = 0; k < 3; ++k) v += ih2[k] * (2.0 * x[q] - xv(n - stride[k]) - xv(n + stride[k]));
            y[q] = v;
        });
    };
    auto dotv = [&](const std::vector<double>& a, const std::vector<double>& b) {
        const std::size_t chunk = 4096;
        return parallel_sum(0, (count + chunk - 1) / chunk, [&](std::size_t c) {
            double s = 0.0;
            for (std::size_t q = c * chunk; q < std::min(count, (c + 1) * chunk); ++q) s += a[q] * b[q];
            return s;
        });
    };

    Array3 out(shape);
    const double bnorm = std::sqrt(dotv(rhs, rhs));
    if (report) *report = {0, 0.0};
    if (bnorm == 0.0) return out;

    std::vector<double> x(count, 0.0), r = rhs, p = rhs, ap(count);
    double rr = dotv(r, r);
    std::size_t it = 0;
    while (std::sqrt(rr) > opt.rel_tol * bnorm) {
        if (it == opt.max_iter)
            throw NumericalError("inverse: Poisson solver did not converge in " + std::to_string(opt.max_iter) +
                                 " iterations (relative residual " + std::to_string(std::sqrt(rr) / bnorm) + ")");
        apply(p, ap);
        const double a = rr / dotv(p, ap);
        for (std::size_t q = 0; q < count; ++q) {
            x[q] += a * p[q];
            r[q] -= a * ap[q];
        }
        const double rr_new = dotv(r, r);
        const double beta = rr_new / rr;
        for (std::size_t q = 0; q < count; ++q) p[q] = r[q] + beta * p[q];
        rr = rr_new;
        ++it;
    }
    // true residual, not the recursively updated one
    apply(x, ap);
    double res2 = 0.0;
    for (std::size_t q = 0; q < count; ++q) res2 += (rhs[q] - ap[q]) * (rhs[q] - ap[q]);
    if (report) *report = {it, std::sqrt(res2) / bnorm};
    for (std::size_t q = 0; q < count; ++q) out.values()[nodes[q]] = x[q];
    return out;
}

struct FixedPointOptions {
    double tol = 1e-8;
    std::size_t max_iter = 100;
    PoissonOptions poisson;
};

struct IterationRecord {
    std::size_t iteration = 0;
    double change = 0.0;        ///< relative change of (alpha, beta)
    double ls_residual = 0.0;   ///< l2 of M x - N(alpha, beta) - b over the nodes
    std::size_t poisson_iterations = 0;
};

struct ReconstructionResult {
    Array3 alpha, beta, gamma, xi;
    VectorField grad_xi;
    VectorField grad_alpha, grad_beta;  ///< least-squares gradients at the final iterate
    std::vector<IterationRecord> log;
    std::size_t iterations = 0;
    double contraction = 0.0;  ///< ratio of the last two changes (0 with fewer than two)
    double ls_residual = 0.0;
    double xi_cross_check = 0.0;
};

namespace detail {

inline double l2_on(const std::vector<std::size_t>& nodes, const Array3& a) {
    double s = 0.0;
    for (std::size_t n : nodes) s += a.values()[n] * a.values()[n];
    return std::sqrt(s);
}

}  // namespace detail

/// Fixed point: least squares for (grad alpha, gamma, grad beta) given the
/// current (alpha, beta), then Poisson solves for alpha and beta.
inline ReconstructionResult recover_alpha_beta_gamma(const ReconstructionSystem& s, const FixedPointOptions& opt = {}) {
    const Grid& g = s.grid;
    const Index3 shape = g.node_shape();
    const std::size_t count = s.nodes.size();
    ReconstructionResult r;
    r.alpha = Array3(shape);
    r.beta = Array3(shape);
    r.gamma = Array3(shape);
    r.grad_alpha = VectorField(shape);
    r.grad_beta = VectorField(shape);

    std::vector<double> res2(count);
    double prev_change = 0.0;
    // without curl terms the right-hand side does not depend on the iterate
    bool coupled = false;
    for (const auto& n : s.N) coupled = coupled || !n.isZero(0.0);
    for (std::size_t it = 1;; ++it) {
        parallel_for(0, count, [&](std::size_t q) {
            const std::size_t n = s.nodes[q];
            const Eigen::Vector2d ab(r.alpha.values()[n], r.beta.values()[n]);
            const Vec12 rhs = s.N[q] * ab + s.b[q];
            const Vec7 x = s.solve(q, rhs);
            for (int c = 0; c < 3; ++c) {
                r.grad_alpha[c].values()[n] = x(c);
                r.grad_beta[c].values()[n] = x(4 + c);
            }
            r.gamma.values()[n] = x(3);
            res2[q] = (s.M[q] * x - rhs).squaredNorm();
        });
        double res = 0.0;
        for (double v : res2) res += v;

        PoissonReport pa, pb;
        Array3 alpha = poisson_from_gradient(g, s.nodes, r.grad_alpha, opt.poisson, &pa);
        Array3 beta = poisson_from_gradient(g, s.nodes, r.grad_beta, opt.poisson, &pb);
        const double num = std::hypot(detail::l2_on(s.nodes, alpha - r.alpha), detail::l2_on(s.nodes, beta - r.beta));
        const double den = std::hypot(detail::l2_on(s.nodes, alpha), detail::l2_on(s.nodes, beta));
        const double change = den > 0.0 ? num / den : num;
        r.alpha = std::move(alpha);
        r.beta = std::move(beta);
        r.log.push_back({it, change, std::sqrt(res), std::max(pa.iterations, pb.iterations)});
        if (it > 1 && prev_change > 0.0) r.contraction = change / prev_change;
        prev_change = change;
        r.iterations = it;
        r.ls_residual = std::sqrt(res);
        if (change < opt.tol || !coupled) break;
        if (it == opt.max_iter)
            throw NumericalError("inverse: fixed point did not converge in " + std::to_string(opt.max_iter) +
                                 " iterations (last change " + std::to_string(change) + ", contraction estimate " +
                                 std::to_string(r.contraction) + ")");
    }

    // gamma belongs to the final iterate
    parallel_for(0, count, [&](std::size_t q) {
        const std::size_t n = s.nodes[q];
        const Eigen::Vector2d ab(r.alpha.values()[n], r.beta.values()[n]);
        const Vec12 rhs = s.N[q] * ab + s.b[q];
        const Vec7 x = s.solve(q, rhs);
        r.gamma.values()[n] = x(3);
        for (int c = 0; c < 3; ++c) {
            r.grad_alpha[c].values()[n] = x(c);
            r.grad_beta[c].values()[n] = x(4 + c);
        }
    });

    std::vector<char> inside(g.node_count(), 0);
    for (std::size_t n : s.nodes) inside[n] = 1;
    for (std::size_t n = 0; n < inside.size(); ++n)
        if (!inside[n] && (r.alpha.values()[n] != 0.0 || r.beta.values()[n] != 0.0 || r.gamma.values()[n] != 0.0))
            throw NumericalError("inverse: recovered field nonzero outside Omega_0 at node " +
                                 to_string(node_index(shape, n)));
    return r;
}

/// xi recovery followed by the fixed point.
inline ReconstructionResult reconstruct(const ReconstructionSystem& s, const FixedPointOptions& opt = {}) {
    const XiRecovery x = recover_xi(s);
    ReconstructionResult r = recover_alpha_beta_gamma(s, opt);
    r.xi = x.xi;
    r.grad_xi = x.grad_xi;
    r.xi_cross_check = x.cross_check_rel;
    return r;
}

// ---------------------------------------------------------------------------
// Twin experiments: forward runs of both parameter sets from shared initial data.

struct StaggeredInitialData {
    VectorField D_edges, B_faces;
};

/// Constant D on the edges and B on the faces, boundary conditions imposed.
inline StaggeredInitialData constant_initial_data(const Grid& g, const Vec3& D, const Vec3& B) {
    StaggeredInitialData out{VectorField(g.node_shape()), VectorField(g.node_shape())};
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Index3 p{i, j, k};
        for (int c = 0; c < 3; ++c) {
            if (edge_exists(g, c, p)) out.D_edges[c][p] = D[c];
            if (face_exists(g, c, p)) out.B_faces[c][p] = B[c];
        }
    });
    zero_tangential_edges(g, out.D_edges);
    zero_normal_faces(g, out.B_faces);
    return out;
}

/// B0 = e1, D0 = e2 for experiment 1 and B0 = D0 = e3 for experiment 2.
inline std::array<StaggeredInitialData, 2> canonical_initial_data(const Grid& g) {
    return {constant_initial_data(g, {0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}),
            constant_initial_data(g, {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0})};
}

struct TwinOptions {
    std::size_t levels = min_snapshot_levels;  ///< snapshot levels 0 .. levels-1
    double em_cfl = 0.5;
    double biot_cfl = 0.4;
    double dt_factor = 1.0;  ///< dt = factor * min(em dt, biot dt)
};

/// Ground truth difference (set 2 minus set 1) of the derived parameters.
struct ParameterDifference {
    Array3 alpha, beta, gamma, xi;
};

inline ParameterDifference parameter_difference(const ParameterFields& set1, const ParameterFields& set2) {
    if (!set1.derived || !set2.derived) throw ValidationError("inverse: parameters not derived");
    return {set2.alpha - set1.alpha, set2.beta - set1.beta, set2.gamma - set1.gamma, set2.xi - set1.xi};
}

/// Biot parameters must coincide between the sets; only the
/// electromagnetic ones and xi may differ.
inline void check_common_biot(const ParameterFields& a, const ParameterFields& b) {
    const std::array<std::pair<const Array3*, const Array3*>, 9> pairs{{{&a.eta, &b.eta},
                                                                         {&a.kappa, &b.kappa},
                                                                         {&a.lambda, &b.lambda},
                                                                         {&a.G, &b.G},
                                                                         {&a.C, &b.C},
                                                                         {&a.M, &b.M},
                                                                         {&a.rho, &b.rho},
                                                                         {&a.rho_f, &b.rho_f},
                                                                         {&a.rho_e, &b.rho_e}}};
    for (const auto& [x, y] : pairs)
        if (!(*x == *y)) throw ValidationError("inverse: Biot parameters differ between the two sets");
}

/// Node-centred fields of one forward run at one level.
struct NodeSnapshot {
    VectorField D, B, u, w;
};

/// Largest common dt (times opt.dt_factor) over the given parameter sets.
inline double common_time_step(const Grid& g, const std::vector<const ParameterFields*>& sets, const TwinOptions& opt) {
    double dt = std::numeric_limits<double>::infinity();
    for (const auto* f : sets)
        dt = std::min({dt, em_dt_max(g, em_coefficients(g, *f), opt.em_cfl),
                       biot_dt_max(g, biot_coefficients(*f), opt.biot_cfl)});
    dt *= opt.dt_factor;
    if (!(dt > 0.0) || !std::isfinite(dt)) throw NumericalError("inverse: no admissible common time step");
    return dt;
}

/// EM then Biot in lockstep from the given initial data; obs sees levels 0 .. levels-1.
inline void run_forward_nodes(const Grid& g, const ParameterFields& f, const StaggeredInitialData& data, double dt,
                              std::size_t levels, const TwinOptions& opt,
                              const std::function<void(std::size_t, const EmState&, const BiotState&)>& obs) {
    const EmCoefficients em = em_coefficients(g, f);
    const BiotCoefficients bc = biot_coefficients(f);
    const EmOptions eo{opt.em_cfl};
    const BiotOptions bo{opt.biot_cfl};
    EmState es = init_em(g, data.D_edges, data.B_faces).state;
    BiotState bs = init_biot(g, bc, dt);
    for (std::size_t l = 0; l < levels; ++l) {
        obs(l, es, bs);
        if (l + 1 == levels) break;
        const VectorField src = coupling_source(g, f.xi, es.D);
        step_biot_inplace(bs, &src, bc, g, dt, nullptr, bo);
        step_em_inplace(es, em, g, dt, eo);
    }
}

inline NodeSnapshot node_snapshot(const Grid& g, const EmState& es, const BiotState& bs) {
    return {edges_to_nodes(g, es.D), faces_to_nodes(g, es.B), bs.u, bs.w};
}

struct TwinRun {
    Measurement measurement;
    std::array<InitialData, 2> init;
    double dt = 0.0;
};

inline TwinRun run_twin_experiment(const Grid& g, const ParameterFields& set1, const ParameterFields& set2,
                                   const std::array<StaggeredInitialData, 2>& data, const TwinOptions& opt = {}) {
    if (set1.shape() != g.node_shape() || set2.shape() != g.node_shape())
        throw ValidationError("inverse: parameter fields do not match the grid");
    if (opt.levels < min_snapshot_levels)
        throw ValidationError("inverse: at least " + std::to_string(min_snapshot_levels) + " snapshot levels are needed");
    check_common_biot(set1, set2);
    const std::array<const ParameterFields*, 2> sets{&set1, &set2};
    TwinRun run;
    run.dt = common_time_step(g, {&set1, &set2}, opt);
    run.measurement.dt = run.dt;
    for (int j = 0; j < 2; ++j) {
        ExperimentData& ex = run.measurement.exp[j];
        const EmState e0 = init_em(g, data[j].D_edges, data[j].B_faces).state;
        ex.init = run.init[j] = initial_data_from_staggered(g, e0.D, e0.B);
        ex.D.resize(opt.levels);
        ex.B.resize(opt.levels);
        ex.u.resize(opt.levels);
        for (int k = 0; k < 2; ++k) {
            const double sign = k == 0 ? -1.0 : 1.0;
            run_forward_nodes(g, *sets[k], data[j], run.dt, opt.levels, opt,
                              [&](std::size_t l, const EmState& es, const BiotState& bs) {
                                  NodeSnapshot s = node_snapshot(g, es, bs);
                                  if (k == 0) {
                                      ex.D[l] = sign * s.D;
                                      ex.B[l] = sign * s.B;
                                      ex.u[l] = sign * s.u;
                                  } else {
                                      ex.D[l] += s.D;
                                      ex.B[l] += s.B;
                                      ex.u[l] += s.u;
                                  }
                              });
        }
    }
    return run;
}

/// Compact bumps of (alpha, beta, gamma, xi) added to a base set, scaled by s.
struct BumpPerturbation {
    std::array<Vec3, 4> centers{{{0.5, 0.52, 0.48}, {0.48, 0.5, 0.52}, {0.52, 0.48, 0.5}, {0.5, 0.5, 0.5}}};
    std::array<double, 4> amplitudes{0.2, 0.15, 0.3, 0.5};  ///< alpha, beta, gamma, xi
    double radius = 0.25;
};

/// Throws unless every bump support lies strictly inside Omega_0.
inline void check_perturbation_support(const Domain& d, const BumpPerturbation& p) {
    if (!(p.radius > 0.0)) throw ValidationError("perturbation radius must be positive");
    for (int i = 0; i < 4; ++i)
        if (p.amplitudes[i] != 0.0 && !(d.boundary_distance(p.centers[i]) > d.shell_width + p.radius))
            throw ValidationError("perturbation bump " + std::to_string(i + 1) + " is not supported inside Omega_0");
}

inline ParameterFields perturbed_set(const ParameterFields& base, const Domain& d, const Grid& g,
                                     const BumpPerturbation& p, double s) {
    check_perturbation_support(d, p);
    std::array<Array3, 4> t{base.alpha, base.beta, base.gamma, base.xi};
    for (int i = 0; i < 4; ++i)
        t[i] += sample_nodes(g, [&](const Vec3& x) { return bump4(x, p.centers[i], p.radius, s * p.amplitudes[i]); });
    return with_em_targets(base, t[0], t[1], t[2], t[3]);
}

/// rho1 = rho0 / rho_f at every node.
inline Array3 rho1_field(const ParameterFields& f) { return compute_diagonalization(f).rho1; }

struct ReconstructionErrors {
    double alpha = 0.0, beta = 0.0, gamma = 0.0, xi = 0.0;
    double max() const { return std::max({alpha, beta, gamma, xi}); }
};

/// Relative l2 error on the listed nodes; absolute when the truth vanishes there.
inline double relative_l2(const std::vector<std::size_t>& nodes, const Array3& value, const Array3& truth) {
    const double ref = detail::l2_on(nodes, truth);
    const double err = detail::l2_on(nodes, value - truth);
    return ref > 0.0 ? err / ref : err;
}

inline ReconstructionErrors reconstruction_errors(const ReconstructionSystem& s, const ReconstructionResult& r,
                                                  const ParameterDifference& truth) {
    return {relative_l2(s.nodes, r.alpha, truth.alpha), relative_l2(s.nodes, r.beta, truth.beta),
            relative_l2(s.nodes, r.gamma, truth.gamma), relative_l2(s.nodes, r.xi, truth.xi)};
}

}  // namespace electroseis
