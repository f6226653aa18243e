#pragma once

// Spectral Galerkin reference solver for the Biot subsystem.
//
// Basis: for each wavevector k in {0..m}^3 and component i with k_i >= 1,
//   phi_{k,i}(x) = sin(K_i x_i) prod_{j != i} cos(K_j x_j),   K_j = k_j pi / L_j,
// used for both u and w (coordinates relative to the lower corner). These
// fields have zero normal component and zero tangential traction on the box.
// For constant coefficients the Gram matrices of (A.,.), (B.,.) and the
// bilinear form are block diagonal in k, with blocks of size at most 6.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "biot_solver.hpp"
#include "core.hpp"
#include "domain_grid.hpp"
#include "parameters.hpp"
#include "quadrature.hpp"

namespace electroseis {

/// One-dimensional Gram tables on [0, L]: S[p] = int sin^2(p pi x / L), C[p] = int cos^2.
struct GramTables1D {
    double L = 1.0;
    std::vector<double> S, C;
    double max_offdiag = 0.0;  ///< largest |int sin_p sin_q| or |int cos_p cos_q|, p != q
    std::size_t panels = 0;
};

/// Quadrature refined by panel doubling until successive tables agree to tol.
inline GramTables1D gram_tables(double L, int m, double tol = 1e-8) {
    auto build = [&](std::size_t panels) {
        GramTables1D t;
        t.L = L;
        t.panels = panels;
        const quad::Rule r = quad::gauss_composite(0.0, L, panels);
        const std::size_t n = static_cast<std::size_t>(m) + 1;
        std::vector<std::vector<double>> sv(n, std::vector<double>(r.x.size())), cv = sv;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = 0; q < r.x.size(); ++q) {
                const double a = static_cast<double>(p) * std::numbers::pi * r.x[q] / L;
                sv[p][q] = std::sin(a);
                cv[p][q] = std::cos(a);
            }
        t.S.assign(n, 0.0);
        t.C.assign(n, 0.0);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t p2 = p; p2 < n; ++p2) {
                double ss = 0.0, cc = 0.0;
                for (std::size_t q = 0; q < r.x.size(); ++q) {
                    ss += r.w[q] * sv[p][q] * sv[p2][q];
                    cc += r.w[q] * cv[p][q] * cv[p2][q];
                }
                if (p == p2) {
                    t.S[p] = ss;
                    t.C[p] = cc;
                } else {
                    t.max_offdiag = std::max({t.max_offdiag, std::abs(cc), p > 0 ? std::abs(ss) : 0.0});
                }
            }
        return t;
    };
    std::size_t panels = static_cast<std::size_t>(std::max(2, m));
    GramTables1D prev = build(panels);
    for (int it = 0; it < 12; ++it) {
        panels *= 2;
        GramTables1D next = build(panels);
        double diff = 0.0;
        for (std::size_t p = 0; p < next.S.size(); ++p)
            diff = std::max({diff, std::abs(next.S[p] - prev.S[p]), std::abs(next.C[p] - prev.C[p])});
        if (diff <= tol * L) {
            if (next.max_offdiag > tol * L) throw NumericalError("galerkin: 1-D basis not orthogonal under quadrature");
            return next;
        }
        prev = std::move(next);
    }
    throw NumericalError("galerkin: Gram quadrature did not stabilize");
}

/// Block of the Galerkin system for one wavevector. Unknowns are the u
/// coefficients of the present components followed by the w coefficients.
struct GalerkinBlock {
    std::array<int, 3> k{0, 0, 0};
    std::vector<int> comps;  ///< components i with k_i >= 1
    Eigen::MatrixXd A, B, K;
    Eigen::MatrixXd V;  ///< Gram matrix of the V inner product
    Eigen::MatrixXd L2;  ///< plain L2 Gram matrix
};

struct GalerkinBasis {
    Vec3 lower{0, 0, 0};
    Vec3 extent{1, 1, 1};
    int m = 0;
    Material material;
    std::array<GramTables1D, 3> tables;
    std::vector<GalerkinBlock> blocks;
    double korn_constant = 0.0;  ///< min over the basis of ((e,e)+|v|^2)/|v|_{H1}^2
    double lambda_star = 0.0;    ///< smallest eigenvalue of (lambda C; C M)
    double C0 = 0.0;
    double theta = 0.0;
    double condition_V = 0.0;

    double wavenumber(int axis, int k) const { return k * std::numbers::pi / extent[axis]; }
    std::size_t dof() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += static_cast<std::size_t>(b.A.rows());
        return n;
    }
};

/// Assembles the block-diagonal Galerkin system for constant coefficients.
inline GalerkinBasis assemble_galerkin(const Domain& dom, const Material& mat, int m) {
    if (m < 1 || m > 64) throw ValidationError("galerkin: modes per axis must lie in [1, 64]");
    {
        ParameterFields f = derive_em_parameters(uniform_fields({1, 1, 1}, mat));
        if (!check_admissibility(f).passed()) throw ValidationError("galerkin: parameters are not admissible");
    }
    GalerkinBasis basis;
    basis.lower = dom.lower;
    basis.m = m;
    basis.material = mat;
    for (int a = 0; a < 3; ++a) {
        basis.extent[a] = dom.extent(a);
        basis.tables[a] = gram_tables(basis.extent[a], m);
    }
    const auto& T = basis.tables;
    const double b = mat.eta / mat.kappa;

    double korn = std::numeric_limits<double>::infinity();
    double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
    for (int k3 = 0; k3 <= m; ++k3)
        for (int k2 = 0; k2 <= m; ++k2)
            for (int k1 = 0; k1 <= m; ++k1) {
                GalerkinBlock blk;
                blk.k = {k1, k2, k3};
                for (int i = 0; i < 3; ++i)
                    if (blk.k[i] >= 1) blk.comps.push_back(i);
                if (blk.comps.empty()) continue;
                const int n = static_cast<int>(blk.comps.size());
                Vec3 K;
                for (int a = 0; a < 3; ++a) K[a] = basis.wavenumber(a, blk.k[a]);
                auto prod = [&](int sin_a, int sin_b) {
                    // int over the box of a product with sin^2 on axes sin_a, sin_b and cos^2 elsewhere
                    double v = 1.0;
                    for (int a = 0; a < 3; ++a) {
                        const std::size_t p = static_cast<std::size_t>(blk.k[a]);
                        v *= (a == sin_a || a == sin_b) ? T[a].S[p] : T[a].C[p];
                    }
                    return v;
                };
                const double Nd = prod(-1, -1);  // int C_k^2
                blk.A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
                blk.B = Eigen::MatrixXd::Zero(2 * n, 2 * n);
                blk.K = Eigen::MatrixXd::Zero(2 * n, 2 * n);
                blk.V = Eigen::MatrixXd::Zero(2 * n, 2 * n);
                blk.L2 = Eigen::MatrixXd::Zero(2 * n, 2 * n);
                Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);  // strain Gram (e, e)
                for (int p = 0; p < n; ++p) {
                    const int i = blk.comps[p];
                    const double Ni = prod(i, -1);
                    blk.A(p, p) = mat.rho * Ni;
                    blk.A(p, n + p) = blk.A(n + p, p) = mat.rho_f * Ni;
                    blk.A(n + p, n + p) = mat.rho_e * Ni;
                    blk.B(n + p, n + p) = b * Ni;
                    blk.L2(p, p) = blk.L2(n + p, n + p) = Ni;
                    // |grad phi|^2: d_i gives K_i^2 Nd, d_j gives K_j^2 int S_ij^2
                    double grad2 = K[i] * K[i] * Nd;
                    for (int j = 0; j < 3; ++j)
                        if (j != i) grad2 += K[j] * K[j] * prod(i, j);
                    blk.V(p, p) = Ni + grad2;
                    blk.V(n + p, n + p) = Ni;
                    E(p, p) += K[i] * K[i] * Nd;
                    for (int q = 0; q < n; ++q) {
                        const int j = blk.comps[q];
                        const double dd = K[i] * K[j] * Nd;
                        blk.K(p, q) += mat.lambda * dd;
                        blk.K(p, n + q) += mat.C * dd;
                        blk.K(n + p, q) += mat.C * dd;
                        blk.K(n + p, n + q) += mat.M * dd;
                        blk.V(n + p, n + q) += dd;  // div w part of the H(div) norm
                    }
                }
                // off-diagonal strains e_ij = -(K_j a_i + K_i a_j) S_ij / 2, counted twice in e:e
                for (int p = 0; p < n; ++p)
                    for (int q = p + 1; q < n; ++q) {
                        const int i = blk.comps[p], j = blk.comps[q];
                        const double Nij = prod(i, j);
                        const double h = 0.5 * Nij;
                        E(p, p) += h * K[j] * K[j];
                        E(q, q) += h * K[i] * K[i];
                        E(p, q) += h * K[i] * K[j];
                        E(q, p) += h * K[i] * K[j];
                    }
                blk.K.topLeftCorner(n, n) += 2.0 * mat.G * E;

                // Korn quotient on the u part
                Eigen::MatrixXd Hu = blk.V.topLeftCorner(n, n);
                Eigen::MatrixXd Lu = blk.L2.topLeftCorner(n, n);
                Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(E + Lu, Hu);
                korn = std::min(korn, ges.eigenvalues().minCoeff());
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> vs(blk.V);
                vmin = std::min(vmin, vs.eigenvalues().minCoeff());
                vmax = std::max(vmax, vs.eigenvalues().maxCoeff());
                basis.blocks.push_back(std::move(blk));
            }
    basis.korn_constant = korn;
    basis.condition_V = vmax / vmin;
    if (!(basis.condition_V < 1e8)) throw NumericalError("galerkin: ill-conditioned basis (V-Gram condition number >= 1e8)");
    const double tr = mat.lambda + mat.M, det = mat.lambda * mat.M - mat.C * mat.C;
    basis.lambda_star = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    basis.C0 = std::min(2.0 * korn * mat.G, basis.lambda_star);
    basis.theta = std::max(2.0 * mat.G, basis.C0);
    return basis;
}

/// Source F(x, t) = time(t) * space(x); space returns (F_u, F_w).
struct SeparableSource {
    std::function<double(double)> time;
    std::function<std::array<double, 6>(const Vec3&)> space;
};

/// Gaussian pulse in the w equation: sin^2(pi t / window) exp(-|x - c|^2 / width^2) dir.
inline SeparableSource gaussian_pulse_source(const Vec3& center, double width, const Vec3& dir, double window) {
    if (!(width > 0.0) || !(window > 0.0)) throw ValidationError("galerkin: pulse width and window must be positive");
    SeparableSource s;
    s.time = [window](double t) {
        const double v = std::sin(std::numbers::pi * t / window);
        return v * v;
    };
    s.space = [center, width, dir](const Vec3& x) {
        const double b = std::exp(-norm2(x - center) / (width * width));
        return std::array<double, 6>{0.0, 0.0, 0.0, b * dir[0], b * dir[1], b * dir[2]};
    };
    return s;
}

namespace detail {

/// Separable evaluation of sum_k c[k] f_a(k, x) along one axis.
/// data is (n0 x n1 x n2) x-fastest; the transformed axis changes length from
/// nin to nout through table[o * nin + i].
inline std::vector<double> transform_axis(const std::vector<double>& data, std::array<std::size_t, 3>& dims, int axis,
                                          const std::vector<double>& table, std::size_t nout) {
    const std::size_t nin = dims[axis];
    std::array<std::size_t, 3> od = dims;
    od[axis] = nout;
    std::vector<double> out(od[0] * od[1] * od[2], 0.0);
    const std::size_t s_in[3] = {1, dims[0], dims[0] * dims[1]};
    const std::size_t s_out[3] = {1, od[0], od[0] * od[1]};
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    parallel_for(0, od[a2], [&](std::size_t j2) {
        for (std::size_t j1 = 0; j1 < od[a1]; ++j1) {
            const std::size_t base_in = j1 * s_in[a1] + j2 * s_in[a2];
            const std::size_t base_out = j1 * s_out[a1] + j2 * s_out[a2];
            for (std::size_t o = 0; o < nout; ++o) {
                double acc = 0.0;
                const double* row = &table[o * nin];
                for (std::size_t i = 0; i < nin; ++i) acc += row[i] * data[base_in + i * s_in[axis]];
                out[base_out + o * s_out[axis]] = acc;
            }
        }
    });
    dims = od;
    return out;
}

}  // namespace detail

/// Spatial load vectors (F_space, phi) per block, by tensor Gauss quadrature
/// with panel doubling until the largest entry change is below tol relative.
inline std::vector<Eigen::VectorXd> project_source(const GalerkinBasis& basis,
                                                   const std::function<std::array<double, 6>(const Vec3&)>& space,
                                                   double tol = 1e-8, std::size_t max_panels = 160) {
    const std::size_t nk = static_cast<std::size_t>(basis.m) + 1;
    auto compute = [&](std::size_t panels) {
        std::array<quad::Rule, 3> rules;
        for (int a = 0; a < 3; ++a) rules[a] = quad::gauss_composite(0.0, basis.extent[a], panels);
        const std::size_t Q = rules[0].x.size();
        // weighted sin and cos tables (k x q)
        std::array<std::vector<double>, 3> ts, tc;
        for (int a = 0; a < 3; ++a) {
            ts[a].resize(nk * Q);
            tc[a].resize(nk * Q);
            for (std::size_t k = 0; k < nk; ++k)
                for (std::size_t q = 0; q < Q; ++q) {
                    const double arg = basis.wavenumber(a, static_cast<int>(k)) * rules[a].x[q];
                    ts[a][k * Q + q] = rules[a].w[q] * std::sin(arg);
                    tc[a][k * Q + q] = rules[a].w[q] * std::cos(arg);
                }
        }
        // slab by slab: contract q1 and q2 for each q3, then q3 at the end
        std::array<std::vector<double>, 6> partial;  // [k1 + nk (k2 + nk q3)]
        for (auto& v : partial) v.assign(nk * nk * Q, 0.0);
        parallel_for(0, Q, [&](std::size_t q3) {
            std::vector<double> vals(6 * Q * Q), row(nk * Q);
            for (std::size_t q2 = 0; q2 < Q; ++q2)
                for (std::size_t q1 = 0; q1 < Q; ++q1) {
                    const auto f = space({basis.lower[0] + rules[0].x[q1], basis.lower[1] + rules[1].x[q2],
                                          basis.lower[2] + rules[2].x[q3]});
                    for (int c = 0; c < 6; ++c) vals[(c * Q + q2) * Q + q1] = f[c];
                }
            for (int c = 0; c < 6; ++c) {
                const int i = c % 3;
                const auto& t0 = i == 0 ? ts[0] : tc[0];
                const auto& t1 = i == 1 ? ts[1] : tc[1];
                for (std::size_t q2 = 0; q2 < Q; ++q2) {
                    const double* v = &vals[(c * Q + q2) * Q];
                    for (std::size_t k1 = 0; k1 < nk; ++k1) {
                        double acc = 0.0;
                        const double* tr = &t0[k1 * Q];
                        for (std::size_t q1 = 0; q1 < Q; ++q1) acc += tr[q1] * v[q1];
                        row[k1 * Q + q2] = acc;
                    }
                }
                for (std::size_t k2 = 0; k2 < nk; ++k2)
                    for (std::size_t k1 = 0; k1 < nk; ++k1) {
                        double acc = 0.0;
                        const double* tr = &t1[k2 * Q];
                        const double* r = &row[k1 * Q];
                        for (std::size_t q2 = 0; q2 < Q; ++q2) acc += tr[q2] * r[q2];
                        partial[c][k1 + nk * (k2 + nk * q3)] = acc;
                    }
            }
        });
        std::array<std::vector<double>, 6> coef;
        for (int c = 0; c < 6; ++c) {
            const auto& t2 = c % 3 == 2 ? ts[2] : tc[2];
            coef[c].assign(nk * nk * nk, 0.0);
            for (std::size_t k3 = 0; k3 < nk; ++k3)
                for (std::size_t q3 = 0; q3 < Q; ++q3) {
                    const double w = t2[k3 * Q + q3];
                    const double* src_p = &partial[c][nk * nk * q3];
                    double* dst = &coef[c][nk * nk * k3];
                    for (std::size_t l = 0; l < nk * nk; ++l) dst[l] += w * src_p[l];
                }
        }
        std::vector<Eigen::VectorXd> out;
        out.reserve(basis.blocks.size());
        for (const auto& blk : basis.blocks) {
            const int n = static_cast<int>(blk.comps.size());
            Eigen::VectorXd v(2 * n);
            const std::size_t lin = static_cast<std::size_t>(blk.k[0]) +
                                    nk * (static_cast<std::size_t>(blk.k[1]) + nk * static_cast<std::size_t>(blk.k[2]));
            for (int p = 0; p < n; ++p) {
                v(p) = coef[blk.comps[p]][lin];
                v(n + p) = coef[3 + blk.comps[p]][lin];
            }
            out.push_back(std::move(v));
        }
        return out;
    };
    std::size_t panels = std::max<std::size_t>(4, nk);
    auto prev = compute(panels);
    while (panels * 2 <= max_panels) {
        panels *= 2;
        auto next = compute(panels);
        double diff = 0.0, scale = 0.0;
        for (std::size_t b = 0; b < next.size(); ++b) {
            diff = std::max(diff, (next[b] - prev[b]).cwiseAbs().maxCoeff());
            scale = std::max(scale, next[b].cwiseAbs().maxCoeff());
        }
        prev = std::move(next);
        if (diff <= tol * std::max(scale, 1e-300)) return prev;
    }
    throw NumericalError("galerkin: source projection did not stabilize within the panel limit");
}

/// Coefficient samples g(t) per block plus the monitored quantities.
struct GalerkinTrajectory {
    std::vector<double> times;
    std::vector<std::vector<Eigen::VectorXd>> g;   ///< [sample][block]
    std::vector<std::vector<Eigen::VectorXd>> gd;  ///< time derivatives
    std::vector<double> lambda_theta;  ///< |A^{1/2} r'|^2 + B_theta(r, r)
    std::vector<double> v_norm;        ///< |r|_V^2 + |r'|^2
    std::vector<double> forcing_integral;  ///< int_0^t |F|^2
    double observed_constant = 0.0;  ///< max_t Lambda_theta(t) / int_0^t |F|^2
};

/// RK4 on each block: A g'' + B g' + K g = time(t) f.
///
/// dt_ode is reduced if needed so that dt * omega_max <= 1 for the fastest
/// block frequency.
inline GalerkinTrajectory solve_galerkin(const GalerkinBasis& basis, const SeparableSource& src, double t_end,
                                         double dt_ode, std::size_t output_every = 1) {
    if (!(t_end >= 0.0) || !(dt_ode > 0.0)) throw ValidationError("galerkin: need t_end >= 0 and dt_ode > 0");
    if (output_every == 0) throw ValidationError("galerkin: output stride must be positive");
    const std::vector<Eigen::VectorXd> load = project_source(basis, src.space);
    double fnorm2 = 0.0;  // int |F_space|^2 dx
    {
        const std::size_t panels = 2 * static_cast<std::size_t>(basis.m) + 8;
        std::array<quad::Rule, 3> rules;
        for (int a = 0; a < 3; ++a) rules[a] = quad::gauss_composite(0.0, basis.extent[a], panels);
        for (std::size_t q3 = 0; q3 < rules[2].x.size(); ++q3)
            for (std::size_t q2 = 0; q2 < rules[1].x.size(); ++q2)
                for (std::size_t q1 = 0; q1 < rules[0].x.size(); ++q1) {
                    const auto f = src.space({basis.lower[0] + rules[0].x[q1], basis.lower[1] + rules[1].x[q2],
                                              basis.lower[2] + rules[2].x[q3]});
                    double s2 = 0.0;
                    for (double v : f) s2 += v * v;
                    fnorm2 += rules[0].w[q1] * rules[1].w[q2] * rules[2].w[q3] * s2;
                }
    }

    const std::size_t nb = basis.blocks.size();
    std::vector<Eigen::MatrixXd> Ainv(nb);
    double omega_max = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& blk = basis.blocks[b];
        Ainv[b] = blk.A.inverse();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.K, blk.A);
        omega_max = std::max(omega_max, std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())));
    }
    const std::size_t base = static_cast<std::size_t>(std::ceil(t_end / dt_ode - 1e-12));
    // substeps per requested step so that dt * omega_max <= 1
    const std::size_t refine = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(omega_max * dt_ode - 1e-12)));
    const std::size_t steps = base * refine;
    const double dt = steps ? t_end / static_cast<double>(steps) : 0.0;
    const std::size_t stride = output_every * refine;

    std::vector<Eigen::VectorXd> g(nb), v(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        g[b] = Eigen::VectorXd::Zero(basis.blocks[b].A.rows());
        v[b] = g[b];
    }
    GalerkinTrajectory tr;
    double forcing_int = 0.0;
    auto record = [&](double t) {
        tr.times.push_back(t);
        tr.g.push_back(g);
        tr.gd.push_back(v);
        double lam = 0.0, vn = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& blk = basis.blocks[b];
            lam += v[b].dot(blk.A * v[b]) + g[b].dot(blk.K * g[b]) + basis.theta * g[b].dot(blk.L2 * g[b]);
            vn += g[b].dot(blk.V * g[b]) + v[b].dot(blk.L2 * v[b]);
        }
        tr.lambda_theta.push_back(lam);
        tr.v_norm.push_back(vn);
        tr.forcing_integral.push_back(forcing_int);
        if (forcing_int > 0.0) tr.observed_constant = std::max(tr.observed_constant, lam / forcing_int);
    };
    record(0.0);
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        const double f0 = src.time(t), fh = src.time(t + 0.5 * dt), f1 = src.time(t + dt);
        parallel_for(0, nb, [&](std::size_t b) {
            const auto& blk = basis.blocks[b];
            auto acc = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& xd, double ft) {
                return Eigen::VectorXd(Ainv[b] * (ft * load[b] - blk.B * xd - blk.K * x));
            };
            const Eigen::VectorXd k1x = v[b], k1v = acc(g[b], v[b], f0);
            const Eigen::VectorXd x2 = g[b] + 0.5 * dt * k1x, v2 = v[b] + 0.5 * dt * k1v;
            const Eigen::VectorXd k2x = v2, k2v = acc(x2, v2, fh);
            const Eigen::VectorXd x3 = g[b] + 0.5 * dt * k2x, v3 = v[b] + 0.5 * dt * k2v;
            const Eigen::VectorXd k3x = v3, k3v = acc(x3, v3, fh);
            const Eigen::VectorXd x4 = g[b] + dt * k3x, v4 = v[b] + dt * k3v;
            const Eigen::VectorXd k4x = v4, k4v = acc(x4, v4, f1);
            g[b] += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v[b] += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        });
        // Simpson for int |F|^2 dt over the step
        forcing_int += fnorm2 * dt / 6.0 * (f0 * f0 + 4.0 * fh * fh + f1 * f1);
        for (std::size_t b = 0; b < nb; ++b)
            if (!g[b].allFinite() || !v[b].allFinite()) throw NumericalError("galerkin: ODE blow-up");
        if ((s + 1) % stride == 0 || s + 1 == steps) record(static_cast<double>(s + 1) * dt);
    }
    return tr;
}

/// m-independent bound on |r|_V^2 + |r'|^2 at time t from the energy identity:
/// Lambda_theta grows at most like exp(kappa t) int_0^t |F|^2 with
/// kappa = 1/a + 2 theta/sqrt(a C0), a the smallest eigenvalue of the density matrix.
inline double gronwall_bound(const GalerkinBasis& basis, double t, double forcing_integral) {
    const Material& m = basis.material;
    const double tr = m.rho + m.rho_e, det = m.rho * m.rho_e - m.rho_f * m.rho_f;
    const double a = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    const double kappa = 1.0 / a + 2.0 * basis.theta / std::sqrt(a * basis.C0);
    const double lam = std::exp(kappa * t) * forcing_integral;
    return lam * (1.0 / basis.C0 + 1.0 / a);
}

/// Evaluates (u, w) from block coefficients at the grid nodes.
inline std::pair<VectorField, VectorField> reconstruct_fields(const GalerkinBasis& basis,
                                                             const std::vector<Eigen::VectorXd>& coeffs,
                                                             const Grid& g) {
    const std::size_t nk = static_cast<std::size_t>(basis.m) + 1;
    std::array<std::vector<double>, 6> c;
    for (auto& a : c) a.assign(nk * nk * nk, 0.0);
    for (std::size_t b = 0; b < basis.blocks.size(); ++b) {
        const auto& blk = basis.blocks[b];
        const int n = static_cast<int>(blk.comps.size());
        const std::size_t lin = static_cast<std::size_t>(blk.k[0]) +
                                nk * (static_cast<std::size_t>(blk.k[1]) + nk * static_cast<std::size_t>(blk.k[2]));
        for (int p = 0; p < n; ++p) {
            c[blk.comps[p]][lin] = coeffs[b](p);
            c[3 + blk.comps[p]][lin] = coeffs[b](n + p);
        }
    }
    std::array<std::vector<double>, 3> ts, tc;  // (node x k)
    for (int a = 0; a < 3; ++a) {
        const std::size_t nn = g.n[a] + 1;
        ts[a].resize(nn * nk);
        tc[a].resize(nn * nk);
        for (std::size_t q = 0; q < nn; ++q)
            for (std::size_t k = 0; k < nk; ++k) {
                const double x = g.origin[a] + static_cast<double>(q) * g.h[a] - basis.lower[a];
                const double arg = basis.wavenumber(a, static_cast<int>(k)) * x;
                ts[a][q * nk + k] = std::sin(arg);
                tc[a][q * nk + k] = std::cos(arg);
            }
    }
    VectorField u(g.node_shape()), w(g.node_shape());
    for (int comp = 0; comp < 6; ++comp) {
        const int i = comp % 3;
        std::array<std::size_t, 3> dims{nk, nk, nk};
        std::vector<double> d = c[comp];
        for (int a = 0; a < 3; ++a) d = detail::transform_axis(d, dims, a, a == i ? ts[a] : tc[a], g.n[a] + 1);
        Array3& dst = comp < 3 ? u[i] : w[i];
        dst.values() = std::move(d);
    }
    return {std::move(u), std::move(w)};
}

/// Identifies one basis function for the dense path.
struct ModeId {
    int field = 0;  ///< 0: u, 1: w
    int comp = 0;
    std::array<int, 3> k{1, 0, 0};
};

struct DenseGalerkin {
    std::vector<ModeId> modes;
    Eigen::MatrixXd A, B, K;
};

/// Gram matrices for an explicit mode list with coefficients given pointwise,
/// by tensor Gauss quadrature with the given panel count per axis.
inline DenseGalerkin assemble_dense(const Domain& dom, const std::function<Material(const Vec3&)>& coef,
                                    const std::vector<ModeId>& modes, std::size_t panels) {
    for (const auto& md : modes)
        if (md.k[md.comp] < 1) throw ValidationError("galerkin: mode needs k_i >= 1 in its own component");
    const std::size_t nm = modes.size();
    std::array<quad::Rule, 3> rules;
    Vec3 L;
    for (int a = 0; a < 3; ++a) {
        L[a] = dom.extent(a);
        rules[a] = quad::gauss_composite(0.0, L[a], panels);
    }
    DenseGalerkin d{modes, Eigen::MatrixXd::Zero(nm, nm), Eigen::MatrixXd::Zero(nm, nm), Eigen::MatrixXd::Zero(nm, nm)};
    std::vector<double> val(nm);
    std::vector<std::array<double, 3>> grad(nm);
    for (std::size_t q3 = 0; q3 < rules[2].x.size(); ++q3)
        for (std::size_t q2 = 0; q2 < rules[1].x.size(); ++q2)
            for (std::size_t q1 = 0; q1 < rules[0].x.size(); ++q1) {
                const Vec3 xr{rules[0].x[q1], rules[1].x[q2], rules[2].x[q3]};
                const double wq = rules[0].w[q1] * rules[1].w[q2] * rules[2].w[q3];
                const Material mt = coef(dom.lower + xr);
                for (std::size_t p = 0; p < nm; ++p) {
                    const auto& md = modes[p];
                    double f[3], df[3];
                    for (int a = 0; a < 3; ++a) {
                        const double K = md.k[a] * std::numbers::pi / L[a];
                        if (a == md.comp) {
                            f[a] = std::sin(K * xr[a]);
                            df[a] = K * std::cos(K * xr[a]);
                        } else {
                            f[a] = std::cos(K * xr[a]);
                            df[a] = -K * std::sin(K * xr[a]);
                        }
                    }
                    val[p] = f[0] * f[1] * f[2];
                    grad[p] = {df[0] * f[1] * f[2], f[0] * df[1] * f[2], f[0] * f[1] * df[2]};
                }
                for (std::size_t p = 0; p < nm; ++p)
                    for (std::size_t r = 0; r < nm; ++r) {
                        const auto& a = modes[p];
                        const auto& c = modes[r];
                        const bool same_comp = a.comp == c.comp;
                        const double vv = same_comp ? val[p] * val[r] : 0.0;
                        const double dens = a.field == 0 ? (c.field == 0 ? mt.rho : mt.rho_f)
                                                         : (c.field == 0 ? mt.rho_f : mt.rho_e);
                        d.A(p, r) += wq * dens * vv;
                        if (a.field == 1 && c.field == 1) d.B(p, r) += wq * mt.eta / mt.kappa * vv;
                        const double diva = grad[p][a.comp], divc = grad[r][c.comp];
                        const double moda = a.field == 0 ? (c.field == 0 ? mt.lambda : mt.C) : (c.field == 0 ? mt.C : mt.M);
                        double k = moda * diva * divc;
                        if (a.field == 0 && c.field == 0) {
                            // 2G e(a):e(c) with e_ij = (d_j v_i + d_i v_j)/2 for single-component fields
                            double ee = 0.0;
                            for (int i = 0; i < 3; ++i)
                                for (int j = 0; j < 3; ++j) {
                                    const double ea = 0.5 * ((i == a.comp ? grad[p][j] : 0.0) + (j == a.comp ? grad[p][i] : 0.0));
                                    const double ec = 0.5 * ((i == c.comp ? grad[r][j] : 0.0) + (j == c.comp ? grad[r][i] : 0.0));
                                    ee += ea * ec;
                                }
                            k += 2.0 * mt.G * ee;
                        }
                        d.K(p, r) += wq * k;
                    }
            }
    return d;
}

/// Result of the finite-difference cross-check.
struct OracleComparison {
    double relative_l2 = 0.0;  ///< relative L2(Q) difference of (u, w)
    double fd_norm = 0.0;
    double galerkin_norm = 0.0;
    std::size_t samples = 0;
    double t_end = 0.0;
    double theta = 0.0;
    double korn_constant = 0.0;
};

/// Runs the FD Biot solver and the Galerkin oracle on the same separable
/// source (in the w equation when the space part says so) and compares
/// (u, w) in the discrete L2(Q) norm over all FD levels.
inline OracleComparison compare_with_fd(const Domain& dom, const Grid& grid, const Material& mat, int m,
                                        const SeparableSource& src, double t_end, double cfl = 0.4) {
    const ParameterFields f = derive_em_parameters(uniform_fields(grid.node_shape(), mat));
    const BiotCoefficients bc = biot_coefficients(f);
    const Grid gt = with_time_step(grid, t_end, biot_dt_max(grid, bc, cfl));
    const GalerkinBasis basis = assemble_galerkin(dom, mat, m);
    const GalerkinTrajectory tr = solve_galerkin(basis, src, t_end, gt.dt, 1);
    if (tr.times.size() != gt.nt + 1) throw NumericalError("galerkin: trajectory sampling does not match the FD levels");

    const VectorField fspace_u = sample_nodes_vec(grid, [&](const Vec3& x) {
        const auto v = src.space(x);
        return Vec3{v[0], v[1], v[2]};
    });
    const VectorField fspace_w = sample_nodes_vec(grid, [&](const Vec3& x) {
        const auto v = src.space(x);
        return Vec3{v[3], v[4], v[5]};
    });
    BiotState s = init_biot(grid, bc, gt.dt);
    const Array3 H = sbp::norm_weights(grid);
    OracleComparison out;
    double num = 0.0, den_fd = 0.0, den_g = 0.0;
    auto accumulate = [&](std::size_t level) {
        auto [ug, wg] = reconstruct_fields(basis, tr.g[level], grid);
        for (int c = 0; c < 3; ++c)
            for (std::size_t n = 0; n < H.size(); ++n) {
                const double du = s.u[c].values()[n] - ug[c].values()[n];
                const double dw = s.w[c].values()[n] - wg[c].values()[n];
                num += H.values()[n] * (du * du + dw * dw);
                den_fd += H.values()[n] * (s.u[c].values()[n] * s.u[c].values()[n] + s.w[c].values()[n] * s.w[c].values()[n]);
                den_g += H.values()[n] * (ug[c].values()[n] * ug[c].values()[n] + wg[c].values()[n] * wg[c].values()[n]);
            }
        ++out.samples;
    };
    accumulate(0);
    for (std::size_t n = 0; n < gt.nt; ++n) {
        const double a = src.time(static_cast<double>(n) * gt.dt);
        BiotForce F{a * fspace_u, a * fspace_w};
        step_biot_inplace(s, nullptr, bc, grid, gt.dt, &F, {cfl});
        accumulate(n + 1);
    }
    out.relative_l2 = den_fd > 0.0 ? std::sqrt(num / den_fd) : std::sqrt(num);
    out.fd_norm = std::sqrt(den_fd * gt.dt);
    out.galerkin_norm = std::sqrt(den_g * gt.dt);
    out.t_end = t_end;
    out.theta = basis.theta;
    out.korn_constant = basis.korn_constant;
    return out;
}

}  // namespace electroseis
