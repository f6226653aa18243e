#pragma once

// Quantities of the Hoelder stability estimate on discrete data: the
// parameter integrals Lambda~ and Lambda over Omega, the data norms
// O(j) = |D|^2_{H4} + |B|^2_{H4} + |u|^2_{H5} + |w|^2_{H5} over the shell
// omega x [0, t_obs], and an empirical sweep fitting Lambda = C0 O^c0.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "biot_solver.hpp"
#include "carleman.hpp"
#include "core.hpp"
#include "domain_grid.hpp"
#include "inverse.hpp"
#include "parameters.hpp"

namespace electroseis {

/// Compact second difference, second-order one-sided at the ends.
inline Array3 node_diff2(const Grid& g, const Array3& f, int axis) {
    Array3 out(f.shape());
    const std::size_t n = g.n[axis];
    const double h2 = g.h[axis] * g.h[axis];
    detail::for_nodes(g, [&](std::size_t i, std::size_t j, std::size_t k) {
        const Index3 p{i, j, k};
        auto at = [&](std::size_t q) {
            Index3 r = p;
            r[axis] = q;
            return f[r];
        };
        const std::size_t m = p[axis];
        double v = 0.0;
        if (n < 3)
            v = n == 2 ? (at(0) - 2.0 * at(1) + at(2)) / h2 : 0.0;
        else if (m == 0)
            v = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2;
        else if (m == n)
            v = (2.0 * at(n) - 5.0 * at(n - 1) + 4.0 * at(n - 2) - at(n - 3)) / h2;
        else
            v = (at(m + 1) - 2.0 * at(m) + at(m - 1)) / h2;
        out[p] = v;
    });
    return out;
}

struct LambdaIntegrals {
    double lambda_tilde = 0.0;
    double xi_part = 0.0;  ///< integral of |xi|^2 + |grad xi|^2
    double lambda = 0.0;   ///< lambda_tilde + xi_part
};

namespace detail {

inline double weighted_sq(const Array3& w, const Array3& f) {
    double s = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) s += w.values()[n] * f.values()[n] * f.values()[n];
    return s;
}

/// int |f|^2 + |grad f|^2 (+ |grad grad f|^2 when hessian).
inline double sobolev_integral(const Grid& g, const Array3& w, const Array3& f, bool hessian) {
    double s = weighted_sq(w, f);
    for (int a = 0; a < 3; ++a) {
        const Array3 da = node_diff(g, f, a);
        s += weighted_sq(w, da);
        if (!hessian) continue;
        s += weighted_sq(w, node_diff2(g, f, a));
        for (int b = a + 1; b < 3; ++b) s += 2.0 * weighted_sq(w, node_diff(g, da, b));
    }
    return s;
}

}  // namespace detail

/// Trapezoid (node) quadrature over Omega; derivatives by central differences.
inline LambdaIntegrals compute_lambda(const Grid& g, const ParameterDifference& d) {
    for (const Array3* f : {&d.alpha, &d.beta, &d.gamma, &d.xi})
        if (f->shape() != g.node_shape()) throw ValidationError("stability: difference field does not match the grid");
    const Array3 w = sbp::norm_weights(g);
    LambdaIntegrals r;
    r.lambda_tilde = detail::sobolev_integral(g, w, d.alpha, true) + detail::sobolev_integral(g, w, d.beta, true) +
                     detail::sobolev_integral(g, w, d.gamma, false);
    r.xi_part = detail::sobolev_integral(g, w, d.xi, false);
    r.lambda = r.lambda_tilde + r.xi_part;
    return r;
}

/// Node weights integrating piecewise-trilinear functions exactly over the
/// shell omega = Omega minus the interior box; zero on nodes not touching omega.
struct ShellQuadrature {
    Grid grid;
    std::vector<double> weight;
    std::vector<char> mask;  ///< weight > 0
    double volume = 0.0;
};

namespace detail {

/// int_a^b of each 1-D hat function on nodes x0 + i h, i = 0..n.
inline std::vector<double> hat_integrals(double x0, double h, std::size_t n, double a, double b) {
    std::vector<double> w(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double xl = x0 + static_cast<double>(i) * h, xr = xl + h;
        const double c = std::max(a, xl), d = std::min(b, xr);
        if (!(d > c)) continue;
        // int_c^d (xr - x)/h and int_c^d (x - xl)/h
        w[i] += ((xr - c) * (xr - c) - (xr - d) * (xr - d)) / (2.0 * h);
        w[i + 1] += ((d - xl) * (d - xl) - (c - xl) * (c - xl)) / (2.0 * h);
    }
    return w;
}

}  // namespace detail

inline ShellQuadrature shell_quadrature(const Domain& d, const Grid& g) {
    ShellQuadrature q;
    q.grid = g;
    std::array<std::vector<double>, 3> full, inner;
    bool has_inner = true;
    for (int a = 0; a < 3; ++a) {
        const double lo = d.lower[a] + d.shell_width, hi = d.upper[a] - d.shell_width;
        full[a] = detail::hat_integrals(g.origin[a], g.h[a], g.n[a], d.lower[a], d.upper[a]);
        inner[a] = detail::hat_integrals(g.origin[a], g.h[a], g.n[a], lo, hi);
        has_inner = has_inner && hi > lo;
    }
    const Index3 shape = g.node_shape();
    q.weight.assign(g.node_count(), 0.0);
    q.mask.assign(g.node_count(), 0);
    const double tiny = 1e-12 * g.cell_volume();
    for (std::size_t k = 0; k < shape[2]; ++k)
        for (std::size_t j = 0; j < shape[1]; ++j)
            for (std::size_t i = 0; i < shape[0]; ++i) {
                const std::size_t n = i + shape[0] * (j + shape[1] * k);
                double w = full[0][i] * full[1][j] * full[2][k];
                if (has_inner) w -= inner[0][i] * inner[1][j] * inner[2][k];
                if (w > tiny) {
                    q.weight[n] = w;
                    q.mask[n] = 1;
                    q.volume += w;
                }
            }
    return q;
}

namespace detail {

/// First difference at p along a line of masked samples: central when both
/// neighbours are available, second-order one-sided when two on one side are,
/// first order with one, zero with none.
template <class Get, class In>
double masked_diff(Get&& get, In&& in, long p, long len, double h) {
    const bool l1 = p - 1 >= 0 && in(p - 1), r1 = p + 1 < len && in(p + 1);
    if (l1 && r1) return (get(p + 1) - get(p - 1)) / (2.0 * h);
    if (r1) {
        if (p + 2 < len && in(p + 2)) return (-3.0 * get(p) + 4.0 * get(p + 1) - get(p + 2)) / (2.0 * h);
        return (get(p + 1) - get(p)) / h;
    }
    if (l1) {
        if (p - 2 >= 0 && in(p - 2)) return (3.0 * get(p) - 4.0 * get(p - 1) + get(p - 2)) / (2.0 * h);
        return (get(p) - get(p - 1)) / h;
    }
    return 0.0;
}

/// Squared discrete H^m norm of one scalar space-time series f[level * nodes + node].
class SpaceTimeNorm {
public:
    SpaceTimeNorm(const ShellQuadrature& q, std::size_t levels, double dt)
        : q_(q), shape_(q.grid.node_shape()), nodes_(q.grid.node_count()), levels_(levels), dt_(dt) {
        wt_.assign(levels, dt);
        if (levels > 1) wt_.front() = wt_.back() = 0.5 * dt;
        else wt_.front() = 0.0;
        for (std::size_t n = 0; n < nodes_; ++n)
            if (q_.mask[n]) active_.push_back(n);
    }

    double operator()(const std::vector<double>& f, int m) {
        bufs_.assign(static_cast<std::size_t>(m) + 1, std::vector<double>(f.size(), 0.0));
        total_ = 0.0;
        walk(f, 0, 0, m);
        return total_;
    }

private:
    void walk(const std::vector<double>& f, int depth, int min_axis, int m) {
        total_ += parallel_sum(0, levels_, [&](std::size_t l) {
            double s = 0.0;
            for (std::size_t n : active_) {
                const double v = f[l * nodes_ + n];
                s += q_.weight[n] * v * v;
            }
            return s * wt_[l];
        });
        if (depth == m) return;
        std::vector<double>& out = bufs_[static_cast<std::size_t>(depth) + 1];
        for (int a = min_axis; a < 4; ++a) {
            differentiate(f, out, a);
            walk(out, depth + 1, a, m);
        }
    }

    void differentiate(const std::vector<double>& f, std::vector<double>& out, int axis) {
        if (axis == 3) {
            parallel_for(0, levels_, [&](std::size_t l) {
                for (std::size_t n : active_)
                    out[l * nodes_ + n] = masked_diff([&](long t) { return f[static_cast<std::size_t>(t) * nodes_ + n]; },
                                                      [](long) { return true; }, static_cast<long>(l),
                                                      static_cast<long>(levels_), dt_);
            });
            return;
        }
        const std::size_t stride = axis == 0 ? 1 : axis == 1 ? shape_[0] : shape_[0] * shape_[1];
        const double h = q_.grid.h[axis];
        parallel_for(0, levels_, [&](std::size_t l) {
            const double* fl = f.data() + l * nodes_;
            for (std::size_t n : active_) {
                const long p = static_cast<long>(node_index(shape_, n)[axis]);
                const long base = static_cast<long>(n) - p * static_cast<long>(stride);
                auto idx = [&](long t) { return static_cast<std::size_t>(base + t * static_cast<long>(stride)); };
                out[l * nodes_ + n] = masked_diff([&](long t) { return fl[idx(t)]; },
                                                  [&](long t) { return q_.mask[idx(t)] != 0; }, p,
                                                  static_cast<long>(shape_[axis]), h);
            }
        });
    }

    const ShellQuadrature& q_;
    Index3 shape_;
    std::size_t nodes_, levels_;
    double dt_;
    std::vector<double> wt_;
    std::vector<std::size_t> active_;
    std::vector<std::vector<double>> bufs_;
    double total_ = 0.0;
};

}  // namespace detail

/// Sum over all space-time multi-indices of order <= m of the squared masked
/// differences, with shell weights in space and trapezoid weights in time.
inline double compute_data_norm(const ShellQuadrature& q, const std::vector<VectorField>& series, double dt, int m) {
    if (m < 0) throw ValidationError("stability: Sobolev order must be nonnegative");
    if (series.size() < static_cast<std::size_t>(m) + 1 || series.size() < 2)
        throw ValidationError("stability: " + std::to_string(series.size()) + " snapshots are too few for order " +
                              std::to_string(m) + " time differences");
    if (!(dt > 0.0)) throw ValidationError("stability: snapshot spacing must be positive");
    const std::size_t nodes = q.grid.node_count();
    for (const auto& f : series)
        if (f.shape() != q.grid.node_shape()) throw ValidationError("stability: snapshot shape does not match the grid");
    detail::SpaceTimeNorm norm(q, series.size(), dt);
    std::vector<double> buf(series.size() * nodes);
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (std::size_t l = 0; l < series.size(); ++l)
            std::copy(series[l][c].values().begin(), series[l][c].values().end(), buf.begin() + static_cast<long>(l * nodes));
        total += norm(buf, m);
    }
    return total;
}

/// Difference snapshots of one experiment on the observation window.
struct DifferenceSeries {
    std::vector<VectorField> D, B, u, w;
};

/// O = |D|^2_{H4} + |B|^2_{H4} + |u|^2_{H5} + |w|^2_{H5}.
inline double observation_norm(const ShellQuadrature& q, const DifferenceSeries& s, double dt) {
    return compute_data_norm(q, s.D, dt, 4) + compute_data_norm(q, s.B, dt, 4) + compute_data_norm(q, s.u, dt, 5) +
           compute_data_norm(q, s.w, dt, 5);
}

struct StabilityMetrics {
    double lambda_tilde = 0.0;
    double lambda = 0.0;
    double O1 = 0.0, O2 = 0.0;
    double O_sum() const { return O1 + O2; }
};

struct SweepPoint {
    double s = 0.0;
    StabilityMetrics metrics;
};

struct HolderFit {
    double c0 = 0.0;  ///< fitted exponent
    double C0 = 0.0;  ///< fitted constant
    double r2 = 0.0;
    std::size_t points = 0;
};

/// Least squares of log Lambda = log C0 + c0 log O over points with both positive.
inline HolderFit fit_holder(const std::vector<SweepPoint>& pts) {
    std::vector<double> x, y;
    for (const auto& p : pts)
        if (p.metrics.lambda > 0.0 && p.metrics.O_sum() > 0.0) {
            x.push_back(std::log(p.metrics.O_sum()));
            y.push_back(std::log(p.metrics.lambda));
        }
    if (x.size() < 2) throw ValidationError("stability: the fit needs at least two sweep points with nonzero data");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw NumericalError("stability: data norms do not vary across the sweep");
    HolderFit f;
    f.c0 = sxy / sxx;
    f.C0 = std::exp(my - f.c0 * mx);
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (my + f.c0 * (x[i] - mx));
        ss_res += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    f.points = x.size();
    return f;
}

struct SweepOptions {
    std::vector<double> scales{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2};
    BumpPerturbation perturbation;
    double t_obs = 0.5;  ///< observation window [0, t_obs]
    TwinOptions twin;
    double safety = 1.5;
    double max_exponent = 1.2;
    double min_r2 = 0.95;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    HolderFit fit;
    double dt = 0.0;
    std::size_t levels = 0;
    double worst_bound_ratio = 0.0;  ///< max over points of Lambda / (C0 O^c0)
    bool exponent_ok = false, r2_ok = false, bound_ok = false, monotone = false;
    double weight_exponent = std::numeric_limits<double>::quiet_NaN();  ///< eps / (eps + Phi) of the weight, if given
    double shell_volume = 0.0;

    bool passed() const { return exponent_ok && r2_ok && bound_ok; }
};

/// Twin runs of the base set against base + s * perturbation for every s.
/// Base runs are shared; all sets use one common time step.
inline SweepResult holder_sweep(const DomainGrid& dg, const ParameterFields& base,
                                const std::array<StaggeredInitialData, 2>& data, const SweepOptions& opt,
                                const CarlemanWeight* weight = nullptr,
                                const std::function<void(const SweepPoint&)>& progress = {}) {
    const Grid& g = dg.grid;
    if (opt.scales.empty()) throw ValidationError("stability: empty sweep");
    for (double s : opt.scales)
        if (!(s >= 0.0)) throw ValidationError("stability: sweep scales must be nonnegative");
    if (!(opt.t_obs > 0.0)) throw ValidationError("stability: observation window must be positive");
    check_perturbation_support(dg.domain, opt.perturbation);

    std::vector<ParameterFields> sets;
    std::vector<const ParameterFields*> all{&base};
    for (double s : opt.scales) {
        try {
            sets.push_back(perturbed_set(base, dg.domain, g, opt.perturbation, s));
            if (!check_admissibility(sets.back()).passed()) throw ValidationError("inadmissible parameters");
        } catch (const ValidationError& e) {
            throw ValidationError("stability: perturbed set at s = " + std::to_string(s) + ": " + e.what());
        }
    }
    for (const auto& f : sets) all.push_back(&f);

    SweepResult r;
    r.dt = common_time_step(g, all, opt.twin);
    r.levels = static_cast<std::size_t>(std::floor(opt.t_obs / r.dt + 1e-9)) + 1;
    if (r.levels < 6) throw ValidationError("stability: observation window holds fewer than 6 snapshot levels");
    const ShellQuadrature q = shell_quadrature(dg.domain, g);
    r.shell_volume = q.volume;

    std::array<std::vector<NodeSnapshot>, 2> reference;
    for (int j = 0; j < 2; ++j)
        run_forward_nodes(g, base, data[j], r.dt, r.levels, opt.twin,
                          [&](std::size_t, const EmState& es, const BiotState& bs) {
                              reference[j].push_back(node_snapshot(g, es, bs));
                          });

    for (std::size_t i = 0; i < sets.size(); ++i) {
        SweepPoint pt;
        pt.s = opt.scales[i];
        const LambdaIntegrals li = compute_lambda(g, parameter_difference(base, sets[i]));
        pt.metrics.lambda_tilde = li.lambda_tilde;
        pt.metrics.lambda = li.lambda;
        for (int j = 0; j < 2; ++j) {
            DifferenceSeries d;
            run_forward_nodes(g, sets[i], data[j], r.dt, r.levels, opt.twin,
                              [&](std::size_t l, const EmState& es, const BiotState& bs) {
                                  const NodeSnapshot s = node_snapshot(g, es, bs);
                                  d.D.push_back(s.D - reference[j][l].D);
                                  d.B.push_back(s.B - reference[j][l].B);
                                  d.u.push_back(s.u - reference[j][l].u);
                                  d.w.push_back(s.w - reference[j][l].w);
                              });
            (j == 0 ? pt.metrics.O1 : pt.metrics.O2) = observation_norm(q, d, r.dt);
        }
        r.points.push_back(pt);
        if (progress) progress(pt);
    }

    r.fit = fit_holder(r.points);
    r.exponent_ok = r.fit.c0 > 0.0 && r.fit.c0 <= opt.max_exponent;
    r.r2_ok = r.fit.r2 >= opt.min_r2;
    r.bound_ok = true;
    for (const auto& p : r.points) {
        const double bound = r.fit.C0 * std::pow(p.metrics.O_sum(), r.fit.c0);
        const double ratio = bound > 0.0 ? p.metrics.lambda / bound : (p.metrics.lambda > 0.0 ? HUGE_VAL : 0.0);
        r.worst_bound_ratio = std::max(r.worst_bound_ratio, ratio);
        r.bound_ok = r.bound_ok && p.metrics.lambda <= opt.safety * bound;
    }
    std::vector<SweepPoint> sorted = r.points;
    std::sort(sorted.begin(), sorted.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.s < b.s; });
    r.monotone = true;
    for (std::size_t i = 1; i < sorted.size(); ++i)
        r.monotone = r.monotone && sorted[i].metrics.O_sum() >= sorted[i - 1].metrics.O_sum();
    if (weight) r.weight_exponent = weight->epsilon / (weight->epsilon + weight->Phi);
    return r;
}

}  // namespace electroseis
