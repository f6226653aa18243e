#pragma once

// Carleman weight phi = exp(theta psi), psi = |x - x*|^2 - sigma t^2, the
// pseudoconvexity check and numerical probes of the weighted inequalities.
//
// Probe integrals are formed in shifted form exp(2 tau (phi - Phi)); the
// common factor exp(2 tau Phi) cancels in every ratio.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"
#include "domain_grid.hpp"
#include "quadrature.hpp"

namespace electroseis {

/// Squared distance from p to the closest point of the box [lo, hi].
inline double box_min_dist2(const Vec3& lo, const Vec3& hi, const Vec3& p) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = p[a] < lo[a] ? lo[a] - p[a] : (p[a] > hi[a] ? p[a] - hi[a] : 0.0);
        s += d * d;
    }
    return s;
}

/// Squared distance from p to the farthest corner of the box.
inline double box_max_dist2(const Vec3& lo, const Vec3& hi, const Vec3& p) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = std::max(std::abs(p[a] - lo[a]), std::abs(hi[a] - p[a]));
        s += d * d;
    }
    return s;
}

struct CarlemanWeight {
    Vec3 x_star{-2.0, 0.5, 0.5};
    double sigma = 11.0;  ///< time-weight coefficient
    double theta = 0.1;   ///< exponent scale
    double c0 = 0.5;
    double T = 1.0;
    double d2_min = 0.0, d2_max = 0.0;  ///< extreme |x - x*|^2 over the closed box
    double Phi = 0.0;    ///< max of phi over the closure of Q
    double epsilon = 0.0;
    double delta = 0.0;

    double psi(const Vec3& x, double t) const { return norm2(x - x_star) - sigma * t * t; }
    double phi(const Vec3& x, double t) const { return std::exp(theta * psi(x, t)); }
    double phi0(const Vec3& x) const { return phi(x, 0.0); }
};

struct PseudoconvexityReport {
    Array3 margin;  ///< (1 - c0) - grad c.(x - x*) / (2c) at nodes
    double min_margin = 0.0;
    Index3 worst{0, 0, 0};
    bool passed() const { return min_margin > 0.0; }
};

/// Margin field of the pseudoconvexity condition for the speed^2 field c.
/// Gradients use central differences inside and second-order one-sided
/// differences on the boundary nodes.
inline PseudoconvexityReport check_pseudoconvexity(const Grid& g, const Array3& c, const Vec3& x_star, double c0) {
    if (!(c0 > 0.0 && c0 < 1.0)) throw ValidationError("carleman: c0 must lie in (0, 1)");
    for (std::size_t n = 0; n < c.size(); ++n)
        if (!(c.values()[n] > 0.0))
            throw ValidationError("carleman: speed field must be positive (node " + std::to_string(n) + ")");
    PseudoconvexityReport r;
    r.margin = Array3(g.node_shape());
    for (std::size_t k = 0; k <= g.n[2]; ++k)
        for (std::size_t j = 0; j <= g.n[1]; ++j)
            for (std::size_t i = 0; i <= g.n[0]; ++i) {
                const Index3 p{i, j, k};
                Vec3 grad{0, 0, 0};
                for (int a = 0; a < 3; ++a) {
                    const std::size_t na = g.n[a];
                    if (na == 0) continue;
                    auto at = [&](std::size_t q) {
                        Index3 r2 = p;
                        r2[a] = q;
                        return c[r2];
                    };
                    const std::size_t q = p[a];
                    if (na == 1) {
                        grad[a] = (at(1) - at(0)) / g.h[a];
                    } else if (q == 0) {
                        grad[a] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * g.h[a]);
                    } else if (q == na) {
                        grad[a] = (3.0 * at(na) - 4.0 * at(na - 1) + at(na - 2)) / (2.0 * g.h[a]);
                    } else {
                        grad[a] = (at(q + 1) - at(q - 1)) / (2.0 * g.h[a]);
                    }
                }
                const Vec3 x = g.node(i, j, k);
                r.margin[p] = (1.0 - c0) - dot(grad, x - x_star) / (2.0 * c[p]);
            }
    r.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= g.n[2]; ++k)
        for (std::size_t j = 0; j <= g.n[1]; ++j)
            for (std::size_t i = 0; i <= g.n[0]; ++i)
                if (r.margin(i, j, k) < r.min_margin) {
                    r.min_margin = r.margin(i, j, k);
                    r.worst = {i, j, k};
                }
    return r;
}

/// Epsilon and delta from the realized weight: eps = (1 - max_x phi(x, T)) / 4,
/// delta the largest band with phi > 1 - eps for |t| < delta and
/// phi < 1 - 2 eps for |t| > T - delta.
inline void weight_levels(CarlemanWeight& w) {
    const double phiT = std::exp(w.theta * (w.d2_max - w.sigma * w.T * w.T));
    w.epsilon = 0.25 * (1.0 - phiT);
    if (!(w.epsilon > 0.0)) {
        w.delta = 0.0;
        return;
    }
    // phi > 1 - eps  <=>  t^2 < (|x - x*|^2 - ln(1 - eps)/theta) / sigma
    const double t1 = std::sqrt((w.d2_min - std::log(1.0 - w.epsilon) / w.theta) / w.sigma);
    // phi < 1 - 2 eps  <=>  t^2 > (|x - x*|^2 - ln(1 - 2 eps)/theta) / sigma
    const double t2 = std::sqrt((w.d2_max - std::log(1.0 - 2.0 * w.epsilon) / w.theta) / w.sigma);
    w.delta = std::min({t1, w.T - t2, 0.5 * w.T});
}

/// Checks the weight invariants on the grid nodes and on nt_check time samples
/// of [-T, T]. Returns an empty string when they hold, else the first failure.
inline std::string weight_violation(const CarlemanWeight& w, const Grid& g, std::size_t nt_check = 64) {
    if (!(w.epsilon > 0.0) || !(w.delta > 0.0)) return "no positive (epsilon, delta) band";
    for (std::size_t k = 0; k <= g.n[2]; ++k)
        for (std::size_t j = 0; j <= g.n[1]; ++j)
            for (std::size_t i = 0; i <= g.n[0]; ++i) {
                const Vec3 x = g.node(i, j, k);
                if (!(w.phi(x, w.T) < 1.0)) return "phi(x, T) >= 1 at node " + to_string(Index3{i, j, k});
                if (!(w.phi0(x) >= 1.0)) return "phi(x, 0) < 1 at node " + to_string(Index3{i, j, k});
                for (std::size_t q = 0; q <= nt_check; ++q) {
                    const double t = -w.T + 2.0 * w.T * static_cast<double>(q) / static_cast<double>(nt_check);
                    const double v = w.phi(x, t);
                    if (std::abs(t) < w.delta && !(v > 1.0 - w.epsilon)) return "phi <= 1 - eps inside |t| < delta";
                    if (std::abs(t) > w.T - w.delta && !(v < 1.0 - 2.0 * w.epsilon))
                        return "phi >= 1 - 2 eps for |t| > T - delta";
                }
            }
    return {};
}

/// Named speed^2 field for the pseudoconvexity requirement.
struct SpeedField {
    std::string name;
    const Array3* c = nullptr;
};

/// Builds the weight and checks every invariant. Infeasible (sigma, theta)
/// raise ValidationError; scan_weights searches for feasible pairs.
inline CarlemanWeight build_weight(const Domain& dom, const Grid& g, const std::vector<SpeedField>& speeds,
                                   const Vec3& x_star, double c0, double sigma, double theta) {
    if (box_min_dist2(dom.lower, dom.upper, x_star) <= 0.0)
        throw ValidationError("carleman: x* must lie outside the closed domain");
    if (!(sigma > 0.0) || !(theta > 0.0)) throw ValidationError("carleman: sigma and theta must be positive");
    for (const auto& s : speeds) {
        const PseudoconvexityReport r = check_pseudoconvexity(g, *s.c, x_star, c0);
        if (!r.passed())
            throw ValidationError("carleman: pseudoconvexity fails for speed '" + s.name + "' (min margin " +
                                  std::to_string(r.min_margin) + " at node " + to_string(r.worst) + ")");
    }
    CarlemanWeight w;
    w.x_star = x_star;
    w.sigma = sigma;
    w.theta = theta;
    w.c0 = c0;
    w.T = dom.T;
    w.d2_min = box_min_dist2(dom.lower, dom.upper, x_star);
    w.d2_max = box_max_dist2(dom.lower, dom.upper, x_star);
    w.Phi = std::exp(theta * w.d2_max);
    weight_levels(w);
    const std::string bad = weight_violation(w, g);
    if (!bad.empty())
        throw ValidationError("carleman: weight infeasible for sigma = " + std::to_string(sigma) +
                              ", theta = " + std::to_string(theta) + ": " + bad);
    return w;
}

struct WeightScan {
    std::vector<std::pair<double, double>> feasible;  ///< (sigma, theta)
    std::size_t tried = 0;
};

/// Log grid over sigma in [s_lo, s_hi] and theta in [t_lo, t_hi].
inline WeightScan scan_weights(const Domain& dom, const Grid& g, const std::vector<SpeedField>& speeds,
                               const Vec3& x_star, double c0, double s_lo, double s_hi, double t_lo, double t_hi,
                               std::size_t points = 9) {
    if (!(s_lo > 0.0 && s_hi >= s_lo && t_lo > 0.0 && t_hi >= t_lo) || points == 0)
        throw ValidationError("carleman: invalid scan range");
    WeightScan scan;
    auto logpt = [&](double lo, double hi, std::size_t q) {
        return points == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(q) / static_cast<double>(points - 1));
    };
    for (std::size_t a = 0; a < points; ++a)
        for (std::size_t b = 0; b < points; ++b) {
            const double s = logpt(s_lo, s_hi, a), t = logpt(t_lo, t_hi, b);
            ++scan.tried;
            try {
                build_weight(dom, g, speeds, x_star, c0, s, t);
                scan.feasible.emplace_back(s, t);
            } catch (const ValidationError& e) {
                // pseudoconvexity or x* placement does not depend on (sigma, theta)
                const std::string msg = e.what();
                if (msg.find("infeasible") == std::string::npos) throw;
            }
        }
    if (scan.feasible.empty()) throw ValidationError("carleman: no feasible (sigma, theta) in the scan range");
    return scan;
}

/// Geometric grid of count points in [lo, hi].
inline std::vector<double> tau_grid(double lo = 1.0, double hi = 64.0, std::size_t count = 16) {
    if (!(lo > 0.0 && hi > lo) || count < 2) throw ValidationError("carleman: invalid tau grid");
    std::vector<double> t(count);
    for (std::size_t q = 0; q < count; ++q)
        t[q] = lo * std::pow(hi / lo, static_cast<double>(q) / static_cast<double>(count - 1));
    return t;
}

struct ProbeReport {
    std::string name;
    std::vector<double> tau, lhs, rhs, ratio;  ///< lhs and rhs without the common exp(2 tau Phi)
    std::size_t knee = 0;   ///< first index where the local log-log slope drops below 1/2
    bool has_knee = false;
    double max_ratio = 0.0;
    bool bounded = false;   ///< has_knee and max ratio <= 2 * ratio at the knee
};

/// Knee and verdict from the ratio curve. The knee marks where growth in tau
/// has flattened to less than sqrt(tau).
inline void finish_report(ProbeReport& r) {
    r.max_ratio = 0.0;
    for (double v : r.ratio) r.max_ratio = std::max(r.max_ratio, v);
    r.has_knee = false;
    for (std::size_t q = 0; q + 1 < r.ratio.size(); ++q) {
        if (!(r.ratio[q] > 0.0) || !(r.ratio[q + 1] > 0.0)) continue;
        const double slope = std::log(r.ratio[q + 1] / r.ratio[q]) / std::log(r.tau[q + 1] / r.tau[q]);
        if (slope < 0.5) {
            r.knee = q;
            r.has_knee = true;
            break;
        }
    }
    if (r.max_ratio == 0.0) {
        // zero field: both sides vanish, ratio defined as zero
        r.has_knee = true;
        r.knee = 0;
        r.bounded = true;
        return;
    }
    r.bounded = r.has_knee && r.max_ratio <= 2.0 * r.ratio[r.knee];
}

/// Space-time box over which a probe field is supported.
struct SupportBox {
    Vec3 lower{0, 0, 0}, upper{0, 0, 0};
    double t_lower = 0.0, t_upper = 0.0;
};

/// Point sample of a wave-probe field: u, (grad_x u, u_t), u_tt and the Laplacian.
struct WaveSample {
    double u = 0.0;
    std::array<double, 4> grad{0, 0, 0, 0};
    double utt = 0.0;
    double lap = 0.0;
};

/// Space-time polynomial bump A (1 - s)^p with
/// s = |x - c|^2 / R^2 + (t - t0)^2 / S^2, with analytic derivatives.
struct SpaceTimeBump {
    Vec3 center{0.5, 0.5, 0.5};
    double radius = 0.3;
    double t0 = 0.0;
    double half_width = 0.5;
    double amplitude = 1.0;
    int power = 4;

    WaveSample operator()(const Vec3& x, double t) const {
        WaveSample w;
        const double R2 = radius * radius, S2 = half_width * half_width;
        const Vec3 d = x - center;
        const double s = norm2(d) / R2 + (t - t0) * (t - t0) / S2;
        if (s >= 1.0) return w;
        const double p = power;
        const double b = 1.0 - s;
        const double f = std::pow(b, p), f1 = -p * std::pow(b, p - 1.0), f2 = p * (p - 1.0) * std::pow(b, p - 2.0);
        w.u = amplitude * f;
        std::array<double, 4> ds{2.0 * d[0] / R2, 2.0 * d[1] / R2, 2.0 * d[2] / R2, 2.0 * (t - t0) / S2};
        for (int a = 0; a < 4; ++a) w.grad[a] = amplitude * f1 * ds[a];
        w.utt = amplitude * (f2 * ds[3] * ds[3] + f1 * 2.0 / S2);
        w.lap = 0.0;
        for (int a = 0; a < 3; ++a) w.lap += amplitude * (f2 * ds[a] * ds[a] + f1 * 2.0 / R2);
        return w;
    }

    SupportBox support() const {
        SupportBox b;
        for (int a = 0; a < 3; ++a) {
            b.lower[a] = center[a] - radius;
            b.upper[a] = center[a] + radius;
        }
        b.t_lower = t0 - half_width;
        b.t_upper = t0 + half_width;
        return b;
    }
};

namespace detail {

/// Accumulates, for every tau, sums of weight * (values) over a tensor Gauss
/// rule on the support box. integrand(x, t, out) fills out with the point
/// values; weight exponent is 2 tau (phi - Phi). Deterministic slab order.
template <class Integrand>
std::vector<std::vector<double>> weighted_sums(const SupportBox& box, bool with_time, std::size_t panels,
                                               const std::vector<double>& tau, std::size_t nvals,
                                               const std::function<double(const Vec3&, double)>& shifted_phi,
                                               Integrand&& integrand) {
    std::array<quad::Rule, 3> rs;
    for (int a = 0; a < 3; ++a) rs[a] = quad::gauss_composite(box.lower[a], box.upper[a], panels);
    const quad::Rule rt = with_time ? quad::gauss_composite(box.t_lower, box.t_upper, panels) : quad::Rule{{0.0}, {1.0}};
    const std::size_t nq = rs[2].x.size();
    std::vector<std::vector<double>> partial(nq, std::vector<double>(tau.size() * nvals, 0.0));
    parallel_for(0, nq, [&](std::size_t q3) {
        std::vector<double> vals(nvals);
        auto& acc = partial[q3];
        for (std::size_t qt = 0; qt < rt.x.size(); ++qt)
            for (std::size_t q2 = 0; q2 < rs[1].x.size(); ++q2)
                for (std::size_t q1 = 0; q1 < rs[0].x.size(); ++q1) {
                    const Vec3 x{rs[0].x[q1], rs[1].x[q2], rs[2].x[q3]};
                    const double t = rt.x[qt];
                    const double wq = rs[0].w[q1] * rs[1].w[q2] * rs[2].w[q3] * rt.w[qt];
                    integrand(x, t, vals);
                    bool any = false;
                    for (double v : vals) any = any || v != 0.0;
                    if (!any) continue;
                    const double e = shifted_phi(x, t);
                    for (std::size_t k = 0; k < tau.size(); ++k) {
                        const double wt = wq * std::exp(2.0 * tau[k] * e);
                        for (std::size_t v = 0; v < nvals; ++v) acc[k * nvals + v] += wt * vals[v];
                    }
                }
    });
    std::vector<std::vector<double>> out(tau.size(), std::vector<double>(nvals, 0.0));
    for (const auto& p : partial)
        for (std::size_t k = 0; k < tau.size(); ++k)
            for (std::size_t v = 0; v < nvals; ++v) out[k][v] += p[k * nvals + v];
    return out;
}

inline void check_inside(const SupportBox& b, const Vec3& lo, const Vec3& hi, double t_lo, double t_hi, bool with_time,
                         const char* what) {
    for (int a = 0; a < 3; ++a)
        if (!(b.lower[a] > lo[a] && b.upper[a] < hi[a]))
            throw ValidationError(std::string("carleman: ") + what + " support touches the spatial boundary");
    if (with_time && !(b.t_lower > t_lo && b.t_upper < t_hi))
        throw ValidationError(std::string("carleman: ") + what + " support touches the time boundary");
}

}  // namespace detail

/// Wave probe: ratio of int e^{2 tau phi}(tau^3 u^2 + tau |grad_{x,t} u|^2)
/// to int e^{2 tau phi} f^2 with f = u_tt - c Delta u.
inline ProbeReport probe_wave_carleman(const CarlemanWeight& w, const Domain& dom,
                                       const std::function<WaveSample(const Vec3&, double)>& u, const SupportBox& support,
                                       const std::function<double(const Vec3&)>& c, const std::vector<double>& tau,
                                       std::size_t panels = 16) {
    detail::check_inside(support, dom.lower, dom.upper, -w.T, w.T, true, "wave probe field");
    const auto sums = detail::weighted_sums(
        support, true, panels, tau, 3, [&](const Vec3& x, double t) { return w.phi(x, t) - w.Phi; },
        [&](const Vec3& x, double t, std::vector<double>& out) {
            const WaveSample s = u(x, t);
            const double f = s.utt - c(x) * s.lap;
            double g2 = 0.0;
            for (double v : s.grad) g2 += v * v;
            out[0] = s.u * s.u;
            out[1] = g2;
            out[2] = f * f;
        });
    ProbeReport r;
    r.name = "wave";
    r.tau = tau;
    for (std::size_t k = 0; k < tau.size(); ++k) {
        const double t = tau[k];
        const double lhs = t * t * t * sums[k][0] + t * sums[k][1];
        const double rhs = sums[k][2];
        r.lhs.push_back(lhs);
        r.rhs.push_back(rhs);
        r.ratio.push_back(rhs > 0.0 ? lhs / rhs : 0.0);
    }
    finish_report(r);
    return r;
}

/// Point sample of a vector field and its Jacobian J(i, j) = d_j v_i.
struct VectorSample {
    Vec3 v{0, 0, 0};
    std::array<std::array<double, 3>, 3> J{};
};

/// Gradient of the spatial bump A (1 - |x - c|^2 / R^2)^p: curl is zero.
struct GradientBump {
    Vec3 center{0.5, 0.5, 0.5};
    double radius = 0.3;
    double amplitude = 1.0;
    int power = 4;

    VectorSample operator()(const Vec3& x) const {
        VectorSample s;
        const double R2 = radius * radius;
        const Vec3 d = x - center;
        const double q = norm2(d) / R2;
        if (q >= 1.0) return s;
        const double p = power, b = 1.0 - q;
        const double f1 = -p * std::pow(b, p - 1.0), f2 = p * (p - 1.0) * std::pow(b, p - 2.0);
        for (int i = 0; i < 3; ++i) {
            s.v[i] = amplitude * f1 * 2.0 * d[i] / R2;
            for (int j = 0; j < 3; ++j)
                s.J[i][j] = amplitude * (f2 * 4.0 * d[i] * d[j] / (R2 * R2) + (i == j ? f1 * 2.0 / R2 : 0.0));
        }
        return s;
    }

    SupportBox support() const {
        SupportBox b;
        for (int a = 0; a < 3; ++a) {
            b.lower[a] = center[a] - radius;
            b.upper[a] = center[a] + radius;
        }
        return b;
    }
};

/// Div-curl probe: tau int e^{2 tau phi0}|v|^2 over int e^{2 tau phi0}(|curl v|^2 + |div v|^2).
inline ProbeReport probe_div_curl(const CarlemanWeight& w, const Domain& dom,
                                  const std::function<VectorSample(const Vec3&)>& v, const SupportBox& support,
                                  const std::vector<double>& tau, std::size_t panels = 16) {
    detail::check_inside(support, dom.lower, dom.upper, 0.0, 0.0, false, "div-curl probe field");
    const auto sums = detail::weighted_sums(
        support, false, panels, tau, 2, [&](const Vec3& x, double) { return w.phi0(x) - w.Phi; },
        [&](const Vec3& x, double, std::vector<double>& out) {
            const VectorSample s = v(x);
            const double c0 = s.J[2][1] - s.J[1][2], c1 = s.J[0][2] - s.J[2][0], c2 = s.J[1][0] - s.J[0][1];
            const double dv = s.J[0][0] + s.J[1][1] + s.J[2][2];
            out[0] = norm2(s.v);
            out[1] = c0 * c0 + c1 * c1 + c2 * c2 + dv * dv;
        });
    ProbeReport r;
    r.name = "div_curl";
    r.tau = tau;
    for (std::size_t k = 0; k < tau.size(); ++k) {
        const double lhs = tau[k] * sums[k][0], rhs = sums[k][1];
        r.lhs.push_back(lhs);
        r.rhs.push_back(rhs);
        r.ratio.push_back(rhs > 0.0 ? lhs / rhs : 0.0);
    }
    finish_report(r);
    return r;
}

/// Point sample of a field and its time derivative.
struct TraceSample {
    Vec3 v{0, 0, 0};
    Vec3 vt{0, 0, 0};
};

/// cos(k t) g(x) with g a spatial bump vector A (1 - |x - c|^2/R^2)^p dir.
struct OscillatingBump {
    Vec3 center{0.5, 0.5, 0.5};
    double radius = 0.3;
    Vec3 dir{1.0, 0.0, 0.0};
    double k = 8.0;
    double amplitude = 1.0;
    int power = 4;

    TraceSample operator()(const Vec3& x, double t) const {
        TraceSample s;
        const double q = norm2(x - center) / (radius * radius);
        if (q >= 1.0) return s;
        const double g = amplitude * std::pow(1.0 - q, power);
        s.v = (g * std::cos(k * t)) * dir;
        s.vt = (-g * k * std::sin(k * t)) * dir;
        return s;
    }
};

/// Time-trace probe: int_{Omega0}|v(x,0)|^2 over
/// tau int_{Q0(delta)}|v|^2 + tau^{-1} int_{Q0(delta)}|v_t|^2.
inline ProbeReport probe_time_trace(const CarlemanWeight& w, const Domain& dom,
                                    const std::function<TraceSample(const Vec3&, double)>& v,
                                    const std::vector<double>& tau, std::size_t panels = 16) {
    SupportBox q0;
    for (int a = 0; a < 3; ++a) {
        q0.lower[a] = dom.lower[a] + dom.shell_width;
        q0.upper[a] = dom.upper[a] - dom.shell_width;
    }
    q0.t_lower = -w.T + w.delta;
    q0.t_upper = w.T - w.delta;
    const std::vector<double> none{0.0};
    auto zero = [](const Vec3&, double) { return 0.0; };
    const auto bulk = detail::weighted_sums(q0, true, panels, none, 2, zero,
                                            [&](const Vec3& x, double t, std::vector<double>& out) {
                                                const TraceSample s = v(x, t);
                                                out[0] = norm2(s.v);
                                                out[1] = norm2(s.vt);
                                            });
    SupportBox slice = q0;
    const auto trace = detail::weighted_sums(slice, false, panels, none, 1, zero,
                                             [&](const Vec3& x, double, std::vector<double>& out) {
                                                 out[0] = norm2(v(x, 0.0).v);
                                             });
    ProbeReport r;
    r.name = "time_trace";
    r.tau = tau;
    for (double t : tau) {
        const double lhs = trace[0][0];
        const double rhs = t * bulk[0][0] + bulk[0][1] / t;
        r.lhs.push_back(lhs);
        r.rhs.push_back(rhs);
        r.ratio.push_back(rhs > 0.0 ? lhs / rhs : 0.0);
    }
    finish_report(r);
    return r;
}

}  // namespace electroseis
