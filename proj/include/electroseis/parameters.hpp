#pragma once

// Material coefficient fields, the derived electric parameters and every
// admissibility condition the forward and inverse machinery relies on.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "domain_grid.hpp"

namespace electroseis {

/// All material coefficients at one point.
struct Material {
    double mu = 1.0;      ///< magnetic permeability
    double eps = 1.0;     ///< electric permittivity
    double sigma = 0.0;   ///< electric conductivity
    double L = 0.0;       ///< electro-kinetic parameter
    double eta = 1.0;     ///< fluid viscosity
    double kappa = 1.0;   ///< fluid flow permeability
    double lambda = 2.0;  ///< Lame
    double G = 1.0;       ///< Lame (shear)
    double C = 1.0;       ///< Biot modulus
    double M = 3.0;       ///< Biot modulus
    double rho = 2.0;     ///< bulk density
    double rho_f = 1.0;   ///< fluid density
    double rho_e = 3.0;   ///< equivalent density
};

/// Per-node coefficient fields plus the derived alpha = 1/mu, beta = 1/eps,
/// gamma = sigma/eps, xi = L eta / (kappa eps).
struct ParameterFields {
    Array3 mu, eps, sigma, L, eta, kappa, lambda, G, C, M, rho, rho_f, rho_e;
    Array3 alpha, beta, gamma, xi;
    bool derived = false;

    const Index3& shape() const { return mu.shape(); }

    Material at(std::size_t n) const {
        return {mu.values()[n],     eps.values()[n], sigma.values()[n], L.values()[n],     eta.values()[n],
                kappa.values()[n],  lambda.values()[n], G.values()[n],  C.values()[n],     M.values()[n],
                rho.values()[n],    rho_f.values()[n], rho_e.values()[n]};
    }

    /// Pointers to the primitive fields paired with their names, in a fixed order.
    std::vector<std::pair<const char*, Array3*>> primitives() {
        return {{"mu", &mu},       {"eps", &eps},       {"sigma", &sigma}, {"L", &L},       {"eta", &eta},
                {"kappa", &kappa}, {"lambda", &lambda}, {"G", &G},         {"C", &C},       {"M", &M},
                {"rho", &rho},     {"rho_f", &rho_f},   {"rho_e", &rho_e}};
    }
    std::vector<std::pair<const char*, const Array3*>> primitives() const {
        auto* self = const_cast<ParameterFields*>(this);
        std::vector<std::pair<const char*, const Array3*>> out;
        for (auto& [name, ptr] : self->primitives()) out.emplace_back(name, ptr);
        return out;
    }
};

inline ParameterFields uniform_fields(const Index3& shape, const Material& m) {
    ParameterFields f;
    f.mu = Array3(shape, m.mu);
    f.eps = Array3(shape, m.eps);
    f.sigma = Array3(shape, m.sigma);
    f.L = Array3(shape, m.L);
    f.eta = Array3(shape, m.eta);
    f.kappa = Array3(shape, m.kappa);
    f.lambda = Array3(shape, m.lambda);
    f.G = Array3(shape, m.G);
    f.C = Array3(shape, m.C);
    f.M = Array3(shape, m.M);
    f.rho = Array3(shape, m.rho);
    f.rho_f = Array3(shape, m.rho_f);
    f.rho_e = Array3(shape, m.rho_e);
    return f;
}

inline std::string node_label(const Index3& shape, std::size_t n) {
    const std::size_t i = n % shape[0];
    const std::size_t j = (n / shape[0]) % shape[1];
    const std::size_t k = n / (shape[0] * shape[1]);
    return to_string({i, j, k});
}

/// Populates alpha, beta, gamma, xi.
///
/// mu, eps, kappa must be strictly positive; eta, sigma and L nonnegative
/// (eta = 0 is the inviscid limit of the Biot damping).
inline ParameterFields derive_em_parameters(ParameterFields f) {
    const auto& shape = f.shape();
    auto require = [&](const Array3& a, const char* name, bool strict) {
        for (std::size_t n = 0; n < a.size(); ++n) {
            const double v = a.values()[n];
            if (!std::isfinite(v) || (strict ? !(v > 0.0) : v < 0.0))
                throw ValidationError(std::string("parameter ") + name + (strict ? " must be positive" : " must be nonnegative") +
                                      " at node " + node_label(shape, n));
        }
    };
    require(f.mu, "mu", true);
    require(f.eps, "eps", true);
    require(f.kappa, "kappa", true);
    require(f.eta, "eta", false);
    require(f.sigma, "sigma", false);
    require(f.L, "L", false);

    f.alpha = Array3(shape);
    f.beta = Array3(shape);
    f.gamma = Array3(shape);
    f.xi = Array3(shape);
    for (std::size_t n = 0; n < f.mu.size(); ++n) {
        const double eps = f.eps.values()[n];
        f.alpha.values()[n] = 1.0 / f.mu.values()[n];
        f.beta.values()[n] = 1.0 / eps;
        f.gamma.values()[n] = f.sigma.values()[n] / eps;
        f.xi.values()[n] = f.L.values()[n] * f.eta.values()[n] / (f.kappa.values()[n] * eps);
    }
    f.derived = true;
    return f;
}

/// Rewrites mu, eps, sigma and L so that the derived parameters equal the
/// given targets (kappa and eta are kept).
inline ParameterFields with_em_targets(ParameterFields f, const Array3& alpha, const Array3& beta, const Array3& gamma,
                                       const Array3& xi) {
    const auto& shape = f.shape();
    for (std::size_t n = 0; n < f.mu.size(); ++n) {
        const double a = alpha.values()[n], b = beta.values()[n];
        if (!(a > 0.0) || !(b > 0.0))
            throw ValidationError("target alpha and beta must be positive at node " + node_label(shape, n));
        if (gamma.values()[n] < 0.0) throw ValidationError("target gamma must be nonnegative at node " + node_label(shape, n));
        const double eps = 1.0 / b;
        f.mu.values()[n] = 1.0 / a;
        f.eps.values()[n] = eps;
        f.sigma.values()[n] = gamma.values()[n] * eps;
        const double eta = f.eta.values()[n];
        const double x = xi.values()[n];
        if (x != 0.0 && !(eta > 0.0)) throw ValidationError("nonzero xi needs positive eta at node " + node_label(shape, n));
        f.L.values()[n] = eta > 0.0 ? x * f.kappa.values()[n] * eps / eta : 0.0;
    }
    return derive_em_parameters(std::move(f));
}

/// Density reduction and the matrices a, a~ of the diagonalized Biot system at one point.
struct NodeDiagonalization {
    double rho0 = 0.0;  ///< rho rho_e - rho_f^2
    double rho1 = 0.0;  ///< rho0 / rho_f
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
    double c = 0.0;  ///< rho_e G / rho0
    double at11 = 0.0, at12 = 0.0, at21 = 0.0, at22 = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0;  ///< eigenvalues of a~, lambda1 >= lambda2

    double det_atilde() const { return at11 * at22 - at12 * at21; }
    double trace_atilde() const { return at11 + at22; }
};

/// a = (rho0/rho_e, rho_f; 0, rho_e)^{-1} (lambda+G-(rho_f/rho_e)C, C; C-(rho_f/rho_e)M, M),
/// a~ = a + c e1 e1^T, eigenvalues from the 2x2 quadratic formula.
inline NodeDiagonalization diagonalize(const Material& m) {
    NodeDiagonalization d;
    d.rho0 = m.rho * m.rho_e - m.rho_f * m.rho_f;
    if (!(d.rho0 > 0.0)) throw ValidationError("admissibility: rho*rho_e - rho_f^2 must be positive");
    d.rho1 = d.rho0 / m.rho_f;
    // upper-triangular inverse
    const double p = d.rho0 / m.rho_e, q = m.rho_f, r = m.rho_e;
    const double i11 = 1.0 / p, i12 = -q / (p * r), i22 = 1.0 / r;
    const double s = m.rho_f / m.rho_e;
    const double k11 = m.lambda + m.G - s * m.C, k12 = m.C, k21 = m.C - s * m.M, k22 = m.M;
    d.a11 = i11 * k11 + i12 * k21;
    d.a12 = i11 * k12 + i12 * k22;
    d.a21 = i22 * k21;
    d.a22 = i22 * k22;
    d.c = m.rho_e * m.G / d.rho0;
    d.at11 = d.c + d.a11;
    d.at12 = d.a12;
    d.at21 = d.a21;
    d.at22 = d.a22;

    const double tr = d.trace_atilde();
    const double disc = (d.at11 - d.at22) * (d.at11 - d.at22) + 4.0 * d.at12 * d.at21;
    const double root = std::sqrt(std::max(disc, 0.0));
    d.lambda1 = 0.5 * (tr + root);
    // the smaller root via the product when the larger one is well away from zero
    d.lambda2 = d.lambda1 > 0.0 ? d.det_atilde() / d.lambda1 : 0.5 * (tr - root);
    return d;
}

struct DiagonalizationData {
    Array3 rho0, rho1, a11, a12, a21, a22, c, at11, at12, at21, at22, lambda1, lambda2;

    NodeDiagonalization at(std::size_t n) const {
        NodeDiagonalization d;
        d.rho0 = rho0.values()[n];
        d.rho1 = rho1.values()[n];
        d.a11 = a11.values()[n];
        d.a12 = a12.values()[n];
        d.a21 = a21.values()[n];
        d.a22 = a22.values()[n];
        d.c = c.values()[n];
        d.at11 = at11.values()[n];
        d.at12 = at12.values()[n];
        d.at21 = at21.values()[n];
        d.at22 = at22.values()[n];
        d.lambda1 = lambda1.values()[n];
        d.lambda2 = lambda2.values()[n];
        return d;
    }
};

inline DiagonalizationData compute_diagonalization(const ParameterFields& f) {
    const auto& shape = f.shape();
    DiagonalizationData d{Array3(shape), Array3(shape), Array3(shape), Array3(shape), Array3(shape),
                          Array3(shape), Array3(shape), Array3(shape), Array3(shape), Array3(shape),
                          Array3(shape), Array3(shape), Array3(shape)};
    for (std::size_t n = 0; n < f.mu.size(); ++n) {
        const Material m = f.at(n);
        if (!(m.rho * m.rho_e - m.rho_f * m.rho_f > 0.0))
            throw ValidationError("admissibility: rho0 = rho*rho_e - rho_f^2 <= 0 at node " + node_label(shape, n));
        const NodeDiagonalization nd = diagonalize(m);
        d.rho0.values()[n] = nd.rho0;
        d.rho1.values()[n] = nd.rho1;
        d.a11.values()[n] = nd.a11;
        d.a12.values()[n] = nd.a12;
        d.a21.values()[n] = nd.a21;
        d.a22.values()[n] = nd.a22;
        d.c.values()[n] = nd.c;
        d.at11.values()[n] = nd.at11;
        d.at12.values()[n] = nd.at12;
        d.at21.values()[n] = nd.at21;
        d.at22.values()[n] = nd.at22;
        d.lambda1.values()[n] = nd.lambda1;
        d.lambda2.values()[n] = nd.lambda2;
    }
    return d;
}

struct AdmissibilityCheck {
    std::string name;
    bool passed = true;
    double min_margin = 0.0;
    Index3 worst{0, 0, 0};
};

struct AdmissibilityReport {
    std::vector<AdmissibilityCheck> checks;
    double threshold = 1e-10;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
    const AdmissibilityCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

/// Margins per node for every strict inequality; a check passes iff its
/// margin exceeds the threshold at every node. Nothing is thrown.
///
/// The SPD margins are determinants; the diagonal entries are positive by
/// the field invariants, so determinant positivity is equivalent to SPD.
inline AdmissibilityReport check_admissibility(const ParameterFields& f, double threshold = 1e-10) {
    AdmissibilityReport report;
    report.threshold = threshold;
    struct Spec {
        const char* name;
        double (*margin)(const Material&, const NodeDiagonalization&);
    };
    static const Spec specs[] = {
        {"density_spd", [](const Material& m, const NodeDiagonalization&) { return m.rho * m.rho_e - m.rho_f * m.rho_f; }},
        {"moduli_spd", [](const Material& m, const NodeDiagonalization&) { return m.lambda * m.M - m.C * m.C; }},
        {"rho_e_gt_rho_f", [](const Material& m, const NodeDiagonalization&) { return m.rho_e - m.rho_f; }},
        {"rho_gt_rho_f", [](const Material& m, const NodeDiagonalization&) { return m.rho - m.rho_f; }},
        {"rho0_positive", [](const Material& m, const NodeDiagonalization&) { return m.rho * m.rho_e - m.rho_f * m.rho_f; }},
        {"det_atilde_positive", [](const Material&, const NodeDiagonalization& d) { return d.det_atilde(); }},
        {"trace_atilde_positive", [](const Material&, const NodeDiagonalization& d) { return d.trace_atilde(); }},
        {"atilde_eigen1_positive", [](const Material&, const NodeDiagonalization& d) { return d.lambda1; }},
        {"atilde_eigen2_positive", [](const Material&, const NodeDiagonalization& d) { return d.lambda2; }},
    };
    for (const auto& s : specs) report.checks.push_back({s.name, true, std::numeric_limits<double>::infinity(), {0, 0, 0}});

    const auto& shape = f.shape();
    for (std::size_t n = 0; n < f.mu.size(); ++n) {
        const Material m = f.at(n);
        NodeDiagonalization d;
        const bool reducible = m.rho * m.rho_e - m.rho_f * m.rho_f > 0.0 && m.rho_f > 0.0 && m.rho_e > 0.0;
        if (reducible) d = diagonalize(m);
        for (std::size_t c = 0; c < std::size(specs); ++c) {
            // without rho0 > 0 the reduced matrices do not exist; report them as failing
            const double margin = (c >= 5 && !reducible) ? -std::numeric_limits<double>::infinity() : specs[c].margin(m, d);
            auto& chk = report.checks[c];
            if (margin < chk.min_margin) {
                chk.min_margin = margin;
                chk.worst = {n % shape[0], (n / shape[0]) % shape[1], n / (shape[0] * shape[1])};
            }
        }
    }
    for (auto& c : report.checks) c.passed = c.min_margin > threshold;
    return report;
}

/// The four speed-squared fields the pseudoconvexity condition is tested on:
/// alpha*beta, rho_e G / rho0 and the two eigenvalues of a~.
struct WaveSpeeds {
    Array3 em;      ///< alpha beta
    Array3 shear;   ///< rho_e G / rho0
    Array3 fast;    ///< larger eigenvalue of a~
    Array3 slow;    ///< smaller eigenvalue of a~

    std::vector<std::pair<const char*, const Array3*>> named() const {
        return {{"alpha_beta", &em}, {"shear", &shear}, {"atilde_fast", &fast}, {"atilde_slow", &slow}};
    }
    double max_biot() const { return std::max({shear.max_abs(), fast.max_abs(), slow.max_abs()}); }
    double max_all() const { return std::max(em.max_abs(), max_biot()); }
};

inline WaveSpeeds wave_speed_fields(const ParameterFields& f, const DiagonalizationData& d, double threshold = 1e-10) {
    if (!f.derived) throw ValidationError("wave speeds: parameters not derived");
    const AdmissibilityReport r = check_admissibility(f, threshold);
    if (!r.passed()) throw ValidationError("wave speeds: parameters are not admissible");
    WaveSpeeds w{Array3(f.shape()), d.c, d.lambda1, d.lambda2};
    for (std::size_t n = 0; n < f.mu.size(); ++n) w.em.values()[n] = f.alpha.values()[n] * f.beta.values()[n];
    return w;
}

/// Fields whose scaled second differences max|d2 f| h^2 / max|f| exceed
/// the tolerance. Discrete samples cannot certify C^2 regularity, so these
/// are warnings only.
inline std::vector<std::string> smoothness_warnings(const ParameterFields& f, const Grid& g, double tolerance = 0.25) {
    std::vector<std::string> out;
    for (const auto& [name, a] : f.primitives()) {
        const double scale = a->max_abs();
        if (scale == 0.0) continue;
        const auto& s = a->shape();
        double worst = 0.0;
        for (std::size_t k = 0; k < s[2]; ++k)
            for (std::size_t j = 0; j < s[1]; ++j)
                for (std::size_t i = 0; i < s[0]; ++i) {
                    const std::size_t idx[3] = {i, j, k};
                    for (int ax = 0; ax < 3; ++ax) {
                        if (idx[ax] == 0 || idx[ax] + 1 >= s[ax]) continue;
                        std::size_t lo[3] = {i, j, k}, hi[3] = {i, j, k};
                        --lo[ax];
                        ++hi[ax];
                        const double d2 = (*a)(hi[0], hi[1], hi[2]) - 2.0 * (*a)(i, j, k) + (*a)(lo[0], lo[1], lo[2]);
                        worst = std::max(worst, std::abs(d2));
                    }
                }
        if (worst / scale > tolerance)
            out.push_back(std::string("field ") + name + " has large second differences (" + std::to_string(worst / scale) +
                          " of its magnitude); Carleman probes assume C^2 coefficients");
    }
    (void)g;
    return out;
}

}  // namespace electroseis
