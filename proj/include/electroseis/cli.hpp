#pragma once

// Pipelines behind the command-line subcommands. Each one reads only the
// config (plus files it names), writes snapshots and CSV reports into the
// output directory and returns an exit code: 0 ok, 1 validation failure,
// 2 numerical failure.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "biot_solver.hpp"
#include "carleman.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "em_solver.hpp"
#include "galerkin_oracle.hpp"
#include "inverse.hpp"
#include "parameters.hpp"
#include "snapshot.hpp"
#include "stability_probe.hpp"

namespace electroseis {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_numerical = 2 };

inline Array3 evaluate_field(const ExperimentConfig& c, const FieldSpec& f, const Grid& g) {
    switch (f.kind) {
        case FieldSpec::Kind::constant: return Array3(g.node_shape(), f.c);
        case FieldSpec::Kind::affine: return sample_nodes(g, [&](const Vec3& x) { return f.c + dot(f.g, x); });
        case FieldSpec::Kind::gaussian:
            return sample_nodes(g, [&](const Vec3& x) { return f.c + f.A * std::exp(-norm2(x - f.center) / (f.width * f.width)); });
        case FieldSpec::Kind::file: {
            const FieldSnapshot s = read_snapshot(resolve_path(c, f.path), g.node_shape());
            if (s.stagger != Stagger::node || s.components.size() != 1)
                throw ValidationError("parameter file '" + f.path + "' must hold one node-centred component");
            return s.components[0];
        }
    }
    throw ValidationError("unknown field expression");
}

/// Base parameter set with EM quantities derived.
inline ParameterFields build_parameter_set(const ExperimentConfig& c, const Grid& g) {
    ParameterFields f = uniform_fields(g.node_shape(), Material{});
    for (auto& [name, field] : f.primitives()) {
        const auto it = c.base.find(name);
        if (it != c.base.end()) *field = evaluate_field(c, it->second, g);
    }
    return derive_em_parameters(std::move(f));
}

/// The uniform Material when every configured field is a constant.
inline Material uniform_material(const ExperimentConfig& c) {
    Material m;
    const std::map<std::string, double*> slots{{"mu", &m.mu},       {"eps", &m.eps},     {"sigma", &m.sigma}, {"L", &m.L},
                                               {"eta", &m.eta},     {"kappa", &m.kappa}, {"lambda", &m.lambda},
                                               {"G", &m.G},         {"C", &m.C},         {"M", &m.M},
                                               {"rho", &m.rho},     {"rho_f", &m.rho_f}, {"rho_e", &m.rho_e}};
    for (const auto& [name, spec] : c.base) {
        if (spec.kind != FieldSpec::Kind::constant)
            throw ValidationError("oracle: base." + name + " must be constant (the oracle needs a uniform material)");
        *slots.at(name) = spec.c;
    }
    return m;
}

inline std::array<StaggeredInitialData, 2> build_initial_data(const ExperimentConfig& c, const DomainGrid& dg) {
    const Grid& g = dg.grid;
    const Domain& d = dg.domain;
    Vec3 mid;
    for (int a = 0; a < 3; ++a) mid[a] = 0.5 * (d.lower[a] + d.upper[a]);
    const double R = 0.45 * d.min_extent(), off = 0.05 * d.min_extent();
    std::array<StaggeredInitialData, 2> out;
    for (int j = 0; j < 2; ++j) {
        const auto& s = c.init[j];
        out[j] = constant_initial_data(g, s.D, s.B);
        if (s.vortex != 0.0) {
            const double sign = j == 0 ? 1.0 : -1.0;
            out[j].B_faces += vortex_face_field(g, mid + Vec3{-off, sign * off, off}, R, s.vortex);
            out[j].D_edges += vortex_edge_field(g, mid + Vec3{off, 0.0, -sign * off}, R, s.vortex);
        }
    }
    return out;
}

inline TwinOptions twin_options(const ExperimentConfig& c) {
    TwinOptions t;
    t.levels = c.inverse.levels;
    t.em_cfl = c.em_cfl;
    t.biot_cfl = c.biot_cfl;
    return t;
}

inline std::vector<SpeedField> speed_list(const WaveSpeeds& w) {
    std::vector<SpeedField> out;
    for (const auto& [name, a] : w.named()) out.push_back({name, a});
    return out;
}

/// Fixed (sigma, theta) or the first feasible pair of the scan.
inline CarlemanWeight configured_weight(const ExperimentConfig& c, const DomainGrid& dg, const WaveSpeeds& w) {
    const auto& cw = c.weight;
    const auto speeds = speed_list(w);
    if (!cw.scan) return build_weight(dg.domain, dg.grid, speeds, cw.x_star, cw.c0, cw.sigma, cw.theta);
    const WeightScan scan = scan_weights(dg.domain, dg.grid, speeds, cw.x_star, cw.c0, cw.sigma_range[0],
                                         cw.sigma_range[1], cw.theta_range[0], cw.theta_range[1], cw.scan_points);
    return build_weight(dg.domain, dg.grid, speeds, cw.x_star, cw.c0, scan.feasible.front().first,
                        scan.feasible.front().second);
}

inline std::string snapshot_name(const std::string& field, std::size_t level) {
    std::ostringstream s;
    s << field << "_" << std::setw(6) << std::setfill('0') << level << ".esnap";
    return s.str();
}

namespace pipeline {

inline int check_params(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
    const DomainGrid dg = build_domain(c.domain);
    const ParameterFields f = build_parameter_set(c, dg.grid);
    const AdmissibilityReport adm = check_admissibility(f, c.threshold);
    CsvWriter csv(out / "check_params.csv", {"check", "kind", "passed", "min_margin", "worst_i", "worst_j", "worst_k", "note"});
    bool ok = adm.passed();
    for (const auto& chk : adm.checks)
        csv.row({chk.name, "admissibility", chk.passed, chk.min_margin, chk.worst[0], chk.worst[1], chk.worst[2], ""});
    for (const auto& w : smoothness_warnings(f, dg.grid))
        csv.row({"smoothness", "warning", true, 0.0, 0, 0, 0, w});
    if (adm.passed()) {
        const WaveSpeeds speeds = wave_speed_fields(f, compute_diagonalization(f), c.threshold);
        for (const auto& [name, a] : speeds.named()) {
            try {
                const PseudoconvexityReport p = check_pseudoconvexity(dg.grid, *a, c.weight.x_star, c.weight.c0);
                ok = ok && p.passed();
                csv.row({std::string("pseudoconvexity_") + name, "pseudoconvexity", p.passed(), p.min_margin, p.worst[0],
                         p.worst[1], p.worst[2], ""});
            } catch (const ValidationError& e) {
                ok = false;
                csv.row({std::string("pseudoconvexity_") + name, "pseudoconvexity", false, 0.0, 0, 0, 0, e.what()});
            }
        }
        try {
            const CarlemanWeight w = configured_weight(c, dg, speeds);
            csv.row({"weight_feasible", "weight", true, w.epsilon, 0, 0, 0,
                     "sigma=" + format_double(w.sigma) + " theta=" + format_double(w.theta) +
                         " Phi=" + format_double(w.Phi) + " delta=" + format_double(w.delta)});
        } catch (const ValidationError& e) {
            ok = false;
            csv.row({"weight_feasible", "weight", false, 0.0, 0, 0, 0, e.what()});
        }
    } else {
        csv.row({"pseudoconvexity", "pseudoconvexity", false, 0.0, 0, 0, 0, "skipped: parameters not admissible"});
    }
    log << "check-params: " << (ok ? "all checks pass" : "some checks fail") << ", report " << csv.path().string() << "\n";
    return ok ? exit_ok : exit_validation;
}

inline int forward(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
    const DomainGrid dg = build_domain(c.domain);
    const ParameterFields f = build_parameter_set(c, dg.grid);
    const AdmissibilityReport adm = check_admissibility(f, c.threshold);
    if (!adm.passed()) {
        for (const auto& chk : adm.checks)
            if (!chk.passed)
                throw ValidationError("forward: parameters not admissible (" + chk.name + " margin " +
                                      format_double(chk.min_margin) + " at node " + to_string(chk.worst) + ")");
    }
    const auto data = build_initial_data(c, dg);
    const TwinOptions topt = twin_options(c);
    const double dt_max = common_time_step(dg.grid, {&f}, topt);
    const Grid g = c.domain.nt > 0 ? [&] {
        Grid q = dg.grid;
        q.nt = static_cast<std::size_t>(c.domain.nt);
        q.dt = dg.domain.T / static_cast<double>(q.nt);
        if (q.dt > dt_max) throw ValidationError("forward: grid.nt = " + std::to_string(q.nt) + " violates the CFL bound");
        return q;
    }() : with_time_step(dg.grid, dg.domain.T, dt_max);

    const EmCoefficients em = em_coefficients(g, f);
    const BiotCoefficients bc = biot_coefficients(f);
    const EmOptions eo{c.em_cfl, c.em_blowup};
    const BiotOptions bo{c.biot_cfl, c.biot_blowup};
    for (int j = 0; j < 2; ++j) {
        const std::string tag = "exp" + std::to_string(j + 1);
        const std::filesystem::path dir = out / tag;
        if (c.snapshots) std::filesystem::create_directories(dir);
        CsvWriter csv(out / ("forward_" + tag + ".csv"),
                      {"level", "time", "em_energy", "biot_energy", "div_B_drift", "max_abs_D", "max_abs_u", "max_abs_w"});
        EmState es = init_em(g, data[j].D_edges, data[j].B_faces).state;
        BiotState bs = init_biot(g, bc, g.dt);
        const Array3 div0 = div_faces(g, es.B);
        for (std::size_t l = 0;; ++l) {
            if (l % c.stride == 0 || l == g.nt) {
                csv.row({l, es.t, em_energy(es, em, g, g.dt), energy_monitor(bs, bc, g, g.dt), (div_faces(g, es.B) - div0).max_abs(),
                         es.D.max_abs(), bs.u.max_abs(), bs.w.max_abs()});
                if (c.snapshots) {
                    write_snapshot(dir / snapshot_name("D", l), make_snapshot(es.D, Stagger::edge, es.t));
                    write_snapshot(dir / snapshot_name("B", l), make_snapshot(es.B, Stagger::face, es.t));
                    write_snapshot(dir / snapshot_name("u", l), make_snapshot(bs.u, Stagger::node, bs.t));
                    write_snapshot(dir / snapshot_name("w", l), make_snapshot(bs.w, Stagger::node, bs.t));
                }
            }
            if (l == g.nt) break;
            const VectorField src = coupling_source(g, f.xi, es.D);
            step_biot_inplace(bs, &src, bc, g, g.dt, nullptr, bo);
            step_em_inplace(es, em, g, g.dt, eo);
        }
    }
    log << "forward: " << g.nt << " steps of dt = " << format_double(g.dt) << " written to " << out.string() << "\n";
    return exit_ok;
}

inline int oracle(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
    const DomainGrid dg = build_domain(c.domain);
    const Material m = uniform_material(c);
    if (!check_admissibility(derive_em_parameters(uniform_fields({2, 2, 2}, m)), c.threshold).passed())
        throw ValidationError("oracle: material is not admissible");
    const auto& o = c.oracle;
    const SeparableSource src = gaussian_pulse_source(o.center, o.width, o.dir, o.window);
    const OracleComparison r = compare_with_fd(dg.domain, dg.grid, m, static_cast<int>(o.m), src, o.t_end, c.biot_cfl);
    const bool ok = r.relative_l2 <= o.tolerance;
    CsvWriter csv(out / "oracle.csv", {"m", "relative_l2", "tolerance", "passed", "fd_norm", "galerkin_norm", "samples",
                                       "t_end", "theta", "korn_constant"});
    csv.row({o.m, r.relative_l2, o.tolerance, ok, r.fd_norm, r.galerkin_norm, r.samples, r.t_end, r.theta, r.korn_constant});
    log << "oracle: relative L2(Q) difference " << format_double(r.relative_l2) << (ok ? " within " : " exceeds ")
        << format_double(o.tolerance) << "\n";
    return ok ? exit_ok : exit_numerical;
}

namespace detail {

template <class Sample>
struct Scaled {
    std::function<Sample(const Vec3&, double)> f;
    double k;
};

inline double ratio_change(const ProbeReport& a, const ProbeReport& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.ratio.size(); ++i) {
        const double ref = std::abs(a.ratio[i]);
        worst = std::max(worst, ref > 0.0 ? std::abs(a.ratio[i] - b.ratio[i]) / ref : std::abs(b.ratio[i]));
    }
    return worst;
}

}  // namespace detail

inline int carleman_probe(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
    const DomainGrid dg = build_domain(c.domain);
    const ParameterFields f = build_parameter_set(c, dg.grid);
    const WaveSpeeds speeds = wave_speed_fields(f, compute_diagonalization(f), c.threshold);
    const CarlemanWeight w = configured_weight(c, dg, speeds);
    const auto tau = tau_grid(c.weight.tau_min, c.weight.tau_max, c.weight.tau_count);
    const std::size_t panels = c.weight.panels;
    const Domain& d = dg.domain;
    Vec3 mid;
    for (int a = 0; a < 3; ++a) mid[a] = 0.5 * (d.lower[a] + d.upper[a]);
    const double R = 0.3 * d.min_extent();

    // mean of the EM speed squared; the probes only need a smooth positive c
    double cmean = 0.0;
    for (double v : speeds.em.values()) cmean += v / static_cast<double>(speeds.em.size());

    std::vector<std::pair<ProbeReport, double>> reports;
    {
        SpaceTimeBump b;
        b.center = mid;
        b.radius = R;
        b.half_width = 0.5 * w.T;
        SpaceTimeBump b10 = b;
        b10.amplitude = 10.0;
        auto speed = [&](const Vec3&) { return cmean; };
        const auto r1 = probe_wave_carleman(w, d, b, b.support(), speed, tau, panels);
        const auto r10 = probe_wave_carleman(w, d, b10, b10.support(), speed, tau, panels);
        reports.emplace_back(r1, detail::ratio_change(r1, r10));
    }
    {
        GradientBump g;
        g.center = mid;
        g.radius = R;
        GradientBump g10 = g;
        g10.amplitude = 10.0;
        const auto r1 = probe_div_curl(w, d, g, g.support(), tau, panels);
        const auto r10 = probe_div_curl(w, d, g10, g10.support(), tau, panels);
        reports.emplace_back(r1, detail::ratio_change(r1, r10));
    }
    {
        OscillatingBump o;
        o.center = mid;
        o.radius = R;
        OscillatingBump o10 = o;
        o10.amplitude = 10.0;
        const auto r1 = probe_time_trace(w, d, o, tau, panels);
        const auto r10 = probe_time_trace(w, d, o10, tau, panels);
        reports.emplace_back(r1, detail::ratio_change(r1, r10));
    }

    CsvWriter curves(out / "carleman_probe.csv", {"probe", "tau", "lhs", "rhs", "ratio"});
    CsvWriter summary(out / "carleman_summary.csv",
                      {"probe", "knee_tau", "ratio_at_knee", "max_ratio", "bounded", "rescaling_change", "invariant"});
    bool ok = true;
    for (const auto& [r, change] : reports) {
        for (std::size_t i = 0; i < r.tau.size(); ++i) curves.row({r.name, r.tau[i], r.lhs[i], r.rhs[i], r.ratio[i]});
        const bool invariant = change <= 1e-12;
        ok = ok && r.bounded && invariant;
        summary.row({r.name, r.has_knee ? r.tau[r.knee] : std::nan(""), r.has_knee ? r.ratio[r.knee] : std::nan(""),
                     r.max_ratio, r.bounded, change, invariant});
        log << "carleman-probe: " << r.name << " max ratio " << format_double(r.max_ratio)
            << (r.bounded ? " bounded" : " NOT bounded") << "\n";
    }
    return ok ? exit_ok : exit_numerical;
}

inline int reconstruct(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
    const DomainGrid dg = build_domain(c.domain);
    const ParameterFields set1 = build_parameter_set(c, dg.grid);
    if (!check_admissibility(set1, c.threshold).passed()) throw ValidationError("reconstruct: base parameters not admissible");
    const ParameterFields set2 =
        c.perturb.enabled ? perturbed_set(set1, dg.domain, dg.grid, c.perturb.bumps, c.perturb.scale) : set1;
    if (!check_admissibility(set2, c.threshold).passed())
        throw ValidationError("reconstruct: perturbed parameters not admissible");
    const Grid& g = dg.grid;
    const TwinRun run = run_twin_experiment(g, set1, set2, build_initial_data(c, dg), twin_options(c));
    const InitialDerivatives der = estimate_initial_derivatives(g, run.measurement);
    SystemOptions so;
    so.sigma_min = c.inverse.sigma_min;
    const ReconstructionSystem sys = assemble_system(g, dg.regions, run.init, der, rho1_field(set1), so);
    FixedPointOptions fp;
    fp.tol = c.inverse.tol_fp;
    fp.max_iter = c.inverse.max_iter;
    fp.poisson.rel_tol = c.inverse.poisson_tol;
    fp.poisson.wide = c.inverse.wide_poisson;
    const ReconstructionResult r = electroseis::reconstruct(sys, fp);
    const ReconstructionErrors e = reconstruction_errors(sys, r, parameter_difference(set1, set2));

    CsvWriter csv(out / "reconstruct.csv", {"quantity", "value"});
    csv.row({"error_alpha", e.alpha});
    csv.row({"error_beta", e.beta});
    csv.row({"error_gamma", e.gamma});
    csv.row({"error_xi", e.xi});
    csv.row({"dt", run.dt});
    csv.row({"omega0_nodes", sys.nodes.size()});
    csv.row({"min_sigma_ratio", sys.min_sigma_ratio});
    csv.row({"iterations", r.iterations});
    csv.row({"contraction", r.contraction});
    csv.row({"ls_residual", r.ls_residual});
    csv.row({"xi_cross_check", r.xi_cross_check});
    CsvWriter it(out / "reconstruct_iterations.csv", {"iteration", "change", "ls_residual", "poisson_iterations"});
    for (const auto& rec : r.log) it.row({rec.iteration, rec.change, rec.ls_residual, rec.poisson_iterations});
    write_snapshot(out / "alpha.esnap", make_snapshot(r.alpha, Stagger::node, 0.0));
    write_snapshot(out / "beta.esnap", make_snapshot(r.beta, Stagger::node, 0.0));
    write_snapshot(out / "gamma.esnap", make_snapshot(r.gamma, Stagger::node, 0.0));
    write_snapshot(out / "xi.esnap", make_snapshot(r.xi, Stagger::node, 0.0));
    log << "reconstruct: relative errors alpha " << format_double(e.alpha) << ", beta " << format_double(e.beta)
        << ", gamma " << format_double(e.gamma) << ", xi " << format_double(e.xi) << "\n";
    return exit_ok;
}

inline int stability_sweep(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
    const DomainGrid dg = build_domain(c.domain);
    const ParameterFields base = build_parameter_set(c, dg.grid);
    if (!check_admissibility(base, c.threshold).passed()) throw ValidationError("stability-sweep: base parameters not admissible");
    SweepOptions opt;
    opt.scales = c.sweep.scales;
    opt.perturbation = c.perturb.bumps;
    opt.t_obs = c.sweep.t_obs;
    opt.twin = twin_options(c);
    opt.safety = c.sweep.safety;
    opt.max_exponent = c.sweep.max_exponent;
    opt.min_r2 = c.sweep.min_r2;
    std::optional<CarlemanWeight> weight;
    try {
        weight = configured_weight(c, dg, wave_speed_fields(base, compute_diagonalization(base), c.threshold));
    } catch (const ValidationError& e) {
        log << "stability-sweep: no admissible weight, weight exponent omitted (" << e.what() << ")\n";
    }
    const SweepResult r = holder_sweep(dg, base, build_initial_data(c, dg), opt, weight ? &*weight : nullptr,
                                       [&](const SweepPoint& p) {
                                           log << "stability-sweep: s = " << format_double(p.s) << " Lambda "
                                               << format_double(p.metrics.lambda) << " O "
                                               << format_double(p.metrics.O_sum()) << "\n";
                                       });
    CsvWriter pts(out / "stability_sweep.csv", {"s", "lambda_tilde", "lambda", "O1", "O2", "O_sum", "bound"});
    for (const auto& p : r.points)
        pts.row({p.s, p.metrics.lambda_tilde, p.metrics.lambda, p.metrics.O1, p.metrics.O2, p.metrics.O_sum(),
                 r.fit.C0 * std::pow(p.metrics.O_sum(), r.fit.c0)});
    CsvWriter sum(out / "stability_summary.csv", {"quantity", "value"});
    sum.row({"c0_fit", r.fit.c0});
    sum.row({"C0_fit", r.fit.C0});
    sum.row({"r2", r.fit.r2});
    sum.row({"fit_points", r.fit.points});
    sum.row({"worst_bound_ratio", r.worst_bound_ratio});
    sum.row({"exponent_ok", r.exponent_ok});
    sum.row({"r2_ok", r.r2_ok});
    sum.row({"bound_ok", r.bound_ok});
    sum.row({"monotone", r.monotone});
    sum.row({"weight_exponent", r.weight_exponent});
    sum.row({"dt", r.dt});
    sum.row({"levels", r.levels});
    sum.row({"passed", r.passed()});
    log << "stability-sweep: c0 = " << format_double(r.fit.c0) << ", R^2 = " << format_double(r.fit.r2)
        << (r.passed() ? ", verdict pass" : ", verdict FAIL") << "\n";
    return r.passed() ? exit_ok : exit_numerical;
}

}  // namespace pipeline

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"check-params", "forward",     "oracle",
                                                "carleman-probe", "reconstruct", "stability-sweep"};
    return names;
}

/// Runs one subcommand; errors are reported on err and mapped to exit codes.
inline int run_command(const std::string& cmd, const std::filesystem::path& config_path,
                       const std::filesystem::path& out_override, std::ostream& log, std::ostream& err) {
    try {
        const ExperimentConfig c = parse_config(config_path);
        const std::filesystem::path out = out_override.empty() ? output_directory(c) : out_override;
        std::filesystem::create_directories(out);
        if (cmd == "check-params") return pipeline::check_params(c, out, log);
        if (cmd == "forward") return pipeline::forward(c, out, log);
        if (cmd == "oracle") return pipeline::oracle(c, out, log);
        if (cmd == "carleman-probe") return pipeline::carleman_probe(c, out, log);
        if (cmd == "reconstruct") return pipeline::reconstruct(c, out, log);
        if (cmd == "stability-sweep") return pipeline::stability_sweep(c, out, log);
        err << "unknown command '" << cmd << "'\n";
        return exit_validation;
    } catch (const ValidationError& e) {
        err << cmd << ": validation failure: " << e.what() << "\n";
        return exit_validation;
    } catch (const NumericalError& e) {
        err << cmd << ": numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::filesystem::filesystem_error& e) {
        err << cmd << ": " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        err << cmd << ": numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }
}

}  // namespace electroseis
