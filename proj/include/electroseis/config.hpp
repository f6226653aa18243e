#pragma once

// Line-based experiment configuration: `section.key = value`, `#` comments.
// Every key is declared in one table with its type; anything else is rejected.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "domain_grid.hpp"
#include "inverse.hpp"
#include "parameters.hpp"

namespace electroseis {

enum class ValueType { integer, pos_integer, real, pos_real, nonneg_real, boolean, vec3, real_list, text, field, real_or_scan };

/// Scalar field expression: constant, affine c + g.x, gaussian c + A exp(-|x - x0|^2 / w^2), or a snapshot file.
struct FieldSpec {
    enum class Kind { constant, affine, gaussian, file } kind = Kind::constant;
    double c = 0.0;
    Vec3 g{0.0, 0.0, 0.0};
    double A = 0.0;
    Vec3 center{0.0, 0.0, 0.0};
    double width = 1.0;
    std::string path;
};

struct ExperimentConfig {
    std::filesystem::path source;  ///< the config file; relative paths resolve against its directory
    DomainConfig domain;
    std::map<std::string, FieldSpec> base;  ///< primitive name -> expression; unset ones use Material defaults
    double threshold = 1e-10;               ///< strictness margin for admissibility

    struct Perturbation {
        bool enabled = false;
        double scale = 1.0;
        BumpPerturbation bumps;
    } perturb;

    struct InitialSpec {
        Vec3 D{0.0, 0.0, 0.0}, B{0.0, 0.0, 0.0};
        double vortex = 0.0;
    };
    std::array<InitialSpec, 2> init{InitialSpec{{0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}, 0.0},
                                    InitialSpec{{0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}, 0.0}};

    double em_cfl = 0.5, biot_cfl = 0.4;
    double em_blowup = 1e100, biot_blowup = 1e100;
    std::size_t stride = 1;
    bool snapshots = true;

    struct Weight {
        Vec3 x_star{-2.0, 0.5, 0.5};
        double c0 = 0.5;
        double sigma = 11.0, theta = 0.1;
        bool scan = false;
        std::array<double, 2> sigma_range{1.0, 100.0}, theta_range{0.01, 1.0};
        std::size_t scan_points = 9;
        double tau_min = 1.0, tau_max = 64.0;
        std::size_t tau_count = 16, panels = 16;
    } weight;

    struct Inverse {
        double sigma_min = 1e-6;
        double tol_fp = 1e-8;
        std::size_t max_iter = 100;
        std::size_t levels = min_snapshot_levels;
        double poisson_tol = 1e-10;
        bool wide_poisson = true;
    } inverse;

    struct Sweep {
        std::vector<double> scales{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2};
        double t_obs = 0.5;
        double safety = 1.5, max_exponent = 1.2, min_r2 = 0.95;
    } sweep;

    struct Oracle {
        long long m = 32;
        double t_end = 0.15;
        Vec3 center{0.5, 0.5, 0.5};
        double width = 0.12;
        Vec3 dir{1.0, 0.5, -0.3};
        double window = 0.15;
        double tolerance = 2e-2;
    } oracle;

    std::string output_dir;  ///< empty: <config stem>_out next to the config
};

namespace cfg {

struct KeySpec {
    const char* name;
    ValueType type;
};

inline const std::vector<KeySpec>& schema() {
    using V = ValueType;
    static const std::vector<KeySpec> keys = {
        {"domain.lower", V::vec3}, {"domain.upper", V::vec3}, {"domain.shell_width", V::pos_real},
        {"domain.T", V::pos_real}, {"domain.delta", V::pos_real},
        {"grid.n1", V::pos_integer}, {"grid.n2", V::pos_integer}, {"grid.n3", V::pos_integer}, {"grid.nt", V::integer},
        {"base.mu", V::field}, {"base.eps", V::field}, {"base.sigma", V::field}, {"base.L", V::field},
        {"base.eta", V::field}, {"base.kappa", V::field}, {"base.lambda", V::field}, {"base.G", V::field},
        {"base.C", V::field}, {"base.M", V::field}, {"base.rho", V::field}, {"base.rho_f", V::field},
        {"base.rho_e", V::field}, {"base.threshold", V::pos_real},
        {"perturb.enabled", V::boolean}, {"perturb.scale", V::nonneg_real}, {"perturb.radius", V::pos_real},
        {"perturb.alpha", V::real}, {"perturb.beta", V::real}, {"perturb.gamma", V::real}, {"perturb.xi", V::real},
        {"perturb.center_alpha", V::vec3}, {"perturb.center_beta", V::vec3}, {"perturb.center_gamma", V::vec3},
        {"perturb.center_xi", V::vec3},
        {"init1.D", V::vec3}, {"init1.B", V::vec3}, {"init1.vortex", V::real},
        {"init2.D", V::vec3}, {"init2.B", V::vec3}, {"init2.vortex", V::real},
        {"em.cfl", V::pos_real}, {"em.blowup", V::pos_real}, {"biot.cfl", V::pos_real}, {"biot.blowup", V::pos_real},
        {"forward.stride", V::pos_integer}, {"forward.snapshots", V::boolean},
        {"weight.x_star", V::vec3}, {"weight.c0", V::pos_real}, {"weight.sigma", V::real_or_scan},
        {"weight.theta", V::real_or_scan}, {"weight.sigma_range", V::real_list}, {"weight.theta_range", V::real_list},
        {"weight.scan_points", V::pos_integer},
        {"probe.tau_min", V::pos_real}, {"probe.tau_max", V::pos_real}, {"probe.tau_count", V::pos_integer},
        {"probe.panels", V::pos_integer},
        {"inverse.sigma_min", V::pos_real}, {"inverse.tol_fp", V::pos_real}, {"inverse.max_iter", V::pos_integer},
        {"inverse.levels", V::pos_integer}, {"inverse.poisson_tol", V::pos_real}, {"inverse.wide_poisson", V::boolean},
        {"sweep.scales", V::real_list}, {"sweep.t_obs", V::pos_real}, {"sweep.safety", V::pos_real},
        {"sweep.max_exponent", V::pos_real}, {"sweep.min_r2", V::pos_real},
        {"oracle.m", V::pos_integer}, {"oracle.t_end", V::pos_real}, {"oracle.center", V::vec3},
        {"oracle.width", V::pos_real}, {"oracle.dir", V::vec3}, {"oracle.window", V::pos_real},
        {"oracle.tolerance", V::pos_real},
        {"output.dir", V::text},
    };
    return keys;
}

inline const KeySpec* find_key(const std::string& k) {
    for (const auto& s : schema())
        if (k == s.name) return &s;
    return nullptr;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::vector<std::string> tokens(const std::string& v) {
    std::string s = v;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

inline std::optional<double> to_real(const std::string& t) {
    if (t.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> to_integer(const std::string& t) {
    if (t.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || errno == ERANGE) return std::nullopt;
    return v;
}

inline bool valid_utf8(const std::string& s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
        if (len == 0 || i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        i += len;
    }
    return true;
}

struct Entry {
    std::string value;
    std::size_t line = 0;
};

class Reader {
public:
    explicit Reader(std::map<std::string, Entry> entries) : e_(std::move(entries)) {}

    bool has(const std::string& k) const { return e_.count(k) > 0; }
    bool has_section(const std::string& s) const {
        return std::any_of(e_.begin(), e_.end(), [&](const auto& p) { return p.first.rfind(s + ".", 0) == 0; });
    }
    std::size_t line(const std::string& k) const { return e_.at(k).line; }

    [[noreturn]] void fail(const std::string& k, const std::string& what) const {
        throw ValidationError("config line " + std::to_string(line(k)) + ": " + k + ": " + what);
    }

    double real(const std::string& k) const {
        const auto v = to_real(e_.at(k).value);
        if (!v) fail(k, "number expected, got '" + e_.at(k).value + "'");
        return *v;
    }
    long long integer(const std::string& k) const {
        const auto v = to_integer(e_.at(k).value);
        if (!v) fail(k, "integer expected, got '" + e_.at(k).value + "'");
        return *v;
    }
    Vec3 vec3(const std::string& k) const {
        const auto t = tokens(e_.at(k).value);
        if (t.size() != 3) fail(k, "three numbers expected");
        Vec3 out;
        for (int a = 0; a < 3; ++a) {
            const auto v = to_real(t[a]);
            if (!v) fail(k, "number expected, got '" + t[a] + "'");
            out[a] = *v;
        }
        return out;
    }
    std::vector<double> list(const std::string& k) const {
        std::vector<double> out;
        for (const auto& t : tokens(e_.at(k).value)) {
            const auto v = to_real(t);
            if (!v) fail(k, "number expected, got '" + t + "'");
            out.push_back(*v);
        }
        if (out.empty()) fail(k, "list of numbers expected");
        return out;
    }
    bool boolean(const std::string& k) const {
        const std::string& v = e_.at(k).value;
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        fail(k, "boolean expected (true/false), got '" + v + "'");
    }
    const std::string& text(const std::string& k) const { return e_.at(k).value; }

    FieldSpec field(const std::string& k) const {
        const auto t = tokens(e_.at(k).value);
        FieldSpec f;
        auto num = [&](std::size_t i) {
            const auto v = to_real(t[i]);
            if (!v) fail(k, "number expected, got '" + t[i] + "'");
            return *v;
        };
        if (t.size() == 1 && to_real(t[0])) {
            f.c = num(0);
        } else if (!t.empty() && t[0] == "affine") {
            if (t.size() != 5) fail(k, "affine expects c g1 g2 g3");
            f.kind = FieldSpec::Kind::affine;
            f.c = num(1);
            f.g = {num(2), num(3), num(4)};
        } else if (!t.empty() && t[0] == "gaussian") {
            if (t.size() != 7) fail(k, "gaussian expects c A x1 x2 x3 width");
            f.kind = FieldSpec::Kind::gaussian;
            f.c = num(1);
            f.A = num(2);
            f.center = {num(3), num(4), num(5)};
            f.width = num(6);
            if (!(f.width > 0.0)) fail(k, "gaussian width must be positive");
        } else if (!t.empty() && t[0] == "file") {
            if (t.size() != 2) fail(k, "file expects one path");
            f.kind = FieldSpec::Kind::file;
            f.path = t[1];
        } else {
            fail(k, "field expression expected (number, affine, gaussian or file), got '" + e_.at(k).value + "'");
        }
        return f;
    }

    /// Type check of one entry against its declared type.
    void check(const std::string& k, ValueType type) const {
        switch (type) {
            case ValueType::integer:
                if (integer(k) < 0) fail(k, "nonnegative integer required");
                break;
            case ValueType::pos_integer: {
                const auto v = to_integer(e_.at(k).value);
                if (!v || *v <= 0) fail(k, "positive integer required");
                break;
            }
            case ValueType::real: real(k); break;
            case ValueType::pos_real:
                if (!(real(k) > 0.0)) fail(k, "positive number required");
                break;
            case ValueType::nonneg_real:
                if (!(real(k) >= 0.0)) fail(k, "nonnegative number required");
                break;
            case ValueType::boolean: boolean(k); break;
            case ValueType::vec3: vec3(k); break;
            case ValueType::real_list: list(k); break;
            case ValueType::text: break;
            case ValueType::field: field(k); break;
            case ValueType::real_or_scan:
                if (text(k) != "scan" && !(real(k) > 0.0)) fail(k, "positive number or 'scan' required");
                break;
        }
    }

private:
    std::map<std::string, Entry> e_;
};

/// Raw entries with syntax, unknown-key, duplicate and type checks.
inline std::map<std::string, Entry> read_entries(std::istream& in) {
    std::map<std::string, Entry> out;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (!valid_utf8(raw)) throw ValidationError("config line " + std::to_string(lineno) + ": invalid UTF-8");
        if (lineno == 1 && raw.rfind("\xEF\xBB\xBF", 0) == 0) raw.erase(0, 3);
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected 'section.key = value'");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const auto dot = key.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": key '" + key +
                                  "' is not of the form section.key");
        if (!find_key(key)) throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (value.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": " + key + ": missing value");
        const auto [it, fresh] = out.emplace(key, Entry{value, lineno});
        if (!fresh)
            throw ValidationError("config: duplicate key '" + key + "' on lines " + std::to_string(it->second.line) +
                                  " and " + std::to_string(lineno));
    }
    return out;
}

}  // namespace cfg

/// Parses and validates; source names the file for messages and relative paths.
inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& source = {}) {
    const cfg::Reader r(cfg::read_entries(in));
    for (const auto& k : cfg::schema())
        if (r.has(k.name)) r.check(k.name, k.type);

    ExperimentConfig c;
    c.source = source;
    for (const char* k : {"grid.n1", "grid.n2", "grid.n3"})
        if (!r.has(k)) throw ValidationError(std::string("config: missing mandatory key '") + k + "'");
    if (!r.has_section("base")) throw ValidationError("config: missing mandatory parameter set block 'base'");

    auto real = [&](const char* k, double& v) {
        if (r.has(k)) v = r.real(k);
    };
    auto count = [&](const char* k, std::size_t& v) {
        if (r.has(k)) v = static_cast<std::size_t>(r.integer(k));
    };
    auto vec = [&](const char* k, Vec3& v) {
        if (r.has(k)) v = r.vec3(k);
    };
    auto flag = [&](const char* k, bool& v) {
        if (r.has(k)) v = r.boolean(k);
    };

    vec("domain.lower", c.domain.lower);
    vec("domain.upper", c.domain.upper);
    real("domain.shell_width", c.domain.shell_width);
    real("domain.T", c.domain.T);
    real("domain.delta", c.domain.delta);
    c.domain.n = {r.integer("grid.n1"), r.integer("grid.n2"), r.integer("grid.n3")};
    if (r.has("grid.nt")) c.domain.nt = r.integer("grid.nt");
    for (int a = 0; a < 3; ++a)
        if (!(c.domain.upper[a] > c.domain.lower[a]))
            throw ValidationError("config: domain.upper must exceed domain.lower on every axis");

    for (const char* p : {"mu", "eps", "sigma", "L", "eta", "kappa", "lambda", "G", "C", "M", "rho", "rho_f", "rho_e"}) {
        const std::string k = std::string("base.") + p;
        if (r.has(k)) c.base[p] = r.field(k);
    }
    real("base.threshold", c.threshold);

    flag("perturb.enabled", c.perturb.enabled);
    real("perturb.scale", c.perturb.scale);
    real("perturb.radius", c.perturb.bumps.radius);
    const char* pnames[4] = {"alpha", "beta", "gamma", "xi"};
    for (int i = 0; i < 4; ++i) {
        real((std::string("perturb.") + pnames[i]).c_str(), c.perturb.bumps.amplitudes[i]);
        vec((std::string("perturb.center_") + pnames[i]).c_str(), c.perturb.bumps.centers[i]);
    }

    for (int j = 0; j < 2; ++j) {
        const std::string s = "init" + std::to_string(j + 1) + ".";
        vec((s + "D").c_str(), c.init[j].D);
        vec((s + "B").c_str(), c.init[j].B);
        real((s + "vortex").c_str(), c.init[j].vortex);
    }

    real("em.cfl", c.em_cfl);
    real("em.blowup", c.em_blowup);
    real("biot.cfl", c.biot_cfl);
    real("biot.blowup", c.biot_blowup);
    count("forward.stride", c.stride);
    flag("forward.snapshots", c.snapshots);

    vec("weight.x_star", c.weight.x_star);
    real("weight.c0", c.weight.c0);
    for (const char* k : {"weight.sigma", "weight.theta"})
        if (r.has(k)) {
            if (r.text(k) == "scan") c.weight.scan = true;
            else (k[7] == 's' ? c.weight.sigma : c.weight.theta) = r.real(k);
        }
    for (const char* k : {"weight.sigma_range", "weight.theta_range"})
        if (r.has(k)) {
            const auto v = r.list(k);
            if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] >= v[0])) r.fail(k, "two increasing positive numbers expected");
            (k[7] == 's' ? c.weight.sigma_range : c.weight.theta_range) = {v[0], v[1]};
        }
    count("weight.scan_points", c.weight.scan_points);
    real("probe.tau_min", c.weight.tau_min);
    real("probe.tau_max", c.weight.tau_max);
    count("probe.tau_count", c.weight.tau_count);
    count("probe.panels", c.weight.panels);
    if (!(c.weight.tau_max > c.weight.tau_min)) throw ValidationError("config: probe.tau_max must exceed probe.tau_min");
    if (c.weight.tau_count < 2) throw ValidationError("config: probe.tau_count must be at least 2");

    real("inverse.sigma_min", c.inverse.sigma_min);
    real("inverse.tol_fp", c.inverse.tol_fp);
    count("inverse.max_iter", c.inverse.max_iter);
    count("inverse.levels", c.inverse.levels);
    real("inverse.poisson_tol", c.inverse.poisson_tol);
    flag("inverse.wide_poisson", c.inverse.wide_poisson);
    if (c.inverse.levels < min_snapshot_levels)
        r.fail("inverse.levels", "at least " + std::to_string(min_snapshot_levels) + " snapshot levels required");

    if (r.has("sweep.scales")) {
        c.sweep.scales = r.list("sweep.scales");
        for (double s : c.sweep.scales)
            if (!(s >= 0.0)) r.fail("sweep.scales", "scales must be nonnegative");
    }
    real("sweep.t_obs", c.sweep.t_obs);
    real("sweep.safety", c.sweep.safety);
    real("sweep.max_exponent", c.sweep.max_exponent);
    real("sweep.min_r2", c.sweep.min_r2);

    if (r.has("oracle.m")) c.oracle.m = r.integer("oracle.m");
    real("oracle.t_end", c.oracle.t_end);
    vec("oracle.center", c.oracle.center);
    real("oracle.width", c.oracle.width);
    vec("oracle.dir", c.oracle.dir);
    real("oracle.window", c.oracle.window);
    real("oracle.tolerance", c.oracle.tolerance);

    if (r.has("output.dir")) c.output_dir = r.text("output.dir");
    return c;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path.string() + "'");
    return parse_config(in, path);
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

/// Relative paths resolve against the config file's directory.
inline std::filesystem::path resolve_path(const ExperimentConfig& c, const std::string& p) {
    const std::filesystem::path q(p);
    if (q.is_absolute() || c.source.empty()) return q;
    return c.source.parent_path() / q;
}

inline std::filesystem::path output_directory(const ExperimentConfig& c) {
    if (!c.output_dir.empty()) return resolve_path(c, c.output_dir);
    if (c.source.empty()) return "electroseis_out";
    return c.source.parent_path() / (c.source.stem().string() + "_out");
}

}  // namespace electroseis
