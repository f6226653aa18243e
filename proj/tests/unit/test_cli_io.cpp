#include <gtest/gtest.h>

#include <bit>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "electroseis/cli.hpp"

using namespace electroseis;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config_string(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

const std::string kMinimal = "grid.n1 = 8\ngrid.n2 = 8\ngrid.n3 = 8\nbase.mu = 1\n";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("electroseis_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

std::vector<unsigned char> bytes_of(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string text_of(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(ELECTROSEIS_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

FieldSnapshot random_snapshot(std::uint32_t seed, Index3 dims, std::size_t comps) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1e3);
    FieldSnapshot s{Stagger::face, dims, 0.125, {}};
    for (std::size_t c = 0; c < comps; ++c) {
        Array3 a(dims);
        for (double& v : a.values()) v = nd(rng);
        s.components.push_back(a);
    }
    s.components[0].values()[0] = -0.0;
    s.components[0].values()[1] = 4.9e-324;
    return s;
}

bool bit_equal(const FieldSnapshot& a, const FieldSnapshot& b) {
    if (a.stagger != b.stagger || a.dims != b.dims || std::bit_cast<std::uint64_t>(a.time) != std::bit_cast<std::uint64_t>(b.time) ||
        a.components.size() != b.components.size())
        return false;
    for (std::size_t c = 0; c < a.components.size(); ++c)
        for (std::size_t n = 0; n < a.components[c].size(); ++n)
            if (std::bit_cast<std::uint64_t>(a.components[c].values()[n]) !=
                std::bit_cast<std::uint64_t>(b.components[c].values()[n]))
                return false;
    return true;
}

}  // namespace

TEST(Config, MinimalFileGetsDefaults) {
    const ExperimentConfig c = parse_config_string(kMinimal);
    EXPECT_EQ(c.em_cfl, 0.5);
    EXPECT_EQ(c.biot_cfl, 0.4);
    EXPECT_EQ(c.inverse.sigma_min, 1e-6);
    EXPECT_EQ(c.inverse.levels, 6u);
    EXPECT_EQ(c.domain.n[0], 8);
    EXPECT_EQ(c.domain.upper[2], 1.0);
    EXPECT_FALSE(c.perturb.enabled);
    ASSERT_EQ(c.base.size(), 1u);
    EXPECT_EQ(c.base.at("mu").c, 1.0);
    EXPECT_EQ(c.init[0].B[0], 1.0);
    EXPECT_EQ(c.init[0].D[1], 1.0);
    EXPECT_EQ(c.init[1].D[2], 1.0);
}

TEST(Config, NegativeGridSizeNeedsPositiveInteger) {
    const std::string e = error_of("grid.n1 = -4\ngrid.n2 = 8\ngrid.n3 = 8\nbase.mu = 1\n");
    EXPECT_NE(e.find("positive integer required"), std::string::npos) << e;
    EXPECT_NE(e.find("line 1"), std::string::npos) << e;
    EXPECT_NE(error_of("grid.n1 = 2.5\ngrid.n2 = 8\ngrid.n3 = 8\nbase.mu = 1\n").find("positive integer required"),
              std::string::npos);
}

TEST(Config, DuplicateKeyNamesBothLines) {
    const std::string e = error_of("grid.n1 = 8\n# comment\ngrid.n2 = 8\ngrid.n1 = 9\ngrid.n3 = 8\nbase.mu = 1\n");
    EXPECT_NE(e.find("duplicate key 'grid.n1'"), std::string::npos) << e;
    EXPECT_NE(e.find("lines 1 and 4"), std::string::npos) << e;
}

TEST(Config, UnknownKeyAndTypeMismatch) {
    EXPECT_NE(error_of(kMinimal + "em.cfll = 0.3\n").find("unknown key 'em.cfll'"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "sweep = 1\n").find("section.key"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "em.cfl = fast\n").find("number expected"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "em.cfl = -0.3\n").find("positive number required"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "domain.lower = 0 0\n").find("three numbers"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "perturb.enabled = maybe\n").find("boolean"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "base.eps = quadratic 1 2\n").find("field expression"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "em.cfl =\n").find("missing value"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "no equals sign\n").find("section.key = value"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "inverse.levels = 5\n").find("at least 6"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "base.rho = \xff\n").find("UTF-8"), std::string::npos);
}

TEST(Config, MissingMandatoryBlocks) {
    EXPECT_NE(error_of("grid.n1 = 8\ngrid.n2 = 8\nbase.mu = 1\n").find("missing mandatory key 'grid.n3'"), std::string::npos);
    EXPECT_NE(error_of("grid.n1 = 8\ngrid.n2 = 8\ngrid.n3 = 8\n").find("'base'"), std::string::npos);
    EXPECT_NE(error_of(kMinimal + "domain.upper = 1 0 1\n").find("must exceed"), std::string::npos);
}

TEST(Config, ExpressionsListsAndComments) {
    const ExperimentConfig c = parse_config_string(kMinimal +
                                                   "  base.sigma = affine 0.1 0.2 0 0   # layered\n"
                                                   "base.L = gaussian 0 0.3 0.5 0.5 0.5 0.2\n"
                                                   "base.rho = file rho.esnap\n"
                                                   "sweep.scales = 0.5, 0.25 0.125\n"
                                                   "weight.theta = scan\n"
                                                   "weight.sigma_range = 2 50\n"
                                                   "output.dir = results\n");
    EXPECT_EQ(c.base.at("sigma").kind, FieldSpec::Kind::affine);
    EXPECT_EQ(c.base.at("sigma").g[0], 0.2);
    EXPECT_EQ(c.base.at("L").kind, FieldSpec::Kind::gaussian);
    EXPECT_EQ(c.base.at("L").width, 0.2);
    EXPECT_EQ(c.base.at("rho").path, "rho.esnap");
    EXPECT_EQ(c.sweep.scales, (std::vector<double>{0.5, 0.25, 0.125}));
    EXPECT_TRUE(c.weight.scan);
    EXPECT_EQ(c.weight.sigma_range[1], 50.0);
    EXPECT_EQ(c.output_dir, "results");
}

TEST(Config, EveryShippedConfigParses) {
    for (const auto& e : fs::directory_iterator(ELECTROSEIS_CONFIG_DIR))
        if (e.path().extension() == ".cfg") {
            EXPECT_NO_THROW(parse_config(e.path())) << e.path();
        }
}

TEST(Snapshot, RandomFieldRoundTripsBitExact) {
    const fs::path dir = scratch("roundtrip");
    const FieldSnapshot s = random_snapshot(7, {5, 4, 3}, 3);
    write_snapshot(dir / "f.esnap", s);
    EXPECT_TRUE(bit_equal(read_snapshot(dir / "f.esnap"), s));
    EXPECT_EQ(fs::file_size(dir / "f.esnap"), 8u + 4 + 4 + 24 + 8 + 4 + 60 * 3 * 8 + 8);
    fs::remove_all(dir);
}

TEST(Snapshot, HeaderLayoutAndChecksumByHand) {
    FieldSnapshot s{Stagger::edge, {1, 1, 1}, 2.0, {Array3({1, 1, 1}, 1.0)}};
    const auto b = encode_snapshot(s);
    ASSERT_EQ(b.size(), 8u + 4 + 4 + 24 + 8 + 4 + 8 + 8);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 8), "ESEISNAP");
    EXPECT_EQ(b[8], 1);   // version
    EXPECT_EQ(b[12], 1);  // edge
    EXPECT_EQ(b[16], 1);  // first dim
    EXPECT_EQ(b[47], 0x40);  // 2.0 = 0x4000000000000000, top byte last
    EXPECT_EQ(b[48], 1);  // one component
    // 1.0 = 0x3ff0000000000000: payload bytes sum to 0xf0 + 0x3f
    const std::size_t tail = b.size() - 8;
    EXPECT_EQ(b[tail], (0xf0 + 0x3f) & 0xff);
    EXPECT_EQ(b[tail + 1], (0xf0 + 0x3f) >> 8);
}

TEST(Snapshot, CorruptionIsRejected) {
    const fs::path dir = scratch("corrupt");
    const FieldSnapshot s = random_snapshot(11, {4, 4, 4}, 1);
    write_snapshot(dir / "f.esnap", s);
    auto b = bytes_of(dir / "f.esnap");
    b[100] ^= 0x10;
    try {
        decode_snapshot(b);
        FAIL() << "flipped byte accepted";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
    }
    b[100] ^= 0x10;
    EXPECT_NO_THROW(decode_snapshot(b));
    auto t = b;
    t.resize(t.size() - 9);
    EXPECT_THROW(decode_snapshot(t), ValidationError);
    t.resize(20);
    EXPECT_THROW(decode_snapshot(t), ValidationError);
    auto m = b;
    m[0] = 'X';
    EXPECT_THROW(decode_snapshot(m), ValidationError);
    m = b;
    m.push_back(0);
    EXPECT_THROW(decode_snapshot(m), ValidationError);
    fs::remove_all(dir);
}

TEST(Snapshot, WrongGridDimensionsOnRead) {
    const fs::path dir = scratch("dims");
    write_snapshot(dir / "f.esnap", random_snapshot(3, {4, 4, 4}, 1));
    try {
        read_snapshot(dir / "f.esnap", Index3{5, 5, 5});
        FAIL() << "dimension mismatch accepted";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos);
    }
    EXPECT_NO_THROW(read_snapshot(dir / "f.esnap", Index3{4, 4, 4}));
    EXPECT_THROW(read_snapshot(dir / "missing.esnap"), ValidationError);
    fs::remove_all(dir);
}

TEST(Csv, SeventeenSignificantDigitsRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(format_double(1.0 / 3.0), "0.33333333333333331");
    EXPECT_EQ(format_double(-2.5e-300), "-2.5e-300");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng);
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
}

TEST(Csv, QuotingAndRowWidth) {
    const fs::path dir = scratch("csv");
    {
        CsvWriter w(dir / "r.csv", {"name", "value"});
        w.row({"a,b", 0.5});
        w.row({"say \"hi\"", std::size_t{3}});
        EXPECT_THROW(w.row({"x"}), ValidationError);
    }
    EXPECT_EQ(text_of(dir / "r.csv"), "name,value\n\"a,b\",0.5\n\"say \"\"hi\"\"\",3\n");
    fs::remove_all(dir);
}

TEST(Pipeline, FieldExpressionsAndParameterFiles) {
    const fs::path dir = scratch("fields");
    const DomainGrid dg = build_domain(parse_config_string(kMinimal).domain);
    Array3 rho(dg.grid.node_shape(), 2.5);
    write_snapshot(dir / "rho.esnap", make_snapshot(rho, Stagger::node, 0.0));
    const fs::path cfg = write_file(dir / "f.cfg", kMinimal + "base.rho = file rho.esnap\nbase.sigma = affine 0.1 0.2 0 0\n");
    const ExperimentConfig c = parse_config(cfg);
    const ParameterFields f = build_parameter_set(c, dg.grid);
    EXPECT_EQ(f.rho, rho);
    EXPECT_DOUBLE_EQ(f.sigma(8, 0, 0), 0.1 + 0.2 * 1.0);
    EXPECT_DOUBLE_EQ(f.gamma(8, 0, 0), 0.3);
    write_snapshot(dir / "rho.esnap", make_snapshot(Array3({3, 3, 3}, 2.5), Stagger::node, 0.0));
    EXPECT_THROW(build_parameter_set(c, dg.grid), ValidationError);
    fs::remove_all(dir);
}

TEST(Cli, CheckParamsOnCanonicalSetupListsAllMargins) {
    const fs::path dir = scratch("check");
    EXPECT_EQ(run_cli("check-params " + std::string(ELECTROSEIS_CONFIG_DIR) + "/canonical.cfg -o " + dir.string()), 0);
    const std::string report = text_of(dir / "check_params.csv");
    for (const char* name : {"density_spd", "moduli_spd", "rho_e_gt_rho_f", "rho_gt_rho_f", "rho0_positive",
                             "det_atilde_positive", "trace_atilde_positive", "atilde_eigen1_positive",
                             "atilde_eigen2_positive", "pseudoconvexity_alpha_beta", "pseudoconvexity_shear",
                             "pseudoconvexity_atilde_fast", "pseudoconvexity_atilde_slow", "weight_feasible"})
        EXPECT_NE(report.find(std::string(name) + ","), std::string::npos) << name;
    EXPECT_EQ(report.find(",false,"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, ForwardWithInadmissibleParametersStopsBeforeStepping) {
    const fs::path dir = scratch("inadmissible");
    EXPECT_EQ(run_cli("forward " + std::string(ELECTROSEIS_CONFIG_DIR) + "/inadmissible.cfg -o " + dir.string()), 1);
    EXPECT_FALSE(fs::exists(dir / "exp1"));
    EXPECT_FALSE(fs::exists(dir / "forward_exp1.csv"));
    EXPECT_EQ(run_cli("check-params " + std::string(ELECTROSEIS_CONFIG_DIR) + "/inadmissible.cfg -o " + dir.string()), 1);
    fs::remove_all(dir);
}

TEST(Cli, ForwardRunsAreBitIdentical) {
    const fs::path dir = scratch("determinism");
    const fs::path cfg = write_file(dir / "f.cfg", "domain.T = 0.2\ngrid.n1 = 10\ngrid.n2 = 10\ngrid.n3 = 10\n"
                                                   "base.L = gaussian 0.2 0.3 0.5 0.5 0.5 0.2\n"
                                                   "base.sigma = 0.3\ninit1.vortex = 0.1\nforward.stride = 3\n");
    ASSERT_EQ(run_cli("forward " + cfg.string() + " -o " + (dir / "a").string()), 0);
    ASSERT_EQ(run_cli("forward " + cfg.string() + " -o " + (dir / "b").string()), 0);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path other = dir / "b" / fs::relative(e.path(), dir / "a");
        EXPECT_EQ(bytes_of(e.path()), bytes_of(other)) << e.path();
        ++files;
    }
    EXPECT_GT(files, 10u);
    const FieldSnapshot u = read_snapshot(dir / "a" / "exp1" / "u_000003.esnap", Index3{11, 11, 11});
    EXPECT_EQ(u.stagger, Stagger::node);
    EXPECT_GT(u.time, 0.0);
    EXPECT_EQ(read_snapshot(dir / "a" / "exp1" / "D_000000.esnap").stagger, Stagger::edge);
    fs::remove_all(dir);
}

TEST(Cli, IdenticalTwinsReconstructToZero) {
    const fs::path dir = scratch("twins");
    EXPECT_EQ(run_cli("reconstruct " + std::string(ELECTROSEIS_CONFIG_DIR) + "/identical_twins.cfg -o " + dir.string()), 0);
    for (const char* f : {"alpha", "beta", "gamma", "xi"}) {
        const FieldSnapshot s = read_snapshot(dir / (std::string(f) + ".esnap"));
        EXPECT_EQ(s.components.at(0).max_abs(), 0.0) << f;
    }
    const std::string report = text_of(dir / "reconstruct.csv");
    for (const char* e : {"error_alpha,0\n", "error_beta,0\n", "error_gamma,0\n", "error_xi,0\n"})
        EXPECT_NE(report.find(e), std::string::npos) << e;
    fs::remove_all(dir);
}

TEST(Cli, ExitCodesForFailures) {
    const fs::path dir = scratch("codes");
    EXPECT_EQ(run_cli("forward " + (dir / "missing.cfg").string()), 1);
    EXPECT_EQ(run_cli("forward"), 1);
    const fs::path bad = write_file(dir / "bad.cfg", kMinimal + "em.cfll = 0.3\n");
    EXPECT_EQ(run_cli("check-params " + bad.string() + " -o " + dir.string()), 1);
    // a blow-up threshold below the initial field size is a numerical failure
    const fs::path blow = write_file(dir / "blow.cfg", kMinimal + "domain.T = 0.2\nem.blowup = 1e-3\n");
    EXPECT_EQ(run_cli("forward " + blow.string() + " -o " + dir.string()), 2);
    // an unreachable fit quality fails the sweep verdict
    const fs::path sweep = write_file(dir / "sweep.cfg", kMinimal + "sweep.scales = 0.25 0.5\nsweep.t_obs = 0.3\n"
                                                                    "sweep.min_r2 = 2\n");
    EXPECT_EQ(run_cli("stability-sweep " + sweep.string() + " -o " + dir.string()), 2);
    EXPECT_TRUE(fs::exists(dir / "stability_summary.csv"));
    fs::remove_all(dir);
}

TEST(Cli, DefaultOutputDirectorySitsNextToConfig) {
    const fs::path dir = scratch("default_out");
    const fs::path cfg = write_file(dir / "exp.cfg", kMinimal);
    EXPECT_EQ(output_directory(parse_config(cfg)), dir / "exp_out");
    EXPECT_EQ(run_cli("check-params " + cfg.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "exp_out" / "check_params.csv"));
    fs::remove_all(dir);
}
