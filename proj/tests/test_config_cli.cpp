#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tfbsde/config.hpp"
#include "tfbsde/errors.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace tfbsde;
namespace fs = std::filesystem;

namespace {

std::string cfg(const std::string& name) { return std::string(CONFIG_DIR) + "/" + name; }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CLI_BINARY) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("config loading populates every section") {
    const RunConfig config = load_config(cfg("oracle_solve.json"));
    CHECK(config.seed == 42);
    CHECK(config.basis_K == 1);
    CHECK(config.T == 0.5);
    CHECK(config.grid_steps == 20);
    CHECK(config.problem.s0 == 1.0);
    CHECK(config.problem.px == 1.0);
    CHECK(config.problem.g0 == 0.3);
    CHECK(config.solver.n_paths == 2000);
    CHECK(config.solver.pilot_paths == 1000);

    const FbsdeProblem problem = make_problem(config.problem, config.T, 1);
    std::vector<double> z = {0.5};
    CHECK(problem.g(0.0, 1.0, 2.0, z) == 0.3);
    CHECK(problem.phi(2.5) == 2.5);
    std::vector<double> sig(1, 0.0);
    problem.sigma(0.0, 1.0, 2.0, sig);
    CHECK(sig[0] == 1.0);
    CHECK(problem.lambda == 0.0);  // derived: no state coefficients
    CHECK(problem.lambda0 == 1.0); // derived from px
}

TEST_CASE("config errors carry the field path") {
    try {
        load_config(cfg("bad_missing_T.json"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("grid.T") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config("no_such_file.json"), ConfigError);
}

TEST_CASE("seed is mandatory") {
    const fs::path tmp = fs::temp_directory_path() / "tfbsde_noseed.json";
    std::ofstream(tmp) << R"({"model":{"gaussian_var":1.0},"grid":{"T":1.0}})";
    CHECK_THROWS_AS(load_config(tmp.string()), ConfigError);
    fs::remove(tmp);
}

TEST_CASE("tanh family produces bounded coefficients") {
    ProblemSpec spec;
    spec.family = "tanh";
    spec.fx = 2.0;
    const FbsdeProblem problem = make_problem(spec, 1.0, 1);
    std::vector<double> z = {0.0};
    CHECK(std::abs(problem.f(0.0, 100.0, 0.0, z)) <= 2.0 + 1e-12);
    CHECK(problem.f(0.0, 100.0, 0.0, z) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("cli basis command writes reports and respects the residual gate") {
    TempDir dir("tfbsde_cli_basis");
    const int code =
        run_cli("basis --config " + cfg("brownian_basis.json") + " --out " + dir.path.string());
    CHECK(code == 0);
    CHECK(fs::exists(dir.path / "basis.txt"));
    CHECK(fs::exists(dir.path / "basis_report.json"));
    const std::string report = slurp(dir.path / "basis_report.json");
    CHECK(report.find("\"K_eff\": 1") != std::string::npos);
}

TEST_CASE("cli basis on the Poisson model exports a_11 = 1") {
    TempDir dir("tfbsde_cli_poisson");
    const int code =
        run_cli("basis --config " + cfg("poisson_basis.json") + " --out " + dir.path.string());
    CHECK(code == 0);
    const std::string basis = slurp(dir.path / "basis.txt");
    CHECK(basis.find("a 0 1\n") != std::string::npos);
}

TEST_CASE("cli rejects malformed configs with exit code 2") {
    TempDir dir("tfbsde_cli_bad");
    CHECK(run_cli("basis --config " + cfg("bad_missing_T.json") + " --out " +
                  dir.path.string()) == 2);
    CHECK(run_cli("solve --config no_such_file.json --out " + dir.path.string()) == 2);
}

TEST_CASE("cli solve produces a manifest and is byte-deterministic across threads") {
    TempDir d1("tfbsde_cli_solve1");
    TempDir d2("tfbsde_cli_solve2");
    TempDir d3("tfbsde_cli_solve3");
    const std::string base = "solve --config " + cfg("oracle_solve.json");
    CHECK(run_cli(base + " --out " + d1.path.string() + " --threads 1") == 0);
    CHECK(run_cli(base + " --out " + d2.path.string() + " --threads 2") == 0);
    CHECK(run_cli(base + " --out " + d3.path.string() + " --threads 8") == 0);
    for (const char* name : {"manifest.json", "solution.csv"}) {
        const std::string a = slurp(d1.path / name);
        CHECK(a == slurp(d2.path / name));
        CHECK(a == slurp(d3.path / name));
        CHECK(!a.empty());
    }
}

TEST_CASE("cli verify comparison passes and reruns identically") {
    TempDir d1("tfbsde_cli_cmp1");
    TempDir d2("tfbsde_cli_cmp2");
    const std::string base = "verify --config " + cfg("comparison_verify.json");
    CHECK(run_cli(base + " --out " + d1.path.string()) == 0);
    CHECK(run_cli(base + " --out " + d2.path.string() + " --threads 4") == 0);
    CHECK(slurp(d1.path / "experiment.csv") == slurp(d2.path / "experiment.csv"));
    CHECK(slurp(d1.path / "experiment_summary.json") ==
          slurp(d2.path / "experiment_summary.json"));
}

TEST_CASE("cli verify dispatches the named experiments") {
    TempDir dir("tfbsde_cli_verify");
    CHECK(run_cli("verify --config " + cfg("stability_verify.json") + " --out " +
                  dir.path.string()) == 0);
    CHECK(run_cli("verify --config " + cfg("linear_verify.json") + " --out " +
                  dir.path.string()) == 0);
    CHECK(run_cli("simulate --config " + cfg("two_atom_simulate.json") + " --out " +
                  dir.path.string()) == 0);
    CHECK(fs::exists(dir.path / "bracket_report.json"));
}

TEST_CASE("seed override changes the outputs") {
    TempDir d1("tfbsde_cli_seed1");
    TempDir d2("tfbsde_cli_seed2");
    const std::string base = "solve --config " + cfg("oracle_solve.json");
    CHECK(run_cli(base + " --out " + d1.path.string()) == 0);
    CHECK(run_cli(base + " --out " + d2.path.string() + " --seed 43") == 0);
    CHECK(slurp(d1.path / "solution.csv") != slurp(d2.path / "solution.csv"));
}
