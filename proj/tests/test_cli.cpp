#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nustab/model.hpp"

using namespace nustab;
namespace fs = std::filesystem;

namespace {

const char* kExampleConfig = R"({
  "A": [[1, -2, 0], [2, 1, 0], [0, 0, 0.5]],
  "B": [[0.5], [2], [1]],
  "K_c": [[3.9031141868512108, -3.6816608996539793, -3.0882352941176472]]
})";

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run(const std::string& args) {
    const std::string cmd = std::string(NUSTAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("cli design produces a certificate with the published bound") {
    TempDir dir("nustab_cli_design");
    write(dir.path / "plant.json", kExampleConfig);
    const int rc = run("design --config " + (dir.path / "plant.json").string() +
                       " --out-dir " + dir.path.string());
    CHECK(rc == 0);

    const DesignCertificate cert = parse_certificate(slurp(dir.path / "certificate.json"));
    CHECK(cert.h_star >= 0.60);
    CHECK(cert.h_star <= 0.64);
    CHECK(fs::exists(dir.path / "design_manifest.json"));
}

TEST_CASE("cli design exits 2 on an unstabilizable plant") {
    TempDir dir("nustab_cli_unstab");
    write(dir.path / "plant.json", R"({"A": [[1,0],[0,1]], "B": [[1],[0]]})");
    CHECK(run("design --config " + (dir.path / "plant.json").string() +
              " --out-dir " + dir.path.string()) == 2);
}

TEST_CASE("cli design exits 2 on unknown config keys") {
    TempDir dir("nustab_cli_badkey");
    write(dir.path / "plant.json", R"({"A": [[0]], "B": [[1]], "extra": 1})");
    CHECK(run("design --config " + (dir.path / "plant.json").string() +
              " --out-dir " + dir.path.string()) == 2);
}

TEST_CASE("cli design exits 2 on a rank-deficient input matrix") {
    TempDir dir("nustab_cli_rank");
    write(dir.path / "plant.json", R"({"A": [[0,0],[0,0]], "B": [[1,2],[2,4]]})");
    CHECK(run("design --config " + (dir.path / "plant.json").string() +
              " --out-dir " + dir.path.string()) == 2);
}

TEST_CASE("cli design right-censors the scalar integrator with a pole") {
    TempDir dir("nustab_cli_scalar");
    write(dir.path / "plant.json", R"({"A": [[0]], "B": [[1]], "poles": [-1]})");
    CHECK(run("design --config " + (dir.path / "plant.json").string() +
              " --out-dir " + dir.path.string()) == 0);
    const DesignCertificate cert = parse_certificate(slurp(dir.path / "certificate.json"));
    CHECK(cert.right_censored);
}

TEST_CASE("cli sweep writes CSV, gnuplot script, and manifest; reruns are byte-identical") {
    TempDir dir("nustab_cli_sweep");
    write(dir.path / "plant.json", kExampleConfig);
    REQUIRE(run("design --config " + (dir.path / "plant.json").string() +
                " --out-dir " + dir.path.string()) == 0);
    const std::string base = "sweep --config " + (dir.path / "plant.json").string() +
                             " --cert " + (dir.path / "certificate.json").string() +
                             " --h-lo 0.01 --h-hi 1.0 --steps 50";
    REQUIRE(run(base + " --out-dir " + (dir.path / "run1").string()) == 0);
    REQUIRE(run(base + " --out-dir " + (dir.path / "run2").string()) == 0);

    const std::string csv1 = slurp(dir.path / "run1" / "sweep.csv");
    const std::string csv2 = slurp(dir.path / "run2" / "sweep.csv");
    CHECK(csv1 == csv2);
    CHECK(csv1.rfind("# manifest ", 0) == 0);
    CHECK(csv1.find("h,a_1,a_2,a_3,sigma_bar,s_1,s_2,s_3\n") != std::string::npos);
    CHECK(fs::exists(dir.path / "run1" / "sweep.gp"));
}

TEST_CASE("cli simulate runs clean inside the window and exits 2 beyond it") {
    TempDir dir("nustab_cli_sim");
    write(dir.path / "plant.json", kExampleConfig);
    REQUIRE(run("design --config " + (dir.path / "plant.json").string() +
                " --out-dir " + dir.path.string()) == 0);
    const std::string base = "simulate --config " + (dir.path / "plant.json").string() +
                             " --cert " + (dir.path / "certificate.json").string();

    CHECK(run(base + " --schedule uniform_random --seed 1 --steps 100" +
              " --h-min 0.01 --h-max 0.6 --out-dir " + (dir.path / "ok").string()) == 0);
    CHECK(fs::exists(dir.path / "ok" / "trajectory.csv"));

    // Window reaching past h_star is a validation error.
    CHECK(run(base + " --schedule uniform_random --seed 1 --steps 10" +
              " --h-min 0.01 --h-max 0.9 --out-dir " + (dir.path / "bad").string()) == 2);
}

TEST_CASE("cli simulate with x0 = 0 writes a zero trajectory") {
    TempDir dir("nustab_cli_zero");
    write(dir.path / "plant.json", kExampleConfig);
    REQUIRE(run("design --config " + (dir.path / "plant.json").string() +
                " --out-dir " + dir.path.string()) == 0);
    CHECK(run("simulate --config " + (dir.path / "plant.json").string() +
              " --cert " + (dir.path / "certificate.json").string() +
              " --schedule constant:0.3 --steps 5 --x0 0,0,0 --substeps 0" +
              " --h-min 0.01 --h-max 0.6 --out-dir " + dir.path.string()) == 0);
    const std::string csv = slurp(dir.path / "trajectory.csv");
    CHECK(csv.find("0,0,0,0,0,1") != std::string::npos);  // zero row, is_sample=1
}

TEST_CASE("cli simulate supports the other schedule kinds") {
    TempDir dir("nustab_cli_kinds");
    write(dir.path / "plant.json", kExampleConfig);
    REQUIRE(run("design --config " + (dir.path / "plant.json").string() +
                " --out-dir " + dir.path.string()) == 0);
    const std::string base = "simulate --config " + (dir.path / "plant.json").string() +
                             " --cert " + (dir.path / "certificate.json").string() +
                             " --steps 20 --h-min 0.05 --h-max 0.6 --out-dir " +
                             dir.path.string();
    CHECK(run(base + " --schedule sweep_up") == 0);
    CHECK(run(base + " --schedule worst_case_grid") == 0);
    CHECK(run(base + " --schedule constant:0.3") == 0);
    CHECK(run(base + " --schedule bogus") == 2);
}

TEST_CASE("cli verify exits 0 on a sound certificate and 4 on a corrupted one") {
    TempDir dir("nustab_cli_verify");
    write(dir.path / "plant.json", kExampleConfig);
    REQUIRE(run("design --config " + (dir.path / "plant.json").string() +
                " --out-dir " + dir.path.string()) == 0);
    CHECK(run("verify --config " + (dir.path / "plant.json").string() +
              " --cert " + (dir.path / "certificate.json").string() +
              " --refinement 2 --out-dir " + dir.path.string()) == 0);

    // Inflate the bound; the finer probe must catch it.
    DesignCertificate cert = parse_certificate(slurp(dir.path / "certificate.json"));
    cert.h_star *= 2.0;
    write(dir.path / "corrupted.json", serialize(cert));
    CHECK(run("verify --config " + (dir.path / "plant.json").string() +
              " --cert " + (dir.path / "corrupted.json").string() +
              " --refinement 2 --out-dir " + dir.path.string()) == 4);
}

TEST_CASE("cli rejects a missing config file") {
    CHECK(run("design --config /nonexistent/plant.json") == 2);
}
