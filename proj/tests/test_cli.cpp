#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run_lab(const std::string& args) {
    const std::string cmd = std::string("NO_COLOR=1 \"") + GRBSDE_LAB_BINARY + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("grbsde_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2") {
    CHECK(run_lab("") == 2);
    CHECK(run_lab("run") == 2);
    CHECK(run_lab("frobnicate") == 2);
    CHECK(run_lab("run no_such_scenario") == 2);
    CHECK(run_lab("converge deterministic_ode --steps 10,x") == 2);
    CHECK(run_lab("--help") == 0);
    CHECK(run_lab("list") == 0);
}

TEST_CASE("crossing barriers exit 2") {
    const fs::path dir = fresh_dir("cross");
    std::ofstream(dir / "cross.json") << R"({
      "name": "cross", "kind": "two_barrier",
      "mesh": {"T": 1.0, "n_steps": 4},
      "ensemble": {"n_paths": 100, "seed": 1, "d": 1},
      "problem": {
        "driver": {"kind": "zero"},
        "lower": {"kind": "constant", "value": 1.0},
        "upper": {"kind": "constant", "value": 0.0},
        "terminal": {"kind": "constant", "value": 0.5}
      },
      "checks": []
    })";
    CHECK(run_lab("--out-dir " + (dir / "out").string() + " run " + (dir / "cross.json").string()) == 2);
}

TEST_CASE("dry run writes nothing") {
    const fs::path dir = fresh_dir("dry");
    CHECK(run_lab("--dry-run --out-dir " + dir.string() + " run reflected_put") == 0);
    CHECK(run_lab("--dry-run --out-dir " + dir.string() + " converge deterministic_ode") == 0);
    CHECK(fs::is_empty(dir));
}

TEST_CASE("outputs are bitwise reproducible across thread counts") {
    const fs::path a = fresh_dir("rep_a");
    const fs::path b = fresh_dir("rep_b");
    CHECK(run_lab("--out-dir " + a.string() + " run two_barrier_band") == 0);
    CHECK(run_lab("--threads 3 --out-dir " + b.string() + " run two_barrier_band") == 0);
    const std::string csv = slurp(a / "two_barrier_band_panel.csv");
    CHECK_FALSE(csv.empty());
    CHECK(csv == slurp(b / "two_barrier_band_panel.csv"));
    CHECK(fs::exists(a / "two_barrier_band_report.json"));
}

TEST_CASE("converge writes its table") {
    const fs::path dir = fresh_dir("conv");
    CHECK(run_lab("--out-dir " + dir.string() + " converge deterministic_ode --steps 10,20") == 0);
    const std::string csv = slurp(dir / "deterministic_ode_convergence.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

}  // TEST_SUITE
