// grbsde_lab: run bundled or user scenarios, convergence sweeps, and the catalog.
//
// Exit codes: 0 all checks passed, 1 a check failed (reports still written),
// 2 configuration or usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "grbsde/errors.hpp"
#include "grbsde/scenario.hpp"

#ifndef GRBSDE_SCENARIO_DIR
#define GRBSDE_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;

namespace {

bool use_color() {
    const char* nc = std::getenv("NO_COLOR");
    return (nc == nullptr || *nc == '\0') && isatty(fileno(stderr));
}

std::string tag(bool ok) {
    if (!use_color()) return ok ? "PASS" : "FAIL";
    return ok ? "\033[32mPASS\033[0m" : "\033[31mFAIL\033[0m";
}

void log_error(const std::string& msg) {
    std::cerr << (use_color() ? "\033[31merror\033[0m: " : "error: ") << msg << '\n';
}

fs::path scenario_dir() {
    if (const char* env = std::getenv("GRBSDE_SCENARIOS"); env != nullptr && *env != '\0') return env;
    return GRBSDE_SCENARIO_DIR;
}

std::vector<std::size_t> parse_steps(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const long v = std::stol(item, &used);
            if (used != item.size() || v <= 0) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw grbsde::ConfigError("--steps expects positive integers separated by commas, got '" + item + "'");
        }
    }
    if (out.empty()) throw grbsde::ConfigError("--steps is empty");
    return out;
}

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::size_t threads = 1;
    bool dry_run = false;
};

int cmd_run(const std::string& target, const Globals& g) {
    const grbsde::Scenario sc = grbsde::load_scenario(grbsde::resolve_scenario(target, scenario_dir()));
    if (g.dry_run) {
        nlohmann::json resolved = sc.config;
        resolved["mesh"] = {{"T", sc.T}, {"n_steps", sc.n_steps}};
        resolved["ensemble"]["n_paths"] = sc.n_paths;
        resolved["ensemble"]["seed"] = g.seed.value_or(sc.seed);
        resolved["ensemble"]["d"] = sc.dim;
        resolved["panel_paths"] = sc.panel_paths;
        std::cout << resolved.dump(2) << '\n';
        return 0;
    }
    grbsde::RunOptions opt;
    opt.seed = g.seed;
    opt.threads = g.threads;
    const grbsde::ScenarioReport rep = grbsde::run_scenario(sc, opt);

    const fs::path out(g.out_dir);
    if (rep.panel && rep.mesh) grbsde::write_panel_csv(out / (sc.name + "_panel.csv"), *rep.mesh, *rep.panel, sc.panel_paths);
    fs::create_directories(out);
    std::ofstream(out / (sc.name + "_report.json"), std::ios::binary) << grbsde::report_to_json(rep).dump(2) << '\n';

    for (const auto& c : rep.checks) {
        std::printf("%s  %-24s value=%.6g  tolerance=%.6g\n", tag(c.passed).c_str(), c.name.c_str(), c.value,
                    c.tolerance);
    }
    std::printf("%s: %s in %.2f s\n", sc.name.c_str(), rep.passed() ? "passed" : "FAILED", rep.runtime_s);
    return rep.passed() ? 0 : 1;
}

int cmd_converge(const std::string& target, const std::string& steps_text, const Globals& g) {
    const grbsde::Scenario sc = grbsde::load_scenario(grbsde::resolve_scenario(target, scenario_dir()));
    const std::vector<std::size_t> steps = parse_steps(steps_text);
    if (g.dry_run) {
        std::cout << sc.name << ": would run n_steps";
        for (const auto n : steps) std::cout << ' ' << n;
        std::cout << '\n';
        return 0;
    }
    grbsde::RunOptions opt;
    opt.seed = g.seed;
    opt.threads = g.threads;
    const auto rows = grbsde::run_convergence(sc, steps, opt);
    grbsde::write_convergence_csv(fs::path(g.out_dir) / (sc.name + "_convergence.csv"), rows);
    std::printf("%8s %14s %14s %10s\n", "n_steps", "Y0_error", "skorokhod", "runtime_s");
    for (const auto& r : rows) {
        std::printf("%8zu %14.6e %14.6e %10.3f\n", r.n_steps, r.y0_error, r.skorokhod_residual, r.runtime_s);
    }
    const bool ok = grbsde::errors_decay(rows);
    std::printf("%s  error decay across refinements\n", tag(ok).c_str());
    return ok ? 0 : 1;
}

int cmd_list() {
    const auto entries = grbsde::list_scenarios(scenario_dir());
    for (const auto& e : entries) std::printf("%-24s %-18s %s\n", e.name.c_str(), e.kind.c_str(), e.description.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized reflected BSDE lab: scenarios, oracles and convergence sweeps"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Override the ensemble seed");
    app.add_option("--out-dir", g.out_dir, "Directory for CSV and JSON outputs");
    app.add_option("--threads", g.threads, "Worker threads inside a scenario")->check(CLI::PositiveNumber);
    app.add_flag("--dry-run", g.dry_run, "Validate and print the resolved scenario; write nothing");

    std::string target;
    auto* run = app.add_subcommand("run", "Run one scenario (file path or bundled name)");
    run->add_option("config", target, "Scenario JSON file or bundled scenario name")->required();

    std::string steps = "10,20,40";
    auto* converge = app.add_subcommand("converge", "Re-run a scenario over several mesh sizes");
    converge->add_option("config", target, "Scenario JSON file or bundled scenario name")->required();
    converge->add_option("--steps", steps, "Comma-separated n_steps values");

    app.add_subcommand("list", "List bundled scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (*seed_opt) g.seed = seed;

    try {
        if (*run) return cmd_run(target, g);
        if (*converge) return cmd_converge(target, steps, g);
        return cmd_list();
    } catch (const grbsde::ConfigError& e) {
        log_error(e.what());
        return 2;
    } catch (const grbsde::RangeError& e) {
        log_error(e.what());
        return 2;
    } catch (const grbsde::AdmissibilityError& e) {
        log_error(e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        log_error(std::string("scenario: ") + e.what());
        return 2;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
}
