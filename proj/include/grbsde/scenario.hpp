#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grbsde/mesh.hpp"
#include "grbsde/paths.hpp"
#include "grbsde/problem.hpp"

namespace grbsde {

/// What a scenario runs. Each kind accepts its own set of check names.
enum class ScenarioKind {
    gbsde,
    reflected,
    two_barrier,
    penalized,
    comparison,
    envelope_sandwich,
    deterministic_ode,
    sup_gamma,
};

[[nodiscard]] std::string to_string(ScenarioKind kind);
[[nodiscard]] ScenarioKind scenario_kind_from(const std::string& name);
/// Metric names a scenario of this kind may list under "checks".
[[nodiscard]] std::vector<std::string> known_checks(ScenarioKind kind);

struct CheckSpec {
    std::string name;
    double tolerance = 0.0;
};

/// A parsed configuration. `config` keeps the resolved JSON (defaults filled in)
/// for the family sections that are interpreted at run time.
struct Scenario {
    std::string name;
    std::string description;
    ScenarioKind kind = ScenarioKind::gbsde;
    double T = 1.0;
    std::size_t n_steps = 10;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    std::size_t dim = 1;
    ASpec a_spec;
    std::vector<CheckSpec> checks;
    std::size_t panel_paths = 100;
    nlohmann::json config;
};

/// Throws ConfigError on schema violations, unknown families or unknown checks.
[[nodiscard]] Scenario parse_scenario(const nlohmann::json& config);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double tolerance = 0.0;
};

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_steps;
    std::size_t threads = 1;
};

struct ScenarioReport {
    std::string name;
    ScenarioKind kind = ScenarioKind::gbsde;
    std::uint64_t seed = 0;
    std::size_t n_steps = 0;
    std::size_t n_paths = 0;
    std::vector<CheckResult> checks;
    nlohmann::json diagnostics = nlohmann::json::object();
    double runtime_s = 0.0;

    /// Y_0 and its reference when the scenario has an oracle.
    double y0 = 0.0;
    std::optional<double> y0_reference;
    double y0_standard_error = 0.0;
    double skorokhod_residual = 0.0;

    /// Solution written to the panel table (absent for sup_gamma).
    std::optional<TimeMesh> mesh;
    std::optional<SolutionPanel> panel;

    [[nodiscard]] bool passed() const;
    /// Value of a computed metric; throws ConfigError when it was not computed.
    [[nodiscard]] double metric(const std::string& name) const;

    std::vector<std::pair<std::string, double>> metrics;
};

/// Runs the pipeline for the scenario's kind and evaluates its checks.
[[nodiscard]] ScenarioReport run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Report as JSON: {scenario, kind, seed, n_steps, n_paths, passed, checks[], diagnostics, runtime_s}.
[[nodiscard]] nlohmann::json report_to_json(const ScenarioReport& report);

/// t, path, Y, Z_1..Z_d, dK_plus, dK_minus for the first `max_paths` paths;
/// 17 significant digits, LF line endings. dK columns hold the increment of
/// the step starting at t (0 on the last node).
void write_panel_csv(const std::filesystem::path& path, const TimeMesh& mesh, const SolutionPanel& panel,
                     std::size_t max_paths);

struct ConvergenceRow {
    std::size_t n_steps = 0;
    double y0_error = 0.0;
    double y0_standard_error = 0.0;
    double skorokhod_residual = 0.0;
    double runtime_s = 0.0;
};

/// Re-runs the scenario at each mesh size. Throws ConfigError when the
/// scenario has no oracle reference.
[[nodiscard]] std::vector<ConvergenceRow> run_convergence(const Scenario& scenario,
                                                          const std::vector<std::size_t>& steps,
                                                          const RunOptions& options = {});

/// True when every error is at most the previous one plus 3 s.e. (and a 1e-12 floor).
[[nodiscard]] bool errors_decay(const std::vector<ConvergenceRow>& rows);

void write_convergence_csv(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows);

struct CatalogEntry {
    std::string name;
    std::string kind;
    std::string description;
    std::filesystem::path file;
};

/// Scenario files (*.json) in `dir`, sorted by name.
[[nodiscard]] std::vector<CatalogEntry> list_scenarios(const std::filesystem::path& dir);

/// Finds `name_or_path` as a file, or as <dir>/<name>.json.
[[nodiscard]] std::filesystem::path resolve_scenario(const std::string& name_or_path,
                                                     const std::filesystem::path& dir);

}  // namespace grbsde
