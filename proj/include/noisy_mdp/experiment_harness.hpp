#pragma once

// Scenario files, experiment orchestration and artifact output for the
// command-line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "noisy_mdp/identifiability.hpp"
#include "noisy_mdp/mdp_core.hpp"
#include "noisy_mdp/repetitive_estimator.hpp"

namespace noisy_mdp {

enum class EstimatorType { repetitive, bayes1, bayes2, partition };

const char* to_string(EstimatorType type);
EstimatorType parse_estimator_type(const std::string& name);

struct EstimatorConfig {
    EstimatorType type = EstimatorType::repetitive;
    /// Counted steps per action block (repetitive, partition) or total steps (bayes).
    std::size_t steps = 100000;
    std::optional<std::size_t> burn_in;
    bool exact_q = false;
    /// Action names in protocol order; empty means every action in file order.
    std::vector<std::string> actions;
    std::size_t starts = 32;
    std::optional<double> tol_loss;
    std::size_t grid_res = 101;
    /// Nonzero switches the Bayes support from the grid to an ensemble.
    std::size_t particles = 0;
    bool abort_on_violation = false;
};

struct Scenario {
    std::string name;
    std::size_t n = 0;
    std::vector<std::string> action_names;
    Mdp mdp = Mdp(std::vector<Matrix>{Matrix::Identity(2, 2)});
    ConfusionMatrix truth = ConfusionMatrix::identity(2);
    std::uint64_t seed = 0;
    EstimatorConfig estimator;
    std::filesystem::path output_dir = "out";
    std::size_t snapshot_every = 0;

    /// Action indices the estimator uses.
    std::vector<std::size_t> action_indices() const;
};

/// Documented parameter limits; load_scenario rejects anything outside them.
inline constexpr std::size_t kMaxSteps = 1'000'000'000;
inline constexpr std::size_t kMaxGridRes = 2001;
inline constexpr std::size_t kMaxParticles = 10'000'000;
inline constexpr std::size_t kMaxStarts = 10'000;

/// Parses and validates scenario JSON. `source` labels error messages.
Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");
Scenario load_scenario(const std::filesystem::path& path);

/// Re-checks parameter ranges (after command-line overrides, say).
void validate_scenario(const Scenario& s);

/// Canonical JSON text of the scenario with every default filled in.
std::string scenario_json(const Scenario& s);
/// FNV-1a 64 of the canonical JSON without output_dir, as 16 hex digits.
std::string scenario_digest(const Scenario& s);

double frobenius_error(const ConfusionMatrix& estimate, const ConfusionMatrix& truth);

struct ReportCandidate {
    Matrix matrix;
    std::optional<double> residual;
    std::optional<double> weight;  ///< posterior mass (Bayes)
    bool feasible = false;
    double frobenius_error = 0;
};

struct RunReport {
    std::string scenario_digest;
    std::string estimator;
    std::uint64_t seed = 0;
    std::size_t steps = 0;
    std::vector<ReportCandidate> candidates;
    std::optional<std::size_t> selected;
    bool non_unique = false;
    std::optional<double> frobenius_error;
    std::optional<IdentifiabilityReport> identifiability;
    std::vector<std::string> notes;
    std::vector<std::pair<std::string, double>> metrics;
    /// Emitted artifacts, relative to the scenario's output directory.
    std::vector<std::string> files;
    std::string error;
    int exit_code = 0;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitEstimator = 3;
inline constexpr int kExitIdentifiability = 4;

/// Exit code for an exception escaping a run.
int exit_code_for(const std::exception& e);

/// Runs the configured estimator and writes summary.json (and snapshot files
/// for Bayes runs) into s.output_dir. Estimator failures are caught and
/// recorded in the report; only I/O problems throw.
RunReport run_experiment(const Scenario& s);

/// Runs independent scenarios on up to `jobs` threads. Output directories must differ.
std::vector<RunReport> run_batch(const std::vector<Scenario>& scenarios, std::size_t jobs);

/// Simulates s.estimator.steps transitions under a uniform policy over the
/// scenario's actions and writes trajectory.csv (t,s,s_tilde,a).
std::filesystem::path simulate_scenario(const Scenario& s);

/// Subset condition over the scenario's actions.
IdentifiabilityReport scenario_identifiability(const Scenario& s);

std::string report_json(const RunReport& r);

}  // namespace noisy_mdp
