// noisy-mdp: simulate, estimate and inspect confusion-matrix experiments.
//
//   noisy-mdp estimate --config scenarios/worked_example.json --method repetitive --exact-q
//   noisy-mdp estimate --config a.json --config b.json --jobs 2
//   noisy-mdp check-identifiability --config scenarios/sim_common_stationary.json
//   noisy-mdp report --output-dir out/worked_example

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/experiment_harness.hpp"

using namespace noisy_mdp;

namespace {

struct Overrides {
    std::vector<std::string> configs;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> burn_in;
    std::optional<std::size_t> grid_res;
    std::optional<std::size_t> particles;
    std::optional<std::size_t> snapshot_every;
    std::optional<std::string> output_dir;
    std::optional<std::string> method;
    bool exact_q = false;
    std::size_t jobs = 1;
};

void add_scenario_options(CLI::App* cmd, Overrides& o, bool many_configs) {
    auto* cfg = cmd->add_option("--config", o.configs, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    if (!many_configs) cfg->expected(1);
    cmd->add_option("--seed", o.seed, "Override the scenario seed");
    cmd->add_option("--steps", o.steps, "Steps per action block (repetitive, partition) or total (bayes)");
    cmd->add_option("--output-dir", o.output_dir, "Directory for emitted files");
}

Scenario load_with_overrides(const std::string& path, const Overrides& o, bool single) {
    Scenario s = load_scenario(path);
    if (o.method) s.estimator.type = parse_estimator_type(*o.method);
    if (o.seed) s.seed = *o.seed;
    if (o.steps) s.estimator.steps = *o.steps;
    if (o.burn_in) s.estimator.burn_in = *o.burn_in;
    if (o.grid_res) s.estimator.grid_res = *o.grid_res;
    if (o.particles) s.estimator.particles = *o.particles;
    if (o.snapshot_every) s.snapshot_every = *o.snapshot_every;
    if (o.exact_q) s.estimator.exact_q = true;
    if (o.output_dir) {
        // With several configs each run gets its own subdirectory.
        s.output_dir = single ? std::filesystem::path(*o.output_dir)
                              : std::filesystem::path(*o.output_dir) / std::filesystem::path(path).stem();
    }
    validate_scenario(s);
    return s;
}

void print_identifiability(const IdentifiabilityReport& r) {
    std::cout << "subset condition: " << (r.satisfied ? "satisfied" : "violated") << " (tol " << r.tolerance << ")\n";
    for (const auto& p : r.violating_subsets) {
        std::cout << "  indistinct block {";
        for (std::size_t k = 0; k < p.block().size(); ++k) std::cout << (k ? "," : "") << p.block()[k];
        std::cout << "}\n";
    }
}

int cmd_estimate(const Overrides& o) {
    std::vector<Scenario> scenarios;
    for (const auto& path : o.configs) scenarios.push_back(load_with_overrides(path, o, o.configs.size() == 1));
    const auto reports = run_batch(scenarios, o.jobs);
    int code = kExitOk;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        std::cout << scenarios[i].output_dir.generic_string() << ": " << r.estimator << ", " << r.candidates.size()
                  << " candidate(s)";
        if (r.non_unique) std::cout << ", non-unique";
        if (r.frobenius_error) std::cout << ", frobenius error " << *r.frobenius_error;
        std::cout << '\n';
        if (!r.error.empty()) std::cerr << "error: " << r.error << '\n';
        code = std::max(code, r.exit_code);
    }
    return code;
}

int cmd_report(const std::string& dir) {
    std::ifstream in(std::filesystem::path(dir) / "summary.json");
    if (!in) throw ValidationError(dir + ": no summary.json");
    const auto j = nlohmann::ordered_json::parse(in);
    std::cout << "estimator  " << j["estimator"].get<std::string>() << "\n"
              << "seed       " << j["seed"] << "\n"
              << "steps      " << j["steps"] << "\n"
              << "digest     " << j["scenario_digest"].get<std::string>() << "\n";
    std::size_t k = 0;
    for (const auto& c : j["candidates"]) {
        std::cout << "candidate " << k++ << (c["feasible"].get<bool>() ? "" : " (infeasible)") << ": " << c["matrix"].dump();
        if (!c["residual"].is_null()) std::cout << "  residual " << c["residual"].get<double>();
        if (c.contains("weight")) std::cout << "  weight " << c["weight"].get<double>();
        std::cout << "  frobenius " << c["frobenius_error"].get<double>() << '\n';
    }
    std::cout << "selected   " << j["selected"].dump() << (j["non_unique"].get<bool>() ? " (non-unique)" : "") << '\n';
    for (const auto& n : j["notes"]) std::cout << "note: " << n.get<std::string>() << '\n';
    if (!j["error"].is_null()) std::cout << "error: " << j["error"].get<std::string>() << '\n';
    return j["exit_code"].get<int>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Estimate observation confusion matrices of an MDP from noisy state observations"};
    app.require_subcommand(1);
    Overrides o;

    auto* sim = app.add_subcommand("simulate", "Simulate a trajectory under a uniform random policy");
    add_scenario_options(sim, o, false);

    auto* est = app.add_subcommand("estimate", "Run the configured (or chosen) estimator");
    add_scenario_options(est, o, true);
    est->add_option("--method", o.method, "repetitive|bayes1|bayes2|partition")
        ->check(CLI::IsMember({"repetitive", "bayes1", "bayes2", "partition"}));
    est->add_option("--burn-in", o.burn_in, "Burn-in steps per action block");
    est->add_option("--grid-res", o.grid_res, "Grid points per axis (bayes)");
    est->add_option("--particles", o.particles, "Ensemble size; switches bayes to an ensemble support");
    est->add_option("--snapshot-every", o.snapshot_every, "Posterior snapshot cadence (0: first and last only)");
    est->add_flag("--exact-q", o.exact_q, "Use exact observed transitions instead of simulated counts");
    est->add_option("--jobs", o.jobs, "Scenarios run concurrently")->check(CLI::PositiveNumber);

    auto* ident = app.add_subcommand("check-identifiability", "Check the subset condition over the scenario's actions");
    ident->add_option("--config", o.configs, "Scenario JSON file")->required()->expected(1)->check(CLI::ExistingFile);

    std::string report_dir;
    auto* rep = app.add_subcommand("report", "Print a summary.json in readable form");
    auto* rep_dir = rep->add_option("--output-dir", report_dir, "Directory holding summary.json");
    rep->add_option("--config", o.configs, "Scenario whose output_dir to read")->expected(1)->check(CLI::ExistingFile);
    rep->callback([&] {
        if (!*rep_dir && o.configs.empty()) throw CLI::ValidationError("report", "needs --output-dir or --config");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*sim) {
            const Scenario s = load_with_overrides(o.configs.front(), o, true);
            std::cout << simulate_scenario(s).generic_string() << '\n';
            return kExitOk;
        }
        if (*est) return cmd_estimate(o);
        if (*ident) {
            const IdentifiabilityReport r = scenario_identifiability(load_scenario(o.configs.front()));
            print_identifiability(r);
            return r.satisfied ? kExitOk : kExitIdentifiability;
        }
        if (*rep) {
            if (report_dir.empty()) report_dir = load_scenario(o.configs.front()).output_dir.string();
            return cmd_report(report_dir);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}
