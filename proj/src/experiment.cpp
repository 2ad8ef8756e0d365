#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "noisy_mdp/bayesian_estimator.hpp"
#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/experiment_harness.hpp"
#include "noisy_mdp/warnings.hpp"

namespace noisy_mdp {

using json = nlohmann::ordered_json;

namespace {

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

json identifiability_json(const IdentifiabilityReport& r) {
    json blocks = json::array();
    for (const auto& b : r.violating_subsets) blocks.push_back(b.block());
    return {{"satisfied", r.satisfied}, {"tolerance", r.tolerance}, {"violating_subsets", std::move(blocks)}};
}

IdentifiabilityReport all_blocks_violate(std::size_t n) {
    IdentifiabilityReport r;
    r.violating_subsets = canonical_blocks(n);
    return r;
}

ProtocolData protocol_data(const Scenario& s, std::size_t& steps_run) {
    const auto actions = s.action_indices();
    if (s.estimator.exact_q) {
        steps_run = 0;
        return exact_protocol_data(s.mdp, s.truth, actions);
    }
    RepetitiveProtocolConfig cfg{actions, s.estimator.burn_in, s.estimator.steps, s.seed};
    steps_run = 0;
    for (std::size_t a : actions) {
        steps_run += s.estimator.steps + s.estimator.burn_in.value_or(default_burn_in(s.mdp.transition(a)));
    }
    return run_protocol(s.mdp, s.truth, cfg);
}

void fill_from_estimate(RunReport& report, const EstimationResult& r, const ConfusionMatrix& truth) {
    for (const auto& c : r.candidates) {
        report.candidates.push_back({c.matrix.entries(), c.residual, std::nullopt, c.feasible,
                                     frobenius_error(c.matrix, truth)});
    }
    report.selected = r.selected;
    report.non_unique = r.non_unique;
    if (r.selected) report.frobenius_error = report.candidates[*r.selected].frobenius_error;
    for (const auto& note : r.notes) report.notes.push_back(note);
    report.metrics.insert(report.metrics.end(), r.metrics.begin(), r.metrics.end());
    for (const auto& [a, loss] : r.action_losses) report.metrics.emplace_back("loss action " + std::to_string(a), loss);
}

void run_repetitive(const Scenario& s, RunReport& report) {
    const ProtocolData data = protocol_data(s, report.steps);
    report.identifiability = data.size() >= 2 ? scenario_identifiability(s) : all_blocks_violate(s.n);
    MinimizeOptions opts;
    opts.starts = s.estimator.starts;
    opts.seed = s.seed;
    opts.tol_loss = s.estimator.tol_loss.value_or(s.estimator.exact_q ? 1e-10 : default_tol_loss(s.n, s.estimator.steps));
    const EstimationResult r = minimize_loss(data, opts);
    fill_from_estimate(report, r, s.truth);
    report.metrics.emplace_back("tol_loss", opts.tol_loss);
    const bool any_feasible =
        std::any_of(r.candidates.begin(), r.candidates.end(), [](const Candidate& c) { return c.feasible; });
    if (!any_feasible) {
        report.error = "no candidate reached the feasibility threshold";
        report.exit_code = kExitEstimator;
    }
}

void run_partition(const Scenario& s, RunReport& report) {
    const ProtocolData data = protocol_data(s, report.steps);
    PartitionOptions opts;
    opts.abort_on_violation = s.estimator.abort_on_violation;
    const EstimationResult r = estimate_by_partitions(s.mdp, data, opts);
    report.identifiability = r.identifiability;
    fill_from_estimate(report, r, s.truth);
}

std::vector<std::filesystem::path> write_snapshots(const Scenario& s, const BayesRun& run) {
    const PosteriorOverC& post = run.final_posterior;
    std::string csv;
    std::vector<std::filesystem::path> files;
    if (post.kind() == PosteriorKind::grid) {
        csv = "t,alpha,beta,weight\n";
        for (const auto& snap : run.snapshots) {
            const std::string t = std::to_string(snap.t);
            for (std::size_t k = 0; k < snap.weights.size(); ++k) {
                const auto& c = post.coordinates()[k];
                csv += t + ',' + fmt17(c[0]) + ',' + fmt17(c[1]) + ',' + fmt17(snap.weights[k]) + '\n';
            }
        }
    } else {
        csv = "t,point_id,weight\n";
        for (const auto& snap : run.snapshots) {
            const std::string t = std::to_string(snap.t);
            for (std::size_t k = 0; k < snap.weights.size(); ++k) {
                csv += t + ',' + std::to_string(k) + ',' + fmt17(snap.weights[k]) + '\n';
            }
        }
        json points = json::array();
        for (std::size_t k = 0; k < post.size(); ++k) {
            points.push_back({{"point_id", k}, {"matrix", matrix_json(post.support().matrix(k))}});
        }
        json sidecar = {{"n", post.num_states()}, {"points", std::move(points)}};
        write_file(s.output_dir / "support.json", sidecar.dump(2) + "\n");
        files.emplace_back("support.json");
    }
    write_file(s.output_dir / "snapshots.csv", csv);
    files.insert(files.begin(), "snapshots.csv");
    return files;
}

void run_bayes_scenario(const Scenario& s, RunReport& report) {
    BayesRunConfig cfg;
    cfg.order = s.estimator.type == EstimatorType::bayes1 ? 1 : 2;
    cfg.policy = UniformPolicy{s.action_indices()};
    cfg.steps = s.estimator.steps;
    cfg.posterior.kind = s.estimator.particles > 0 ? PosteriorKind::ensemble : PosteriorKind::grid;
    cfg.posterior.resolution = s.estimator.grid_res;
    cfg.posterior.particles = s.estimator.particles;
    cfg.posterior.num_states = s.n;
    cfg.posterior.seed = s.seed;
    cfg.snapshot_every = s.snapshot_every;
    cfg.seed = s.seed;
    report.steps = cfg.steps;

    const BayesRun run = run_bayes(s.mdp, s.truth, cfg);
    const PosteriorOverC& post = run.final_posterior;
    const PosteriorSummary summary = posterior_summary(post, 2);
    for (std::size_t k : summary.local_modes) {
        const ConfusionMatrix c(post.support().matrix(k));
        report.candidates.push_back({c.entries(), std::nullopt, post.weights()[k], true, frobenius_error(c, s.truth)});
    }
    if (!report.candidates.empty()) {
        report.selected = 0;
        report.frobenius_error = report.candidates[0].frobenius_error;
    }
    report.non_unique = report.candidates.size() > 1;
    report.metrics.emplace_back("entropy", summary.entropy);
    report.metrics.emplace_back("mass within 0.05 of truth", mass_within(post, 0.05, s.truth.entries()));
    report.metrics.emplace_back("mean frobenius error", frobenius_error(ConfusionMatrix(summary.mean), s.truth));
    if (s.action_indices().size() >= 2) report.identifiability = scenario_identifiability(s);

    for (const auto& f : write_snapshots(s, run)) report.files.push_back(f.generic_string());
}

}  // namespace

double frobenius_error(const ConfusionMatrix& estimate, const ConfusionMatrix& truth) {
    if (estimate.size() != truth.size()) throw ValidationError("frobenius_error: dimension mismatch");
    return (estimate.entries() - truth.entries()).norm();
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
    if (dynamic_cast<const IdentifiabilityFailure*>(&e)) return kExitIdentifiability;
    return kExitEstimator;
}

IdentifiabilityReport scenario_identifiability(const Scenario& s) {
    std::map<std::size_t, StateDistribution> stationaries;
    for (std::size_t a : s.action_indices()) stationaries.emplace(a, stationary_distribution(s.mdp.transition(a)));
    if (stationaries.size() < 2) return all_blocks_violate(s.n);
    return check_subset_condition(stationaries);
}

std::string report_json(const RunReport& r) {
    json j;
    j["estimator"] = r.estimator;
    j["scenario_digest"] = r.scenario_digest;
    j["seed"] = r.seed;
    j["steps"] = r.steps;
    json cands = json::array();
    for (const auto& c : r.candidates) {
        json e;
        e["matrix"] = matrix_json(c.matrix);
        e["residual"] = c.residual ? json(*c.residual) : json(nullptr);
        if (c.weight) e["weight"] = *c.weight;
        e["feasible"] = c.feasible;
        e["frobenius_error"] = c.frobenius_error;
        cands.push_back(std::move(e));
    }
    j["candidates"] = std::move(cands);
    j["selected"] = r.selected ? json(*r.selected) : json(nullptr);
    j["non_unique"] = r.non_unique;
    j["frobenius_error"] = r.frobenius_error ? json(*r.frobenius_error) : json(nullptr);
    j["identifiability"] = r.identifiability ? identifiability_json(*r.identifiability) : json(nullptr);
    json metrics = json::object();
    for (const auto& [k, v] : r.metrics) metrics[k] = std::isfinite(v) ? json(v) : json(nullptr);
    j["metrics"] = std::move(metrics);
    j["notes"] = r.notes;
    j["files"] = r.files;
    j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    j["exit_code"] = r.exit_code;
    return j.dump(2) + "\n";
}

RunReport run_experiment(const Scenario& s) {
    RunReport report;
    report.scenario_digest = scenario_digest(s);
    report.estimator = to_string(s.estimator.type);
    report.seed = s.seed;

    std::filesystem::create_directories(s.output_dir);
    {
        ScopedWarningCapture capture([&](const std::string& msg) { report.notes.push_back("warning: " + msg); });
        try {
            switch (s.estimator.type) {
                case EstimatorType::repetitive: run_repetitive(s, report); break;
                case EstimatorType::partition: run_partition(s, report); break;
                case EstimatorType::bayes1:
                case EstimatorType::bayes2: run_bayes_scenario(s, report); break;
            }
        } catch (const Error& e) {
            report.error = e.what();
            report.exit_code = exit_code_for(e);
        }
    }
    write_file(s.output_dir / "scenario.json", scenario_json(s) + "\n");
    report.files.insert(report.files.begin(), "scenario.json");
    report.files.push_back("summary.json");
    write_file(s.output_dir / "summary.json", report_json(report));
    return report;
}

std::vector<RunReport> run_batch(const std::vector<Scenario>& scenarios, std::size_t jobs) {
    std::set<std::filesystem::path> dirs;
    for (const auto& s : scenarios) {
        if (!dirs.insert(std::filesystem::weakly_canonical(s.output_dir)).second) {
            throw ValidationError("batch: output directory " + s.output_dir.string() + " used twice");
        }
    }
    std::vector<RunReport> reports(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < scenarios.size();) {
            try {
                reports[i] = run_experiment(scenarios[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(scenarios.size(), 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return reports;
}

std::filesystem::path simulate_scenario(const Scenario& s) {
    const Trajectory traj = simulate(s.mdp, s.truth, UniformPolicy{s.action_indices()}, s.estimator.steps,
                                     StateDistribution::uniform(s.n), s.seed);
    std::string csv = "t,s,s_tilde,a\n";
    for (const auto& step : traj.steps) {
        csv += std::to_string(step.t) + ',' + std::to_string(step.state) + ',' + std::to_string(step.observed) + ',' +
               (step.action == kNoAction ? std::string() : s.action_names[std::size_t(step.action)]) + '\n';
    }
    std::filesystem::create_directories(s.output_dir);
    const auto path = s.output_dir / "trajectory.csv";
    write_file(path, csv);
    return path;
}

}  // namespace noisy_mdp
