#include "noisy_mdp/bayesian_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/rng.hpp"

namespace noisy_mdp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Returns log(sum(exp(v))) summed in index order; -inf when every entry is -inf.
double log_sum_exp(const std::vector<double>& v) {
    double peak = kNegInf;
    for (double x : v) peak = std::max(peak, x);
    if (peak == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - peak);
    return peak + std::log(sum);
}

Vector normalized(Vector v) {
    const double total = v.sum();
    if (!(total > 0.0)) throw InconsistentObservation("belief update produced no probability mass");
    return v / total;
}

}  // namespace

PosteriorOverC::PosteriorOverC(std::shared_ptr<const Support> support, std::vector<double> log_weights,
                               PosteriorKind kind, std::vector<std::array<double, 2>> coordinates,
                               std::size_t resolution)
    : support_(std::move(support)), kind_(kind), coordinates_(std::move(coordinates)), resolution_(resolution) {
    if (!support_) throw ValidationError("posterior: missing support");
    if (log_weights.size() != support_->size()) throw ValidationError("posterior: weight count mismatch");
    if (kind_ == PosteriorKind::grid && coordinates_.size() != support_->size()) {
        throw ValidationError("posterior: grid needs one coordinate per support point");
    }
    const double log_total = log_sum_exp(log_weights);
    if (!std::isfinite(log_total)) throw ValidationError("posterior: weights carry no mass");

    // Normalize in linear space after a max shift, then derive the logs from
    // the normalized weights so both views agree.
    double peak = kNegInf;
    for (double x : log_weights) peak = std::max(peak, x);
    weights_.resize(log_weights.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < log_weights.size(); ++k) {
        weights_[k] = std::exp(log_weights[k] - peak);
        sum += weights_[k];
    }
    log_weights_.resize(weights_.size());
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        weights_[k] /= sum;
        log_weights_[k] = log_weights[k] == kNegInf ? kNegInf : log_weights[k] - peak - std::log(sum);
    }
}

PosteriorOverC PosteriorOverC::reweighted(std::vector<double> log_weights) const {
    return PosteriorOverC(support_, std::move(log_weights), kind_, coordinates_, resolution_);
}

Matrix alpha_beta_matrix(double alpha, double beta) {
    Matrix c(2, 2);
    c << 1.0 - alpha, alpha, beta, 1.0 - beta;
    return c;
}

PosteriorOverC init_posterior(const PosteriorSpec& spec) {
    if (spec.kind == PosteriorKind::grid) {
        if (spec.num_states != 2) throw ValidationError("grid posterior: the (alpha, beta) family needs 2 states");
        if (spec.resolution < 2) throw ValidationError("grid posterior: resolution must be at least 2");
        const std::size_t r = spec.resolution;
        std::vector<double> flat;
        flat.reserve(r * r * 4);
        std::vector<std::array<double, 2>> coords;
        coords.reserve(r * r);
        for (std::size_t i = 0; i < r; ++i) {
            const double alpha = (double(i) + 0.5) / double(r);
            for (std::size_t j = 0; j < r; ++j) {
                const double beta = (double(j) + 0.5) / double(r);
                coords.push_back({alpha, beta});
                flat.insert(flat.end(), {1.0 - alpha, alpha, beta, 1.0 - beta});
            }
        }
        auto support = std::make_shared<const Support>(2, std::move(flat));
        return PosteriorOverC(std::move(support), std::vector<double>(r * r, 0.0), PosteriorKind::grid,
                              std::move(coords), r);
    }

    if (spec.particles < 1) throw ValidationError("ensemble posterior: need at least one particle");
    if (spec.num_states < 2) throw ValidationError("ensemble posterior: need at least 2 states");
    const std::size_t n = spec.num_states;
    CounterRng rng(spec.seed, 11);
    std::vector<double> flat;
    flat.reserve(spec.particles * n * n);
    std::vector<double> row(n);
    for (std::size_t k = 0; k < spec.particles; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            double total = 0.0;
            for (auto& x : row) {
                x = -std::log1p(-rng.next());
                total += x;
            }
            for (double x : row) flat.push_back(x / total);
        }
    }
    auto support = std::make_shared<const Support>(n, std::move(flat));
    return PosteriorOverC(std::move(support), std::vector<double>(spec.particles, 0.0), PosteriorKind::ensemble);
}

namespace {

// Folds kernel output into new weights and the mixed belief (fixed summation order).
std::pair<PosteriorOverC, Vector> fold(const PosteriorOverC& posterior, const KernelOutput& out,
                                       double underflow_floor) {
    const std::size_t k = posterior.size();
    const std::size_t n = posterior.num_states();
    std::vector<double> log_w(k);
    for (std::size_t p = 0; p < k; ++p) {
        const double lw = posterior.log_weights()[p];
        log_w[p] = (out.likelihood[p] > 0.0 && lw != kNegInf) ? lw + std::log(out.likelihood[p]) : kNegInf;
    }
    // Prior log weights are normalized, so this is log of the evidence.
    const double log_evidence = log_sum_exp(log_w);
    if (!(log_evidence > std::log(underflow_floor))) {
        throw InconsistentObservation(
            "observation has (numerically) zero likelihood under every support point; "
            "increase the support resolution");
    }
    PosteriorOverC next = posterior.reweighted(std::move(log_w));

    Vector belief = Vector::Zero(Eigen::Index(n));
    const auto& w = next.weights();
    for (std::size_t p = 0; p < k; ++p) {
        if (w[p] == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) belief(Eigen::Index(i)) += w[p] * out.terms[p * n + i];
    }
    return {std::move(next), normalized(std::move(belief))};
}

void check_step_inputs(const PosteriorOverC& posterior, std::size_t belief_size, const Matrix& transition,
                       std::initializer_list<std::size_t> observations) {
    const std::size_t n = posterior.num_states();
    if (belief_size != n || std::size_t(transition.rows()) != n || std::size_t(transition.cols()) != n) {
        throw ValidationError("bayes step: dimension mismatch");
    }
    for (std::size_t o : observations) {
        if (o >= n) throw ValidationError("bayes step: observation out of range");
    }
}

}  // namespace

FirstOrderUpdate first_order_step(const PosteriorOverC& posterior, const BeliefState& belief,
                                  const Matrix& transition, std::size_t obs_next, const StepOptions& opts) {
    check_step_inputs(posterior, belief.size(), transition, {obs_next});
    const Vector predicted = transition.transpose() * belief.probs();
    KernelOutput out;
    first_order_kernel(opts.backend, posterior.support(), std::span<const double>(predicted.data(), predicted.size()),
                       obs_next, out);
    auto [next, b] = fold(posterior, out, opts.underflow_floor);
    return {std::move(next), BeliefState(std::move(b))};
}

SecondOrderUpdate second_order_step(const PosteriorOverC& posterior, const ModifiedBeliefState& belief,
                                    const Matrix& transition, std::size_t obs_now, std::size_t obs_next,
                                    const StepOptions& opts) {
    check_step_inputs(posterior, belief.size(), transition, {obs_now, obs_next});
    KernelOutput out;
    second_order_kernel(opts.backend, posterior.support(),
                        std::span<const double>(belief.probs().data(), belief.probs().size()), transition, obs_now,
                        obs_next, out);
    auto [next, b] = fold(posterior, out, opts.underflow_floor);
    return {std::move(next), ModifiedBeliefState(std::move(b))};
}

PosteriorSummary posterior_summary(const PosteriorOverC& posterior, std::size_t top_k) {
    const auto& w = posterior.weights();
    const std::size_t k = w.size();
    const auto n = Eigen::Index(posterior.num_states());

    PosteriorSummary s;
    s.mean = Matrix::Zero(n, n);
    for (std::size_t p = 0; p < k; ++p) {
        if (w[p] > w[s.mode]) s.mode = p;
        if (w[p] > 0.0) {
            s.mean += w[p] * posterior.support().matrix(p);
            s.entropy -= w[p] * std::log(w[p]);
        }
    }
    s.entropy = std::max(s.entropy, 0.0);

    // A point beats a neighbour of equal weight only if it has the lower index.
    const auto dominates = [&](std::size_t p, std::size_t q) { return w[p] > w[q] || (w[p] == w[q] && p < q); };
    std::vector<std::size_t> modes;
    if (posterior.kind() == PosteriorKind::grid) {
        const auto r = static_cast<long>(posterior.resolution());
        for (long i = 0; i < r; ++i) {
            for (long j = 0; j < r; ++j) {
                const auto p = std::size_t(i * r + j);
                if (w[p] <= 0.0) continue;
                bool local = true;
                for (long di = -1; di <= 1 && local; ++di) {
                    for (long dj = -1; dj <= 1 && local; ++dj) {
                        if ((di == 0 && dj == 0) || i + di < 0 || i + di >= r || j + dj < 0 || j + dj >= r) continue;
                        local = dominates(p, std::size_t((i + di) * r + (j + dj)));
                    }
                }
                if (local) modes.push_back(p);
            }
        }
    } else {
        for (std::size_t p = 0; p < k; ++p) {
            if (w[p] > 0.0) modes.push_back(p);
        }
    }
    std::stable_sort(modes.begin(), modes.end(), dominates);
    if (modes.size() > top_k) modes.resize(top_k);
    s.local_modes = std::move(modes);
    return s;
}

double mass_within(const PosteriorOverC& posterior, double radius, const std::array<double, 2>& point) {
    if (posterior.kind() != PosteriorKind::grid) throw ValidationError("mass_within: coordinates need a grid posterior");
    double mass = 0.0;
    for (std::size_t p = 0; p < posterior.size(); ++p) {
        const auto& c = posterior.coordinates()[p];
        if (std::abs(c[0] - point[0]) <= radius && std::abs(c[1] - point[1]) <= radius) mass += posterior.weights()[p];
    }
    return mass;
}

double mass_within(const PosteriorOverC& posterior, double radius, const Matrix& point) {
    const std::size_t n = posterior.num_states();
    if (std::size_t(point.rows()) != n || std::size_t(point.cols()) != n) {
        throw ValidationError("mass_within: dimension mismatch");
    }
    double mass = 0.0;
    for (std::size_t p = 0; p < posterior.size(); ++p) {
        bool inside = true;
        for (std::size_t i = 0; i < n && inside; ++i) {
            for (std::size_t j = 0; j < n && inside; ++j) {
                inside = std::abs(posterior.support().at(p, i, j) - point(Eigen::Index(i), Eigen::Index(j))) <= radius;
            }
        }
        if (inside) mass += posterior.weights()[p];
    }
    return mass;
}

namespace {

BayesSnapshot snapshot(std::size_t t, const PosteriorOverC& posterior, const Vector& belief) {
    return {t, posterior.weights(), belief, posterior_summary(posterior)};
}

}  // namespace

BayesRun run_bayes(const Mdp& mdp, const ConfusionMatrix& truth, const BayesRunConfig& cfg) {
    if (cfg.order != 1 && cfg.order != 2) throw ValidationError("run_bayes: order must be 1 or 2");
    if (cfg.steps < 1) throw ValidationError("run_bayes: need at least one step");
    const std::size_t n = mdp.num_states();
    PosteriorSpec spec = cfg.posterior;
    spec.num_states = n;
    PosteriorOverC posterior = init_posterior(spec);

    Trajectory traj = simulate(mdp, truth, cfg.policy, cfg.steps, StateDistribution::uniform(n), cfg.seed);
    const auto& steps = traj.steps;
    const auto due = [&](std::size_t t) {
        return t == cfg.steps || (cfg.snapshot_every > 0 && t % cfg.snapshot_every == 0);
    };

    std::vector<BayesSnapshot> snaps;
    if (cfg.order == 1) {
        // Base case: uniform state prior refined by s~_0 through each support point.
        const Matrix stay = Matrix::Identity(Eigen::Index(n), Eigen::Index(n));
        auto [post, belief] = first_order_step(posterior, BeliefState::uniform(n), stay, steps[0].observed, cfg.step);
        snaps.push_back(snapshot(0, post, belief.probs()));
        for (std::size_t t = 0; t < cfg.steps; ++t) {
            const Matrix& p = mdp.transition(std::size_t(steps[t].action));
            auto upd = first_order_step(post, belief, p, steps[t + 1].observed, cfg.step);
            post = std::move(upd.posterior);
            belief = std::move(upd.belief);
            if (due(t + 1)) snaps.push_back(snapshot(t + 1, post, belief.probs()));
        }
        return {std::move(snaps), std::move(post), std::move(traj)};
    }

    ModifiedBeliefState belief = ModifiedBeliefState::uniform(n);
    snaps.push_back(snapshot(0, posterior, belief.probs()));
    for (std::size_t t = 0; t < cfg.steps; ++t) {
        const Matrix& p = mdp.transition(std::size_t(steps[t].action));
        auto upd = second_order_step(posterior, belief, p, steps[t].observed, steps[t + 1].observed, cfg.step);
        posterior = std::move(upd.posterior);
        belief = std::move(upd.belief);
        if (due(t + 1)) snaps.push_back(snapshot(t + 1, posterior, belief.probs()));
    }
    return {std::move(snaps), std::move(posterior), std::move(traj)};
}

}  // namespace noisy_mdp
