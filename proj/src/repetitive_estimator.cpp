#include "noisy_mdp/repetitive_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/rng.hpp"
#include "noisy_mdp/warnings.hpp"

namespace noisy_mdp {

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

std::size_t default_burn_in(const Matrix& transition) {
    constexpr double kEps = 1e-3;
    constexpr std::size_t kFlat = 1000;
    const Eigen::EigenSolver<Matrix> solver(transition, false);
    if (solver.info() != Eigen::Success) return kFlat;
    std::vector<double> moduli;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) moduli.push_back(std::abs(solver.eigenvalues()(i)));
    std::sort(moduli.begin(), moduli.end(), std::greater<>());
    if (moduli.size() < 2) return kFlat;
    const double gap = 1.0 - moduli[1];
    if (gap <= 1e-9) return kFlat;
    return static_cast<std::size_t>(std::ceil(std::log(1.0 / kEps) / gap));
}

ProtocolData run_protocol(const Mdp& mdp, const ConfusionMatrix& truth, const RepetitiveProtocolConfig& cfg) {
    if (cfg.actions.empty()) throw ValidationError("protocol: A0 must not be empty");
    if (cfg.steps < 1) throw ValidationError("protocol: T must be at least 1");

    ProtocolData data;
    std::vector<std::size_t> burn(cfg.actions.size());
    for (std::size_t k = 0; k < cfg.actions.size(); ++k) {
        const std::size_t a = cfg.actions[k];
        const Matrix& p = mdp.transition(a);
        StateDistribution pi = stationary_distribution(p);
        if (chain_period(p) > 1) {
            warn("P(" + std::to_string(a) + ") is periodic; relying on time-averaged observed transitions");
        }
        burn[k] = cfg.burn_in.value_or(default_burn_in(p));
        data.emplace(a, ActionData{std::move(pi), p, {}});
    }

    ActionSchedule schedule;
    std::vector<Window> windows;
    for (std::size_t k = 0; k < cfg.actions.size(); ++k) {
        const std::size_t start = schedule.actions.size();
        schedule.actions.insert(schedule.actions.end(), burn[k] + cfg.steps, cfg.actions[k]);
        windows.push_back({start + burn[k], schedule.actions.size()});
    }
    const Trajectory traj = simulate(mdp, truth, schedule, schedule.actions.size(),
                                     StateDistribution::uniform(mdp.num_states()), cfg.seed);

    // A repeated action gets its windows pooled.
    for (auto& [a, d] : data) {
        ObservedTransitionMatrix pooled;
        Matrix counts = Matrix::Zero(Eigen::Index(mdp.num_states()), Eigen::Index(mdp.num_states()));
        for (std::size_t k = 0; k < cfg.actions.size(); ++k) {
            if (cfg.actions[k] != a) continue;
            const auto q = empirical_observed_transition(traj, mdp.num_states(), a, windows[k]);
            for (Eigen::Index i = 0; i < counts.rows(); ++i) counts.row(i) += q.entries.row(i) * q.row_mass(i);
        }
        const auto n = counts.rows();
        pooled.entries = Matrix::Zero(n, n);
        pooled.row_mass = counts.rowwise().sum();
        pooled.row_counts.resize(std::size_t(n));
        pooled.row_defined.resize(std::size_t(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double total = pooled.row_mass(i);
            pooled.row_counts[std::size_t(i)] = static_cast<std::uint64_t>(std::llround(total));
            pooled.row_defined[std::size_t(i)] = total > 0.0;
            if (total > 0.0) pooled.entries.row(i) = counts.row(i) / total;
        }
        d.observed = std::move(pooled);
    }
    return data;
}

ProtocolData exact_protocol_data(const Mdp& mdp, const ConfusionMatrix& truth,
                                 const std::vector<std::size_t>& actions) {
    if (actions.empty()) throw ValidationError("protocol: A0 must not be empty");
    ProtocolData data;
    for (std::size_t a : actions) {
        const Matrix& p = mdp.transition(a);
        StateDistribution pi = stationary_distribution(p);
        auto q = exact_observed_transition(truth, pi, p);
        data.emplace(a, ActionData{std::move(pi), p, std::move(q)});
    }
    return data;
}

namespace {

// Residual R = C^T M C - diag(C^T pi) Q with undefined rows zeroed.
Matrix masked_residual(const Matrix& c, const StateDistribution& pi, const Matrix& transition,
                       const ObservedTransitionMatrix& observed) {
    const Matrix m = pi.probs().asDiagonal() * transition;
    const Vector marginal = c.transpose() * pi.probs();
    Matrix r = c.transpose() * m * c - marginal.asDiagonal() * observed.entries;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        if (!observed.row_defined[std::size_t(i)]) r.row(i).setZero();
    }
    return r;
}

void check_dims(const Matrix& c, const ActionData& d) {
    const auto n = c.rows();
    if (c.cols() != n || d.transition.rows() != n || Eigen::Index(d.pi.size()) != n ||
        d.observed.entries.rows() != n) {
        throw ValidationError("loss: dimension mismatch");
    }
}

}  // namespace

double loss_single(const Matrix& c, const StateDistribution& pi, const Matrix& transition,
                   const ObservedTransitionMatrix& observed) {
    return masked_residual(c, pi, transition, observed).squaredNorm();
}

double loss_single(const ConfusionMatrix& c, const StateDistribution& pi, const Matrix& transition,
                   const ObservedTransitionMatrix& observed) {
    return loss_single(c.entries(), pi, transition, observed);
}

double loss_total(const Matrix& c, const ProtocolData& data) {
    if (data.empty()) throw ValidationError("loss_total: no action data");
    double sum = 0.0;
    for (const auto& [a, d] : data) {
        check_dims(c, d);
        sum += loss_single(c, d.pi, d.transition, d.observed);
    }
    return sum / double(data.size());
}

double loss_total(const ConfusionMatrix& c, const ProtocolData& data) { return loss_total(c.entries(), data); }

Matrix loss_gradient(const Matrix& c, const ProtocolData& data) {
    if (data.empty()) throw ValidationError("loss_gradient: no action data");
    Matrix g = Matrix::Zero(c.rows(), c.cols());
    for (const auto& [a, d] : data) {
        check_dims(c, d);
        const Matrix m = d.pi.probs().asDiagonal() * d.transition;
        const Matrix r = masked_residual(c, d.pi, d.transition, d.observed);
        const Vector weighted_q = r.cwiseProduct(d.observed.entries).rowwise().sum();
        g += 2.0 * (m * c * r.transpose() + m.transpose() * c * r - d.pi.probs() * weighted_q.transpose());
    }
    return g / double(data.size());
}

Matrix simplex_map(const Matrix& theta) {
    Matrix c = theta.cwiseAbs2();
    for (Eigen::Index k = 0; k < c.rows(); ++k) c.row(k) /= c.row(k).sum();
    return c;
}

Matrix loss_gradient_theta(const Matrix& theta, const ProtocolData& data) {
    const Matrix c = simplex_map(theta);
    const Matrix g = loss_gradient(c, data);
    Matrix out(theta.rows(), theta.cols());
    for (Eigen::Index k = 0; k < theta.rows(); ++k) {
        const double s = theta.row(k).squaredNorm();
        const double centre = c.row(k).dot(g.row(k));
        for (Eigen::Index l = 0; l < theta.cols(); ++l) {
            out(k, l) = 2.0 * theta(k, l) / s * (g(k, l) - centre);
        }
    }
    return out;
}

double default_tol_loss(std::size_t num_states, std::size_t steps) {
    return 10.0 * double(num_states * num_states) / double(std::max<std::size_t>(steps, 1));
}

namespace {

struct LocalMinimum {
    Matrix c;
    double loss = std::numeric_limits<double>::infinity();
    bool converged = false;
};

// BFGS on the flattened theta with Armijo backtracking.
LocalMinimum bfgs(Matrix theta, const ProtocolData& data, const MinimizeOptions& opts) {
    const Eigen::Index rows = theta.rows();
    const Eigen::Index dim = theta.size();
    const auto f = [&](const Vector& v) { return loss_total(simplex_map(v.reshaped(rows, rows)), data); };
    const auto grad = [&](const Vector& v) -> Vector {
        return loss_gradient_theta(v.reshaped(rows, rows), data).reshaped();
    };

    Vector x = theta.reshaped();
    double fx = f(x);
    Vector g = grad(x);
    Matrix h = Matrix::Identity(dim, dim);
    bool scaled = false;
    std::size_t stalls = 0;
    LocalMinimum out;

    for (std::size_t it = 0; it < opts.max_iters; ++it) {
        if (!std::isfinite(fx)) return out;
        if (fx <= 1e-30 || g.cwiseAbs().maxCoeff() <= opts.tol_grad) {
            out.converged = true;
            break;
        }
        Vector dir = -h * g;
        double slope = g.dot(dir);
        if (slope >= 0.0) {
            h.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        Vector next;
        double fnext = fx;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            next = x + step * dir;
            fnext = f(next);
            if (std::isfinite(fnext) && fnext <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (h.isIdentity()) {
                out.converged = true;  // no descent available along the gradient
                break;
            }
            h.setIdentity();
            continue;
        }
        const Vector gnext = grad(next);
        const Vector s = next - x;
        const Vector y = gnext - g;
        const double sy = s.dot(y);
        if (sy > 1e-300) {
            if (!scaled) {
                h *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Vector hy = h * y;
            h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
        }
        stalls = (fx - fnext <= 1e-15 * std::max(fx, 1e-300)) ? stalls + 1 : 0;
        x = next;
        fx = fnext;
        g = gnext;
        if (stalls >= 25) {
            out.converged = true;
            break;
        }
    }
    out.c = simplex_map(x.reshaped(rows, rows));
    out.loss = loss_total(out.c, data);
    if (!std::isfinite(out.loss)) out.converged = false;
    return out;
}

Matrix dirichlet_rows(std::size_t n, CounterRng& rng) {
    Matrix c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = -std::log1p(-rng.next());
        c.row(i) /= c.row(i).sum();
    }
    return c;
}

bool candidate_order(const Candidate& a, const Candidate& b, const Matrix& uniform) {
    constexpr double kTie = 1e-14;
    if (std::abs(a.residual - b.residual) > kTie) return a.residual < b.residual;
    const double da = max_abs_diff(a.matrix.entries(), uniform);
    const double db = max_abs_diff(b.matrix.entries(), uniform);
    if (da != db) return da < db;
    const Matrix& x = a.matrix.entries();
    const Matrix& y = b.matrix.entries();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (x(i, j) != y(i, j)) return x(i, j) < y(i, j);
        }
    }
    return false;
}

}  // namespace

EstimationResult minimize_loss(const ProtocolData& data, const MinimizeOptions& opts) {
    if (data.empty()) throw ValidationError("minimize_loss: no action data");
    const std::size_t n = data.begin()->second.pi.size();
    const auto ni = Eigen::Index(n);
    const Matrix uniform = Matrix::Constant(ni, ni, 1.0 / double(n));

    std::vector<Matrix> starts;
    CounterRng rng(opts.seed, 7);
    for (std::size_t s = 0; s < opts.starts; ++s) starts.push_back(dirichlet_rows(n, rng));
    starts.push_back(Matrix::Identity(ni, ni));
    starts.push_back(uniform);

    std::vector<LocalMinimum> minima(starts.size());
#pragma omp parallel for schedule(dynamic)
    for (long s = 0; s < static_cast<long>(starts.size()); ++s) {
        minima[std::size_t(s)] = bfgs(starts[std::size_t(s)].cwiseSqrt(), data, opts);
    }

    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < minima.size(); ++s) {
        if (minima[s].converged) order.push_back(s);
    }
    if (order.empty()) throw NoConvergence("minimize_loss: no start converged");
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return minima[a].loss < minima[b].loss; });

    EstimationResult result;
    for (std::size_t s : order) {
        const Matrix& c = minima[s].c;
        const bool seen = std::any_of(result.candidates.begin(), result.candidates.end(), [&](const Candidate& k) {
            return max_abs_diff(k.matrix.entries(), c) <= 1e-3;
        });
        if (seen) continue;
        result.candidates.push_back({ConfusionMatrix(c), minima[s].loss, minima[s].loss <= opts.tol_loss});
    }
    std::stable_sort(result.candidates.begin(), result.candidates.end(),
                     [&](const Candidate& a, const Candidate& b) { return candidate_order(a, b, uniform); });

    std::vector<std::size_t> feasible;
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        if (result.candidates[i].feasible) feasible.push_back(i);
    }
    if (feasible.size() == 1) {
        result.selected = feasible.front();
    } else if (feasible.size() > 1) {
        result.non_unique = true;
        result.notes.push_back(std::to_string(feasible.size()) +
                               " feasible candidates; the action set does not identify C");
    } else {
        result.notes.push_back("no candidate reached the feasibility threshold");
    }

    const Candidate& reference = result.candidates[result.selected.value_or(0)];
    for (const auto& [a, d] : data) {
        result.action_losses[a] = loss_single(reference.matrix, d.pi, d.transition, d.observed);
    }
    return result;
}

}  // namespace noisy_mdp
