#include "noisy_mdp/mdp_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>

#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/rng.hpp"
#include "noisy_mdp/warnings.hpp"

namespace noisy_mdp {

namespace {

std::string describe(std::string_view what, Eigen::Index row) {
    std::ostringstream os;
    os << what << " row " << row;
    return os.str();
}

Vector validated_probability_vector(Vector v, std::string_view what) {
    if (v.size() == 0) throw ValidationError(std::string(what) + ": empty distribution");
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v(i)) || v(i) < -kStochasticTol || v(i) > 1.0 + kStochasticTol) {
            throw ValidationError(std::string(what) + ": entry " + std::to_string(i) +
                                  " outside [0, 1]");
        }
        v(i) = std::clamp(v(i), 0.0, 1.0);
    }
    const double total = v.sum();
    const double dev = std::abs(total - 1.0);
    if (dev > kRenormalizeTol) {
        std::ostringstream os;
        os << what << ": sums to " << total << ", expected 1";
        throw ValidationError(os.str());
    }
    if (dev > kStochasticTol) {
        warn(std::string(what) + ": renormalized (sum off by " + std::to_string(dev) + ")");
        v /= total;
    }
    return v;
}

// Breadth-first reachability from state 0 over positive entries (optionally transposed).
std::vector<bool> reachable_from_zero(const Matrix& p, bool transposed) {
    const Eigen::Index n = p.rows();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::queue<Eigen::Index> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
        const Eigen::Index u = frontier.front();
        frontier.pop();
        for (Eigen::Index v = 0; v < n; ++v) {
            const double w = transposed ? p(v, u) : p(u, v);
            if (w > 0.0 && !seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = true;
                frontier.push(v);
            }
        }
    }
    return seen;
}

}  // namespace

Matrix validated_stochastic(Matrix m, std::string_view what) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
        throw ValidationError(std::string(what) + ": expected a non-empty square matrix");
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double x = m(i, j);
            if (!std::isfinite(x) || x < -kStochasticTol || x > 1.0 + kStochasticTol) {
                throw ValidationError(describe(what, i) + ": entry " + std::to_string(j) +
                                      " outside [0, 1]");
            }
            m(i, j) = std::clamp(x, 0.0, 1.0);
        }
        const double total = m.row(i).sum();
        const double dev = std::abs(total - 1.0);
        if (dev > kRenormalizeTol) {
            std::ostringstream os;
            os << describe(what, i) << " sums to " << total << ", expected 1";
            throw ValidationError(os.str());
        }
        if (dev > kStochasticTol) {
            warn(describe(what, i) + " renormalized (sum off by " + std::to_string(dev) + ")");
            m.row(i) /= total;
        }
    }
    return m;
}

StateDistribution::StateDistribution(Vector probs)
    : probs_(validated_probability_vector(std::move(probs), "state distribution")) {}

StateDistribution StateDistribution::uniform(std::size_t n) {
    return StateDistribution(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / double(n)));
}

StateDistribution StateDistribution::point_mass(std::size_t n, std::size_t state) {
    if (state >= n) throw ValidationError("point mass state out of range");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
    v(static_cast<Eigen::Index>(state)) = 1.0;
    return StateDistribution(std::move(v));
}

ConfusionMatrix::ConfusionMatrix(Matrix entries, bool symmetric)
    : entries_(validated_stochastic(std::move(entries), "confusion matrix")), symmetric_(symmetric) {
    if (entries_.rows() < 2) throw ValidationError("confusion matrix: need at least 2 states");
    if (symmetric_) {
        for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
            for (Eigen::Index j = i + 1; j < entries_.cols(); ++j) {
                if (std::abs(entries_(i, j) - entries_(j, i)) > kStochasticTol) {
                    throw ValidationError("confusion matrix: not symmetric at (" +
                                          std::to_string(i) + ", " + std::to_string(j) + ")");
                }
            }
        }
    }
}

ConfusionMatrix ConfusionMatrix::identity(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    return ConfusionMatrix(Matrix::Identity(k, k), true);
}

Mdp::Mdp(std::vector<Matrix> transitions) {
    if (transitions.empty()) throw ValidationError("mdp: need at least one action");
    n_ = static_cast<std::size_t>(transitions.front().rows());
    if (n_ < 2) throw ValidationError("mdp: need at least 2 states");
    transitions_.reserve(transitions.size());
    for (std::size_t a = 0; a < transitions.size(); ++a) {
        if (static_cast<std::size_t>(transitions[a].rows()) != n_) {
            throw ValidationError("mdp: action " + std::to_string(a) + " has wrong dimension");
        }
        transitions_.push_back(validated_stochastic(std::move(transitions[a]),
                                                    "transition P(" + std::to_string(a) + ")"));
    }
}

const Matrix& Mdp::transition(std::size_t action) const {
    if (action >= transitions_.size()) {
        throw ValidationError("action index " + std::to_string(action) + " out of range");
    }
    return transitions_[action];
}

bool ObservedTransitionMatrix::all_defined() const noexcept {
    return std::all_of(row_defined.begin(), row_defined.end(), [](bool b) { return b; });
}

bool is_irreducible(const Matrix& transition) {
    const auto fwd = reachable_from_zero(transition, false);
    const auto bwd = reachable_from_zero(transition, true);
    const auto all = [](const std::vector<bool>& v) {
        return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
    };
    return all(fwd) && all(bwd);
}

std::size_t chain_period(const Matrix& transition) {
    if (!is_irreducible(transition)) throw ReducibleChain("period undefined for a reducible chain");
    const Eigen::Index n = transition.rows();
    std::vector<long> level(static_cast<std::size_t>(n), -1);
    std::queue<Eigen::Index> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const Eigen::Index u = frontier.front();
        frontier.pop();
        for (Eigen::Index v = 0; v < n; ++v) {
            if (transition(u, v) > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
                level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
        }
    }
    long g = 0;
    for (Eigen::Index u = 0; u < n; ++u) {
        for (Eigen::Index v = 0; v < n; ++v) {
            if (transition(u, v) > 0.0) {
                const long d = level[static_cast<std::size_t>(u)] + 1 - level[static_cast<std::size_t>(v)];
                g = std::gcd(g, std::abs(d));
            }
        }
    }
    return static_cast<std::size_t>(g);
}

StateDistribution stationary_distribution(const Matrix& transition) {
    if (transition.rows() != transition.cols() || transition.rows() == 0) {
        throw ValidationError("stationary_distribution: expected a square matrix");
    }
    if (!is_irreducible(transition)) {
        throw ReducibleChain("transition graph is not strongly connected");
    }
    const Eigen::Index n = transition.rows();
    // pi^T (P - I) = 0 with one balance equation replaced by sum(pi) = 1.
    Matrix system = transition.transpose() - Matrix::Identity(n, n);
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    Vector pi = system.fullPivLu().solve(rhs);
    for (Eigen::Index i = 0; i < n; ++i) pi(i) = std::max(pi(i), 0.0);
    pi /= pi.sum();
    return StateDistribution(std::move(pi));
}

ObservedTransitionMatrix exact_observed_transition(const ConfusionMatrix& confusion,
                                                   const StateDistribution& pi,
                                                   const Matrix& transition) {
    const Matrix& c = confusion.entries();
    const Eigen::Index n = c.rows();
    if (static_cast<Eigen::Index>(pi.size()) != n || transition.rows() != n || transition.cols() != n) {
        throw ValidationError("exact_observed_transition: dimension mismatch");
    }
    const Vector marginal = c.transpose() * pi.probs();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(marginal(j) > 0.0)) throw UnreachableObservation(static_cast<std::size_t>(j));
    }
    const Matrix joint = c.transpose() * pi.probs().asDiagonal() * transition * c;

    ObservedTransitionMatrix q;
    q.entries = marginal.cwiseInverse().asDiagonal() * joint;
    q.row_counts.assign(static_cast<std::size_t>(n), 0);
    q.row_mass = marginal;
    q.row_defined.assign(static_cast<std::size_t>(n), true);
    q.exact = true;
    return q;
}

namespace {

struct ActionPicker {
    const Mdp& mdp;
    CounterRng policy_rng;
    std::size_t horizon;

    std::size_t operator()(const FixedAction& f, std::size_t) { return check(f.action); }

    std::size_t operator()(const ActionSchedule& s, std::size_t t) {
        if (t >= s.actions.size()) {
            throw ValidationError("action schedule shorter than horizon " + std::to_string(horizon));
        }
        return check(s.actions[t]);
    }

    std::size_t operator()(const UniformPolicy& p, std::size_t) {
        const std::size_t k = p.actions.empty() ? mdp.num_actions() : p.actions.size();
        const auto pick = std::min(static_cast<std::size_t>(policy_rng.next() * double(k)), k - 1);
        return check(p.actions.empty() ? pick : p.actions[pick]);
    }

    std::size_t check(std::size_t a) const {
        if (a >= mdp.num_actions()) {
            throw ValidationError("invalid action index " + std::to_string(a));
        }
        return a;
    }
};

std::vector<std::vector<double>> rows_of(const Matrix& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()),
                                          std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
        }
    }
    return rows;
}

}  // namespace

Trajectory simulate(const Mdp& mdp, const ConfusionMatrix& confusion, const ActionSource& actions,
                    std::size_t horizon, const StateDistribution& initial, std::uint64_t seed) {
    const std::size_t n = mdp.num_states();
    if (confusion.size() != n || initial.size() != n) {
        throw ValidationError("simulate: dimension mismatch between mdp, confusion and initial");
    }
    if (const auto* p = std::get_if<UniformPolicy>(&actions)) {
        for (std::size_t a : p->actions) {
            if (a >= mdp.num_actions()) throw ValidationError("invalid action index " + std::to_string(a));
        }
    }

    const auto obs_rows = rows_of(confusion.entries());
    std::vector<std::vector<std::vector<double>>> trans_rows;
    trans_rows.reserve(mdp.num_actions());
    for (const auto& p : mdp.transitions()) trans_rows.push_back(rows_of(p));
    const std::vector<double> init(initial.probs().data(), initial.probs().data() + n);

    CounterRng rng(seed, 0);
    ActionPicker picker{mdp, CounterRng(seed, 1), horizon};

    Trajectory traj;
    traj.seed = seed;
    traj.steps.reserve(horizon + 1);

    std::size_t state = rng.categorical(init);
    for (std::size_t t = 0;; ++t) {
        Step step;
        step.t = t;
        step.state = static_cast<std::uint32_t>(state);
        step.observed = static_cast<std::uint32_t>(rng.categorical(obs_rows[state]));
        if (t == horizon) {
            traj.steps.push_back(step);
            break;
        }
        const std::size_t a = std::visit([&](const auto& src) { return picker(src, t); }, actions);
        step.action = static_cast<std::int32_t>(a);
        traj.steps.push_back(step);
        state = rng.categorical(trans_rows[a][state]);
    }
    return traj;
}

ObservedTransitionMatrix empirical_observed_transition(const Trajectory& trajectory,
                                                       std::size_t num_states, std::size_t action,
                                                       Window window) {
    if (window.begin > window.end || window.end > trajectory.horizon()) {
        throw ValidationError("observation window outside trajectory bounds");
    }
    const auto n = static_cast<Eigen::Index>(num_states);
    Matrix counts = Matrix::Zero(n, n);
    for (std::size_t t = window.begin; t < window.end; ++t) {
        const Step& cur = trajectory.steps[t];
        if (cur.action != static_cast<std::int32_t>(action)) continue;
        const Step& next = trajectory.steps[t + 1];
        if (cur.observed >= num_states || next.observed >= num_states) {
            throw ValidationError("trajectory observation out of range");
        }
        counts(cur.observed, next.observed) += 1.0;
    }

    ObservedTransitionMatrix q;
    q.entries = Matrix::Zero(n, n);
    q.row_counts.assign(num_states, 0);
    q.row_mass = Vector::Zero(n);
    q.row_defined.assign(num_states, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double total = counts.row(i).sum();
        q.row_counts[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(total);
        q.row_mass(i) = total;
        if (total > 0.0) {
            q.entries.row(i) = counts.row(i) / total;
            q.row_defined[static_cast<std::size_t>(i)] = true;
        }
    }
    return q;
}

}  // namespace noisy_mdp
