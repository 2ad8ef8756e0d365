#pragma once

// Core domain types for an MDP whose states are observed through a confusion
// matrix: transition models, confusion matrices, distributions, trajectories
// and observed-transition matrices, plus the exact observed-transition map and
// a seeded simulator.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace noisy_mdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Rows must sum to one within this tolerance after construction.
inline constexpr double kStochasticTol = 1e-12;
/// Inputs off by at most this much are renormalized with a warning.
inline constexpr double kRenormalizeTol = 1e-9;

/// Checks that `m` is square and row-stochastic. Rows that miss by no more
/// than kRenormalizeTol are rescaled (with a warning); anything worse throws
/// ValidationError naming `what` and the offending row.
Matrix validated_stochastic(Matrix m, std::string_view what);

class StateDistribution {
public:
    explicit StateDistribution(Vector probs);

    static StateDistribution uniform(std::size_t n);
    static StateDistribution point_mass(std::size_t n, std::size_t state);

    const Vector& probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(probs_.size()); }
    double operator[](std::size_t i) const { return probs_(static_cast<Eigen::Index>(i)); }

private:
    Vector probs_;
};

/// Row-stochastic matrix C with C(i, j) = P[observe j | true state i].
class ConfusionMatrix {
public:
    /// `symmetric` additionally enforces C(i, j) == C(j, i) within kStochasticTol.
    explicit ConfusionMatrix(Matrix entries, bool symmetric = false);

    static ConfusionMatrix identity(std::size_t n);

    const Matrix& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    bool symmetric() const noexcept { return symmetric_; }
    double operator()(std::size_t i, std::size_t j) const {
        return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

private:
    Matrix entries_;
    bool symmetric_ = false;
};

/// Known dynamics: one row-stochastic n x n matrix per action.
class Mdp {
public:
    explicit Mdp(std::vector<Matrix> transitions);

    std::size_t num_states() const noexcept { return n_; }
    std::size_t num_actions() const noexcept { return transitions_.size(); }
    const Matrix& transition(std::size_t action) const;
    const std::vector<Matrix>& transitions() const noexcept { return transitions_; }

private:
    std::size_t n_ = 0;
    std::vector<Matrix> transitions_;
};

inline constexpr std::int32_t kNoAction = -1;

struct Step {
    std::uint64_t t = 0;
    std::uint32_t state = 0;
    std::uint32_t observed = 0;
    std::int32_t action = kNoAction;  ///< action applied at t; kNoAction on the final record

    friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
    std::vector<Step> steps;
    std::uint64_t seed = 0;

    /// Number of transitions, i.e. steps.size() - 1.
    std::size_t horizon() const noexcept { return steps.empty() ? 0 : steps.size() - 1; }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Transition matrix between consecutive observed states. Rows never
/// visited are kept explicit via `row_defined` instead of being zero-filled.
struct ObservedTransitionMatrix {
    Matrix entries;
    /// Visit counts per observed state (zero for exact matrices).
    std::vector<std::uint64_t> row_counts;
    /// Relative frequency of each row's conditioning symbol: counts for
    /// empirical matrices, the observation marginal for exact ones.
    Vector row_mass;
    std::vector<bool> row_defined;
    bool exact = false;

    std::size_t size() const noexcept { return static_cast<std::size_t>(entries.rows()); }
    bool all_defined() const noexcept;
};

bool is_irreducible(const Matrix& transition);

/// Period of an irreducible chain (1 means aperiodic).
std::size_t chain_period(const Matrix& transition);

/// Unique stationary vector of an irreducible chain, found by a direct linear
/// solve so periodic chains are handled. Throws ReducibleChain otherwise.
StateDistribution stationary_distribution(const Matrix& transition);

/// Q = diag(C^T pi)^{-1} C^T diag(pi) P C.
ObservedTransitionMatrix exact_observed_transition(const ConfusionMatrix& confusion,
                                                   const StateDistribution& pi,
                                                   const Matrix& transition);

struct FixedAction {
    std::size_t action = 0;
};

/// actions[t] is applied at step t; must cover the full horizon.
struct ActionSchedule {
    std::vector<std::size_t> actions;
};

/// Uniform random choice each step among `actions` (all actions when empty).
/// Uses its own RNG stream so state/observation draws are unaffected.
struct UniformPolicy {
    std::vector<std::size_t> actions;
};

using ActionSource = std::variant<FixedAction, ActionSchedule, UniformPolicy>;

/// Samples a trajectory of `horizon` transitions. Draw order on the state
/// stream is s_0, s~_0, s_1, s~_1, ...; identical inputs give identical output.
Trajectory simulate(const Mdp& mdp, const ConfusionMatrix& confusion, const ActionSource& actions,
                    std::size_t horizon, const StateDistribution& initial, std::uint64_t seed);

/// Half-open range [begin, end) of step indices t whose pair (t, t+1) is counted.
struct Window {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Counts observed pairs (s~_t, s~_{t+1}) with a_t == action and t in window.
ObservedTransitionMatrix empirical_observed_transition(const Trajectory& trajectory,
                                                       std::size_t num_states, std::size_t action,
                                                       Window window);

}  // namespace noisy_mdp
