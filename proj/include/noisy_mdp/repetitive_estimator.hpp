#pragma once

// Second-order repetitive-actions estimator: repeat each action until the
// true-state distribution settles at the action's stationary vector, count
// consecutive observed-state pairs, and fit C to the quadratic observation
// equation of every action at once.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "noisy_mdp/identifiability.hpp"
#include "noisy_mdp/mdp_core.hpp"

namespace noisy_mdp {

struct RepetitiveProtocolConfig {
    std::vector<std::size_t> actions;   ///< A0, in the order blocks are played
    std::optional<std::size_t> burn_in; ///< per block; default_burn_in() when unset
    std::size_t steps = 1;              ///< counted steps per block
    std::uint64_t seed = 0;
};

/// What the loss needs for one action: its stationary vector, its known
/// transition matrix and the (empirical or exact) observed transitions.
struct ActionData {
    StateDistribution pi;
    Matrix transition;
    ObservedTransitionMatrix observed;
};

using ProtocolData = std::map<std::size_t, ActionData>;

/// ceil(log(1/eps) / (1 - |lambda_2|)) with eps = 1e-3, or 1000 when the
/// second eigenvalue modulus is (numerically) one.
std::size_t default_burn_in(const Matrix& transition);

/// Plays each action of A0 for burn_in + steps transitions in one seeded
/// trajectory and estimates its observed-transition matrix from the counted
/// part. Stationary vectors come from the known transition matrices.
ProtocolData run_protocol(const Mdp& mdp, const ConfusionMatrix& truth, const RepetitiveProtocolConfig& cfg);

/// Same layout as run_protocol but with exact observed transitions.
ProtocolData exact_protocol_data(const Mdp& mdp, const ConfusionMatrix& truth,
                                 const std::vector<std::size_t>& actions);

/// || C^T diag(pi) P C - diag(C^T pi) Qhat ||_F^2 over rows of Qhat that are defined.
double loss_single(const Matrix& c, const StateDistribution& pi, const Matrix& transition,
                   const ObservedTransitionMatrix& observed);
double loss_single(const ConfusionMatrix& c, const StateDistribution& pi, const Matrix& transition,
                   const ObservedTransitionMatrix& observed);

/// Mean of loss_single over the actions in `data`.
double loss_total(const Matrix& c, const ProtocolData& data);
double loss_total(const ConfusionMatrix& c, const ProtocolData& data);

/// Gradient of loss_total with respect to the raw entries of C.
Matrix loss_gradient(const Matrix& c, const ProtocolData& data);

/// Row-wise simplex map C(k, l) = theta(k, l)^2 / sum_m theta(k, m)^2.
Matrix simplex_map(const Matrix& theta);
/// Gradient of loss_total with respect to theta under simplex_map.
Matrix loss_gradient_theta(const Matrix& theta, const ProtocolData& data);

struct Candidate {
    ConfusionMatrix matrix;
    double residual = 0;
    bool feasible = false;
};

struct EstimationResult {
    /// Ascending residual; ties broken by distance to the uniform matrix, then lexicographically.
    std::vector<Candidate> candidates;
    std::optional<std::size_t> selected;
    /// More than one feasible candidate, or the identifiability condition failed.
    bool non_unique = false;
    /// Per-action loss at the selected (else best) candidate.
    std::map<std::size_t, double> action_losses;
    std::optional<IdentifiabilityReport> identifiability;
    std::vector<std::string> notes;
    /// Named scalar diagnostics (e.g. per-partition spread of matched roots).
    std::vector<std::pair<std::string, double>> metrics;
};

struct MinimizeOptions {
    std::size_t starts = 32;  ///< random starts, plus identity and uniform
    std::size_t max_iters = 2000;
    double tol_grad = 1e-13;
    double tol_loss = 1e-10;  ///< candidates at or below this residual are feasible
    std::uint64_t seed = 0;
};

/// 10 n^2 / T, the feasibility threshold used for empirical data.
double default_tol_loss(std::size_t num_states, std::size_t steps);

/// Multi-start quasi-Newton minimization of loss_total over row-stochastic
/// matrices. Local minima closer than 1e-3 are merged.
EstimationResult minimize_loss(const ProtocolData& data, const MinimizeOptions& opts = {});

struct PartitionOptions {
    /// Matching radius across actions. Unset: 1e-6 for exact data,
    /// 10 / sqrt(T) for empirical data with T the smallest per-action count.
    std::optional<double> intersect_tol;
    /// Allowed excursion outside [0, 1] and row-closure error. Same default.
    std::optional<double> reconstruct_tol;
    double identifiability_tol = kDistinctStationaryTol;
    bool abort_on_violation = false;
};

/// Symmetric-C estimator built from two-state solves on singleton and pair
/// superstate partitions, intersected across actions.
EstimationResult estimate_by_partitions(const Mdp& mdp, const ProtocolData& data,
                                        const PartitionOptions& opts = {});

/// Largest absolute entrywise difference.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace noisy_mdp
