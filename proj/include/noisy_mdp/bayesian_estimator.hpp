#pragma once

// First- and second-order Bayesian recursions over a fixed, weighted support
// of candidate confusion matrices, together with the belief over the true
// state that each recursion needs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "noisy_mdp/bayes_kernels.hpp"
#include "noisy_mdp/mdp_core.hpp"

namespace noisy_mdp {

enum class PosteriorKind { grid, ensemble };

/// Probability vector over true states. The tag separates b_t (conditioned
/// through the current observation) from the second-order variant (through
/// the previous one).
template <typename Tag>
class SimplexVector {
public:
    explicit SimplexVector(Vector probs) : probs_(StateDistribution(std::move(probs)).probs()) {}

    static SimplexVector uniform(std::size_t n) { return SimplexVector(StateDistribution::uniform(n).probs()); }

    const Vector& probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(probs_.size()); }

private:
    Vector probs_;
};

using BeliefState = SimplexVector<struct BeliefTag>;
using ModifiedBeliefState = SimplexVector<struct ModifiedBeliefTag>;

struct PosteriorSpec {
    PosteriorKind kind = PosteriorKind::grid;
    /// Grid: points per axis of the (alpha, beta) family
    /// C = [[1 - alpha, alpha], [beta, 1 - beta]], placed at cell centres.
    std::size_t resolution = 101;
    /// Ensemble: number of i.i.d. draws with independent uniform-simplex rows.
    std::size_t particles = 1000;
    std::size_t num_states = 2;
    std::uint64_t seed = 0;
};

/// Discrete approximation of the density over C. The support is shared and
/// never modified; only the weights move.
class PosteriorOverC {
public:
    PosteriorOverC(std::shared_ptr<const Support> support, std::vector<double> log_weights, PosteriorKind kind,
                   std::vector<std::array<double, 2>> coordinates = {}, std::size_t resolution = 0);

    std::size_t size() const noexcept { return support_->size(); }
    std::size_t num_states() const noexcept { return support_->num_states(); }
    const Support& support() const noexcept { return *support_; }
    const std::shared_ptr<const Support>& shared_support() const noexcept { return support_; }
    PosteriorKind kind() const noexcept { return kind_; }

    /// Normalized so that sum(exp(log_weights)) == 1.
    const std::vector<double>& log_weights() const noexcept { return log_weights_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// Grid only: (alpha, beta) of each point, and points per axis.
    const std::vector<std::array<double, 2>>& coordinates() const noexcept { return coordinates_; }
    std::size_t resolution() const noexcept { return resolution_; }

    /// Same support, new (unnormalized) log weights.
    PosteriorOverC reweighted(std::vector<double> log_weights) const;

private:
    std::shared_ptr<const Support> support_;
    std::vector<double> log_weights_;
    std::vector<double> weights_;
    PosteriorKind kind_;
    std::vector<std::array<double, 2>> coordinates_;
    std::size_t resolution_ = 0;
};

/// C = [[1 - alpha, alpha], [beta, 1 - beta]].
Matrix alpha_beta_matrix(double alpha, double beta);

PosteriorOverC init_posterior(const PosteriorSpec& spec);

struct StepOptions {
    KernelBackend backend = KernelBackend::openmp;
    /// Normalizers at or below this are treated as an impossible observation.
    double underflow_floor = 1e-300;
};

struct FirstOrderUpdate {
    PosteriorOverC posterior;
    BeliefState belief;
};

struct SecondOrderUpdate {
    PosteriorOverC posterior;
    ModifiedBeliefState belief;
};

/// Weight of each point times b^T P C(:, obs_next); belief mixes the
/// per-point posterior of s_{t+1} with the updated weights.
FirstOrderUpdate first_order_step(const PosteriorOverC& posterior, const BeliefState& belief,
                                  const Matrix& transition, std::size_t obs_next, const StepOptions& opts = {});

/// Weight of each point times Q(C)(obs_now, obs_next) with
/// Q(C) = diag(C^T btilde)^-1 C^T diag(btilde) P C.
SecondOrderUpdate second_order_step(const PosteriorOverC& posterior, const ModifiedBeliefState& belief,
                                    const Matrix& transition, std::size_t obs_now, std::size_t obs_next,
                                    const StepOptions& opts = {});

struct PosteriorSummary {
    std::size_t mode = 0;
    Matrix mean;
    double entropy = 0;
    /// Indices of local modes (8-neighbourhood on grids), heaviest first.
    std::vector<std::size_t> local_modes;
};

PosteriorSummary posterior_summary(const PosteriorOverC& posterior, std::size_t top_k = 2);

/// Total weight of points within `radius` (infinity norm) of an (alpha, beta) point. Grid only.
double mass_within(const PosteriorOverC& posterior, double radius, const std::array<double, 2>& point);
/// Total weight of support matrices within `radius` (entrywise infinity norm) of `point`.
double mass_within(const PosteriorOverC& posterior, double radius, const Matrix& point);

struct BayesSnapshot {
    std::size_t t = 0;
    std::vector<double> weights;
    Vector belief;
    PosteriorSummary summary;
};

struct BayesRunConfig {
    int order = 2;  ///< 1 or 2
    ActionSource policy = UniformPolicy{};
    std::size_t steps = 1;
    PosteriorSpec posterior;
    std::size_t snapshot_every = 0;  ///< 0: initial and final only
    std::uint64_t seed = 0;
    StepOptions step;
};

struct BayesRun {
    std::vector<BayesSnapshot> snapshots;
    PosteriorOverC final_posterior;
    Trajectory trajectory;
};

/// Simulates `steps` transitions and folds the chosen recursion over them.
/// Order 1 starts from a uniform state prior refined by the first
/// observation; order 2 starts from a uniform modified belief.
BayesRun run_bayes(const Mdp& mdp, const ConfusionMatrix& truth, const BayesRunConfig& cfg);

}  // namespace noisy_mdp
