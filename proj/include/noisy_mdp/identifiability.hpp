#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "noisy_mdp/mdp_core.hpp"

namespace noisy_mdp {

inline constexpr double kDistinctStationaryTol = 1e-6;
inline constexpr std::size_t kMaxSubsetStates = 15;

/// Two-block partition of {0..n-1}; `block` is the first superstate, the
/// complement the second. Stored as a sorted, duplicate-free list.
class Partition2 {
public:
    Partition2(std::size_t num_states, std::vector<std::size_t> block);

    static Partition2 from_mask(std::size_t num_states, std::uint32_t mask);

    std::size_t num_states() const noexcept { return n_; }
    const std::vector<std::size_t>& block() const noexcept { return block_; }
    std::vector<std::size_t> complement() const;
    bool contains(std::size_t state) const noexcept;
    std::uint32_t mask() const noexcept { return mask_; }

    friend bool operator==(const Partition2& a, const Partition2& b) {
        return a.n_ == b.n_ && a.mask_ == b.mask_;
    }

private:
    std::size_t n_;
    std::vector<std::size_t> block_;
    std::uint32_t mask_ = 0;
};

/// Two-state system induced by a Partition2.
struct AggregatedSystem {
    Vector pi_bar;      ///< (mass of block, mass of complement)
    double c_bar_11 = 0;  ///< P[observe in block | true state in block]
    double c_bar_22 = 0;  ///< P[observe in complement | true state in complement]

    ConfusionMatrix confusion() const;
};

struct IdentifiabilityReport {
    bool satisfied = false;
    /// Canonically ordered: by block size, then lexicographically.
    std::vector<Partition2> violating_subsets;
    double tolerance = kDistinctStationaryTol;
};

/// True iff the two distributions differ by more than `tol` in the infinity norm.
bool check_pairwise(const StateDistribution& pi_a, const StateDistribution& pi_b,
                    double tol = kDistinctStationaryTol);

/// Subset-sum condition over every block B with 1 <= |B| <= n/2 (one of each
/// complementary pair). A block violates the condition when no pair of
/// actions separates its stationary mass by more than `tol`.
IdentifiabilityReport check_subset_condition(const std::map<std::size_t, StateDistribution>& stationaries,
                                             double tol = kDistinctStationaryTol,
                                             std::size_t max_states = kMaxSubsetStates);

/// Canonical list of blocks enumerated by check_subset_condition.
std::vector<Partition2> canonical_blocks(std::size_t num_states);

AggregatedSystem aggregate_partition(const ConfusionMatrix& confusion, const StateDistribution& pi,
                                     const Partition2& partition);

/// Aggregated transition matrix of the superstate chain at stationarity:
/// Pbar(I, K) = sum_{i in I} pi_i sum_{k in K} P(i, k) / pi(I).
Matrix aggregate_transition(const Matrix& transition, const StateDistribution& pi,
                            const Partition2& partition);

/// Collapses an observed-transition matrix onto the two superstates, using
/// `row_mass` to weight rows. Undefined rows contribute nothing.
ObservedTransitionMatrix aggregate_observed(const ObservedTransitionMatrix& q, const Partition2& partition);

/// Key {i, j} with i < j.
using StatePair = std::pair<std::size_t, std::size_t>;

/// Rebuilds a symmetric C from singleton self-observation probabilities
/// (C_ii) and pair-block values Cbar_11 of {i, j}. Small excursions past
/// [0, 1] within `tol` are clamped and rows renormalized; larger ones throw
/// ValidationError.
ConfusionMatrix reconstruct_symmetric(const std::map<std::size_t, double>& diagonal,
                                      const std::map<StatePair, double>& pair_blocks,
                                      const StateDistribution& pi, double tol = 1e-6);

}  // namespace noisy_mdp
