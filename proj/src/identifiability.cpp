#include "noisy_mdp/identifiability.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "noisy_mdp/errors.hpp"

namespace noisy_mdp {

Partition2::Partition2(std::size_t num_states, std::vector<std::size_t> block) : n_(num_states) {
    if (num_states < 2 || num_states > 32) {
        throw ValidationError("partition: state count must be in [2, 32]");
    }
    std::sort(block.begin(), block.end());
    block.erase(std::unique(block.begin(), block.end()), block.end());
    if (block.empty() || block.size() >= num_states) {
        throw ValidationError("partition: block must be a non-empty strict subset");
    }
    for (std::size_t s : block) {
        if (s >= num_states) throw ValidationError("partition: state out of range");
        mask_ |= (1u << s);
    }
    block_ = std::move(block);
}

Partition2 Partition2::from_mask(std::size_t num_states, std::uint32_t mask) {
    std::vector<std::size_t> block;
    for (std::size_t s = 0; s < num_states; ++s) {
        if (mask & (1u << s)) block.push_back(s);
    }
    return Partition2(num_states, std::move(block));
}

std::vector<std::size_t> Partition2::complement() const {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < n_; ++s) {
        if (!contains(s)) out.push_back(s);
    }
    return out;
}

bool Partition2::contains(std::size_t state) const noexcept {
    return state < n_ && (mask_ & (1u << state)) != 0;
}

ConfusionMatrix AggregatedSystem::confusion() const {
    Matrix c(2, 2);
    c << c_bar_11, 1.0 - c_bar_11, 1.0 - c_bar_22, c_bar_22;
    return ConfusionMatrix(std::move(c));
}

bool check_pairwise(const StateDistribution& pi_a, const StateDistribution& pi_b, double tol) {
    if (pi_a.size() != pi_b.size()) throw ValidationError("check_pairwise: length mismatch");
    return (pi_a.probs() - pi_b.probs()).cwiseAbs().maxCoeff() > tol;
}

std::vector<Partition2> canonical_blocks(std::size_t num_states) {
    if (num_states > kMaxSubsetStates && num_states > 31) {
        throw ValidationError("too many states for subset enumeration");
    }
    std::vector<Partition2> out;
    const std::uint32_t full = (1u << num_states) - 1u;
    for (std::uint32_t mask = 1; mask < full; ++mask) {
        const auto size = static_cast<std::size_t>(std::popcount(mask));
        if (2 * size > num_states) continue;
        // A block and its complement carry the same information; at |B| = n/2
        // keep the one that contains state 0.
        if (2 * size == num_states && !(mask & 1u)) continue;
        out.push_back(Partition2::from_mask(num_states, mask));
    }
    std::sort(out.begin(), out.end(), [](const Partition2& a, const Partition2& b) {
        if (a.block().size() != b.block().size()) return a.block().size() < b.block().size();
        return a.block() < b.block();
    });
    return out;
}

IdentifiabilityReport check_subset_condition(const std::map<std::size_t, StateDistribution>& stationaries,
                                             double tol, std::size_t max_states) {
    if (stationaries.size() < 2) {
        throw ValidationError("check_subset_condition: need at least two actions");
    }
    const std::size_t n = stationaries.begin()->second.size();
    for (const auto& [a, pi] : stationaries) {
        if (pi.size() != n) throw ValidationError("check_subset_condition: length mismatch");
    }
    if (n > max_states) {
        throw ValidationError("check_subset_condition: " + std::to_string(n) +
                              " states exceeds the enumeration cap of " + std::to_string(max_states));
    }

    const auto blocks = canonical_blocks(n);
    std::vector<char> violated(blocks.size(), 0);

    // Each block is independent; the report is assembled serially in canonical order.
#pragma omp parallel for schedule(static)
    for (long b = 0; b < static_cast<long>(blocks.size()); ++b) {
        double lo = 2.0;
        double hi = -1.0;
        for (const auto& [a, pi] : stationaries) {
            double mass = 0.0;
            for (std::size_t s : blocks[static_cast<std::size_t>(b)].block()) mass += pi[s];
            lo = std::min(lo, mass);
            hi = std::max(hi, mass);
        }
        violated[static_cast<std::size_t>(b)] = (hi - lo <= tol) ? 1 : 0;
    }

    IdentifiabilityReport report;
    report.tolerance = tol;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (violated[b]) report.violating_subsets.push_back(blocks[b]);
    }
    report.satisfied = report.violating_subsets.empty();
    return report;
}

AggregatedSystem aggregate_partition(const ConfusionMatrix& confusion, const StateDistribution& pi,
                                     const Partition2& partition) {
    const std::size_t n = confusion.size();
    if (pi.size() != n || partition.num_states() != n) {
        throw ValidationError("aggregate_partition: dimension mismatch");
    }
    double mass_in = 0.0;
    double mass_out = 0.0;
    double stay_in = 0.0;
    double stay_out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool in_i = partition.contains(i);
        double same_block = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (partition.contains(j) == in_i) same_block += confusion(i, j);
        }
        if (in_i) {
            mass_in += pi[i];
            stay_in += pi[i] * same_block;
        } else {
            mass_out += pi[i];
            stay_out += pi[i] * same_block;
        }
    }
    if (!(mass_in > 0.0) || !(mass_out > 0.0)) {
        throw ValidationError("aggregate_partition: a block has zero stationary mass");
    }
    AggregatedSystem out;
    out.pi_bar = Vector(2);
    out.pi_bar << mass_in, mass_out;
    out.pi_bar /= out.pi_bar.sum();
    out.c_bar_11 = std::clamp(stay_in / mass_in, 0.0, 1.0);
    out.c_bar_22 = std::clamp(stay_out / mass_out, 0.0, 1.0);
    return out;
}

Matrix aggregate_transition(const Matrix& transition, const StateDistribution& pi,
                            const Partition2& partition) {
    const auto n = static_cast<std::size_t>(transition.rows());
    if (pi.size() != n || partition.num_states() != n) {
        throw ValidationError("aggregate_transition: dimension mismatch");
    }
    Matrix flow = Matrix::Zero(2, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const int from = partition.contains(i) ? 0 : 1;
        for (std::size_t k = 0; k < n; ++k) {
            const int to = partition.contains(k) ? 0 : 1;
            flow(from, to) += pi[i] * transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        }
    }
    for (int r = 0; r < 2; ++r) {
        const double total = flow.row(r).sum();
        if (!(total > 0.0)) throw ValidationError("aggregate_transition: a block has zero stationary mass");
        flow.row(r) /= total;
    }
    return flow;
}

ObservedTransitionMatrix aggregate_observed(const ObservedTransitionMatrix& q, const Partition2& partition) {
    const std::size_t n = q.size();
    if (partition.num_states() != n) throw ValidationError("aggregate_observed: dimension mismatch");
    Matrix joint = Matrix::Zero(2, 2);
    std::uint64_t counts[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        if (!q.row_defined[i]) continue;
        const int from = partition.contains(i) ? 0 : 1;
        counts[from] += q.row_counts[i];
        for (std::size_t k = 0; k < n; ++k) {
            const int to = partition.contains(k) ? 0 : 1;
            joint(from, to) += q.row_mass(static_cast<Eigen::Index>(i)) *
                               q.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        }
    }
    ObservedTransitionMatrix out;
    out.entries = Matrix::Zero(2, 2);
    out.row_mass = Vector::Zero(2);
    out.row_counts = {counts[0], counts[1]};
    out.row_defined = {false, false};
    out.exact = q.exact;
    for (int r = 0; r < 2; ++r) {
        const double total = joint.row(r).sum();
        out.row_mass(r) = total;
        if (total > 0.0) {
            out.entries.row(r) = joint.row(r) / total;
            out.row_defined[static_cast<std::size_t>(r)] = true;
        }
    }
    return out;
}

ConfusionMatrix reconstruct_symmetric(const std::map<std::size_t, double>& diagonal,
                                      const std::map<StatePair, double>& pair_blocks,
                                      const StateDistribution& pi, double tol) {
    const std::size_t n = pi.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!diagonal.contains(i)) {
            throw ValidationError("reconstruct_symmetric: missing diagonal entry " + std::to_string(i));
        }
        if (!(pi[i] > 0.0)) throw ValidationError("reconstruct_symmetric: pi must be strictly positive");
    }
    const auto n_idx = static_cast<Eigen::Index>(n);
    Matrix c = Matrix::Zero(n_idx, n_idx);

    const auto in_range = [tol](double v, const std::string& where) {
        if (v < -tol || v > 1.0 + tol) {
            throw ValidationError("reconstruct_symmetric: " + where + " = " + std::to_string(v) +
                                  " outside [0, 1]");
        }
        return std::clamp(v, 0.0, 1.0);
    };

    if (n == 2) {
        // No strict pair blocks exist; rows close the matrix.
        const double c11 = in_range(diagonal.at(0), "C(0,0)");
        const double c22 = in_range(diagonal.at(1), "C(1,1)");
        if (std::abs(c11 - c22) > tol) {
            throw ValidationError("reconstruct_symmetric: 2-state diagonal entries differ, C cannot be symmetric");
        }
        c << c11, 1.0 - c11, 1.0 - c22, c22;
        const bool symmetric = std::abs(c(0, 1) - c(1, 0)) <= kStochasticTol;
        return ConfusionMatrix(std::move(c), symmetric);
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto it = pair_blocks.find({i, j});
            if (it == pair_blocks.end()) {
                throw ValidationError("reconstruct_symmetric: missing pair block {" + std::to_string(i) +
                                      ", " + std::to_string(j) + "}");
            }
            // Cbar_11 (pi_i + pi_j) = pi_i (C_ii + C_ij) + pi_j (C_ji + C_jj) with C_ij = C_ji.
            const double mass = pi[i] + pi[j];
            const double off = (it->second * mass - pi[i] * diagonal.at(i) - pi[j] * diagonal.at(j)) / mass;
            const double v = in_range(off, "C(" + std::to_string(i) + "," + std::to_string(j) + ")");
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    // The diagonal is set by row closure, which keeps C exactly symmetric and
    // row-stochastic; the supplied diagonal must agree with it within tol.
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double implied = 1.0 - c.row(ii).sum();
        if (std::abs(implied - diagonal.at(i)) > tol) {
            throw ValidationError("reconstruct_symmetric: row " + std::to_string(i) +
                                  " does not close (implied diagonal " + std::to_string(implied) +
                                  ", estimated " + std::to_string(diagonal.at(i)) + ")");
        }
        c(ii, ii) = in_range(implied, "C(" + std::to_string(i) + "," + std::to_string(i) + ")");
    }
    // Only a clamped diagonal can leave a row off; rescaling it then costs exact symmetry.
    for (Eigen::Index i = 0; i < n_idx; ++i) c.row(i) /= c.row(i).sum();
    const bool symmetric = (c - c.transpose()).cwiseAbs().maxCoeff() <= kStochasticTol;
    return ConfusionMatrix(std::move(c), symmetric);
}

}  // namespace noisy_mdp
