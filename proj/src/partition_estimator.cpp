#include <algorithm>
#include <cmath>
#include <sstream>

#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/identifiability.hpp"
#include "noisy_mdp/repetitive_estimator.hpp"
#include "noisy_mdp/two_state.hpp"
#include "noisy_mdp/warnings.hpp"

namespace noisy_mdp {

namespace {

std::string block_name(const Partition2& part) {
    std::ostringstream os;
    os << '{';
    for (std::size_t k = 0; k < part.block().size(); ++k) os << (k ? "," : "") << part.block()[k];
    os << '}';
    return os.str();
}

struct BlockSolution {
    TwoStateSolutionSet common;
    double spread = 0;  ///< largest distance from the common point to a per-action root
};

BlockSolution solve_block(const ProtocolData& data, const Partition2& part, double tol) {
    std::vector<TwoStateSolutionSet> sets;
    for (const auto& [a, d] : data) {
        const ObservedTransitionMatrix q_bar = aggregate_observed(d.observed, part);
        if (!q_bar.all_defined()) {
            warn("block " + block_name(part) + ": action " + std::to_string(a) +
                 " never observed one superstate; skipped");
            continue;
        }
        double mass = 0.0;
        for (std::size_t s : part.block()) mass += d.pi[s];
        Vector pi_bar(2);
        pi_bar << mass, 1.0 - mass;
        const Matrix p_bar = aggregate_transition(d.transition, d.pi, part);
        sets.push_back(solve_two_state(StateDistribution(pi_bar), p_bar, q_bar.entries));
    }
    if (sets.empty()) throw NoConsistentSolution("block " + block_name(part) + ": no usable action data");

    BlockSolution out;
    try {
        out.common = intersect_solutions(sets, tol);
    } catch (const NoConsistentSolution&) {
        throw NoConsistentSolution("block " + block_name(part) +
                                   ": per-action two-state solutions share no common point");
    }
    for (const auto& p : out.common.solutions) {
        for (const auto& set : sets) {
            double best = 1e300;
            for (const auto& q : set.solutions) best = std::min(best, distance_inf(p, q));
            out.spread = std::max(out.spread, best);
        }
    }
    return out;
}

double default_partition_tol(const ProtocolData& data) {
    double tol = 1e-6;
    for (const auto& [a, d] : data) {
        if (d.observed.exact) continue;
        std::uint64_t total = 0;
        for (auto c : d.observed.row_counts) total += c;
        tol = std::max(tol, 10.0 / std::sqrt(double(std::max<std::uint64_t>(total, 1))));
    }
    return tol;
}

}  // namespace

EstimationResult estimate_by_partitions(const Mdp& mdp, const ProtocolData& data, const PartitionOptions& opts) {
    if (data.empty()) throw ValidationError("estimate_by_partitions: no action data");
    const std::size_t n = mdp.num_states();
    for (const auto& [a, d] : data) {
        if (d.pi.size() != n || d.observed.size() != n) {
            throw ValidationError("estimate_by_partitions: dimension mismatch");
        }
    }

    const double intersect_tol = opts.intersect_tol.value_or(default_partition_tol(data));
    const double reconstruct_tol = opts.reconstruct_tol.value_or(default_partition_tol(data));

    EstimationResult result;
    IdentifiabilityReport report;
    if (data.size() >= 2) {
        std::map<std::size_t, StateDistribution> stationaries;
        for (const auto& [a, d] : data) stationaries.emplace(a, d.pi);
        report = check_subset_condition(stationaries, opts.identifiability_tol);
    } else {
        report.tolerance = opts.identifiability_tol;
        report.violating_subsets = canonical_blocks(n);
        report.satisfied = false;
    }
    result.identifiability = report;
    if (!report.satisfied) {
        const std::string msg = "subset condition fails for " + std::to_string(report.violating_subsets.size()) +
                                " block(s); C is not identified by these actions";
        if (opts.abort_on_violation) throw IdentifiabilityFailure(msg);
        warn(msg);
        result.notes.push_back(msg);
        result.non_unique = true;
    }

    std::vector<std::string> ambiguous;
    const auto pick = [&](const Partition2& part) -> std::optional<TwoStatePoint> {
        const BlockSolution sol = solve_block(data, part, intersect_tol);
        result.metrics.emplace_back("spread " + block_name(part), sol.spread);
        if (sol.common.solutions.size() != 1) {
            ambiguous.push_back(block_name(part));
            return std::nullopt;
        }
        return sol.common.solutions.front();
    };

    std::optional<ConfusionMatrix> estimate;
    if (n == 2) {
        if (const auto p = pick(Partition2(2, {0}))) estimate = to_confusion(*p);
    } else {
        std::map<std::size_t, double> diagonal;
        std::map<StatePair, double> pairs;
        for (std::size_t i = 0; i < n; ++i) {
            if (const auto p = pick(Partition2(n, {i}))) diagonal[i] = p->x;
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (const auto p = pick(Partition2(n, {i, j}))) pairs[{i, j}] = p->x;
            }
        }
        if (ambiguous.empty()) {
            estimate = reconstruct_symmetric(diagonal, pairs, data.begin()->second.pi, reconstruct_tol);
        }
    }

    if (!ambiguous.empty()) {
        std::string list;
        for (const auto& b : ambiguous) list += (list.empty() ? "" : " ") + b;
        result.notes.push_back("multiple consistent two-state solutions for block(s) " + list);
        result.non_unique = true;
    }
    if (estimate) {
        const double residual = loss_total(*estimate, data);
        result.candidates.push_back({*estimate, residual, true});
        if (!result.non_unique) result.selected = 0;
        for (const auto& [a, d] : data) {
            result.action_losses[a] = loss_single(*estimate, d.pi, d.transition, d.observed);
        }
    }
    return result;
}

}  // namespace noisy_mdp
