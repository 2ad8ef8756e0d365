#include <gtest/gtest.h>

#include <random>

#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/identifiability.hpp"
#include "oracles.hpp"

using namespace noisy_mdp;

namespace {

StateDistribution dist(std::initializer_list<double> v) {
    Vector x(Eigen::Index(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x(i++) = d;
    return StateDistribution(x);
}

Matrix structured_c3() {
    Matrix c = Matrix::Constant(3, 3, 0.1);
    c.diagonal().setConstant(0.8);
    return c;
}

Matrix random_symmetric_stochastic(std::size_t n, std::mt19937_64& gen) {
    // Symmetric with positive diagonal: random symmetric off-diagonals scaled
    // so every row sum stays below one, diagonal fills the rest.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix c = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = i + 1; j < c.cols(); ++j) c(i, j) = c(j, i) = u(gen);
    const double scale = 0.9 / c.rowwise().sum().maxCoeff();
    c *= scale;
    for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, i) = 1.0 - c.row(i).sum();
    return c;
}

}  // namespace

TEST(Pairwise, Examples) {
    EXPECT_FALSE(check_pairwise(dist({0.5, 0.5}), dist({0.5, 0.5})));
    EXPECT_TRUE(check_pairwise(dist({0.5, 0.5}), dist({5.0 / 6, 1.0 / 6})));
    const auto pi = dist({0.2, 0.3, 0.5});
    EXPECT_FALSE(check_pairwise(pi, pi));
    EXPECT_THROW(check_pairwise(pi, dist({0.5, 0.5})), ValidationError);
}

TEST(SubsetCondition, SharedUniformViolates) {
    const auto r = check_subset_condition({{0, dist({0.5, 0.5})}, {1, dist({0.5, 0.5})}});
    EXPECT_FALSE(r.satisfied);
    ASSERT_EQ(r.violating_subsets.size(), 1u);
    EXPECT_EQ(r.violating_subsets[0].block(), std::vector<std::size_t>{0});
}

TEST(SubsetCondition, DistinctSatisfied) {
    const auto r = check_subset_condition({{0, dist({0.5, 0.5})}, {1, dist({5.0 / 6, 1.0 / 6})}});
    EXPECT_TRUE(r.satisfied);
    EXPECT_TRUE(r.violating_subsets.empty());
}

TEST(SubsetCondition, RepeatedDistributionViolatesEverything) {
    const auto pi = dist({0.1, 0.2, 0.3, 0.4});
    const auto r = check_subset_condition({{0, pi}, {1, pi}, {2, pi}});
    EXPECT_FALSE(r.satisfied);
    EXPECT_EQ(r.violating_subsets.size(), canonical_blocks(4).size());
    // Singletons (4) plus pairs containing state 0 (3).
    EXPECT_EQ(canonical_blocks(4).size(), 7u);
}

TEST(SubsetCondition, CapAndArity) {
    const auto pi = StateDistribution::uniform(16);
    EXPECT_THROW(check_subset_condition({{0, pi}, {1, pi}}), ValidationError);
    EXPECT_THROW(check_subset_condition({{0, dist({0.5, 0.5})}}), ValidationError);
}

TEST(SubsetCondition, RelabelingInvariance) {
    std::mt19937_64 gen(3);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 3 + rep % 3;
        // Force a violation on block {0, 1} half of the time.
        Vector a = oracle::random_simplex(n, gen), b = oracle::random_simplex(n, gen);
        if (rep % 2 == 0) {
            const double shift = (a(0) + a(1)) - (b(0) + b(1));
            b(0) += shift / 2, b(1) += shift / 2;
            b.tail(Eigen::Index(n) - 2) *= (1.0 - b(0) - b(1)) / b.tail(Eigen::Index(n) - 2).sum();
            if ((b.array() < 0).any()) continue;
        }
        const auto r = check_subset_condition({{0, StateDistribution(a)}, {1, StateDistribution(b)}});
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        Eigen::PermutationMatrix<Eigen::Dynamic> pm(Eigen::Map<Eigen::VectorXi>(perm.data(), Eigen::Index(n)));
        const auto rp = check_subset_condition(
            {{0, StateDistribution(Vector(pm * a))}, {1, StateDistribution(Vector(pm * b))}});
        EXPECT_EQ(r.satisfied, rp.satisfied);
        EXPECT_EQ(r.violating_subsets.size(), rp.violating_subsets.size());
    }
}

TEST(SubsetCondition, TwoStatesMatchesPairwise) {
    std::mt19937_64 gen(8);
    for (int rep = 0; rep < 50; ++rep) {
        const auto a = StateDistribution(oracle::random_simplex(2, gen));
        const auto b = rep % 3 == 0 ? a : StateDistribution(oracle::random_simplex(2, gen));
        EXPECT_EQ(check_subset_condition({{0, a}, {1, b}}).satisfied, check_pairwise(a, b));
    }
}

TEST(Aggregate, TwoStatesIsIdentity) {
    Matrix c(2, 2);
    c << 0.9, 0.1, 0.3, 0.7;
    const auto agg = aggregate_partition(ConfusionMatrix(c), dist({0.3, 0.7}), Partition2(2, {0}));
    EXPECT_NEAR(agg.c_bar_11, 0.9, 1e-15);
    EXPECT_NEAR(agg.c_bar_22, 0.7, 1e-15);
    EXPECT_NEAR(agg.pi_bar(0), 0.3, 1e-15);
}

TEST(Aggregate, StructuredThreeState) {
    const ConfusionMatrix c(structured_c3(), true);
    const auto pair = aggregate_partition(c, StateDistribution::uniform(3), Partition2(3, {0, 1}));
    EXPECT_NEAR(pair.c_bar_11, 0.9, 1e-14);
    EXPECT_NEAR(pair.c_bar_22, 0.8, 1e-14);
    const auto single = aggregate_partition(c, StateDistribution::uniform(3), Partition2(3, {0}));
    EXPECT_NEAR(single.c_bar_11, 0.8, 1e-14);
    EXPECT_NEAR(single.c_bar_22, 0.9, 1e-14);
    EXPECT_NEAR(single.confusion().entries().row(1).sum(), 1.0, 1e-15);
}

TEST(Aggregate, ZeroMassBlockThrows) {
    EXPECT_THROW(aggregate_partition(ConfusionMatrix::identity(3), dist({0.0, 0.5, 0.5}), Partition2(3, {0})),
                 ValidationError);
    EXPECT_THROW(Partition2(3, {0, 1, 2}), ValidationError);
    EXPECT_THROW(Partition2(3, {}), ValidationError);
}

TEST(Aggregate, MatchesMonteCarloSuperstateFrequency) {
    // Sample (true, observed) pairs at stationarity directly.
    std::mt19937_64 gen(12);
    const Matrix c = structured_c3();
    const Vector pi = (Vector(3) << 0.5, 0.3, 0.2).finished();
    const Partition2 part(3, {0, 2});
    const auto agg = aggregate_partition(ConfusionMatrix(c), StateDistribution(pi), part);
    std::discrete_distribution<int> state(pi.data(), pi.data() + 3);
    const int draws = 200000;
    double in_block = 0, stay = 0;
    for (int k = 0; k < draws; ++k) {
        const int s = state(gen);
        std::discrete_distribution<int> obs(c.row(s).data(), c.row(s).data() + 3);
        if (!part.contains(std::size_t(s))) continue;
        in_block += 1;
        stay += part.contains(std::size_t(obs(gen)));
    }
    const double p = stay / in_block;
    EXPECT_NEAR(p, agg.c_bar_11, 4 * std::sqrt(agg.c_bar_11 * (1 - agg.c_bar_11) / in_block));
}

TEST(Reconstruct, StructuredExample) {
    const std::map<std::size_t, double> diag = {{0, 0.8}, {1, 0.8}, {2, 0.8}};
    const std::map<StatePair, double> pairs = {{{0, 1}, 0.9}, {{0, 2}, 0.9}, {{1, 2}, 0.9}};
    const auto c = reconstruct_symmetric(diag, pairs, StateDistribution::uniform(3));
    EXPECT_LE((c.entries() - structured_c3()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(c.symmetric());
}

TEST(Reconstruct, TwoStatesByRowClosure) {
    const auto c = reconstruct_symmetric({{0, 0.7}, {1, 0.7}}, {}, StateDistribution::uniform(2));
    EXPECT_NEAR(c(0, 1), 0.3, 1e-15);
    EXPECT_NEAR(c(1, 0), 0.3, 1e-15);
}

TEST(Reconstruct, InconsistentInputsThrow) {
    const std::map<std::size_t, double> diag = {{0, 0.8}, {1, 0.8}, {2, 0.8}};
    const std::map<StatePair, double> pairs = {{{0, 1}, 0.5}, {{0, 2}, 0.9}, {{1, 2}, 0.9}};
    EXPECT_THROW(reconstruct_symmetric(diag, pairs, StateDistribution::uniform(3)), ValidationError);
    EXPECT_THROW(reconstruct_symmetric({{0, 0.8}}, {}, StateDistribution::uniform(3)), ValidationError);
}

TEST(Reconstruct, RoundTripRandomized) {
    std::mt19937_64 gen(21);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 3 + rep % 4;
        const Matrix c = random_symmetric_stochastic(n, gen);
        const StateDistribution pi(oracle::random_simplex(n, gen, 0.2));
        const ConfusionMatrix cm(c, true);
        std::map<std::size_t, double> diag;
        std::map<StatePair, double> pairs;
        for (std::size_t i = 0; i < n; ++i) {
            diag[i] = aggregate_partition(cm, pi, Partition2(n, {i})).c_bar_11;
            EXPECT_NEAR(diag[i], oracle::block_self_observation(c, pi.probs(), {i}), 1e-14);
            for (std::size_t j = i + 1; j < n; ++j) {
                const StatePair key{i, j};
                pairs[key] = aggregate_partition(cm, pi, Partition2(n, {i, j})).c_bar_11;
                EXPECT_NEAR(pairs[key], oracle::block_self_observation(c, pi.probs(), {i, j}), 1e-14);
            }
        }
        const auto back = reconstruct_symmetric(diag, pairs, pi);
        EXPECT_LE((back.entries() - c).cwiseAbs().maxCoeff(), 1e-10) << "n=" << n;
    }
}

TEST(AggregateTransition, RowStochastic) {
    std::mt19937_64 gen(2);
    const Matrix p = oracle::random_stochastic(4, gen, 0.1);
    const auto pi = stationary_distribution(p);
    const Matrix pb = aggregate_transition(p, pi, Partition2(4, {1, 3}));
    EXPECT_NEAR(pb.row(0).sum(), 1.0, 1e-14);
    EXPECT_NEAR(pb.row(1).sum(), 1.0, 1e-14);
    // Superstate chain keeps the aggregated stationary mass.
    const double m = pi[1] + pi[3];
    EXPECT_NEAR(m * pb(0, 0) + (1 - m) * pb(1, 0), m, 1e-14);
}
