#include <gtest/gtest.h>

#include <random>

#include "noisy_mdp/bayesian_estimator.hpp"
#include "noisy_mdp/errors.hpp"
#include "oracles.hpp"

using namespace noisy_mdp;

namespace {

Matrix m2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

PosteriorOverC from_matrices(const std::vector<Matrix>& cs, std::vector<double> log_w = {}) {
    const std::size_t n = std::size_t(cs.front().rows());
    std::vector<double> flat;
    for (const auto& c : cs)
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            for (Eigen::Index j = 0; j < c.cols(); ++j) flat.push_back(c(i, j));
    if (log_w.empty()) log_w.assign(cs.size(), 0.0);
    return PosteriorOverC(std::make_shared<const Support>(n, std::move(flat)), std::move(log_w),
                          PosteriorKind::ensemble);
}

double weight_sum(const PosteriorOverC& p) {
    return std::accumulate(p.weights().begin(), p.weights().end(), 0.0);
}

}  // namespace

TEST(InitPosterior, GridUniform) {
    const auto post = init_posterior({});
    EXPECT_EQ(post.size(), 10201u);
    for (double w : post.weights()) EXPECT_NEAR(w, 1.0 / 10201, 1e-18);
    EXPECT_EQ(post.kind(), PosteriorKind::grid);
}

TEST(InitPosterior, GridResolutionTwoCellCentres) {
    PosteriorSpec spec;
    spec.resolution = 2;
    const auto post = init_posterior(spec);
    ASSERT_EQ(post.size(), 4u);
    EXPECT_DOUBLE_EQ(post.coordinates()[0][0], 0.25);
    EXPECT_DOUBLE_EQ(post.coordinates()[3][1], 0.75);
    EXPECT_DOUBLE_EQ(post.support().at(3, 0, 1), 0.75);  // alpha
    EXPECT_DOUBLE_EQ(post.support().at(3, 1, 0), 0.75);  // beta
    spec.resolution = 1;
    EXPECT_THROW(init_posterior(spec), ValidationError);
    spec.resolution = 5;
    spec.num_states = 3;
    EXPECT_THROW(init_posterior(spec), ValidationError);
}

TEST(InitPosterior, EnsembleSinglePointAndRows) {
    PosteriorSpec spec;
    spec.kind = PosteriorKind::ensemble;
    spec.particles = 1;
    spec.num_states = 4;
    const auto one = init_posterior(spec);
    EXPECT_EQ(one.size(), 1u);
    EXPECT_DOUBLE_EQ(one.weights()[0], 1.0);
    spec.particles = 50;
    const auto many = init_posterior(spec);
    for (std::size_t k = 0; k < many.size(); ++k) {
        EXPECT_NEAR(many.support().matrix(k).rowwise().sum().maxCoeff(), 1.0, 1e-14);
    }
    spec.particles = 0;
    EXPECT_THROW(init_posterior(spec), ValidationError);
}

TEST(FirstOrder, NoiselessFilter) {
    const auto post = from_matrices({Matrix::Identity(2, 2)});
    const auto upd = first_order_step(post, BeliefState(Vector::Unit(2, 0)), m2(0, 1, 1, 0), 1);
    EXPECT_DOUBLE_EQ(upd.posterior.weights()[0], 1.0);
    EXPECT_DOUBLE_EQ(upd.belief.probs()(1), 1.0);
}

TEST(FirstOrder, ZeroLikelihoodEliminated) {
    const auto post = from_matrices({m2(0.5, 0.5, 0.5, 0.5), m2(1, 0, 1, 0)});
    const auto upd = first_order_step(post, BeliefState::uniform(2), m2(0.5, 0.5, 0.5, 0.5), 1);
    EXPECT_DOUBLE_EQ(upd.posterior.weights()[0], 1.0);
    EXPECT_DOUBLE_EQ(upd.posterior.weights()[1], 0.0);
    EXPECT_NEAR(upd.belief.probs().sum(), 1.0, 1e-15);
}

TEST(FirstOrder, UniformRowsWeightsFollowColumnMean) {
    const std::vector<Matrix> cs = {m2(0.9, 0.1, 0.3, 0.7), m2(0.5, 0.5, 0.5, 0.5), m2(0.2, 0.8, 0.6, 0.4)};
    const auto upd = first_order_step(from_matrices(cs), BeliefState::uniform(2), m2(0.5, 0.5, 0.5, 0.5), 0);
    std::vector<double> mean;
    for (const auto& c : cs) mean.push_back(c.col(0).mean());
    const double z = std::accumulate(mean.begin(), mean.end(), 0.0);
    const auto ref = oracle::first_order(cs, {1.0 / 3, 1.0 / 3, 1.0 / 3}, Vector::Constant(2, 0.5),
                                         m2(0.5, 0.5, 0.5, 0.5), 0);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(upd.posterior.weights()[k], mean[k] / z, 1e-15);
        EXPECT_NEAR(upd.posterior.weights()[k], ref.weights[k], 1e-15);
    }
}

TEST(FirstOrder, ImpossibleObservationThrows) {
    const auto post = from_matrices({m2(1, 0, 1, 0)});
    EXPECT_THROW(first_order_step(post, BeliefState::uniform(2), m2(0.5, 0.5, 0.5, 0.5), 1),
                 InconsistentObservation);
}

TEST(SecondOrder, IdentityGivesTransition) {
    const Matrix p = m2(0.2, 0.8, 0.6, 0.4);
    const auto pi = stationary_distribution(p);
    const auto post = from_matrices({Matrix::Identity(2, 2), m2(0.5, 0.5, 0.5, 0.5)});
    const auto upd = second_order_step(post, ModifiedBeliefState(pi.probs()), p, 0, 1);
    // Point 1 is uninformative (likelihood 0.5), identity has P(0, 1).
    EXPECT_NEAR(upd.posterior.weights()[0] / upd.posterior.weights()[1], 0.8 / 0.5, 1e-14);
}

TEST(SecondOrder, WorkedMatrixAsLikelihood) {
    const auto post = from_matrices({m2(0.9, 0.1, 0.3, 0.7), m2(0.5, 0.5, 0.5, 0.5)});
    const auto upd = second_order_step(post, ModifiedBeliefState::uniform(2), m2(0, 1, 1, 0), 1, 0);
    EXPECT_NEAR(upd.posterior.weights()[0] / upd.posterior.weights()[1], 0.825 / 0.5, 1e-13);
}

TEST(SecondOrder, EqualLikelihoodKeepsRatio) {
    // C1 and C2 of the example give identical Q at the uniform belief.
    const auto post = from_matrices({m2(0.9, 0.1, 0.3, 0.7), m2(0.3, 0.7, 0.9, 0.1)}, {std::log(0.2), std::log(0.8)});
    const auto upd = second_order_step(post, ModifiedBeliefState::uniform(2), m2(0, 1, 1, 0), 0, 0);
    EXPECT_NEAR(upd.posterior.weights()[0], 0.2, 1e-14);
}

TEST(SecondOrder, OrderTwoConsistentWithExactTransition) {
    std::mt19937_64 gen(31);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 2 + rep % 3;
        const Matrix c = oracle::random_stochastic(n, gen, 0.05);
        const Matrix p = oracle::random_stochastic(n, gen, 0.05);
        const auto pi = stationary_distribution(p);
        const auto q = exact_observed_transition(ConfusionMatrix(c), pi, p);
        KernelOutput out;
        const auto post = from_matrices({c});
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                second_order_kernel(KernelBackend::serial, post.support(),
                                    std::span<const double>(pi.probs().data(), n), p, a, b, out);
                EXPECT_NEAR(out.likelihood[0], q.entries(Eigen::Index(a), Eigen::Index(b)), 1e-12);
            }
    }
}

TEST(Steps, OneStepOracleRandomized) {
    std::mt19937_64 gen(77);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t k = 1 + rep % 5;
        std::vector<Matrix> cs;
        for (std::size_t i = 0; i < k; ++i) cs.push_back(oracle::random_stochastic(2, gen));
        const Vector w0 = oracle::random_simplex(k, gen);
        std::vector<double> logw, w(k);
        for (std::size_t i = 0; i < k; ++i) logw.push_back(std::log(w0(Eigen::Index(i)))), w[i] = w0(Eigen::Index(i));
        const auto post = from_matrices(cs, logw);
        const Vector b = oracle::random_simplex(2, gen);
        const Matrix p = oracle::random_stochastic(2, gen);
        const int o1 = coin(gen), o2 = coin(gen);

        const auto f = first_order_step(post, BeliefState(b), p, std::size_t(o2));
        const auto fr = oracle::first_order(cs, w, b, p, o2);
        const auto s = second_order_step(post, ModifiedBeliefState(b), p, std::size_t(o1), std::size_t(o2));
        const auto sr = oracle::second_order(cs, w, b, p, o1, o2);
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_NEAR(f.posterior.weights()[i], fr.weights[i], 1e-12);
            EXPECT_NEAR(s.posterior.weights()[i], sr.weights[i], 1e-12);
        }
        EXPECT_LE((f.belief.probs() - fr.belief).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((s.belief.probs() - sr.belief).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Steps, ZeroPriorPointChangesNothing) {
    const std::vector<Matrix> base = {m2(0.9, 0.1, 0.3, 0.7), m2(0.6, 0.4, 0.2, 0.8)};
    const auto a = from_matrices(base);
    auto extended = base;
    extended.push_back(m2(0.1, 0.9, 0.9, 0.1));
    const double ninf = -std::numeric_limits<double>::infinity();
    const auto b = from_matrices(extended, {0.0, 0.0, ninf});
    const Matrix p = m2(0.3, 0.7, 0.6, 0.4);
    const auto ua = first_order_step(a, BeliefState::uniform(2), p, 1);
    const auto ub = first_order_step(b, BeliefState::uniform(2), p, 1);
    EXPECT_EQ(ua.posterior.weights()[0], ub.posterior.weights()[0]);
    EXPECT_EQ(ua.posterior.weights()[1], ub.posterior.weights()[1]);
    EXPECT_EQ(ub.posterior.weights()[2], 0.0);
    EXPECT_EQ(ua.belief.probs(), ub.belief.probs());
}

TEST(Summary, UniformAndPointMass) {
    PosteriorSpec spec;
    spec.resolution = 11;
    const auto post = init_posterior(spec);
    const auto s = posterior_summary(post);
    EXPECT_NEAR(s.entropy, std::log(121.0), 1e-12);
    EXPECT_EQ(s.mode, 0u);

    std::vector<double> lw(121, -std::numeric_limits<double>::infinity());
    lw[37] = 0.0;
    const auto single = post.reweighted(lw);
    const auto s1 = posterior_summary(single);
    EXPECT_EQ(s1.entropy, 0.0);
    EXPECT_EQ(s1.mode, 37u);
    EXPECT_LE((s1.mean - single.support().matrix(37)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Summary, TwoBumps) {
    PosteriorSpec spec;
    spec.resolution = 41;
    const auto post = init_posterior(spec);
    std::vector<double> lw(post.size());
    const std::array<double, 2> a = {0.4, 0.2}, b = {0.8, 0.6};
    for (std::size_t k = 0; k < post.size(); ++k) {
        const auto& c = post.coordinates()[k];
        const double da = std::hypot(c[0] - a[0], c[1] - a[1]), db = std::hypot(c[0] - b[0], c[1] - b[1]);
        lw[k] = std::log(std::exp(-da * da / 0.005) + 0.7 * std::exp(-db * db / 0.005) + 1e-300);
    }
    const auto s = posterior_summary(post.reweighted(lw), 2);
    ASSERT_EQ(s.local_modes.size(), 2u);
    const auto& m0 = post.coordinates()[s.local_modes[0]];
    const auto& m1 = post.coordinates()[s.local_modes[1]];
    EXPECT_NEAR(m0[0], 0.4, 1.0 / 41);
    EXPECT_NEAR(m0[1], 0.2, 1.0 / 41);
    EXPECT_NEAR(m1[0], 0.8, 1.0 / 41);
    EXPECT_NEAR(m1[1], 0.6, 1.0 / 41);
}

TEST(Summary, MassWithin) {
    PosteriorSpec spec;
    spec.resolution = 10;
    const auto post = init_posterior(spec);
    // Cell centres 0.05, 0.15, ...: radius 0.1 around (0.45, 0.45) covers 3 x 3 cells.
    EXPECT_NEAR(mass_within(post, 0.1 + 1e-12, std::array<double, 2>{0.45, 0.45}), 9.0 / 100, 1e-14);
    EXPECT_NEAR(mass_within(post, 0.1 + 1e-12, alpha_beta_matrix(0.45, 0.45)), 9.0 / 100, 1e-14);
}

TEST(RunBayes, IdentityModeAndInvariants) {
    const Mdp mdp({m2(0.3, 0.7, 0.7, 0.3), m2(0.9, 0.1, 0.5, 0.5)});
    BayesRunConfig cfg;
    cfg.order = 1;
    cfg.steps = 500;
    cfg.posterior.resolution = 21;
    cfg.snapshot_every = 100;
    // Cell centres never reach 0, so the identity's nearest cell is index 0.
    const auto run = run_bayes(mdp, ConfusionMatrix::identity(2), cfg);
    const auto s = posterior_summary(run.final_posterior);
    EXPECT_EQ(s.mode, 0u);
    ASSERT_EQ(run.snapshots.size(), 6u);
    EXPECT_EQ(run.snapshots.front().t, 0u);
    EXPECT_EQ(run.snapshots.back().t, 500u);
    EXPECT_EQ(run.final_posterior.support().flat(), init_posterior(cfg.posterior).support().flat());
    for (const auto& snap : run.snapshots) {
        EXPECT_NEAR(std::accumulate(snap.weights.begin(), snap.weights.end(), 0.0), 1.0, 1e-12);
        EXPECT_NEAR(snap.belief.sum(), 1.0, 1e-12);
        EXPECT_GE(snap.summary.entropy, 0.0);
    }
}

TEST(RunBayes, LongRunStaysNormalized) {
    const Mdp mdp({m2(0.3, 0.7, 0.7, 0.3), m2(0.9, 0.1, 0.5, 0.5)});
    BayesRunConfig cfg;
    cfg.order = 2;
    cfg.steps = 100000;
    cfg.posterior.resolution = 5;
    cfg.snapshot_every = 10000;
    const auto run = run_bayes(mdp, ConfusionMatrix(m2(0.6, 0.4, 0.2, 0.8)), cfg);
    for (const auto& snap : run.snapshots) {
        EXPECT_NEAR(std::accumulate(snap.weights.begin(), snap.weights.end(), 0.0), 1.0, 1e-12);
        EXPECT_NEAR(snap.belief.sum(), 1.0, 1e-12);
        EXPECT_TRUE((snap.belief.array() >= 0).all());
    }
    EXPECT_NEAR(weight_sum(run.final_posterior), 1.0, 1e-12);
}

TEST(RunBayes, BackendsAgreeExactly) {
    const Mdp mdp({m2(0.3, 0.7, 0.7, 0.3), m2(0.9, 0.1, 0.5, 0.5)});
    BayesRunConfig cfg;
    cfg.steps = 300;
    cfg.posterior.resolution = 31;
    cfg.step.backend = KernelBackend::serial;
    const auto a = run_bayes(mdp, ConfusionMatrix(m2(0.6, 0.4, 0.2, 0.8)), cfg);
    cfg.step.backend = KernelBackend::openmp;
    const auto b = run_bayes(mdp, ConfusionMatrix(m2(0.6, 0.4, 0.2, 0.8)), cfg);
    EXPECT_EQ(a.final_posterior.weights(), b.final_posterior.weights());
}
