#include <gtest/gtest.h>

#include <random>

#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/two_state.hpp"

using namespace noisy_mdp;

namespace {

Matrix m2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

Matrix row_c(double c, double d) { return m2(c, 1 - c, d, 1 - d); }

/// Two-state P with stationary (alpha, 1 - alpha) and free parameter p = P(0, 1).
Matrix p_with_stationary(double alpha, double p) {
    const double q = alpha * p / (1 - alpha);  // P(1, 0) from detailed balance
    return m2(1 - p, p, q, 1 - q);
}

TwoStateSolutionSet solve_exact(double c, double d, double alpha, double p) {
    const Matrix pm = p_with_stationary(alpha, p);
    const StateDistribution pi(Vector((Vector(2) << alpha, 1 - alpha).finished()));
    const auto q = exact_observed_transition(ConfusionMatrix(row_c(c, d)), pi, pm);
    return solve_two_state(pi, pm, q.entries);
}

bool contains(const TwoStateSolutionSet& s, TwoStatePoint p, double tol) {
    for (const auto& x : s.solutions)
        if (distance_inf(x, p) <= tol) return true;
    return false;
}

}  // namespace

TEST(SolveTwoState, WorkedExample) {
    Matrix q = m2(0.45, 0.55, 0.825, 0.175);
    const auto s = solve_two_state(StateDistribution::uniform(2), m2(0, 1, 1, 0), q);
    ASSERT_EQ(s.solutions.size(), 2u);
    EXPECT_NEAR(s.solutions[0].x, 0.3, 1e-10);
    EXPECT_NEAR(s.solutions[0].y, 0.9, 1e-10);
    EXPECT_NEAR(s.solutions[1].x, 0.9, 1e-10);
    EXPECT_NEAR(s.solutions[1].y, 0.3, 1e-10);
    EXPECT_FALSE(s.degenerate);
}

TEST(SolveTwoState, IdentityGivesSwap) {
    const auto s = solve_exact(1.0, 0.0, 0.5, 0.3);
    ASSERT_EQ(s.solutions.size(), 2u);
    EXPECT_TRUE(contains(s, {1, 0}, 1e-10));
    EXPECT_TRUE(contains(s, {0, 1}, 1e-10));
}

TEST(SolveTwoState, EqualRowsDegenerate) {
    for (double alpha : {0.3, 0.5, 0.8}) {
        const auto s = solve_exact(0.6, 0.6, alpha, 0.4);
        ASSERT_EQ(s.solutions.size(), 1u) << alpha;
        EXPECT_TRUE(s.degenerate);
        EXPECT_NEAR(s.solutions[0].x, 0.6, 1e-7);
        EXPECT_NEAR(s.solutions[0].y, 0.6, 1e-7);
    }
}

TEST(SolveTwoState, ClosedFormAndFreeParameter) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    int checked = 0;
    while (checked < 200) {
        const double c = u(gen), d = u(gen), alpha = u(gen);
        if (std::abs(c - d) < 0.05) continue;
        const TwoStatePoint spur = spurious_two_state_solution(c, d, alpha);
        const auto a = solve_exact(c, d, alpha, 0.3 * (1 - alpha));
        const auto b = solve_exact(c, d, alpha, 0.8 * (1 - alpha));
        EXPECT_TRUE(contains(a, {c, d}, 1e-10) || [&] {
            for (auto p : a.infeasible) if (distance_inf(p, {c, d}) <= 1e-10) return true;
            return false;
        }());
        const bool spur_inside = spur.x >= 0 && spur.x <= 1 && spur.y >= 0 && spur.y <= 1;
        const auto& pool_a = spur_inside ? a.solutions : a.infeasible;
        bool found = false;
        for (const auto& p : pool_a) found |= distance_inf(p, spur) <= 1e-10;
        EXPECT_TRUE(found) << c << ' ' << d << ' ' << alpha;
        ASSERT_EQ(a.solutions.size(), b.solutions.size());
        for (std::size_t k = 0; k < a.solutions.size(); ++k) {
            EXPECT_LE(distance_inf(a.solutions[k], b.solutions[k]), 1e-10);
        }
        ++checked;
    }
}

TEST(SolveTwoState, SpuriousMapIsInvolution) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const double c = u(gen), d = u(gen), alpha = u(gen);
        const auto s1 = spurious_two_state_solution(c, d, alpha);
        const auto s2 = spurious_two_state_solution(s1.x, s1.y, alpha);
        EXPECT_NEAR(s2.x, c, 1e-12);
        EXPECT_NEAR(s2.y, d, 1e-12);
    }
}

TEST(SolveTwoState, CommonStationarySpuriousPoint) {
    const auto p = spurious_two_state_solution(0.6, 0.2, 0.5);
    EXPECT_NEAR(p.x, 0.2, 1e-15);
    EXPECT_NEAR(p.y, 0.6, 1e-15);
}

TEST(SolveTwoState, NoInformationIsUnderdetermined) {
    // P with identical rows and C with identical rows: every observation is independent.
    const Matrix p = m2(0.5, 0.5, 0.5, 0.5);
    EXPECT_THROW(solve_two_state(StateDistribution::uniform(2), p, m2(0.5, 0.5, 0.5, 0.5)), Underdetermined);
    EXPECT_THROW(solve_two_state(StateDistribution::uniform(3), Matrix::Identity(3, 3), Matrix::Identity(3, 3)),
                 ValidationError);
}

TEST(Intersect, WorkedExampleSetsBothSurvive) {
    const auto a = solve_two_state(StateDistribution::uniform(2), m2(0, 1, 1, 0), m2(0.45, 0.55, 0.825, 0.175));
    const auto b = solve_two_state(StateDistribution::uniform(2), m2(0.3, 0.7, 0.7, 0.3), m2(0.54, 0.46, 0.69, 0.31));
    const auto s = intersect_solutions({a, b}, 1e-8);
    EXPECT_EQ(s.solutions.size(), 2u);
}

TEST(Intersect, DistinctSpuriousDropsOut) {
    TwoStateSolutionSet a, b;
    a.solutions = {{0.3, 0.9}, {0.9, 0.3}};
    b.solutions = {{0.5, 0.7}, {0.9, 0.3}};
    const auto s = intersect_solutions({a, b}, 1e-8);
    ASSERT_EQ(s.solutions.size(), 1u);
    EXPECT_EQ(s.solutions[0], (TwoStatePoint{0.9, 0.3}));
}

TEST(Intersect, SingleSetUnchangedAndEmptyThrows) {
    TwoStateSolutionSet a, b;
    a.solutions = {{0.3, 0.9}, {0.9, 0.3}};
    EXPECT_EQ(intersect_solutions({a}, 1e-8).solutions, a.solutions);
    b.solutions = {{0.1, 0.1}};
    EXPECT_THROW(intersect_solutions({a, b}, 1e-8), NoConsistentSolution);
    EXPECT_THROW(intersect_solutions({}, 1e-8), ValidationError);
}

TEST(Intersect, MatchesAreAveraged) {
    TwoStateSolutionSet a, b;
    a.solutions = {{0.9, 0.3}};
    b.solutions = {{0.9 + 2e-7, 0.3 - 2e-7}};
    const auto s = intersect_solutions({a, b}, 1e-6);
    ASSERT_EQ(s.solutions.size(), 1u);
    EXPECT_NEAR(s.solutions[0].x, 0.9 + 1e-7, 1e-15);
}

TEST(Conics, ExactPointSatisfiesBoth) {
    const Matrix p = m2(0.2, 0.8, 0.6, 0.4);
    const StateDistribution pi = stationary_distribution(p);
    const auto q = exact_observed_transition(ConfusionMatrix(row_c(0.7, 0.25)), pi, p);
    const auto [f, g] = two_state_conics(pi, p, q.entries);
    EXPECT_NEAR(f(0.7, 0.25), 0.0, 1e-14);
    EXPECT_NEAR(g(0.7, 0.25), 0.0, 1e-14);
    EXPECT_NEAR(f.xx, g.xx, 1e-15);
    EXPECT_NEAR(f.yy, g.yy, 1e-15);
    EXPECT_NEAR(f.xy, g.xy, 1e-15);
}
