#pragma once

// Closed-form solution of the second-order observation equation for two
// states. With X = [[x, 1-x], [y, 1-y]] the equation
//   X^T diag(pi) P X = diag(X^T pi) Q
// reduces to two conics in (x, y) that share their quadratic part, so their
// difference is a line; substituting the line back gives a univariate
// quadratic with at most two real roots.

#include <vector>

#include "noisy_mdp/mdp_core.hpp"

namespace noisy_mdp {

struct TwoStatePoint {
    double x = 0;  ///< candidate C(0, 0)
    double y = 0;  ///< candidate C(1, 0)

    friend bool operator==(const TwoStatePoint&, const TwoStatePoint&) = default;
};

double distance_inf(const TwoStatePoint& a, const TwoStatePoint& b);

ConfusionMatrix to_confusion(const TwoStatePoint& p);

struct TwoStateSolutionSet {
    /// Roots inside [0, 1]^2, ordered by (x, y).
    std::vector<TwoStatePoint> solutions;
    /// Real roots outside [0, 1]^2; never selected.
    std::vector<TwoStatePoint> infeasible;
    /// Both roots coincide (equal rows of C).
    bool degenerate = false;
};

/// General bivariate quadratic xx*x^2 + yy*y^2 + xy*x*y + x_*x + y_*y + c.
struct Conic {
    double xx = 0, yy = 0, xy = 0, x = 0, y = 0, c = 0;

    double operator()(double px, double py) const noexcept {
        return xx * px * px + yy * py * py + xy * px * py + x * px + y * py + c;
    }
};

/// The two independent scalar equations (entries (0,0) and (1,1)).
std::pair<Conic, Conic> two_state_conics(const StateDistribution& pi, const Matrix& transition,
                                         const Matrix& observed);

/// Throws Underdetermined when the conics coincide (no usable line).
TwoStateSolutionSet solve_two_state(const StateDistribution& pi, const Matrix& transition,
                                    const Matrix& observed);

/// The second root of the closed form given the true row parameters (c, d)
/// and stationary mass alpha of state 0.
TwoStatePoint spurious_two_state_solution(double c, double d, double alpha);

/// Points present (within `tol`, infinity norm) in every set; matches are
/// averaged. Throws NoConsistentSolution when nothing survives.
TwoStateSolutionSet intersect_solutions(const std::vector<TwoStateSolutionSet>& sets, double tol);

}  // namespace noisy_mdp
