#include "noisy_mdp/two_state.hpp"

#include <algorithm>
#include <cmath>

#include "noisy_mdp/errors.hpp"

namespace noisy_mdp {

namespace {

constexpr double kFeasibleSlack = 1e-9;
constexpr double kMergeRadius = 1e-6;

double max_abs(const Conic& q) {
    return std::max({std::abs(q.xx), std::abs(q.yy), std::abs(q.xy), std::abs(q.x), std::abs(q.y),
                     std::abs(q.c)});
}

bool lex_less(const TwoStatePoint& a, const TwoStatePoint& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
}

}  // namespace

double distance_inf(const TwoStatePoint& a, const TwoStatePoint& b) {
    return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

ConfusionMatrix to_confusion(const TwoStatePoint& p) {
    Matrix c(2, 2);
    c << p.x, 1.0 - p.x, p.y, 1.0 - p.y;
    return ConfusionMatrix(std::move(c));
}

std::pair<Conic, Conic> two_state_conics(const StateDistribution& pi, const Matrix& transition,
                                         const Matrix& observed) {
    if (pi.size() != 2 || transition.rows() != 2 || transition.cols() != 2 || observed.rows() != 2 ||
        observed.cols() != 2) {
        throw ValidationError("solve_two_state: expects 2-state inputs");
    }
    const double alpha = pi[0];
    const Matrix m = pi.probs().asDiagonal() * transition;
    const Vector row_sums = m.rowwise().sum();
    const Vector col_sums = m.colwise().sum().transpose();
    const double total = m.sum();

    // u = (x, y) is column 0 of X and 1 - u is column 1.
    //   (X^T M X)_00 = u^T M u
    //   (X^T M X)_11 = u^T M u - (M1 + M^T 1).u + sum(M)
    //   (X^T pi)_0 = alpha x + (1 - alpha) y,  (X^T pi)_1 = 1 - (X^T pi)_0
    Conic first;
    first.xx = m(0, 0);
    first.yy = m(1, 1);
    first.xy = m(0, 1) + m(1, 0);
    first.x = -observed(0, 0) * alpha;
    first.y = -observed(0, 0) * (1.0 - alpha);
    first.c = 0.0;

    Conic second = first;
    second.x = -(row_sums(0) + col_sums(0)) + observed(1, 1) * alpha;
    second.y = -(row_sums(1) + col_sums(1)) + observed(1, 1) * (1.0 - alpha);
    second.c = total - observed(1, 1);
    return {first, second};
}

TwoStateSolutionSet solve_two_state(const StateDistribution& pi, const Matrix& transition,
                                    const Matrix& observed) {
    if (!(pi[0] > 0.0) || !(pi[1] > 0.0)) {
        throw ValidationError("solve_two_state: stationary distribution must be strictly positive");
    }
    const auto [first, second] = two_state_conics(pi, transition, observed);
    const double scale = std::max({max_abs(first), max_abs(second), 1e-300});

    // Eliminate the quadratic part using its largest coefficient as pivot.
    double pa = first.xx;
    double pb = second.xx;
    if (std::abs(first.yy) > std::abs(pa)) {
        pa = first.yy;
        pb = second.yy;
    }
    if (std::abs(first.xy) > std::abs(pa)) {
        pa = first.xy;
        pb = second.xy;
    }
    if (std::abs(pa) <= 1e-14 * scale) throw Underdetermined("two-state system has no quadratic part");
    const double lx = pb * first.x - pa * second.x;
    const double ly = pb * first.y - pa * second.y;
    const double l0 = pb * first.c - pa * second.c;
    const double line_scale = std::max(std::abs(lx), std::abs(ly));
    if (line_scale <= 1e-12 * scale * std::abs(pa)) {
        throw Underdetermined("two-state conics coincide; observations carry no information");
    }

    // Parameterize the line as (x, y) = base + t * dir and substitute into the first conic.
    double bx, by, dx, dy;
    if (std::abs(ly) >= std::abs(lx)) {
        bx = 0.0, by = -l0 / ly, dx = 1.0, dy = -lx / ly;
    } else {
        bx = -l0 / lx, by = 0.0, dx = -ly / lx, dy = 1.0;
    }
    const double a = first.xx * dx * dx + first.yy * dy * dy + first.xy * dx * dy;
    const double b = 2.0 * first.xx * bx * dx + 2.0 * first.yy * by * dy +
                     first.xy * (bx * dy + by * dx) + first.x * dx + first.y * dy;
    const double c = first(bx, by);

    std::vector<double> roots;
    const double coef_scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
    if (std::abs(a) <= 1e-14 * coef_scale) {
        if (std::abs(b) <= 1e-14 * coef_scale) throw Underdetermined("two-state system is degenerate");
        roots.push_back(-c / b);
    } else {
        double disc = b * b - 4.0 * a * c;
        if (disc < 0.0 && disc >= -1e-10 * std::max(b * b, std::abs(4.0 * a * c))) disc = 0.0;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            const double q = -0.5 * (b + std::copysign(sq, b));
            if (q == 0.0) {
                roots.push_back(0.0);
            } else {
                roots.push_back(q / a);
                roots.push_back(c / q);
            }
        }
    }

    std::vector<TwoStatePoint> points;
    for (double t : roots) points.push_back({bx + t * dx, by + t * dy});

    TwoStateSolutionSet out;
    if (points.size() == 2 && distance_inf(points[0], points[1]) <= kMergeRadius) {
        points = {{0.5 * (points[0].x + points[1].x), 0.5 * (points[0].y + points[1].y)}};
        out.degenerate = true;
    } else if (points.size() == 1 && !roots.empty() && std::abs(a) > 0.0) {
        out.degenerate = true;
    }
    for (auto p : points) {
        const bool inside = p.x >= -kFeasibleSlack && p.x <= 1.0 + kFeasibleSlack &&
                            p.y >= -kFeasibleSlack && p.y <= 1.0 + kFeasibleSlack;
        if (inside) {
            p.x = std::clamp(p.x, 0.0, 1.0);
            p.y = std::clamp(p.y, 0.0, 1.0);
            out.solutions.push_back(p);
        } else {
            out.infeasible.push_back(p);
        }
    }
    std::sort(out.solutions.begin(), out.solutions.end(), lex_less);
    std::sort(out.infeasible.begin(), out.infeasible.end(), lex_less);
    return out;
}

TwoStatePoint spurious_two_state_solution(double c, double d, double alpha) {
    return {2.0 * d - c + 2.0 * alpha * c - 2.0 * alpha * d, d + 2.0 * alpha * c - 2.0 * alpha * d};
}

TwoStateSolutionSet intersect_solutions(const std::vector<TwoStateSolutionSet>& sets, double tol) {
    if (sets.empty()) throw ValidationError("intersect_solutions: need at least one set");
    if (sets.size() == 1) return sets.front();

    TwoStateSolutionSet out;
    for (const auto& p : sets.front().solutions) {
        TwoStatePoint sum = p;
        bool everywhere = true;
        for (std::size_t s = 1; s < sets.size() && everywhere; ++s) {
            const TwoStatePoint* best = nullptr;
            for (const auto& q : sets[s].solutions) {
                if (distance_inf(p, q) <= tol && (!best || distance_inf(p, q) < distance_inf(p, *best))) {
                    best = &q;
                }
            }
            if (!best) {
                everywhere = false;
            } else {
                sum.x += best->x;
                sum.y += best->y;
            }
        }
        if (!everywhere) continue;
        const TwoStatePoint mean{sum.x / double(sets.size()), sum.y / double(sets.size())};
        const bool duplicate = std::any_of(out.solutions.begin(), out.solutions.end(),
                                           [&](const TwoStatePoint& q) { return distance_inf(q, mean) <= tol; });
        if (!duplicate) out.solutions.push_back(mean);
    }
    if (out.solutions.empty()) {
        throw NoConsistentSolution("per-action two-state solutions share no common point");
    }
    std::sort(out.solutions.begin(), out.solutions.end(), lex_less);
    out.degenerate = out.solutions.size() == 1 &&
                     std::all_of(sets.begin(), sets.end(), [](const auto& s) { return s.degenerate; });
    return out;
}

}  // namespace noisy_mdp
