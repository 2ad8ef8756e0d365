#pragma once

// Per-point arithmetic shared by the serial and OpenMP kernels so both
// execute the exact same floating-point operations.

#include <cstddef>

namespace noisy_mdp::detail {

// c: row-major n x n; predicted: length n; terms: length n.
inline double first_order_point(const double* c, std::size_t n, const double* predicted, std::size_t obs,
                                double* terms) {
    double lik = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        terms[i] = c[i * n + obs] * predicted[i];
        lik += terms[i];
    }
    if (lik > 0.0) {
        for (std::size_t i = 0; i < n; ++i) terms[i] /= lik;
    } else {
        for (std::size_t i = 0; i < n; ++i) terms[i] = 0.0;
        lik = 0.0;
    }
    return lik;
}

// p: row-major n x n transition matrix.
inline double second_order_point(const double* c, std::size_t n, const double* belief, const double* p,
                                 std::size_t a, std::size_t b, double* terms) {
    double den = 0.0;
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) terms[i] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double w = c[j * n + a] * belief[j];
        den += w;
        double reach = 0.0;
        for (std::size_t l = 0; l < n; ++l) {
            reach += p[j * n + l] * c[l * n + b];
            terms[l] += p[j * n + l] * w;
        }
        num += w * reach;
    }
    if (!(den > 0.0)) {
        for (std::size_t i = 0; i < n; ++i) terms[i] = 0.0;
        return 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) terms[i] /= den;
    return num / den;
}

}  // namespace noisy_mdp::detail
