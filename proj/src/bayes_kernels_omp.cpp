#include "bayes_kernel_point.hpp"
#include "noisy_mdp/bayes_kernels.hpp"

namespace noisy_mdp::parallel {

void first_order(const Support& support, std::span<const double> predicted, std::size_t obs, KernelOutput& out) {
    const std::size_t n = support.num_states();
    const auto k = static_cast<long>(support.size());
    out.resize(support.size(), n);
    const double* base = support.flat().data();
    double* lik = out.likelihood.data();
    double* terms = out.terms.data();
#pragma omp parallel for schedule(static)
    for (long p = 0; p < k; ++p) {
        const auto q = static_cast<std::size_t>(p);
        lik[q] = detail::first_order_point(base + q * n * n, n, predicted.data(), obs, terms + q * n);
    }
}

void second_order(const Support& support, std::span<const double> belief, const Eigen::MatrixXd& transition,
                  std::size_t obs_now, std::size_t obs_next, KernelOutput& out) {
    const std::size_t n = support.num_states();
    const auto k = static_cast<long>(support.size());
    out.resize(support.size(), n);
    std::vector<double> p_flat(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) p_flat[i * n + j] = transition(Eigen::Index(i), Eigen::Index(j));
    }
    const double* base = support.flat().data();
    double* lik = out.likelihood.data();
    double* terms = out.terms.data();
#pragma omp parallel for schedule(static)
    for (long p = 0; p < k; ++p) {
        const auto q = static_cast<std::size_t>(p);
        lik[q] = detail::second_order_point(base + q * n * n, n, belief.data(), p_flat.data(), obs_now, obs_next,
                                            terms + q * n);
    }
}

}  // namespace noisy_mdp::parallel
