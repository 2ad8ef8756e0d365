#include <stdexcept>

#include "bayes_kernel_point.hpp"
#include "noisy_mdp/bayes_kernels.hpp"
#include "noisy_mdp/errors.hpp"

namespace noisy_mdp {

Support::Support(std::size_t num_states, std::vector<double> flat)
    : n_(num_states), k_(num_states == 0 ? 0 : flat.size() / (num_states * num_states)), flat_(std::move(flat)) {
    if (n_ < 2 || flat_.size() != k_ * n_ * n_ || k_ == 0) {
        throw ValidationError("support: flat storage does not hold whole n x n matrices");
    }
}

Eigen::MatrixXd Support::matrix(std::size_t k) const {
    if (k >= k_) throw ValidationError("support index out of range");
    const auto n = static_cast<Eigen::Index>(n_);
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat_.data() + k * n_ * n_, n, n);
}

namespace {

std::vector<double> row_major(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[std::size_t(i * m.cols() + j)] = m(i, j);
    }
    return out;
}

}  // namespace

namespace serial {

void first_order(const Support& support, std::span<const double> predicted, std::size_t obs, KernelOutput& out) {
    const std::size_t n = support.num_states();
    const std::size_t k = support.size();
    out.resize(k, n);
    const double* base = support.flat().data();
    for (std::size_t p = 0; p < k; ++p) {
        out.likelihood[p] =
            detail::first_order_point(base + p * n * n, n, predicted.data(), obs, out.terms.data() + p * n);
    }
}

void second_order(const Support& support, std::span<const double> belief, const Eigen::MatrixXd& transition,
                  std::size_t obs_now, std::size_t obs_next, KernelOutput& out) {
    const std::size_t n = support.num_states();
    const std::size_t k = support.size();
    out.resize(k, n);
    const std::vector<double> p_flat = row_major(transition);
    const double* base = support.flat().data();
    for (std::size_t p = 0; p < k; ++p) {
        out.likelihood[p] = detail::second_order_point(base + p * n * n, n, belief.data(), p_flat.data(), obs_now,
                                                       obs_next, out.terms.data() + p * n);
    }
}

}  // namespace serial

void first_order_kernel(KernelBackend backend, const Support& support, std::span<const double> predicted,
                        std::size_t obs, KernelOutput& out) {
    if (backend == KernelBackend::serial) {
        serial::first_order(support, predicted, obs, out);
    } else {
        parallel::first_order(support, predicted, obs, out);
    }
}

void second_order_kernel(KernelBackend backend, const Support& support, std::span<const double> belief,
                         const Eigen::MatrixXd& transition, std::size_t obs_now, std::size_t obs_next,
                         KernelOutput& out) {
    if (backend == KernelBackend::serial) {
        serial::second_order(support, belief, transition, obs_now, obs_next, out);
    } else {
        parallel::second_order(support, belief, transition, obs_now, obs_next, out);
    }
}

}  // namespace noisy_mdp
