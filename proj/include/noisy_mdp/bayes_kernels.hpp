#pragma once

// Per-support-point likelihood kernels for the Bayesian recursions. Each
// kernel writes one likelihood and one n-vector of belief terms per support
// point and never reduces across points, so the serial and OpenMP variants
// produce bit-identical output and callers own the (fixed-order) reductions.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace noisy_mdp {

/// K confusion matrices of size n x n stored contiguously, row-major per matrix.
class Support {
public:
    Support(std::size_t num_states, std::vector<double> flat);

    std::size_t num_states() const noexcept { return n_; }
    std::size_t size() const noexcept { return k_; }
    const std::vector<double>& flat() const noexcept { return flat_; }

    /// Entry C_k(i, j).
    double at(std::size_t k, std::size_t i, std::size_t j) const noexcept {
        return flat_[(k * n_ + i) * n_ + j];
    }
    Eigen::MatrixXd matrix(std::size_t k) const;

private:
    std::size_t n_;
    std::size_t k_;
    std::vector<double> flat_;
};

enum class KernelBackend { serial, openmp };

/// Output buffers: likelihood[k] and terms[k * n + i].
struct KernelOutput {
    std::vector<double> likelihood;
    std::vector<double> terms;

    void resize(std::size_t k, std::size_t n) {
        likelihood.assign(k, 0.0);
        terms.assign(k * n, 0.0);
    }
};

// First-order kernel. `predicted` = P^T b. For each point:
//   likelihood = sum_i C(i, obs) predicted_i
//   terms_i    = C(i, obs) predicted_i / likelihood            (0 when likelihood is 0)
//
// Second-order kernel. With a = obs_now, b = obs_next and belief btilde:
//   den        = sum_j C(j, a) btilde_j
//   likelihood = sum_{j,l} C(j, a) btilde_j P(j, l) C(l, b) / den
//   terms_i    = sum_j P(j, i) C(j, a) btilde_j / den          (0 when den is 0)

/// Reference implementation, kept for testing and benchmarking.
namespace serial {
void first_order(const Support& support, std::span<const double> predicted, std::size_t obs, KernelOutput& out);
void second_order(const Support& support, std::span<const double> belief, const Eigen::MatrixXd& transition,
                  std::size_t obs_now, std::size_t obs_next, KernelOutput& out);
}  // namespace serial

namespace parallel {
void first_order(const Support& support, std::span<const double> predicted, std::size_t obs, KernelOutput& out);
void second_order(const Support& support, std::span<const double> belief, const Eigen::MatrixXd& transition,
                  std::size_t obs_now, std::size_t obs_next, KernelOutput& out);
}  // namespace parallel

void first_order_kernel(KernelBackend backend, const Support& support, std::span<const double> predicted,
                        std::size_t obs, KernelOutput& out);
void second_order_kernel(KernelBackend backend, const Support& support, std::span<const double> belief,
                         const Eigen::MatrixXd& transition, std::size_t obs_now, std::size_t obs_next,
                         KernelOutput& out);

}  // namespace noisy_mdp
