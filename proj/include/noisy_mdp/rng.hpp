#pragma once

#include <cstdint>
#include <span>

namespace noisy_mdp {

/// Counter-based uniform generator. Draw k of stream s under seed x is a pure
/// function of (x, s, k), so output never depends on call sites elsewhere.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

    /// Uniform double in [0, 1) for an explicit counter value.
    double at(std::uint64_t counter) const noexcept {
        return static_cast<double>(mix(key_ + counter * kGolden) >> 11) * 0x1.0p-53;
    }

    double next() noexcept { return at(counter_++); }

    std::uint64_t counter() const noexcept { return counter_; }

    /// Inverse-CDF categorical draw; weights need not be normalized.
    std::size_t categorical(std::span<const double> weights) noexcept {
        double total = 0.0;
        for (double w : weights) total += w;
        const double u = next() * total;
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            last_positive = i;
            acc += weights[i];
            if (u < acc) return i;
        }
        return last_positive;
    }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    // SplitMix64 finalizer.
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace noisy_mdp
