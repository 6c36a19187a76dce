#pragma once

#include "pllsim/model.hpp"

#include <cstddef>
#include <cstdint>

namespace pllsim {

/// Sinusoidal node input u(t) = amplitude * sin(omega_i t).
struct InputSpec {
    double amplitude = 1.0;
    double omega_i = 1.0;

    void validate() const;

    friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

/// Zero-mean Gaussian noise on the input and on omega0. Samples are piecewise
/// constant: one fresh sample per channel per integration step.
struct NoiseSpec {
    double input_noise_variance = 0.0;
    double omega0_noise_variance = 0.0;
    std::uint64_t seed = 0;

    void validate() const;

    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// I.i.d. zero-mean Gaussian initial conditions.
struct InitSpec {
    double variance = 0.01;
    std::uint64_t seed = 0;

    void validate() const;

    friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

enum class NoiseChannel : std::uint64_t { input = 1, omega0 = 2 };

/// Distinguishes the sub-streams derived from one master seed.
enum class SeedPurpose : std::uint64_t { init = 0x696e6974, noise = 0x6e6f6973 };

/// SplitMix64 output function.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * Seed for the index-th run (or grid cell) and the given purpose:
 * mix64(mix64(master + (index + 1) * gamma) ^ purpose), gamma = 0x9e3779b97f4a7c15.
 */
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                        SeedPurpose purpose) noexcept;

/// Counter-based standard normal: entry `index` of the Box-Muller stream keyed by `key`.
/// Pure function; random access costs the same as sequential access.
[[nodiscard]] double standard_normal(std::uint64_t key, std::uint64_t index) noexcept;

/// Per-run noise source bound to one NoiseSpec. Cheap to copy.
class NoiseSource {
public:
    explicit NoiseSource(const NoiseSpec& spec);

    [[nodiscard]] double sample(NoiseChannel channel, std::uint64_t step_index) const noexcept;
    [[nodiscard]] bool enabled(NoiseChannel channel) const noexcept;

private:
    double input_sigma_;
    double omega0_sigma_;
    std::uint64_t input_key_;
    std::uint64_t omega0_key_;
};

[[nodiscard]] double input_sample(const InputSpec& spec, double t, double noise_sample) noexcept;

/// The Gaussian sample held over integration step `step_index` on `channel`.
[[nodiscard]] double noise_stream(const NoiseSpec& spec, NoiseChannel channel, std::uint64_t step_index);

/// Every entry drawn i.i.d. N(0, variance) except xi, which starts at 0. Warns
/// when the variance is zero because the origin never oscillates.
[[nodiscard]] NodeState sample_initial_state(const InitSpec& spec, std::size_t filter_order,
                                             bool has_integral);

}  // namespace pllsim
