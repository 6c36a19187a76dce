#include "pllsim/signals.hpp"
#include "pllsim/diagnostics.hpp"
#include "pllsim/errors.hpp"

#include <cmath>
#include <numbers>

namespace pllsim {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kInitStreamTag = 0x5354415445ULL;

bool finite_non_negative(double v) {
    return std::isfinite(v) && v >= 0.0;
}

double unit_open(std::uint64_t bits) noexcept {
    // (0, 1): 53 random bits offset by half an ulp
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t channel_key(std::uint64_t seed, NoiseChannel channel) noexcept {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(channel) * kGamma));
}

}  // namespace

void InputSpec::validate() const {
    if (!std::isfinite(omega_i) || omega_i <= 0.0) {
        throw ConfigError("input: omega_i must be positive and finite");
    }
    if (!std::isfinite(amplitude) || amplitude <= 0.0) {
        throw ConfigError("input: amplitude must be positive and finite");
    }
}

void NoiseSpec::validate() const {
    if (!finite_non_negative(input_noise_variance) || !finite_non_negative(omega0_noise_variance)) {
        throw ConfigError("noise: variances must be non-negative and finite");
    }
}

void InitSpec::validate() const {
    if (!finite_non_negative(variance)) {
        throw ConfigError("init: variance must be non-negative and finite");
    }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, SeedPurpose purpose) noexcept {
    return mix64(mix64(master + (index + 1) * kGamma) ^ static_cast<std::uint64_t>(purpose));
}

double standard_normal(std::uint64_t key, std::uint64_t index) noexcept {
    const std::uint64_t base = key + 2 * index * kGamma;
    const double u1 = unit_open(mix64(base + kGamma));
    const double u2 = unit_open(mix64(base + 2 * kGamma));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

NoiseSource::NoiseSource(const NoiseSpec& spec)
    : input_sigma_(std::sqrt(spec.input_noise_variance)),
      omega0_sigma_(std::sqrt(spec.omega0_noise_variance)),
      input_key_(channel_key(spec.seed, NoiseChannel::input)),
      omega0_key_(channel_key(spec.seed, NoiseChannel::omega0)) {}

bool NoiseSource::enabled(NoiseChannel channel) const noexcept {
    return (channel == NoiseChannel::input ? input_sigma_ : omega0_sigma_) > 0.0;
}

double NoiseSource::sample(NoiseChannel channel, std::uint64_t step_index) const noexcept {
    const bool input = channel == NoiseChannel::input;
    const double sigma = input ? input_sigma_ : omega0_sigma_;
    if (sigma == 0.0) {
        return 0.0;
    }
    return sigma * standard_normal(input ? input_key_ : omega0_key_, step_index);
}

double input_sample(const InputSpec& spec, double t, double noise_sample) noexcept {
    return spec.amplitude * std::sin(spec.omega_i * t) + noise_sample;
}

double noise_stream(const NoiseSpec& spec, NoiseChannel channel, std::uint64_t step_index) {
    spec.validate();
    return NoiseSource(spec).sample(channel, step_index);
}

NodeState sample_initial_state(const InitSpec& spec, std::size_t filter_order, bool has_integral) {
    spec.validate();
    NodeState state(filter_order, has_integral);
    if (spec.variance == 0.0) {
        warn("initial-state variance is 0: the origin is an equilibrium and the oscillator never starts");
        return state;
    }
    const double sigma = std::sqrt(spec.variance);
    const std::uint64_t key = mix64(spec.seed ^ kInitStreamTag);
    auto v = state.values();
    const std::size_t drawn = filter_order + 2;  // xi stays at 0
    for (std::size_t k = 0; k < drawn; ++k) {
        v[k] = sigma * standard_normal(key, k);
    }
    return state;
}

}  // namespace pllsim
