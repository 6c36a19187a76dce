#include "pllsim/analysis.hpp"
#include "pllsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pllsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_window(TimeWindow w) {
    if (!std::isfinite(w.start) || !std::isfinite(w.end) || !(w.end > w.start)) {
        std::ostringstream os;
        os << "window [" << w.start << ", " << w.end << "] is empty or not finite";
        throw RangeError(os.str());
    }
}

}  // namespace

double wrap_phase(double angle) noexcept {
    const double r = std::remainder(angle, kTwoPi);
    return r <= -std::numbers::pi ? r + kTwoPi : r;
}

double PhaseUnwrapper::push(double wrapped) noexcept {
    if (started_) {
        const double jump = wrapped - previous_wrapped_;
        turns_ -= static_cast<std::int64_t>(std::round(jump / kTwoPi));
    }
    started_ = true;
    previous_wrapped_ = wrapped;
    return wrapped + kTwoPi * static_cast<double>(turns_);
}

double oscillator_phase(double z1, double z2) noexcept {
    return std::atan2(-z2, z1);
}

PhaseSeries unwrap_series(std::span<const double> t, std::span<const double> wrapped) {
    if (t.size() != wrapped.size()) {
        throw RangeError("unwrap: time and phase series differ in length");
    }
    PhaseSeries out;
    out.t.assign(t.begin(), t.end());
    out.wrapped.assign(wrapped.begin(), wrapped.end());
    out.psi.reserve(wrapped.size());
    PhaseUnwrapper unwrapper;
    for (double w : wrapped) {
        out.psi.push_back(unwrapper.push(w));
    }
    return out;
}

PhaseSeries phase_from_state(const Trajectory& traj) {
    if (traj.empty()) {
        throw RangeError("phase_from_state: empty trajectory");
    }
    std::vector<double> wrapped;
    wrapped.reserve(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto& s = traj.states[k];
        if (s.z1() == 0.0 && s.z2() == 0.0) {
            std::ostringstream os;
            os << "phase_from_state: oscillator state is zero at sample " << k << " (t = " << traj.t[k]
               << "), phase undefined";
            throw DegenerateStateError(k, os.str());
        }
        wrapped.push_back(oscillator_phase(s.z1(), s.z2()));
    }
    return unwrap_series(traj.t, wrapped);
}

PhaseSeries phase_from_frequency(const Trajectory& traj) {
    PhaseSeries out;
    out.t = traj.t;
    out.psi.resize(traj.size());
    out.wrapped.resize(traj.size());
    double psi = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (k > 0) {
            psi += 0.5 * (traj.omega_inst[k] + traj.omega_inst[k - 1]) * (traj.t[k] - traj.t[k - 1]);
        }
        out.psi[k] = psi;
        out.wrapped[k] = wrap_phase(psi);
    }
    return out;
}

double growth_rate(const PhaseSeries& phase, TimeWindow window) {
    require_window(window);
    if (phase.size() < 2 || !in_window(window.start, {phase.t.front(), phase.t.back()}) ||
        !in_window(window.end, {phase.t.front(), phase.t.back()})) {
        std::ostringstream os;
        os << "growth_rate: window [" << window.start << ", " << window.end << "] outside the series";
        throw RangeError(os.str());
    }
    const auto at = [&phase](double t) {
        auto it = std::lower_bound(phase.t.begin(), phase.t.end(), t);
        if (it == phase.t.end()) {
            return phase.psi.back();
        }
        const auto k = static_cast<std::size_t>(it - phase.t.begin());
        if (*it == t || k == 0) {
            return phase.psi[k];
        }
        const double w = (t - phase.t[k - 1]) / (phase.t[k] - phase.t[k - 1]);
        return phase.psi[k - 1] + w * (phase.psi[k] - phase.psi[k - 1]);
    };
    return (at(window.end) - at(window.start)) / (window.end - window.start);
}

bool in_window(double t, TimeWindow window) noexcept {
    const double tol = 1e-9 * std::max({1.0, std::abs(window.start), std::abs(window.end)});
    return t >= window.start - tol && t <= window.end + tol;
}

MetricsAccumulator::MetricsAccumulator(double omega_i, TimeWindow window)
    : omega_i_(omega_i), window_(window) {
    require_window(window);
}

void MetricsAccumulator::push(double t, double psi) noexcept {
    if (!in_window(t, window_)) {
        return;
    }
    const double e = psi - omega_i_ * t;
    if (count_ == 0) {
        first_t_ = t;
        first_psi_ = psi;
    } else {
        const double rate = (psi - last_psi_) / (t - last_t_) - omega_i_;
        ++rate_count_;
        const double delta = rate - rate_mean_;
        rate_mean_ += delta / static_cast<double>(rate_count_);
        rate_m2_ += delta * (rate - rate_mean_);
        abs_rate_sum_ += std::abs(rate);
    }
    e_max_ = std::max(e_max_, std::abs(e));
    last_t_ = t;
    last_psi_ = psi;
    ++count_;
}

MetricsRecord MetricsAccumulator::finish() const {
    if (count_ < 2) {
        std::ostringstream os;
        os << "metrics: fewer than two samples inside window [" << window_.start << ", " << window_.end << "]";
        throw RangeError(os.str());
    }
    MetricsRecord r;
    r.omega_hat = (last_psi_ - first_psi_) / (last_t_ - first_t_);
    r.f = r.omega_hat == 0.0 ? std::numeric_limits<double>::infinity() : std::abs(1.0 - omega_i_ / r.omega_hat);
    r.e_max = e_max_;
    const auto n = static_cast<double>(rate_count_);
    r.m = abs_rate_sum_ / n;
    r.s = std::sqrt(std::max(rate_m2_, 0.0) / n);
    r.freq_locked = r.f < kFrequencyLockThreshold;
    r.phase_entrained = r.e_max < kPhaseEntrainmentBound;
    return r;
}

void StreamingMetrics::push(const Sample& sample) {
    const double z1 = sample.state.z1();
    const double z2 = sample.state.z2();
    if (z1 == 0.0 && z2 == 0.0) {
        std::ostringstream os;
        os << "oscillator state is zero at sample " << index_ << " (t = " << sample.t << "), phase undefined";
        throw DegenerateStateError(index_, os.str());
    }
    accumulator_.push(sample.t, unwrapper_.push(oscillator_phase(z1, z2)));
    ++index_;
}

MetricsRecord metrics_from_phase(const PhaseSeries& phase, double omega_i, TimeWindow window) {
    MetricsAccumulator acc(omega_i, window);
    for (std::size_t k = 0; k < phase.size(); ++k) {
        acc.push(phase.t[k], phase.psi[k]);
    }
    return acc.finish();
}

MetricsRecord metrics(const Trajectory& traj, double omega_i, TimeWindow window) {
    return metrics_from_phase(phase_from_state(traj), omega_i, window);
}

PhaseErrorDifferences phase_error_differences(const PhaseSeries& phase, double omega_i) {
    PhaseErrorDifferences out;
    const std::size_t n = phase.size();
    if (n < 2) {
        return out;
    }
    out.t.reserve(n - 1);
    out.raw.reserve(n - 1);
    out.unwrapped.reserve(n - 1);
    out.rate.reserve(n - 1);
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = phase.t[k] - phase.t[k - 1];
        const double ramp = omega_i * dt;
        const double d_unwrapped = (phase.psi[k] - phase.psi[k - 1]) - ramp;
        out.t.push_back(phase.t[k]);
        out.raw.push_back((phase.wrapped[k] - phase.wrapped[k - 1]) - ramp);
        out.unwrapped.push_back(d_unwrapped);
        out.rate.push_back(d_unwrapped / dt);
    }
    return out;
}

std::vector<std::pair<double, double>> lissajous(const Trajectory& traj, TimeWindow window) {
    require_window(window);
    std::vector<std::pair<double, double>> points;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (in_window(traj.t[k], window)) {
            points.emplace_back(traj.u[k], traj.states[k].z1());
        }
    }
    return points;
}

}  // namespace pllsim
