#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace pllsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration, raised before any integration starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A state entry became non-finite. Carries the last finite time and state.
class DivergenceError : public Error {
public:
    DivergenceError(double last_finite_time, std::vector<double> last_finite_state, const std::string& what);

    [[nodiscard]] double time() const noexcept { return time_; }
    [[nodiscard]] const std::vector<double>& state() const noexcept { return state_; }

private:
    double time_;
    std::vector<double> state_;
};

/// Oscillator sample with z1 = z2 = 0 has no defined phase.
class DegenerateStateError : public Error {
public:
    DegenerateStateError(std::size_t sample_index, const std::string& what)
        : Error(what), index_(sample_index) {}

    [[nodiscard]] std::size_t sample_index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class PoleOnAxisError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : Error(what + " [" + path.string() + "]"), path_(path) {}

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace pllsim
