#pragma once

#include "pllsim/analysis.hpp"
#include "pllsim/experiments.hpp"
#include "pllsim/integrator.hpp"
#include "pllsim/model.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pllsim {

[[nodiscard]] std::string_view version() noexcept;

/// Run manifest: tool name and version, the command, the full resolved
/// configuration, the files of the bundle and a results summary. Contains no
/// wall-clock data, so reruns produce identical bytes.
[[nodiscard]] nlohmann::json make_manifest(std::string_view command, nlohmann::json config,
                                           const std::vector<std::string>& files, nlohmann::json results);

/// Shortest-safe text for a double: 17 significant digits, "inf", "-inf" or "nan".
[[nodiscard]] std::string format_real(double value);

inline constexpr const char* kSweepCsvHeader =
    "omega_i,gain,f,e_max,m,s,omega_hat,freq_locked,phase_entrained,diverged";
inline constexpr const char* kMcCsvHeader = "run,f,e_max,m,s,omega_hat,diverged";
inline constexpr const char* kTrajectoryCsvHeader = "t,u,v_d,v_c,z1,z2,omega_inst,psi_o,e";
inline constexpr const char* kBodeCsvHeader = "omega,magnitude,phase";

void write_sweep_csv(std::ostream& os, const SweepResult& result);
void write_mc_csv(std::ostream& os, const std::vector<McRun>& runs);
/// A single row for the noise-free reference run, same columns as mc.csv.
void write_mc_ref_csv(std::ostream& os, const McRun& reference);

/// Streams trajectory.csv rows from integrator samples. Every sample updates
/// the phase unwrapper; only samples whose step is a multiple of `stride` are
/// written. e = psi_o - omega_i t.
class TrajectoryCsvWriter {
public:
    TrajectoryCsvWriter(std::ostream& os, double omega_i, std::size_t stride = 1);

    void push(const Sample& sample);
    [[nodiscard]] std::size_t rows_written() const noexcept { return rows_; }

private:
    std::ostream& os_;
    double omega_i_;
    std::size_t stride_;
    PhaseUnwrapper unwrapper_;
    std::size_t rows_ = 0;
};

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, double omega_i);

struct BodePoint {
    double omega = 0.0;
    double magnitude = 0.0;
    double phase = 0.0;  ///< unwrapped along the grid, radians
};

/// Log-spaced frequency response on [omega_min, omega_max]. Throws ConfigError
/// unless 0 < omega_min < omega_max and points >= 2.
[[nodiscard]] std::vector<BodePoint> bode(const FilterSpec& filter, double omega_min, double omega_max,
                                          std::size_t points);
void write_bode_csv(std::ostream& os, const std::vector<BodePoint>& points);

/**
 * Collects the files of one result bundle in a staging directory next to the
 * destination and moves them into place on commit(). Destroying an uncommitted
 * writer removes the staging directory, so a failed run leaves no partial files.
 */
class BundleWriter {
public:
    /// Creates the staging directory. Throws IoError when the destination's parent
    /// cannot be created or written.
    explicit BundleWriter(std::filesystem::path out_dir);
    ~BundleWriter();

    BundleWriter(const BundleWriter&) = delete;
    BundleWriter& operator=(const BundleWriter&) = delete;

    /// Writes `relative` (may contain subdirectories) through `fill`.
    void write(const std::string& relative, const std::function<void(std::ostream&)>& fill);
    void write_json(const std::string& relative, const nlohmann::json& doc);

    /// Moves every staged file into out_dir, replacing files of the same name.
    void commit();

    [[nodiscard]] const std::vector<std::string>& files() const noexcept { return files_; }
    [[nodiscard]] const std::filesystem::path& out_dir() const noexcept { return out_dir_; }

private:
    std::filesystem::path out_dir_;
    std::filesystem::path staging_;
    std::vector<std::string> files_;
    bool committed_ = false;
};

}  // namespace pllsim
