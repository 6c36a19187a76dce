#include "pllsim/persist.hpp"
#include "pllsim/errors.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <system_error>

#include <unistd.h>

namespace pllsim {

namespace fs = std::filesystem;

namespace {

const char* flag(bool b) { return b ? "1" : "0"; }

void write_metrics_columns(std::ostream& os, const MetricsRecord& r) {
    os << format_real(r.f) << ',' << format_real(r.e_max) << ',' << format_real(r.m) << ','
       << format_real(r.s) << ',' << format_real(r.omega_hat);
}

void write_mc_row(std::ostream& os, const McRun& run) {
    os << run.run << ',';
    write_metrics_columns(os, run.metrics);
    os << ',' << flag(run.diverged) << '\n';
}

std::atomic<unsigned> staging_counter{0};

}  // namespace

std::string_view version() noexcept { return PLLSIM_VERSION; }

nlohmann::json make_manifest(std::string_view command, nlohmann::json config, const std::vector<std::string>& files,
                             nlohmann::json results) {
    return {{"tool", "pllsim"},
            {"version", std::string(version())},
            {"command", std::string(command)},
            {"config", std::move(config)},
            {"files", files},
            {"results", std::move(results)}};
}

std::string format_real(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
    os << kSweepCsvHeader << '\n';
    for (const auto& cell : result.cells) {
        os << format_real(cell.omega_i) << ',' << format_real(cell.gain) << ',';
        write_metrics_columns(os, cell.metrics);
        os << ',' << flag(cell.metrics.freq_locked) << ',' << flag(cell.metrics.phase_entrained) << ','
           << flag(cell.diverged) << '\n';
    }
}

void write_mc_csv(std::ostream& os, const std::vector<McRun>& runs) {
    os << kMcCsvHeader << '\n';
    for (const auto& run : runs) {
        write_mc_row(os, run);
    }
}

void write_mc_ref_csv(std::ostream& os, const McRun& reference) {
    os << kMcCsvHeader << '\n';
    write_mc_row(os, reference);
}

TrajectoryCsvWriter::TrajectoryCsvWriter(std::ostream& os, double omega_i, std::size_t stride)
    : os_(os), omega_i_(omega_i), stride_(stride) {
    if (stride_ == 0) {
        throw ConfigError("trajectory writer: stride must be at least 1");
    }
    os_ << kTrajectoryCsvHeader << '\n';
}

void TrajectoryCsvWriter::push(const Sample& s) {
    const double psi = unwrapper_.push(oscillator_phase(s.state.z1(), s.state.z2()));
    if (s.step % stride_ != 0) {
        return;
    }
    os_ << format_real(s.t) << ',' << format_real(s.u) << ',' << format_real(s.v_d) << ',' << format_real(s.v_c)
        << ',' << format_real(s.state.z1()) << ',' << format_real(s.state.z2()) << ','
        << format_real(s.omega_inst) << ',' << format_real(psi) << ',' << format_real(psi - omega_i_ * s.t)
        << '\n';
    ++rows_;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, double omega_i) {
    TrajectoryCsvWriter writer(os, omega_i);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        writer.push(Sample{k, traj.t[k], traj.states[k], traj.u[k], traj.v_d[k], traj.v_c[k], traj.omega_inst[k]});
    }
}

std::vector<BodePoint> bode(const FilterSpec& filter, double omega_min, double omega_max, std::size_t points) {
    if (!(omega_min > 0.0) || !(omega_max > omega_min) || !std::isfinite(omega_max)) {
        throw ConfigError("bode: need 0 < omega_min < omega_max");
    }
    if (points < 2) {
        throw ConfigError("bode: need at least 2 points");
    }
    std::vector<BodePoint> out;
    out.reserve(points);
    const double lo = std::log10(omega_min);
    const double step = (std::log10(omega_max) - lo) / static_cast<double>(points - 1);
    PhaseUnwrapper unwrapper;
    for (std::size_t k = 0; k < points; ++k) {
        const double omega = k + 1 == points ? omega_max : std::pow(10.0, lo + step * static_cast<double>(k));
        const auto r = filter_frequency_response(filter, omega);
        out.push_back({omega, r.magnitude, unwrapper.push(r.phase)});
    }
    return out;
}

void write_bode_csv(std::ostream& os, const std::vector<BodePoint>& points) {
    os << kBodeCsvHeader << '\n';
    for (const auto& p : points) {
        os << format_real(p.omega) << ',' << format_real(p.magnitude) << ',' << format_real(p.phase) << '\n';
    }
}

BundleWriter::BundleWriter(fs::path out_dir) : out_dir_(std::move(out_dir)) {
    if (out_dir_.empty()) {
        throw IoError("", "output directory is empty");
    }
    std::error_code ec;
    if (fs::exists(out_dir_, ec) && !fs::is_directory(out_dir_, ec)) {
        throw IoError(out_dir_.string(), "output path exists and is not a directory");
    }
    const fs::path parent = fs::absolute(out_dir_, ec).parent_path();
    fs::create_directories(parent, ec);
    if (ec) {
        throw IoError(parent.string(), "cannot create output parent directory: " + ec.message());
    }
    const std::string name = "." + out_dir_.filename().string() + ".staging-" + std::to_string(::getpid()) + "-" +
                             std::to_string(staging_counter.fetch_add(1));
    staging_ = parent / name;
    fs::create_directory(staging_, ec);
    if (ec) {
        throw IoError(staging_.string(), "cannot create staging directory: " + ec.message());
    }
}

BundleWriter::~BundleWriter() {
    if (!committed_) {
        std::error_code ec;
        fs::remove_all(staging_, ec);
    }
}

void BundleWriter::write(const std::string& relative, const std::function<void(std::ostream&)>& fill) {
    if (committed_) {
        throw IoError(out_dir_.string(), "bundle already committed");
    }
    const fs::path target = staging_ / relative;
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) {
        throw IoError(target.parent_path().string(), "cannot create directory: " + ec.message());
    }
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(target.string(), "cannot open for writing");
    }
    fill(out);
    out.flush();
    if (!out) {
        throw IoError(target.string(), "write failed");
    }
    files_.push_back(relative);
}

void BundleWriter::write_json(const std::string& relative, const nlohmann::json& doc) {
    write(relative, [&doc](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

void BundleWriter::commit() {
    if (committed_) {
        return;
    }
    std::error_code ec;
    if (!fs::exists(out_dir_, ec)) {
        fs::rename(staging_, out_dir_, ec);
        if (ec) {
            throw IoError(out_dir_.string(), "cannot move results into place: " + ec.message());
        }
        committed_ = true;
        return;
    }
    for (const auto& rel : files_) {
        const fs::path dest = out_dir_ / rel;
        fs::create_directories(dest.parent_path(), ec);
        if (ec) {
            throw IoError(dest.parent_path().string(), "cannot create directory: " + ec.message());
        }
        fs::rename(staging_ / rel, dest, ec);
        if (ec) {
            throw IoError(dest.string(), "cannot move result into place: " + ec.message());
        }
    }
    committed_ = true;
    fs::remove_all(staging_, ec);
}

}  // namespace pllsim
