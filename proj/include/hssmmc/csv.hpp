#pragma once

// CSV emission with fixed column sets. All files are UTF-8 with LF line
// endings and '.' as decimal separator; numbers use 12 significant digits.

#include "hssmmc/harmonic.hpp"
#include "hssmmc/refsim.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace hssmmc {

inline const std::vector<std::string> kSpectrumColumns = {"k", "real", "imag", "magnitude",
                                                          "phase_deg"};
inline const std::vector<std::string> kWaveformColumns = {"t", "value_hss", "value_sim",
                                                          "abs_error"};
inline const std::vector<std::string> kEigenColumns = {"index", "real", "imag"};

std::string format_number(double v);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);

    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& values);

private:
    std::ofstream out_;
    std::size_t width_;
};

// One row per k = -h..h.
void write_spectrum_csv(const std::filesystem::path& path, const HarmonicVector& x);

void write_waveform_csv(const std::filesystem::path& path, const std::vector<double>& t,
                        const std::vector<double>& hss, const std::vector<double>& sim);

void write_eigen_csv(const std::filesystem::path& path, const Eigen::VectorXcd& eig);

// time, the twelve plant states, then x_pra1 x_pra2 .. x_prc2 for closed-loop runs.
std::vector<std::string> trajectory_columns(bool closed_loop);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

}  // namespace hssmmc
