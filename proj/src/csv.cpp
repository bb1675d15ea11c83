#include "hssmmc/csv.hpp"

#include "hssmmc/errors.hpp"
#include "hssmmc/smallsignal.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace hssmmc {

std::string format_number(double v) {
    if (v == 0.0) return "0";  // folds -0
    return fmt::format("{:.12g}", v);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
    : out_(path, std::ios::binary | std::ios::trunc), width_(columns.size()) {
    if (!out_) throw InvalidArgument("cannot write '" + path.string() + "'");
    row(columns);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw DimensionMismatch("CSV row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    row(cells);
}

void write_spectrum_csv(const std::filesystem::path& path, const HarmonicVector& x) {
    CsvWriter csv(path, kSpectrumColumns);
    for (int k = -x.order(); k <= x.order(); ++k) {
        const cplx c = x[k];
        const double mag = std::abs(c);
        const double phase = mag > 0.0 ? std::arg(c) * 180.0 / std::numbers::pi : 0.0;
        csv.row({std::to_string(k), format_number(c.real()), format_number(c.imag()),
                 format_number(mag), format_number(phase)});
    }
}

void write_waveform_csv(const std::filesystem::path& path, const std::vector<double>& t,
                        const std::vector<double>& hss, const std::vector<double>& sim) {
    if (t.size() != hss.size() || t.size() != sim.size())
        throw DimensionMismatch("waveform series lengths differ");
    CsvWriter csv(path, kWaveformColumns);
    for (std::size_t i = 0; i < t.size(); ++i)
        csv.row(std::vector<double>{t[i], hss[i], sim[i], std::abs(hss[i] - sim[i])});
}

void write_eigen_csv(const std::filesystem::path& path, const Eigen::VectorXcd& eig) {
    CsvWriter csv(path, kEigenColumns);
    for (Eigen::Index i = 0; i < eig.size(); ++i)
        csv.row({std::to_string(i), format_number(eig(i).real()), format_number(eig(i).imag())});
}

std::vector<std::string> trajectory_columns(bool closed_loop) {
    std::vector<std::string> cols = {"time"};
    for (StateFamily f : kFamilies)
        for (Phase p : kPhases) cols.push_back(state_label(f, p));
    if (closed_loop) {
        const auto labels = smallsignal_state_labels();
        cols.insert(cols.end(), labels.begin() + kPlantStates, labels.end());
    }
    return cols;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    CsvWriter csv(path, trajectory_columns(traj.closed_loop));
    const int states = traj.closed_loop ? kClosedLoopStates : kPlantStates;
    std::vector<double> values(static_cast<std::size_t>(states + 1));
    for (std::size_t i = 0; i < traj.size(); ++i) {
        values[0] = traj.time[i];
        for (int j = 0; j < states; ++j)
            values[static_cast<std::size_t>(j + 1)] = traj.rows[i][static_cast<std::size_t>(j)];
        csv.row(values);
    }
}

}  // namespace hssmmc
