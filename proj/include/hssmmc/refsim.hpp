#pragma once

// Nonlinear fixed-step RK4 simulator of the average-value MMC, open loop and
// under PR ac-voltage control, plus spectral extraction of settled runs.

#include "hssmmc/harmonic.hpp"
#include "hssmmc/plant.hpp"
#include "hssmmc/smallsignal.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace hssmmc {

enum class SimChannel { v_dc, ref_a, ref_b, ref_c };

SimChannel parse_channel(std::string_view s);

// Additive change of one input channel, applied from `time` onward.
struct SimEvent {
    double time = 0.0;
    SimChannel channel = SimChannel::v_dc;
    double delta = 0.0;
};

struct SimulationConfig {
    double dt = 1e-5;
    double t_end = 1.0;
    int settle_periods = 40;
    std::vector<SimEvent> events;
    int record_stride = 1;     // keep every n-th grid point
    double record_from = 0.0;  // drop samples before this time

    void validate(double period) const;
};

// Steps per fundamental period on the snapped grid: dt is adjusted so that a
// period spans an integer number of steps.
int steps_per_period(const SimulationConfig& cfg, double period);

inline constexpr int kControllerStates = 6;
inline constexpr int kClosedLoopStates = kPlantStates + kControllerStates;
using ClosedLoopState = Eigen::Matrix<double, kClosedLoopStates, 1>;

struct Trajectory {
    double omega1 = 0.0;
    double dt = 0.0;          // snapped integration step
    int samples_per_period = 0;  // on the recorded grid
    bool closed_loop = false;
    std::vector<double> time;
    // Row per sample: 12 plant states, then 6 controller states (zero open loop),
    // then n_ua n_ub n_uc n_la n_lb n_lc.
    std::vector<std::array<double, kClosedLoopStates + 6>> rows;

    std::size_t size() const { return time.size(); }
    std::vector<double> series(int column) const;
    std::vector<double> series(StateFamily f, Phase p) const;
};

// Column of the controller state `which` (1 or 2) of phase p in Trajectory rows.
constexpr int controller_column(Phase p, int which) { return pr_index(p, which); }

// Closed-loop right-hand side for the 18-state vector (plant then PR states in
// the small-signal block order). V_dc in the control law is params.V_dc.
ClosedLoopState closed_loop_rhs(const ClosedLoopState& x, double t, double v_dc,
                                const std::array<double, 3>& reference,
                                const MmcParameters& params, const ControllerParams& ctrl,
                                InstantIndices* indices = nullptr);

Trajectory simulate_open_loop(const MmcParameters& params, double m, const SimulationConfig& cfg);

// Requires L_load = 0.
Trajectory simulate_closed_loop(const MmcParameters& params, const ControllerParams& ctrl,
                                const std::array<double, 3>& reference,
                                const SimulationConfig& cfg);

// RMS change between the last two recorded periods relative to the last
// period's RMS.
double settling_defect(const Trajectory& traj, int column);

inline constexpr double kSettleTolerance = 1e-3;

// Fourier analysis of the final recorded period. Throws NotSettled when the
// settling defect of the variable is >= kSettleTolerance.
HarmonicVector settled_spectrum(const Trajectory& traj, StateFamily f, Phase p, int order);
HarmonicVector settled_spectrum(const Trajectory& traj, int column, int order);

// sqrt(sum_{k>=2} |X_k|^2) / |X_1| from a one-sided view of a symmetric spectrum.
double total_harmonic_distortion(const HarmonicVector& x);

struct HarmonicComparison {
    int k = 0;
    cplx a, b;
    double abs_error = 0.0;
    double rel_error = 0.0;
    bool dominant = false;
};

struct ComparisonReport {
    int order = 0;
    double floor = 0.0;
    std::vector<HarmonicComparison> rows;  // k = 0..h
    double max_dominant_rel_error = 0.0;
    int worst_dominant_k = -1;
};

inline constexpr double kRelativeFloorFactor = 1e-6;

// Dominant harmonics: the given list when nonempty, else every k whose magnitude
// (max over a, b) is at least 2% of the largest ac magnitude, plus dc when it is
// at least 2% of the overall largest.
ComparisonReport compare_spectra(const HarmonicVector& a, const HarmonicVector& b,
                                 const std::vector<int>& dominant = {},
                                 double floor_factor = kRelativeFloorFactor);

// RMS(a - b) / RMS(b).
double nrmse(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace hssmmc
