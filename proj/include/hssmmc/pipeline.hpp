#pragma once

// Scenario orchestration: the verification pipelines that pit the harmonic
// models against the nonlinear simulator, parameter sweeps, and the file
// outputs written by the command-line tool.

#include "hssmmc/config.hpp"
#include "hssmmc/refsim.hpp"
#include "hssmmc/smallsignal.hpp"
#include "hssmmc/steady.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hssmmc {

// Pass thresholds of the verification scenarios.
inline constexpr double kSteadyDominantTolerance = 0.02;
inline constexpr double kSteadyWaveformTolerance = 0.03;
inline constexpr double kCirculatingDominanceRatio = 10.0;
inline constexpr double kCapacitorHighOrderRatio = 0.2;
inline constexpr double kAcCurrentThdLimit = 0.01;
inline constexpr double kPerturbationTolerance = 0.10;

// Harmonics compared per state family: i_c {0, 2}, capacitor sums {0, 1, 2, 3},
// i_g {1}, clipped to the truncation order.
std::vector<int> dominant_harmonics(StateFamily f, int order);

struct StateComparison {
    StateFamily family = StateFamily::i_c;
    Phase phase = Phase::a;
    HarmonicVector hss;        // at the model order
    HarmonicVector sim;        // at the model order
    HarmonicVector sim_wide;   // at the analysis order
    ComparisonReport report;
    std::vector<double> time, hss_wave, sim_wave;  // final simulated period
    double waveform_nrmse = 0.0;
};

struct SteadyVerification {
    OperatingPoint hss;
    double max_real_eig = 0.0;
    std::vector<StateComparison> states;  // plant block order
    double max_dominant_rel_error = 0.0;
    double max_waveform_nrmse = 0.0;
    double circulating_ratio = 0.0;    // min over phases of min(|dc|, |2nd|) / max odd
    double capacitor_high_ratio = 0.0; // max over arms of max_{k>=4} |X_k| / |X_3|
    bool capacitor_low_nonzero = false;
    double ac_current_thd = 0.0;       // max over phases

    bool pass_dominant() const { return max_dominant_rel_error <= kSteadyDominantTolerance; }
    bool pass_waveform() const { return max_waveform_nrmse <= kSteadyWaveformTolerance; }
    bool pass_circulating() const { return circulating_ratio >= kCirculatingDominanceRatio; }
    bool pass_capacitor() const {
        return capacitor_low_nonzero && capacitor_high_ratio < kCapacitorHighOrderRatio;
    }
    bool pass_thd() const { return ac_current_thd < kAcCurrentThdLimit; }
    bool passed() const {
        return pass_dominant() && pass_waveform() && pass_circulating() && pass_capacitor() &&
               pass_thd();
    }
};

// Needs the configured run to settle; propagates NotSettled otherwise.
SteadyVerification verify_steady(const RunConfig& cfg);
std::string steady_report(const RunConfig& cfg, const SteadyVerification& v);

struct PerturbationComparison {
    std::vector<double> time, hss, sim;  // over [t_step, t_step + window]
    double nrmse = 0.0;
    double peak_error = 0.0;
    double pre_step_peak = 0.0;   // stepped run, last period before the step
    double post_step_peak = 0.0;  // stepped run, last period of the window
    bool grew() const { return post_step_peak > pre_step_peak; }
};

struct SmallSigVerification {
    ClosedLoopOperatingPoint op;
    double max_real_eig = 0.0;
    double step_time = 0.0;  // snapped to the simulation grid
    PerturbationComparison i_c, i_g;

    bool pass_nrmse() const {
        return i_c.nrmse <= kPerturbationTolerance && i_g.nrmse <= kPerturbationTolerance;
    }
    bool pass_growth() const { return i_c.grew() && i_g.grew(); }
    bool passed() const { return pass_nrmse() && pass_growth(); }
};

// Closed-loop operating point and model at cfg.h, envelope response to the
// configured reference step, and the stepped-minus-baseline nonlinear runs.
SmallSigVerification verify_smallsig(const RunConfig& cfg);
std::string smallsig_report(const RunConfig& cfg, const SmallSigVerification& v);

inline const std::vector<std::string> kSweepColumns = {
    "value",    "status",   "ic_a_h0",  "ic_a_h2",      "vcu_a_h0", "vcu_a_h1",
    "vcu_a_h2", "vcu_a_h3", "ig_a_h1", "max_eig_real", "error"};

struct SweepRow {
    double value = 0.0;
    bool ok = false;
    // |X_k| of the phase-a components named in kSweepColumns; empty when k > h.
    std::array<std::optional<double>, 7> components;
    double max_eig_real = 0.0;
    std::string error;
};

// One row per value, in the given order. Failures are recorded in the row.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::string& key,
                                const std::vector<double>& values);

// Relative change of each component between consecutive ok rows,
// |c_{i+1} - c_i| / |c_{i+1}|; rows missing a component are skipped.
std::vector<std::array<std::optional<double>, 7>> sweep_deltas(const std::vector<SweepRow>& rows);

// True when every component's deltas are nonincreasing along the sweep.
bool deltas_monotone(const std::vector<std::array<std::optional<double>, 7>>& deltas);

struct RunOptions {
    std::filesystem::path out_dir;
    bool timestamp = true;
};

// Runs cfg.scenario, writing its files into opts.out_dir. Returns 0 when all
// checked thresholds pass and 1 otherwise. Configuration and numerical errors
// propagate as exceptions.
int run_scenario(const RunConfig& cfg, const RunOptions& opts);

// Output directory: explicit flag, else HSSMMC_OUT, else the config's
// output_dir, else "hssmmc-out".
std::filesystem::path resolve_output_dir(const std::optional<std::string>& flag,
                                         const RunConfig& cfg);

}  // namespace hssmmc
