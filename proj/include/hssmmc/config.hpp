#pragma once

// Run configuration: INI-style text with [section] headers and key = value
// lines. '#' and ';' start comments. Unknown sections or keys, duplicates and
// out-of-range values are rejected with the offending line and key.
//
//   [plant]       R L C_sm N V_dc omega1 R_load (required), L_load
//   [controller]  K_p K_r k_f v_ref
//   [model]       m (required), h
//   [simulation]  dt settle_periods record_periods t_end events
//   [smallsig]    step_time step_amplitude step_phase window_periods compare_stride
//   [verify]      analysis_order
//   [sweep]       scenario key values
//   [run]         scenario output_dir
//
// `events` is a comma-separated list of time:channel:delta triples, channel in
// {v_dc, ref_a, ref_b, ref_c}. `values` is a comma-separated list of numbers.

#include "hssmmc/plant.hpp"
#include "hssmmc/refsim.hpp"
#include "hssmmc/smallsignal.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hssmmc {

enum class Scenario {
    steady,
    smallsig,
    simulate_open,
    simulate_closed,
    verify_steady,
    verify_smallsig,
    sweep
};

Scenario parse_scenario(std::string_view s);
std::string scenario_name(Scenario s);

struct StepConfig {
    double time = 1.5;
    double amplitude = 10e3;
    Phase phase = Phase::a;
    int window_periods = 10;
    int compare_stride = 10;  // envelope/simulator comparison every n-th grid point
};

struct SweepConfig {
    Scenario scenario = Scenario::steady;  // steady or smallsig
    std::string key = "model.h";
    std::vector<double> values;
};

struct RunConfig {
    MmcParameters params;
    ControllerParams ctrl;
    std::optional<double> v_ref;  // closed-loop reference peak; defaults to m V_dc / 2
    double m = 0.0;
    int h = kDefaultOrder;
    SimulationConfig sim;
    int record_periods = 2;
    std::optional<double> t_end;  // defaults to (settle_periods + record_periods) T
    StepConfig step;
    int analysis_order = 20;  // harmonics kept when analyzing simulator runs
    SweepConfig sweep;
    Scenario scenario = Scenario::steady;
    std::string output_dir;

    double reference_amplitude() const;
    double simulation_end() const;
    // Full validation of every field through its owning type.
    void validate() const;
};

RunConfig parse_config(std::string_view text);

// A bundled preset name or a path to a config file.
RunConfig load_config(const std::string& name_or_path);

std::optional<std::string_view> bundled_preset(std::string_view name);
std::vector<std::string> bundled_preset_names();

// Numeric keys accepted by set_numeric (and therefore by sweeps), "section.key".
std::vector<std::string> numeric_keys();

// Assigns a numeric key and revalidates. Throws SchemaViolation for unknown
// keys and invalid values.
void set_numeric(RunConfig& cfg, const std::string& key, double value);

}  // namespace hssmmc
