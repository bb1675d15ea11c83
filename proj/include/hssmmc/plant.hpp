#pragma once

// Average-value model of the three-phase modular multilevel converter.
//
// Each phase leg x has four states: circulating current i_cx, upper and lower
// arm sum capacitor voltages v_cux, v_clx, and ac phase current i_gx. The
// twelve-state vector is ordered by family, then phase:
//   [i_ca i_cb i_cc  v_cua v_cub v_cuc  v_cla v_clb v_clc  i_ga i_gb i_gc]

#include "hssmmc/harmonic.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <string_view>

namespace hssmmc {

enum class Phase { a = 0, b = 1, c = 2 };
inline constexpr std::array<Phase, 3> kPhases{Phase::a, Phase::b, Phase::c};

constexpr int index_of(Phase p) { return static_cast<int>(p); }
char phase_letter(Phase p);
Phase parse_phase(std::string_view s);
// Reference angle of each phase: 0, 2pi/3, -2pi/3.
double phase_angle(Phase p);

enum class StateFamily { i_c = 0, v_cu = 1, v_cl = 2, i_g = 3 };
inline constexpr std::array<StateFamily, 4> kFamilies{StateFamily::i_c, StateFamily::v_cu,
                                                      StateFamily::v_cl, StateFamily::i_g};

std::string family_name(StateFamily f);
// Accepts "i_c", "v_cu", "v_cuΣ", "v_cuS", "v_cl", "v_clΣ", "v_clS", "i_g".
StateFamily parse_family(std::string_view s);

constexpr int state_index(StateFamily f, Phase p) { return 3 * static_cast<int>(f) + index_of(p); }
// e.g. "i_ca", "v_cub".
std::string state_label(StateFamily f, Phase p);

inline constexpr int kPlantStates = 12;
using PlantState = Eigen::Matrix<double, kPlantStates, 1>;
using PlantMatrix = Eigen::Matrix<double, kPlantStates, kPlantStates>;

struct MmcParameters {
    double R = 0.0;       // arm resistance [ohm]
    double L = 0.0;       // arm inductance [H]
    double C_sm = 0.0;    // submodule capacitance [F]
    int N = 1;            // submodules per arm
    double V_dc = 0.0;    // dc-bus voltage [V]
    double omega1 = 0.0;  // fundamental angular frequency [rad/s]
    double R_load = 0.0;  // ac load resistance per phase [ohm]
    double L_load = 0.0;  // ac load inductance per phase [H]

    // Series-equivalent arm capacitance.
    double C_arm() const { return C_sm / N; }
    double period() const;
    // Inductance seen by the i_g equation: L + 2 L_load.
    double L_ac() const { return L + 2.0 * L_load; }
    // Load impedance at harmonic k: R_load + j k w1 L_load.
    cplx load_impedance(int k) const { return {R_load, k * omega1 * L_load}; }

    // Throws InvalidParameter naming the offending field.
    void validate() const;
};

// Modulation index giving ac phase amplitude v_peak at no load: m = 2 v_peak / V_dc.
double modulation_for_voltage(double v_peak, double V_dc);

struct InsertionIndexSet {
    std::array<HarmonicVector, 3> upper;
    std::array<HarmonicVector, 3> lower;

    int order() const { return upper[0].order(); }
    const HarmonicVector& n_u(Phase p) const { return upper[index_of(p)]; }
    const HarmonicVector& n_l(Phase p) const { return lower[index_of(p)]; }
};

// n_ux = 1/2 - (m/2) cos(w1 t - phi_x), n_lx = 1/2 + (m/2) cos(w1 t - phi_x).
InsertionIndexSet open_loop_insertion_indices(double m, int order, double omega1);

// Insertion indices evaluated at one instant.
struct InstantIndices {
    std::array<double, 3> upper{0.5, 0.5, 0.5};
    std::array<double, 3> lower{0.5, 0.5, 0.5};
};

InstantIndices open_loop_indices_at(double m, double omega1, double t);
InstantIndices evaluate_indices(const InsertionIndexSet& set, double t);

// Right-hand side of the leg equations with v_g = R_load i_g + L_load di_g/dt
// folded into the ac-current equation.
PlantState plant_rhs(const PlantState& x, const InstantIndices& n, double v_dc,
                     const MmcParameters& p);

// Instantaneous A(t) and B with plant_rhs(x) = A(t) x + B v_dc.
PlantMatrix time_domain_A(const InstantIndices& n, const MmcParameters& p);
PlantState time_domain_B(const MmcParameters& p);

// Capacitor sums at V_dc, currents zero.
PlantState dc_equilibrium_state(const MmcParameters& p);

}  // namespace hssmmc
