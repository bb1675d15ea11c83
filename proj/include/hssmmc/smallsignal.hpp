#pragma once

// Closed-loop small-signal harmonic state-space model under proportional-
// resonant ac-voltage control.
//
// Control law per phase (the one linearized here and integrated by the
// reference simulator):
//   e_x     = v_gx* - v_gx,          v_gx = R_load i_gx
//   v_sx*   = K_p e_x + x_PRx1 + k_f v_gx
//   n_ux    = 1/2 - v_sx* / V_dc,    n_lx = 1/2 + v_sx* / V_dc
//   dx_PRx1 = -w1^2 x_PRx2 + K_r e_x,  dx_PRx2 = x_PRx1
// so x_PRx1 / e_x = K_r s / (s^2 + w1^2).
//
// The lifted state is the twelve plant blocks followed by the six PR blocks
// [x_pra1 x_pra2 x_prb1 x_prb2 x_prc1 x_prc2]; the lifted input is
// [dV_dc dV_ga* dV_gb* dV_gc*].

#include "hssmmc/harmonic.hpp"
#include "hssmmc/plant.hpp"
#include "hssmmc/steady.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace hssmmc {

struct ControllerParams {
    double K_p = 0.0;     // proportional gain
    double K_r = 0.0;     // resonant gain [1/s]
    double k_f = 0.0;     // ac-voltage feedforward gain
    double omega1 = 0.0;  // resonant frequency [rad/s]

    void validate() const;
};

// K_p + K_r s / (s^2 + w1^2).
cplx pr_transfer(const ControllerParams& ctrl, cplx s);

inline constexpr int kSmallSignalStates = 18;
inline constexpr int kSmallSignalInputs = 4;

// Block index of PR state `which` (1 or 2) of phase p.
constexpr int pr_index(Phase p, int which) { return kPlantStates + 2 * index_of(p) + (which - 1); }
constexpr int ref_input_index(Phase p) { return 1 + index_of(p); }

std::vector<std::string> smallsignal_state_labels();
std::vector<std::string> smallsignal_input_labels();

// Periodic coefficient functions of the linearized model, one set per phase.
struct PhaseF {
    HarmonicVector c1, c2, c3;
    HarmonicVector vu1, vu2, vu3;
    HarmonicVector vl1, vl2, vl3;
    HarmonicVector i1, i2, i3;
};

struct FCoefficientSet {
    std::array<PhaseF, 3> phase;
    const PhaseF& operator[](Phase p) const { return phase[index_of(p)]; }
};

// The load-coupling vectors F_*1 carry Z_L at its resistive value; a nonzero
// L_load is applied per harmonic during assembly.
FCoefficientSet compute_f_coefficients(const OperatingPoint& op, const MmcParameters& params,
                                       const ControllerParams& ctrl);

struct HssSmallSignalModel {
    int order = kDefaultOrder;
    double omega1 = 0.0;
    HarmonicBlockMatrix A;  // 18 x 18 blocks
    HarmonicBlockMatrix B;  // 18 x 4 blocks
};

HssSmallSignalModel assemble_smallsignal(const OperatingPoint& op, const MmcParameters& params,
                                         const ControllerParams& ctrl, int order);

// Eigenvalues of the lifted A, sorted by real part, descending.
Eigen::VectorXcd eigenvalues(const HssSmallSignalModel& model);

// Lifted reference perturbation for a fundamental-frequency change of
// amplitude `amplitude` on phase p aligned with that phase's reference angle:
// amplitude/2 e^{-+j phi} in the k = +-1 slots of dV_gp*.
Eigen::VectorXcd reference_step_input(int order, Phase p, double amplitude);

// dX = -A^{-1} B dU.
Eigen::VectorXcd settled_response(const HssSmallSignalModel& model, const Eigen::VectorXcd& dU);

// Closed-loop periodic steady state: plant spectra, PR-state spectra and the
// insertion indices produced by the control law.
struct ClosedLoopOperatingPoint {
    OperatingPoint plant;
    std::array<HarmonicVector, 3> pr1;
    std::array<HarmonicVector, 3> pr2;
    std::array<double, 3> reference{};  // v_gx* peak amplitudes
    int iterations = 0;
    double residual = 0.0;  // max-norm of the harmonic-balance residual after the last step

    Eigen::VectorXcd stacked() const;
};

// Newton iteration on the truncated harmonic-balance equations of the
// closed-loop system; the Jacobian is the small-signal lifted A at the
// current iterate. Requires L_load = 0.
ClosedLoopOperatingPoint solve_closed_loop_operating_point(const MmcParameters& params,
                                                           const ControllerParams& ctrl,
                                                           const std::array<double, 3>& reference,
                                                           int order, double tolerance = 1e-12,
                                                           int max_iterations = 50);

// Harmonic-balance residual dX/dt of the closed-loop system at a stacked state.
Eigen::VectorXcd closed_loop_hb_residual(const Eigen::VectorXcd& x, const MmcParameters& params,
                                         const ControllerParams& ctrl,
                                         const std::array<double, 3>& reference, int order);

using ClosedLoopMatrix = Eigen::Matrix<double, kSmallSignalStates, kSmallSignalStates>;
using ClosedLoopInputMatrix = Eigen::Matrix<double, kSmallSignalStates, kSmallSignalInputs>;

// Time-domain linearization A(t), B(t) of the closed loop about the operating
// trajectory, built by synthesizing the F coefficients at t. Requires L_load = 0.
ClosedLoopMatrix time_domain_closed_loop_A(const FCoefficientSet& f, const OperatingPoint& op,
                                           const MmcParameters& params,
                                           const ControllerParams& ctrl, double t);
ClosedLoopInputMatrix time_domain_closed_loop_B(const FCoefficientSet& f,
                                                const MmcParameters& params,
                                                const ControllerParams& ctrl, double t);

// Piecewise-constant lifted input: value of the last breakpoint at or before t,
// zero before the first one.
class PiecewiseInput {
public:
    PiecewiseInput(int dimension) : dim_(dimension) {}

    void add(double t, Eigen::VectorXcd value);
    Eigen::VectorXcd at(double t) const;
    int dimension() const { return dim_; }

private:
    int dim_;
    std::vector<std::pair<double, Eigen::VectorXcd>> points_;
};

struct EnvelopeTrajectory {
    int order = kDefaultOrder;
    double omega1 = 0.0;
    std::vector<double> time;
    std::vector<Eigen::VectorXcd> state;  // lifted dX at each time

    HarmonicVector envelope(std::size_t sample, int block) const;
};

// Explicit RK4 integration of dX/dt = A X + B U(t) from X(t_start) = 0. The
// input is held at its mid-step value within each step. Requires
// dt * max|eig(A)| < 0.1, else StepTooLarge. Every `stride`-th step is stored.
EnvelopeTrajectory envelope_response(const HssSmallSignalModel& model, const PiecewiseInput& du,
                                     double t_start, double t_end, double dt, int stride = 1);

// Dx(t_i) = sum_k dX_k(t_i) e^{j k w1 t_i} for one lifted state block.
std::vector<double> reconstruct_perturbation(const EnvelopeTrajectory& env, int block);
std::vector<double> reconstruct_perturbation(const EnvelopeTrajectory& env, StateFamily f, Phase p);

}  // namespace hssmmc
