#pragma once

// Open-loop harmonic state-space model and its periodic steady state.

#include "hssmmc/harmonic.hpp"
#include "hssmmc/plant.hpp"

#include <array>
#include <string>
#include <vector>

namespace hssmmc {

// Condition estimates above this are reported as SingularSystem.
inline constexpr double kSingularCondition = 1e12;

std::vector<std::string> plant_state_labels();

struct HssSteadyModel {
    int order = kDefaultOrder;
    MmcParameters params;
    InsertionIndexSet indices;
    HarmonicBlockMatrix A;  // 12 x 12 blocks
    HarmonicBlockMatrix B;  // 12 x 1 blocks, input "V_dc"
};

// Harmonic steady state of the twelve plant states.
struct OperatingPoint {
    int order = kDefaultOrder;
    double omega1 = 0.0;
    std::array<HarmonicVector, 3> i_c;
    std::array<HarmonicVector, 3> v_cu;
    std::array<HarmonicVector, 3> v_cl;
    std::array<HarmonicVector, 3> i_g;
    InsertionIndexSet indices;
    double condition = 0.0;  // condition estimate of the solved system
    double residual = 0.0;   // ||A X + B U|| / ||B U||

    const HarmonicVector& get(StateFamily f, Phase p) const;
    HarmonicVector& get(StateFamily f, Phase p);

    // Stacked lifted vector in block order.
    Eigen::VectorXcd stacked() const;
    static OperatingPoint from_stacked(const Eigen::VectorXcd& x, int order, double omega1);
};

HssSteadyModel assemble_steady(const MmcParameters& params, const InsertionIndexSet& indices,
                               int order);

// Lifted dc input: V_dc in the k = 0 slot.
Eigen::VectorXcd dc_input_vector(double V_dc, int order);

// X_ss = -A^{-1} B U by dense partial-pivot LU.
OperatingPoint solve_steady_state(const HssSteadyModel& model, const Eigen::VectorXcd& U);

// Convenience: open-loop indices at modulation m, assemble and solve.
OperatingPoint solve_open_loop(const MmcParameters& params, double m, int order);

HarmonicVector extract_spectrum(const OperatingPoint& op, std::string_view variable,
                                std::string_view phase);

// Maximum real part of the eigenvalues of a lifted state matrix.
double max_real_eigenvalue(const Eigen::MatrixXcd& A);

}  // namespace hssmmc
