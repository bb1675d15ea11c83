#include "hssmmc/steady.hpp"

#include "hssmmc/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace hssmmc {

std::vector<std::string> plant_state_labels() {
    std::vector<std::string> labels;
    for (StateFamily f : kFamilies) {
        for (Phase p : kPhases) labels.push_back(state_label(f, p));
    }
    return labels;
}

const HarmonicVector& OperatingPoint::get(StateFamily f, Phase p) const {
    switch (f) {
        case StateFamily::i_c: return i_c[index_of(p)];
        case StateFamily::v_cu: return v_cu[index_of(p)];
        case StateFamily::v_cl: return v_cl[index_of(p)];
        case StateFamily::i_g: break;
    }
    return i_g[index_of(p)];
}

HarmonicVector& OperatingPoint::get(StateFamily f, Phase p) {
    return const_cast<HarmonicVector&>(std::as_const(*this).get(f, p));
}

Eigen::VectorXcd OperatingPoint::stacked() const {
    const int n = 2 * order + 1;
    Eigen::VectorXcd x(kPlantStates * n);
    for (StateFamily f : kFamilies) {
        for (Phase p : kPhases) x.segment(state_index(f, p) * n, n) = get(f, p).coeffs();
    }
    return x;
}

OperatingPoint OperatingPoint::from_stacked(const Eigen::VectorXcd& x, int order, double omega1) {
    const int n = 2 * order + 1;
    if (x.size() < kPlantStates * n) throw DimensionMismatch("stacked state vector too short");
    OperatingPoint op;
    op.order = order;
    op.omega1 = omega1;
    for (StateFamily f : kFamilies) {
        for (Phase p : kPhases) {
            op.get(f, p) = HarmonicVector(order, omega1, x.segment(state_index(f, p) * n, n));
        }
    }
    return op;
}

HssSteadyModel assemble_steady(const MmcParameters& params, const InsertionIndexSet& indices,
                               int order) {
    params.validate();
    for (Phase p : kPhases) {
        const auto& nu = indices.n_u(p);
        const auto& nl = indices.n_l(p);
        if (nu.order() != order || nl.order() != order) {
            throw DimensionMismatch("insertion indices built at h=" + std::to_string(nu.order()) +
                                    ", model requested at h=" + std::to_string(order));
        }
        if (nu.base_frequency() != params.omega1 || nl.base_frequency() != params.omega1) {
            throw DimensionMismatch("insertion indices built at a different base frequency");
        }
    }

    const int n = 2 * order + 1;
    const double L = params.L;
    const double C = params.C_arm();
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
    const Eigen::MatrixXcd Q = q_matrix(order, params.omega1).dense();

    // Per-harmonic ac-side impedance on the i_g diagonal.
    Eigen::MatrixXcd ig_diag = -Q;
    for (int k = -order; k <= order; ++k) {
        ig_diag(k + order, k + order) -= (params.R + 2.0 * params.load_impedance(k)) / L;
    }

    HssSteadyModel model{order, params, indices,
                         HarmonicBlockMatrix(plant_state_labels(), plant_state_labels(), order),
                         HarmonicBlockMatrix(plant_state_labels(), {"V_dc"}, order)};
    auto& A = model.A;
    for (Phase p : kPhases) {
        const Eigen::MatrixXcd Nu = toeplitz(indices.n_u(p)).matrix;
        const Eigen::MatrixXcd Nl = toeplitz(indices.n_l(p)).matrix;
        const int ic = state_index(StateFamily::i_c, p);
        const int vu = state_index(StateFamily::v_cu, p);
        const int vl = state_index(StateFamily::v_cl, p);
        const int ig = state_index(StateFamily::i_g, p);

        A.set_block(ic, ic, -(params.R / L) * I - Q);
        A.set_block(ic, vu, -Nu / (2.0 * L));
        A.set_block(ic, vl, -Nl / (2.0 * L));

        A.set_block(vu, ic, Nu / C);
        A.set_block(vu, vu, -Q);
        A.set_block(vu, ig, Nu / (2.0 * C));

        A.set_block(vl, ic, Nl / C);
        A.set_block(vl, vl, -Q);
        A.set_block(vl, ig, -Nl / (2.0 * C));

        A.set_block(ig, vu, -Nu / L);
        A.set_block(ig, vl, Nl / L);
        A.set_block(ig, ig, ig_diag);

        model.B.set_block(ic, 0, I / (2.0 * L));
    }
    return model;
}

Eigen::VectorXcd dc_input_vector(double V_dc, int order) {
    if (order < 0) throw InvalidArgument("harmonic order must be >= 0");
    Eigen::VectorXcd U = Eigen::VectorXcd::Zero(2 * order + 1);
    U(order) = V_dc;
    return U;
}

OperatingPoint solve_steady_state(const HssSteadyModel& model, const Eigen::VectorXcd& U) {
    const int n = 2 * model.order + 1;
    if (U.size() != n) throw DimensionMismatch("input vector length must be 2h+1");
    const Eigen::MatrixXcd& A = model.A.dense();
    const Eigen::VectorXcd BU = model.B.dense() * U;

    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    // The rcond estimator can miss exact singularity, so the pivot spread is
    // checked as well.
    const Eigen::ArrayXd pivots = lu.matrixLU().diagonal().cwiseAbs().array();
    const double spread = pivots.maxCoeff() > 0.0 ? pivots.minCoeff() / pivots.maxCoeff() : 0.0;
    const double rcond = std::min(lu.rcond(), spread);
    const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(condition <= kSingularCondition)) {
        throw SingularSystem("steady-state HSS matrix is numerically singular (condition estimate " +
                                 std::to_string(condition) + ")",
                             condition);
    }
    const Eigen::VectorXcd X = -lu.solve(BU);

    OperatingPoint op = OperatingPoint::from_stacked(X, model.order, model.params.omega1);
    op.indices = model.indices;
    op.condition = condition;
    const double scale = BU.norm();
    op.residual = (A * X + BU).norm() / (scale > 0.0 ? scale : 1.0);
    return op;
}

OperatingPoint solve_open_loop(const MmcParameters& params, double m, int order) {
    const auto indices = open_loop_insertion_indices(m, order, params.omega1);
    const auto model = assemble_steady(params, indices, order);
    return solve_steady_state(model, dc_input_vector(params.V_dc, order));
}

HarmonicVector extract_spectrum(const OperatingPoint& op, std::string_view variable,
                                std::string_view phase) {
    return op.get(parse_family(variable), parse_phase(phase));
}

double max_real_eigenvalue(const Eigen::MatrixXcd& A) {
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, false);
    return es.eigenvalues().real().maxCoeff();
}

}  // namespace hssmmc
