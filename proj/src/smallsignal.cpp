#include "hssmmc/smallsignal.hpp"

#include "hssmmc/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace hssmmc {

namespace {

Eigen::MatrixXcd gamma(const HarmonicVector& v) { return toeplitz(v).matrix; }

void require_resistive_load(const MmcParameters& params, const char* what) {
    if (params.L_load != 0.0) {
        throw InvalidParameter(std::string(what) + " requires a resistive load (L_load = 0)");
    }
}

HarmonicVector reference_vector(int order, double omega1, Phase p, double amplitude) {
    return HarmonicVector::cosine(order, omega1, 1, amplitude, phase_angle(p));
}

// Insertion indices produced by the control law for lifted plant/PR vectors.
std::pair<HarmonicVector, HarmonicVector> controlled_indices(const HarmonicVector& i_g,
                                                             const HarmonicVector& x1,
                                                             const HarmonicVector& v_ref,
                                                             const MmcParameters& params,
                                                             const ControllerParams& ctrl) {
    const HarmonicVector v_s = ctrl.K_p * v_ref + (ctrl.k_f - ctrl.K_p) * params.R_load * i_g + x1;
    const HarmonicVector half = HarmonicVector::constant(i_g.order(), params.omega1, 0.5);
    return {half - (1.0 / params.V_dc) * v_s, half + (1.0 / params.V_dc) * v_s};
}

}  // namespace

void ControllerParams::validate() const {
    if (!(std::isfinite(K_p) && K_p >= 0.0)) throw InvalidParameter("K_p must be >= 0");
    if (!(std::isfinite(K_r) && K_r >= 0.0)) throw InvalidParameter("K_r must be >= 0");
    if (!std::isfinite(k_f)) throw InvalidParameter("k_f must be finite");
    if (!(std::isfinite(omega1) && omega1 > 0.0)) throw InvalidParameter("omega1 must be > 0");
}

cplx pr_transfer(const ControllerParams& ctrl, cplx s) {
    return ctrl.K_p + ctrl.K_r * s / (s * s + ctrl.omega1 * ctrl.omega1);
}

std::vector<std::string> smallsignal_state_labels() {
    auto labels = plant_state_labels();
    for (Phase p : kPhases) {
        labels.push_back(std::string("x_pr") + phase_letter(p) + "1");
        labels.push_back(std::string("x_pr") + phase_letter(p) + "2");
    }
    return labels;
}

std::vector<std::string> smallsignal_input_labels() {
    return {"dV_dc", "dV_ga*", "dV_gb*", "dV_gc*"};
}

FCoefficientSet compute_f_coefficients(const OperatingPoint& op, const MmcParameters& params,
                                       const ControllerParams& ctrl) {
    const double L = params.L;
    const double C = params.C_arm();
    const double V = params.V_dc;
    const double dk = ctrl.k_f - ctrl.K_p;
    const double RL = params.R_load;
    const int h = op.order;

    FCoefficientSet f;
    for (Phase p : kPhases) {
        const auto& ic = op.i_c[index_of(p)];
        const auto& vu = op.v_cu[index_of(p)];
        const auto& vl = op.v_cl[index_of(p)];
        const auto& ig = op.i_g[index_of(p)];
        const HarmonicVector v_diff = vu - vl;
        const HarmonicVector v_sum = vu + vl;
        const HarmonicVector i_upper = ic + 0.5 * ig;
        const HarmonicVector i_lower = ic - 0.5 * ig;

        PhaseF& F = f.phase[index_of(p)];
        F.c2 = (1.0 / (2.0 * L * V)) * v_diff;
        F.c1 = (dk * RL) * F.c2;
        F.c3 = ctrl.K_p * F.c2;

        F.vu2 = (-1.0 / (C * V)) * i_upper;
        F.vu1 = (1.0 / (2.0 * C)) * op.indices.n_u(p) + (dk * RL) * F.vu2;
        F.vu3 = ctrl.K_p * F.vu2;

        F.vl2 = (1.0 / (C * V)) * i_lower;
        F.vl1 = (-1.0 / (2.0 * C)) * op.indices.n_l(p) + (dk * RL) * F.vl2;
        F.vl3 = ctrl.K_p * F.vl2;

        F.i2 = (1.0 / (L * V)) * v_sum;
        F.i1 = HarmonicVector::constant(h, params.omega1, -(params.R + 2.0 * RL) / L) +
               (dk * RL) * F.i2;
        F.i3 = ctrl.K_p * F.i2;
    }
    return f;
}

HssSmallSignalModel assemble_smallsignal(const OperatingPoint& op, const MmcParameters& params,
                                         const ControllerParams& ctrl, int order) {
    params.validate();
    ctrl.validate();
    if (op.order != order) {
        throw DimensionMismatch("operating point has h=" + std::to_string(op.order) +
                                ", model requested at h=" + std::to_string(order));
    }
    for (Phase p : kPhases) {
        if (op.indices.n_u(p).order() != order || op.indices.n_l(p).order() != order)
            throw DimensionMismatch("operating-point insertion indices have the wrong order");
    }

    const int n = 2 * order + 1;
    const double L = params.L;
    const double C = params.C_arm();
    const double dk = ctrl.k_f - ctrl.K_p;
    const double w = params.omega1;
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
    const Eigen::MatrixXcd Q = q_matrix(order, w).dense();

    // Inductive part of Z_L per harmonic; zero for a resistive load.
    Eigen::MatrixXcd z_reactive = Eigen::MatrixXcd::Zero(n, n);
    Eigen::MatrixXcd z_load = Eigen::MatrixXcd::Zero(n, n);
    for (int k = -order; k <= order; ++k) {
        z_reactive(k + order, k + order) = cplx(0.0, k * w * params.L_load);
        z_load(k + order, k + order) = params.load_impedance(k);
    }

    const FCoefficientSet f = compute_f_coefficients(op, params, ctrl);

    HssSmallSignalModel model{
        order, w,
        HarmonicBlockMatrix(smallsignal_state_labels(), smallsignal_state_labels(), order),
        HarmonicBlockMatrix(smallsignal_state_labels(), smallsignal_input_labels(), order)};
    auto& A = model.A;
    auto& B = model.B;
    for (Phase p : kPhases) {
        const PhaseF& F = f[p];
        const Eigen::MatrixXcd Nu = gamma(op.indices.n_u(p));
        const Eigen::MatrixXcd Nl = gamma(op.indices.n_l(p));
        const int ic = state_index(StateFamily::i_c, p);
        const int vu = state_index(StateFamily::v_cu, p);
        const int vl = state_index(StateFamily::v_cl, p);
        const int ig = state_index(StateFamily::i_g, p);
        const int x1 = pr_index(p, 1);
        const int x2 = pr_index(p, 2);
        const int ref = ref_input_index(p);

        A.set_block(ic, ic, -(params.R / L) * I - Q);
        A.set_block(ic, vu, -Nu / (2.0 * L));
        A.set_block(ic, vl, -Nl / (2.0 * L));
        A.set_block(ic, ig, gamma(F.c1) + dk * gamma(F.c2) * z_reactive);
        A.set_block(ic, x1, gamma(F.c2));

        A.set_block(vu, ic, Nu / C);
        A.set_block(vu, vu, -Q);
        A.set_block(vu, ig, gamma(F.vu1) + dk * gamma(F.vu2) * z_reactive);
        A.set_block(vu, x1, gamma(F.vu2));

        A.set_block(vl, ic, Nl / C);
        A.set_block(vl, vl, -Q);
        A.set_block(vl, ig, gamma(F.vl1) + dk * gamma(F.vl2) * z_reactive);
        A.set_block(vl, x1, gamma(F.vl2));

        A.set_block(ig, vu, -Nu / L);
        A.set_block(ig, vl, Nl / L);
        A.set_block(ig, ig,
                    gamma(F.i1) + dk * gamma(F.i2) * z_reactive - (2.0 / L) * z_reactive - Q);
        A.set_block(ig, x1, gamma(F.i2));

        A.set_block(x1, ig, -ctrl.K_r * z_load);
        A.set_block(x1, x1, -Q);
        A.set_block(x1, x2, -(w * w) * I);
        A.set_block(x2, x1, I);
        A.set_block(x2, x2, -Q);

        B.set_block(ic, 0, I / (2.0 * L));
        B.set_block(ic, ref, gamma(F.c3));
        B.set_block(vu, ref, gamma(F.vu3));
        B.set_block(vl, ref, gamma(F.vl3));
        B.set_block(ig, ref, gamma(F.i3));
        B.set_block(x1, ref, ctrl.K_r * I);
    }
    return model;
}

Eigen::VectorXcd eigenvalues(const HssSmallSignalModel& model) {
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(model.A.dense(), false);
    Eigen::VectorXcd ev = es.eigenvalues();
    std::vector<cplx> sorted(ev.data(), ev.data() + ev.size());
    std::stable_sort(sorted.begin(), sorted.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = sorted[static_cast<std::size_t>(i)];
    return ev;
}

Eigen::VectorXcd reference_step_input(int order, Phase p, double amplitude) {
    const int n = 2 * order + 1;
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(kSmallSignalInputs * n);
    // Nominal omega1 is irrelevant to the coefficient values.
    const auto v = reference_vector(order, 1.0, p, amplitude);
    u.segment(ref_input_index(p) * n, n) = v.coeffs();
    return u;
}

Eigen::VectorXcd settled_response(const HssSmallSignalModel& model, const Eigen::VectorXcd& dU) {
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(model.A.dense());
    return -lu.solve(model.B.dense() * dU);
}

Eigen::VectorXcd ClosedLoopOperatingPoint::stacked() const {
    const int n = 2 * plant.order + 1;
    Eigen::VectorXcd x(kSmallSignalStates * n);
    x.head(kPlantStates * n) = plant.stacked();
    for (Phase p : kPhases) {
        x.segment(pr_index(p, 1) * n, n) = pr1[index_of(p)].coeffs();
        x.segment(pr_index(p, 2) * n, n) = pr2[index_of(p)].coeffs();
    }
    return x;
}

Eigen::VectorXcd closed_loop_hb_residual(const Eigen::VectorXcd& x, const MmcParameters& params,
                                         const ControllerParams& ctrl,
                                         const std::array<double, 3>& reference, int order) {
    const int n = 2 * order + 1;
    if (x.size() != kSmallSignalStates * n) throw DimensionMismatch("closed-loop state size");
    const double w = params.omega1;
    const double L = params.L;
    const double C = params.C_arm();
    const auto qm = q_matrix(order, w);
    auto block = [&](int b) { return HarmonicVector(order, w, x.segment(b * n, n)); };

    Eigen::VectorXcd r(x.size());
    for (Phase p : kPhases) {
        const auto ic = block(state_index(StateFamily::i_c, p));
        const auto vu = block(state_index(StateFamily::v_cu, p));
        const auto vl = block(state_index(StateFamily::v_cl, p));
        const auto ig = block(state_index(StateFamily::i_g, p));
        const auto x1 = block(pr_index(p, 1));
        const auto x2 = block(pr_index(p, 2));
        const auto v_ref = reference_vector(order, w, p, reference[index_of(p)]);
        const auto [nu, nl] = controlled_indices(ig, x1, v_ref, params, ctrl);
        const auto nu_vu = convolve(nu, vu);
        const auto nl_vl = convolve(nl, vl);
        const auto dc = HarmonicVector::constant(order, w, params.V_dc / (2.0 * L));

        const auto d_ic = (-params.R / L) * ic - qm.apply(ic) - (1.0 / (2.0 * L)) * nu_vu -
                          (1.0 / (2.0 * L)) * nl_vl + dc;
        const auto d_vu = -qm.apply(vu) + (1.0 / C) * convolve(nu, ic + 0.5 * ig);
        const auto d_vl = -qm.apply(vl) + (1.0 / C) * convolve(nl, ic - 0.5 * ig);
        const auto d_ig = -qm.apply(ig) + (1.0 / L) * (nl_vl - nu_vu) -
                          ((params.R + 2.0 * params.R_load) / L) * ig;
        const auto d_x1 = -qm.apply(x1) - (w * w) * x2 +
                          ctrl.K_r * (v_ref - params.R_load * ig);
        const auto d_x2 = -qm.apply(x2) + x1;

        r.segment(state_index(StateFamily::i_c, p) * n, n) = d_ic.coeffs();
        r.segment(state_index(StateFamily::v_cu, p) * n, n) = d_vu.coeffs();
        r.segment(state_index(StateFamily::v_cl, p) * n, n) = d_vl.coeffs();
        r.segment(state_index(StateFamily::i_g, p) * n, n) = d_ig.coeffs();
        r.segment(pr_index(p, 1) * n, n) = d_x1.coeffs();
        r.segment(pr_index(p, 2) * n, n) = d_x2.coeffs();
    }
    return r;
}

namespace {

ClosedLoopOperatingPoint unpack_closed_loop(const Eigen::VectorXcd& x, const MmcParameters& params,
                                            const ControllerParams& ctrl,
                                            const std::array<double, 3>& reference, int order) {
    const int n = 2 * order + 1;
    const double w = params.omega1;
    ClosedLoopOperatingPoint cl;
    cl.reference = reference;
    cl.plant = OperatingPoint::from_stacked(x.head(kPlantStates * n), order, w);
    for (Phase p : kPhases) {
        cl.pr1[index_of(p)] = HarmonicVector(order, w, x.segment(pr_index(p, 1) * n, n));
        cl.pr2[index_of(p)] = HarmonicVector(order, w, x.segment(pr_index(p, 2) * n, n));
        const auto v_ref = reference_vector(order, w, p, reference[index_of(p)]);
        auto [nu, nl] = controlled_indices(cl.plant.i_g[index_of(p)], cl.pr1[index_of(p)], v_ref,
                                           params, ctrl);
        cl.plant.indices.upper[index_of(p)] = std::move(nu);
        cl.plant.indices.lower[index_of(p)] = std::move(nl);
    }
    return cl;
}

}  // namespace

ClosedLoopOperatingPoint solve_closed_loop_operating_point(const MmcParameters& params,
                                                           const ControllerParams& ctrl,
                                                           const std::array<double, 3>& reference,
                                                           int order, double tolerance,
                                                           int max_iterations) {
    params.validate();
    ctrl.validate();
    require_resistive_load(params, "closed-loop operating point");
    if (!(params.V_dc > 0.0)) throw InvalidParameter("V_dc must be > 0 for closed-loop control");
    const int n = 2 * order + 1;
    const double w = params.omega1;

    // Initial guess: open-loop solution at the modulation matching the average
    // reference, with PR states chosen to reproduce those indices.
    const double mean_ref = (reference[0] + reference[1] + reference[2]) / 3.0;
    const double m = std::clamp(modulation_for_voltage(mean_ref, params.V_dc), 0.0, 1.0);
    const OperatingPoint guess = solve_open_loop(params, m, order);
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(kSmallSignalStates * n);
    x.head(kPlantStates * n) = guess.stacked();
    for (Phase p : kPhases) {
        const auto v_s = HarmonicVector::cosine(order, w, 1, 0.5 * m * params.V_dc, phase_angle(p));
        const auto v_ref = reference_vector(order, w, p, reference[index_of(p)]);
        const auto x1 = v_s - ctrl.K_p * v_ref -
                        (ctrl.k_f - ctrl.K_p) * params.R_load * guess.i_g[index_of(p)];
        HarmonicVector x2(order, w);
        for (int k = -order; k <= order; ++k) {
            if (k != 0) x2.at(k) = x1[k] / cplx(0.0, k * w);
        }
        x.segment(pr_index(p, 1) * n, n) = x1.coeffs();
        x.segment(pr_index(p, 2) * n, n) = x2.coeffs();
    }

    for (int it = 1; it <= max_iterations; ++it) {
        const auto cl = unpack_closed_loop(x, params, ctrl, reference, order);
        const auto model = assemble_smallsignal(cl.plant, params, ctrl, order);
        const Eigen::VectorXcd r = closed_loop_hb_residual(x, params, ctrl, reference, order);
        const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(model.A.dense());
        const Eigen::VectorXcd dx = lu.solve(r);
        x -= dx;
        if (!x.allFinite()) throw ConvergenceFailure("closed-loop harmonic balance diverged");
        if (dx.norm() <= tolerance * x.norm()) {
            auto out = unpack_closed_loop(x, params, ctrl, reference, order);
            const Eigen::VectorXcd r_final =
                closed_loop_hb_residual(x, params, ctrl, reference, order);
            out.iterations = it;
            out.residual = r_final.cwiseAbs().maxCoeff();
            const auto final_model = assemble_smallsignal(out.plant, params, ctrl, order);
            const Eigen::PartialPivLU<Eigen::MatrixXcd> final_lu(final_model.A.dense());
            out.plant.condition = 1.0 / final_lu.rcond();
            out.plant.residual = out.residual;
            return out;
        }
    }
    throw ConvergenceFailure("closed-loop harmonic balance did not converge in " +
                             std::to_string(max_iterations) + " iterations");
}

ClosedLoopMatrix time_domain_closed_loop_A(const FCoefficientSet& f, const OperatingPoint& op,
                                           const MmcParameters& params,
                                           const ControllerParams& ctrl, double t) {
    require_resistive_load(params, "time-domain closed-loop linearization");
    const double L = params.L;
    const double C = params.C_arm();
    const double w = params.omega1;
    ClosedLoopMatrix A = ClosedLoopMatrix::Zero();
    for (Phase p : kPhases) {
        const PhaseF& F = f[p];
        const double nu = synthesize(op.indices.n_u(p), t);
        const double nl = synthesize(op.indices.n_l(p), t);
        const int ic = state_index(StateFamily::i_c, p);
        const int vu = state_index(StateFamily::v_cu, p);
        const int vl = state_index(StateFamily::v_cl, p);
        const int ig = state_index(StateFamily::i_g, p);
        const int x1 = pr_index(p, 1);
        const int x2 = pr_index(p, 2);

        A(ic, ic) = -params.R / L;
        A(ic, vu) = -nu / (2.0 * L);
        A(ic, vl) = -nl / (2.0 * L);
        A(ic, ig) = synthesize(F.c1, t);
        A(ic, x1) = synthesize(F.c2, t);

        A(vu, ic) = nu / C;
        A(vu, ig) = synthesize(F.vu1, t);
        A(vu, x1) = synthesize(F.vu2, t);

        A(vl, ic) = nl / C;
        A(vl, ig) = synthesize(F.vl1, t);
        A(vl, x1) = synthesize(F.vl2, t);

        A(ig, vu) = -nu / L;
        A(ig, vl) = nl / L;
        A(ig, ig) = synthesize(F.i1, t);
        A(ig, x1) = synthesize(F.i2, t);

        A(x1, ig) = -ctrl.K_r * params.R_load;
        A(x1, x2) = -w * w;
        A(x2, x1) = 1.0;
    }
    return A;
}

ClosedLoopInputMatrix time_domain_closed_loop_B(const FCoefficientSet& f,
                                                const MmcParameters& params,
                                                const ControllerParams& ctrl, double t) {
    ClosedLoopInputMatrix B = ClosedLoopInputMatrix::Zero();
    for (Phase p : kPhases) {
        const PhaseF& F = f[p];
        const int ref = ref_input_index(p);
        B(state_index(StateFamily::i_c, p), 0) = 1.0 / (2.0 * params.L);
        B(state_index(StateFamily::i_c, p), ref) = synthesize(F.c3, t);
        B(state_index(StateFamily::v_cu, p), ref) = synthesize(F.vu3, t);
        B(state_index(StateFamily::v_cl, p), ref) = synthesize(F.vl3, t);
        B(state_index(StateFamily::i_g, p), ref) = synthesize(F.i3, t);
        B(pr_index(p, 1), ref) = ctrl.K_r;
    }
    return B;
}

void PiecewiseInput::add(double t, Eigen::VectorXcd value) {
    if (value.size() != dim_) throw DimensionMismatch("piecewise input value has wrong length");
    if (!points_.empty() && !(t > points_.back().first))
        throw InvalidArgument("piecewise input breakpoints must be strictly increasing");
    points_.emplace_back(t, std::move(value));
}

Eigen::VectorXcd PiecewiseInput::at(double t) const {
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(dim_);
    for (const auto& [tp, value] : points_) {
        if (tp <= t) u = value;
        else break;
    }
    return u;
}

HarmonicVector EnvelopeTrajectory::envelope(std::size_t sample, int block) const {
    const int n = 2 * order + 1;
    return HarmonicVector(order, omega1, state.at(sample).segment(block * n, n));
}

EnvelopeTrajectory envelope_response(const HssSmallSignalModel& model, const PiecewiseInput& du,
                                     double t_start, double t_end, double dt, int stride) {
    const Eigen::MatrixXcd& A = model.A.dense();
    const Eigen::MatrixXcd& B = model.B.dense();
    if (du.dimension() != B.cols()) throw DimensionMismatch("input dimension does not match B");
    if (!(dt > 0.0) || !(t_end >= t_start)) throw InvalidArgument("envelope time grid is invalid");
    if (stride < 1) throw InvalidArgument("stride must be >= 1");

    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, false);
    const double spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
    if (dt * spectral_radius >= 0.1) {
        throw StepTooLarge("envelope step dt=" + std::to_string(dt) + " violates dt*max|eig|<0.1 (" +
                           std::to_string(dt * spectral_radius) + ")");
    }

    const auto steps = static_cast<long>(std::llround((t_end - t_start) / dt));
    EnvelopeTrajectory env;
    env.order = model.order;
    env.omega1 = model.omega1;
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(A.rows());
    env.time.push_back(t_start);
    env.state.push_back(x);
    for (long i = 0; i < steps; ++i) {
        const double t = t_start + static_cast<double>(i) * dt;
        const Eigen::VectorXcd bu = B * du.at(t + 0.5 * dt);
        const Eigen::VectorXcd k1 = A * x + bu;
        const Eigen::VectorXcd k2 = A * (x + 0.5 * dt * k1) + bu;
        const Eigen::VectorXcd k3 = A * (x + 0.5 * dt * k2) + bu;
        const Eigen::VectorXcd k4 = A * (x + dt * k3) + bu;
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if ((i + 1) % stride == 0) {
            env.time.push_back(t_start + static_cast<double>(i + 1) * dt);
            env.state.push_back(x);
        }
    }
    return env;
}

std::vector<double> reconstruct_perturbation(const EnvelopeTrajectory& env, int block) {
    std::vector<double> out;
    out.reserve(env.time.size());
    for (std::size_t i = 0; i < env.time.size(); ++i) {
        out.push_back(synthesize(env.envelope(i, block), env.time[i]));
    }
    return out;
}

std::vector<double> reconstruct_perturbation(const EnvelopeTrajectory& env, StateFamily f,
                                             Phase p) {
    return reconstruct_perturbation(env, state_index(f, p));
}

}  // namespace hssmmc
