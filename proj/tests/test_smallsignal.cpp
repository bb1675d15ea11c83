#include "hssmmc/errors.hpp"
#include "hssmmc/refsim.hpp"
#include "hssmmc/smallsignal.hpp"
#include "hssmmc/steady.hpp"
#include "support.hpp"

#include <numbers>

using namespace hssmmc;

namespace {

struct Fixture {
    RunConfig cfg = testing::sec3();
    MmcParameters p = cfg.params;
    ControllerParams ctrl = cfg.ctrl;
    std::array<double, 3> ref{cfg.reference_amplitude(), cfg.reference_amplitude(),
                              cfg.reference_amplitude()};
};

Eigen::MatrixXcd I(int n) { return Eigen::MatrixXcd::Identity(n, n); }

}  // namespace

TEST_CASE("F coefficients: vanishing feedforward difference") {
    Fixture fx;
    fx.ctrl.k_f = fx.ctrl.K_p;
    const auto op = solve_open_loop(fx.p, 0.85, 3);
    const auto f = compute_f_coefficients(op, fx.p, fx.ctrl);
    for (Phase ph : kPhases) {
        CHECK(f[ph].c1.max_magnitude() == 0.0);
        const auto expected = (1.0 / (2.0 * fx.p.C_arm())) * op.indices.n_u(ph);
        CHECK((f[ph].vu1.coeffs() - expected.coeffs()).cwiseAbs().maxCoeff() == 0.0);
        const auto expected_l = (-1.0 / (2.0 * fx.p.C_arm())) * op.indices.n_l(ph);
        CHECK((f[ph].vl1.coeffs() - expected_l.coeffs()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("F coefficients at the m = 0 operating point") {
    Fixture fx;
    const auto op = solve_open_loop(fx.p, 0.0, 3);
    const auto f = compute_f_coefficients(op, fx.p, fx.ctrl);
    CHECK(f[Phase::a].c2.max_magnitude() < 1e-15);
    CHECK(std::abs(f[Phase::a].i2[0] - 2.0 / fx.p.L) < 1e-12);
    for (int k = 1; k <= 3; ++k) CHECK(std::abs(f[Phase::a].i2[k]) < 1e-15);
}

TEST_CASE("Gamma[F_c2a] on a unit dc PR perturbation recovers the arm-voltage difference") {
    Fixture fx;
    const auto op = solve_open_loop(fx.p, 0.85, 3);
    const auto f = compute_f_coefficients(op, fx.p, fx.ctrl);
    const auto unit = HarmonicVector::constant(3, fx.p.omega1, 1.0);
    const auto got = toeplitz(f[Phase::a].c2).apply(unit);
    const auto expected = (1.0 / (2.0 * fx.p.L * fx.p.V_dc)) * (op.v_cu[0] - op.v_cl[0]);
    CHECK((got.coeffs() - expected.coeffs()).cwiseAbs().maxCoeff() <= 1e-12 * expected.max_magnitude());
}

TEST_CASE("assembled closed-loop blocks") {
    Fixture fx;
    const auto op = solve_open_loop(fx.p, 0.85, 3);
    const auto model = assemble_smallsignal(op, fx.p, fx.ctrl, 3);
    const auto f = compute_f_coefficients(op, fx.p, fx.ctrl);
    const Eigen::MatrixXcd Q = q_matrix(3, fx.p.omega1).dense();
    CHECK(model.A.block("x_pra2", "x_pra1") == I(7));
    CHECK(model.A.block("x_pra2", "x_pra2") == -Q);
    CHECK(testing::max_abs(model.A.block("x_pra1", "x_pra2") + fx.p.omega1 * fx.p.omega1 * I(7)) < 1e-9);
    CHECK(testing::max_abs(model.A.block("x_pra1", "i_ga") + fx.ctrl.K_r * fx.p.R_load * I(7)) < 1e-9);
    CHECK(testing::max_abs(model.B.block("i_ga", "dV_ga*") - toeplitz(f[Phase::a].i3).matrix) == 0.0);
    CHECK(testing::max_abs(model.B.block("i_ca", "dV_dc") - I(7) / (2 * fx.p.L)) == 0.0);
    CHECK(testing::max_abs(model.B.block("x_prb1", "dV_gb*") - fx.ctrl.K_r * I(7)) == 0.0);
    CHECK(testing::max_abs(model.B.block("x_prb1", "dV_ga*")) == 0.0);
    CHECK(testing::max_abs(model.A.block("i_cc", "x_prc1") - toeplitz(f[Phase::c].c2).matrix) == 0.0);
    CHECK_THROWS_AS(assemble_smallsignal(op, fx.p, fx.ctrl, 2), DimensionMismatch);
}

TEST_CASE("zero gains at m = 0 reduce the plant block to the steady model") {
    Fixture fx;
    fx.ctrl = ControllerParams{0.0, 0.0, 0.0, fx.p.omega1};
    const auto op = solve_open_loop(fx.p, 0.0, 3);
    const auto model = assemble_smallsignal(op, fx.p, fx.ctrl, 3);
    const auto steady = assemble_steady(fx.p, open_loop_insertion_indices(0.0, 3, fx.p.omega1), 3);
    const int n = 12 * 7;
    CHECK(testing::max_abs(model.A.dense().topLeftCorner(n, n) - steady.A.dense()) < 1e-9);
}

TEST_CASE("PR realization has transfer K_r s / (s^2 + w1^2)") {
    const ControllerParams c{0.0, 80.0, 0.0, 314.0};
    Eigen::Matrix2cd A;
    A << 0.0, -c.omega1 * c.omega1, 1.0, 0.0;
    const Eigen::Vector2cd B(c.K_r, 0.0);
    for (double w : {1.0, 50.0, 200.0, 313.0, 315.5, 1000.0, 5000.0}) {
        const cplx s(0.0, w);
        const Eigen::Vector2cd x = (s * Eigen::Matrix2cd::Identity() - A).partialPivLu().solve(B);
        CHECK(std::abs(x(0) - pr_transfer(c, s)) <= 1e-9 * std::abs(pr_transfer(c, s)));
    }
}

TEST_CASE("closed-loop operating point solves the truncated harmonic balance") {
    Fixture fx;
    const auto cl = solve_closed_loop_operating_point(fx.p, fx.ctrl, fx.ref, 3);
    CHECK(cl.iterations <= 10);
    CHECK(closed_loop_hb_residual(cl.stacked(), fx.p, fx.ctrl, fx.ref, 3).cwiseAbs().maxCoeff() < 1e-6);
    // The ac voltage tracks the reference at the fundamental.
    const cplx v1 = fx.p.R_load * cl.plant.i_g[0][1];
    CHECK(std::abs(v1 - 0.5 * fx.ref[0]) < 1e-3 * fx.ref[0]);
    for (StateFamily f : kFamilies) CHECK(cl.plant.get(f, Phase::b).symmetry_defect() < 1e-9);
    auto p = fx.p;
    p.L_load = 0.01;
    CHECK_THROWS_AS(solve_closed_loop_operating_point(p, fx.ctrl, fx.ref, 3), InvalidParameter);
}

TEST_CASE("lifted A is the Jacobian of the harmonic-balance residual") {
    Fixture fx;
    const int h = 2;
    const int n = 2 * h + 1;
    const auto cl = solve_closed_loop_operating_point(fx.p, fx.ctrl, fx.ref, h);
    const auto model = assemble_smallsignal(cl.plant, fx.p, fx.ctrl, h);
    const Eigen::VectorXcd x0 = cl.stacked();
    const Eigen::MatrixXcd& A = model.A.dense();
    for (int j = 0; j < kSmallSignalStates * n; j += 3) {
        const double eps = 1e-3 * std::max(1.0, std::abs(x0(j)));  // residual is bilinear
        Eigen::VectorXcd xp = x0, xm = x0;
        xp(j) += eps;
        xm(j) -= eps;
        const Eigen::VectorXcd col = (closed_loop_hb_residual(xp, fx.p, fx.ctrl, fx.ref, h) -
                                      closed_loop_hb_residual(xm, fx.p, fx.ctrl, fx.ref, h)) /
                                     (2.0 * eps);
        CAPTURE(j);
        CHECK((col - A.col(j)).norm() <= 1e-5 * std::max(1.0, A.col(j).norm()));
    }
}

TEST_CASE("time-domain linearization matches finite differences of the closed-loop rhs") {
    Fixture fx;
    const auto cl = solve_closed_loop_operating_point(fx.p, fx.ctrl, fx.ref, 3);
    const auto f = compute_f_coefficients(cl.plant, fx.p, fx.ctrl);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0.0, fx.p.period());
    for (int trial = 0; trial < 10; ++trial) {
        const double t = u(rng);
        ClosedLoopState x;
        const Eigen::VectorXcd xs = cl.stacked();
        for (int b = 0; b < kClosedLoopStates; ++b)
            x(b) = synthesize(HarmonicVector(3, fx.p.omega1, xs.segment(b * 7, 7)), t);
        const auto A = time_domain_closed_loop_A(f, cl.plant, fx.p, fx.ctrl, t);
        const auto B = time_domain_closed_loop_B(f, fx.p, fx.ctrl, t);
        const ClosedLoopState r0 = closed_loop_rhs(x, t, fx.p.V_dc, fx.ref, fx.p, fx.ctrl);
        for (int j = 0; j < kClosedLoopStates; ++j) {
            const double eps = 1e-6 * std::max(1.0, std::abs(x(j)));
            ClosedLoopState xp = x, xm = x;
            xp(j) += eps;
            xm(j) -= eps;
            const ClosedLoopState col = (closed_loop_rhs(xp, t, fx.p.V_dc, fx.ref, fx.p, fx.ctrl) -
                                         closed_loop_rhs(xm, t, fx.p.V_dc, fx.ref, fx.p, fx.ctrl)) /
                                        (2 * eps);
            CHECK((col - A.col(j)).norm() <= 1e-5 * std::max(1.0, A.col(j).norm()));
        }
        // The reference input enters through v_gx* = V cos(w t - phi), so a unit
        // amplitude change at this instant scales the phase reference by cos(.).
        std::array<double, 3> ref = fx.ref;
        ref[0] += 1.0;
        const ClosedLoopState dr = closed_loop_rhs(x, t, fx.p.V_dc, ref, fx.p, fx.ctrl) - r0;
        const double c = std::cos(fx.p.omega1 * t);
        CHECK((dr - B.col(1) * c).norm() <= 1e-6 * std::max(1.0, (B.col(1) * c).norm()));
        const ClosedLoopState dv = closed_loop_rhs(x, t, fx.p.V_dc + 1.0, fx.ref, fx.p, fx.ctrl) - r0;
        CHECK((dv - B.col(0)).norm() <= 1e-9 * B.col(0).norm());
    }
}

TEST_CASE("eigenvalues: stability, ordering and conjugate-shift symmetry") {
    Fixture fx;
    const auto cl = solve_closed_loop_operating_point(fx.p, fx.ctrl, fx.ref, 3);
    const auto model = assemble_smallsignal(cl.plant, fx.p, fx.ctrl, 3);
    const auto ev = eigenvalues(model);
    REQUIRE(ev.size() == 18 * 7);
    CHECK(ev(0).real() < 0.0);
    for (Eigen::Index i = 1; i < ev.size(); ++i) CHECK(ev(i).real() <= ev(i - 1).real());
    // Real system: the spectrum is closed under conjugation.
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        CHECK(((ev.array() - std::conj(ev(i))).abs().minCoeff()) < 1e-6 * std::abs(ev(i)) + 1e-6);
    }
}

TEST_CASE("central eigenvalues are shift-invariant and converge in h") {
    // Edge copies are truncation artifacts; only |Im| <= w1 is compared. The
    // error shrinks fast: about 4e-2 at h = 3, 1e-4 at h = 5.
    Fixture fx;
    const double w = fx.p.omega1;
    auto spectrum = [&](int h) {
        const auto cl = solve_closed_loop_operating_point(fx.p, fx.ctrl, fx.ref, h);
        return eigenvalues(assemble_smallsignal(cl.plant, fx.p, fx.ctrl, h));
    };
    const Eigen::VectorXcd ev5 = spectrum(5);
    const Eigen::VectorXcd ev4 = spectrum(4);
    int central = 0;
    for (Eigen::Index i = 0; i < ev5.size(); ++i) {
        const cplx l = ev5(i);
        if (std::abs(l.imag()) > w) continue;
        ++central;
        const double tol = 1e-3 * std::abs(l);
        CHECK((ev5.array() - (l + cplx(0.0, w))).abs().minCoeff() < tol);
        CHECK((ev5.array() - (l - cplx(0.0, w))).abs().minCoeff() < tol);
        CHECK((ev4.array() - l).abs().minCoeff() < tol);
    }
    CHECK(central >= 18);
}

TEST_CASE("more arm resistance shifts plant eigenvalues left") {
    Fixture fx;
    fx.ctrl = ControllerParams{0.0, 0.0, 0.0, fx.p.omega1};
    const auto op = solve_open_loop(fx.p, 0.0, 2);
    const auto ev1 = eigenvalues(assemble_smallsignal(op, fx.p, fx.ctrl, 2));
    auto p = fx.p;
    p.R = 1e3;
    const auto ev2 = eigenvalues(assemble_smallsignal(solve_open_loop(p, 0.0, 2), p, fx.ctrl, 2));
    // The PR states are undriven at zero gains; compare the plant part only.
    CHECK(ev2.real().minCoeff() < ev1.real().minCoeff());
    double max1 = -1e300, max2 = -1e300;
    for (Eigen::Index i = 0; i < ev1.size(); ++i) {
        if (std::abs(ev1(i).real()) > 1e-9) max1 = std::max(max1, ev1(i).real());
        if (std::abs(ev2(i).real()) > 1e-9) max2 = std::max(max2, ev2(i).real());
    }
    CHECK(max2 < max1);
}

TEST_CASE("envelope response: zero input, settled state and step bound") {
    Fixture fx;
    const int h = 1;
    const auto cl = solve_closed_loop_operating_point(fx.p, fx.ctrl, fx.ref, h);
    const auto model = assemble_smallsignal(cl.plant, fx.p, fx.ctrl, h);
    const double radius = eigenvalues(model).cwiseAbs().maxCoeff();
    const double dt = 0.05 / radius;

    PiecewiseInput none(kSmallSignalInputs * 3);
    const auto env0 = envelope_response(model, none, 0.0, 0.01, dt);
    for (const auto& x : env0.state) CHECK(x.norm() == 0.0);

    PiecewiseInput du(kSmallSignalInputs * 3);
    const auto step = reference_step_input(h, Phase::a, 1e4);
    du.add(0.0, step);
    const auto env = envelope_response(model, du, 0.0, 2.5, dt, 1000);
    const Eigen::VectorXcd expected = settled_response(model, step);
    CHECK((env.state.back() - expected).norm() <= 1e-3 * expected.norm());
    CHECK_THROWS_AS(envelope_response(model, du, 0.0, 0.01, 0.2 / radius), StepTooLarge);
}

TEST_CASE("reference step input occupies the fundamental slots") {
    const auto u = reference_step_input(3, Phase::b, 1e4);
    REQUIRE(u.size() == 4 * 7);
    const auto slot = u.segment(ref_input_index(Phase::b) * 7, 7);
    CHECK(std::abs(slot(4) - 5e3 * std::polar(1.0, -2.0 * std::numbers::pi / 3.0)) < 1e-9);
    CHECK(std::abs(slot(2) - std::conj(slot(4))) < 1e-12);
    CHECK(u.norm() == doctest::Approx(5e3 * std::sqrt(2.0)));
}

TEST_CASE("perturbation reconstruction") {
    EnvelopeTrajectory env;
    env.order = 2;
    env.omega1 = 314.0;
    for (int i = 0; i < 5; ++i) {
        env.time.push_back(0.001 * i);
        Eigen::VectorXcd x = Eigen::VectorXcd::Zero(kSmallSignalStates * 5);
        x(state_index(StateFamily::i_g, Phase::a) * 5 + 2) = 3.0 * i;  // dc slot
        env.state.push_back(x);
    }
    const auto dc = reconstruct_perturbation(env, StateFamily::i_g, Phase::a);
    for (int i = 0; i < 5; ++i) CHECK(dc[static_cast<std::size_t>(i)] == doctest::Approx(3.0 * i));
    const auto zero = reconstruct_perturbation(env, StateFamily::i_c, Phase::c);
    for (double v : zero) CHECK(v == 0.0);
    env.state[1](state_index(StateFamily::i_g, Phase::a) * 5 + 3) = 1.0;  // unpaired k = 1
    CHECK_THROWS_AS(reconstruct_perturbation(env, StateFamily::i_g, Phase::a), ResidualImaginary);
}
