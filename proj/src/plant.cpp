#include "hssmmc/plant.hpp"

#include "hssmmc/errors.hpp"

#include <cmath>
#include <numbers>

namespace hssmmc {

char phase_letter(Phase p) { return "abc"[index_of(p)]; }

Phase parse_phase(std::string_view s) {
    if (s == "a") return Phase::a;
    if (s == "b") return Phase::b;
    if (s == "c") return Phase::c;
    throw UnknownVariable("unknown phase '" + std::string(s) + "' (expected a, b or c)");
}

double phase_angle(Phase p) {
    constexpr double third = 2.0 * std::numbers::pi / 3.0;
    switch (p) {
        case Phase::a: return 0.0;
        case Phase::b: return third;
        case Phase::c: return -third;
    }
    return 0.0;
}

std::string family_name(StateFamily f) {
    switch (f) {
        case StateFamily::i_c: return "i_c";
        case StateFamily::v_cu: return "v_cu";
        case StateFamily::v_cl: return "v_cl";
        case StateFamily::i_g: return "i_g";
    }
    return "?";
}

StateFamily parse_family(std::string_view s) {
    if (s == "i_c") return StateFamily::i_c;
    if (s == "v_cu" || s == "v_cuΣ" || s == "v_cuS") return StateFamily::v_cu;
    if (s == "v_cl" || s == "v_clΣ" || s == "v_clS") return StateFamily::v_cl;
    if (s == "i_g") return StateFamily::i_g;
    throw UnknownVariable("unknown state variable '" + std::string(s) +
                          "' (expected i_c, v_cu, v_cl or i_g)");
}

std::string state_label(StateFamily f, Phase p) { return family_name(f) + phase_letter(p); }

double MmcParameters::period() const { return 2.0 * std::numbers::pi / omega1; }

void MmcParameters::validate() const {
    auto require = [](bool ok, const char* field, const char* rule) {
        if (!ok) throw InvalidParameter(std::string(field) + " " + rule);
    };
    require(std::isfinite(R) && R >= 0.0, "R", "must be >= 0");
    require(std::isfinite(L) && L > 0.0, "L", "must be > 0");
    require(std::isfinite(C_sm) && C_sm > 0.0, "C_sm", "must be > 0");
    require(N >= 1, "N", "must be >= 1");
    require(std::isfinite(V_dc) && V_dc >= 0.0, "V_dc", "must be >= 0");
    require(std::isfinite(omega1) && omega1 > 0.0, "omega1", "must be > 0");
    require(std::isfinite(R_load) && R_load >= 0.0, "R_load", "must be >= 0");
    require(std::isfinite(L_load) && L_load >= 0.0, "L_load", "must be >= 0");
}

double modulation_for_voltage(double v_peak, double V_dc) {
    if (!(V_dc > 0.0)) throw InvalidParameter("V_dc must be > 0 to derive a modulation index");
    return 2.0 * v_peak / V_dc;
}

InsertionIndexSet open_loop_insertion_indices(double m, int order, double omega1) {
    if (!(m >= 0.0 && m <= 1.0)) {
        throw ModulationOutOfRange("modulation index " + std::to_string(m) + " outside [0, 1]");
    }
    InsertionIndexSet set;
    for (Phase p : kPhases) {
        const auto swing = HarmonicVector::cosine(order, omega1, 1, 0.5 * m, phase_angle(p));
        const auto half = HarmonicVector::constant(order, omega1, 0.5);
        set.upper[index_of(p)] = half - swing;
        set.lower[index_of(p)] = half + swing;
    }
    return set;
}

InstantIndices open_loop_indices_at(double m, double omega1, double t) {
    InstantIndices n;
    for (Phase p : kPhases) {
        const double swing = 0.5 * m * std::cos(omega1 * t - phase_angle(p));
        n.upper[index_of(p)] = 0.5 - swing;
        n.lower[index_of(p)] = 0.5 + swing;
    }
    return n;
}

InstantIndices evaluate_indices(const InsertionIndexSet& set, double t) {
    InstantIndices n;
    for (Phase p : kPhases) {
        n.upper[index_of(p)] = synthesize(set.n_u(p), t);
        n.lower[index_of(p)] = synthesize(set.n_l(p), t);
    }
    return n;
}

PlantState plant_rhs(const PlantState& x, const InstantIndices& n, double v_dc,
                     const MmcParameters& p) {
    const double L = p.L;
    const double C = p.C_arm();
    const double L_ac = p.L_ac();
    PlantState dx;
    for (Phase ph : kPhases) {
        const int i = index_of(ph);
        const double ic = x(state_index(StateFamily::i_c, ph));
        const double vu = x(state_index(StateFamily::v_cu, ph));
        const double vl = x(state_index(StateFamily::v_cl, ph));
        const double ig = x(state_index(StateFamily::i_g, ph));
        const double nu = n.upper[i];
        const double nl = n.lower[i];
        dx(state_index(StateFamily::i_c, ph)) =
            -p.R / L * ic - nu / (2.0 * L) * vu - nl / (2.0 * L) * vl + v_dc / (2.0 * L);
        dx(state_index(StateFamily::v_cu, ph)) = nu / C * (ic + 0.5 * ig);
        dx(state_index(StateFamily::v_cl, ph)) = nl / C * (ic - 0.5 * ig);
        dx(state_index(StateFamily::i_g, ph)) =
            (-nu * vu + nl * vl - (p.R + 2.0 * p.R_load) * ig) / L_ac;
    }
    return dx;
}

PlantMatrix time_domain_A(const InstantIndices& n, const MmcParameters& p) {
    const double L = p.L;
    const double C = p.C_arm();
    const double L_ac = p.L_ac();
    PlantMatrix A = PlantMatrix::Zero();
    for (Phase ph : kPhases) {
        const int i = index_of(ph);
        const int ic = state_index(StateFamily::i_c, ph);
        const int vu = state_index(StateFamily::v_cu, ph);
        const int vl = state_index(StateFamily::v_cl, ph);
        const int ig = state_index(StateFamily::i_g, ph);
        const double nu = n.upper[i];
        const double nl = n.lower[i];
        A(ic, ic) = -p.R / L;
        A(ic, vu) = -nu / (2.0 * L);
        A(ic, vl) = -nl / (2.0 * L);
        A(vu, ic) = nu / C;
        A(vu, ig) = nu / (2.0 * C);
        A(vl, ic) = nl / C;
        A(vl, ig) = -nl / (2.0 * C);
        A(ig, vu) = -nu / L_ac;
        A(ig, vl) = nl / L_ac;
        A(ig, ig) = -(p.R + 2.0 * p.R_load) / L_ac;
    }
    return A;
}

PlantState time_domain_B(const MmcParameters& p) {
    PlantState B = PlantState::Zero();
    for (Phase ph : kPhases) B(state_index(StateFamily::i_c, ph)) = 1.0 / (2.0 * p.L);
    return B;
}

PlantState dc_equilibrium_state(const MmcParameters& p) {
    PlantState x = PlantState::Zero();
    for (Phase ph : kPhases) {
        x(state_index(StateFamily::v_cu, ph)) = p.V_dc;
        x(state_index(StateFamily::v_cl, ph)) = p.V_dc;
    }
    return x;
}

}  // namespace hssmmc
