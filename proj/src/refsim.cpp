#include "hssmmc/refsim.hpp"

#include "hssmmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hssmmc {

SimChannel parse_channel(std::string_view s) {
    if (s == "v_dc") return SimChannel::v_dc;
    if (s == "ref_a") return SimChannel::ref_a;
    if (s == "ref_b") return SimChannel::ref_b;
    if (s == "ref_c") return SimChannel::ref_c;
    throw UnknownVariable("unknown input channel '" + std::string(s) +
                          "' (expected v_dc, ref_a, ref_b or ref_c)");
}

void SimulationConfig::validate(double period) const {
    if (!(std::isfinite(dt) && dt > 0.0)) throw InvalidParameter("dt must be > 0");
    if (settle_periods < 0) throw InvalidParameter("settle_periods must be >= 0");
    if (!(t_end > settle_periods * period)) {
        throw InvalidParameter("t_end must exceed settle_periods * T");
    }
    if (record_stride < 1) throw InvalidParameter("record_stride must be >= 1");
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (!(events[i].time > events[i - 1].time))
            throw InvalidParameter("event times must be strictly increasing");
    }
}

int steps_per_period(const SimulationConfig& cfg, double period) {
    return std::max(1, static_cast<int>(std::lround(period / cfg.dt)));
}

std::vector<double> Trajectory::series(int column) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(column)]);
    return out;
}

std::vector<double> Trajectory::series(StateFamily f, Phase p) const {
    return series(state_index(f, p));
}

ClosedLoopState closed_loop_rhs(const ClosedLoopState& x, double t, double v_dc,
                                const std::array<double, 3>& reference,
                                const MmcParameters& params, const ControllerParams& ctrl,
                                InstantIndices* indices) {
    const double w = params.omega1;
    InstantIndices n;
    ClosedLoopState dx;
    for (Phase p : kPhases) {
        const int i = index_of(p);
        const double v_ref = reference[i] * std::cos(w * t - phase_angle(p));
        const double v_g = params.R_load * x(state_index(StateFamily::i_g, p));
        const double e = v_ref - v_g;
        const double x1 = x(pr_index(p, 1));
        const double x2 = x(pr_index(p, 2));
        const double v_s = ctrl.K_p * e + x1 + ctrl.k_f * v_g;
        n.upper[i] = 0.5 - v_s / params.V_dc;
        n.lower[i] = 0.5 + v_s / params.V_dc;
        dx(pr_index(p, 1)) = -w * w * x2 + ctrl.K_r * e;
        dx(pr_index(p, 2)) = x1;
    }
    dx.head<kPlantStates>() = plant_rhs(x.head<kPlantStates>(), n, v_dc, params);
    if (indices) *indices = n;
    return dx;
}

namespace {

struct Inputs {
    double v_dc = 0.0;
    std::array<double, 3> reference{};

    void apply(const SimEvent& ev) {
        switch (ev.channel) {
            case SimChannel::v_dc: v_dc += ev.delta; break;
            case SimChannel::ref_a: reference[0] += ev.delta; break;
            case SimChannel::ref_b: reference[1] += ev.delta; break;
            case SimChannel::ref_c: reference[2] += ev.delta; break;
        }
    }
};

// Shared fixed-grid driver. `rhs(x, t, inputs, indices*)` returns dx/dt.
template <typename Rhs>
Trajectory integrate(const MmcParameters& params, const SimulationConfig& cfg, Inputs inputs,
                     ClosedLoopState x, bool closed_loop, Rhs&& rhs) {
    params.validate();
    const double period = params.period();
    cfg.validate(period);
    const int spp = steps_per_period(cfg, period);
    const double dt = period / spp;
    const auto n_steps = static_cast<long>(std::llround(cfg.t_end / dt));
    const auto first_recorded =
        static_cast<long>(std::max(0.0, std::ceil(cfg.record_from / dt - 1e-9)));

    std::vector<std::pair<long, SimEvent>> events;
    for (const auto& ev : cfg.events) events.emplace_back(std::llround(ev.time / dt), ev);

    const double v_scale = std::max(params.V_dc, 1.0);
    const double i_scale = v_scale / std::max(params.R + 2.0 * params.R_load, 1e-3);
    auto check = [&](const ClosedLoopState& s, double t) {
        for (int j = 0; j < kClosedLoopStates; ++j) {
            const bool current = j < 3 || (j >= 9 && j < kPlantStates);
            const double limit = 1e9 * (current ? i_scale : v_scale);
            if (!std::isfinite(s(j)) || std::abs(s(j)) > limit) {
                throw NumericalBlowup("state " + std::to_string(j) + " diverged at t = " +
                                      std::to_string(t));
            }
        }
    };

    Trajectory traj;
    traj.omega1 = params.omega1;
    traj.dt = dt;
    traj.closed_loop = closed_loop;
    traj.samples_per_period = spp % cfg.record_stride == 0 ? spp / cfg.record_stride : 0;
    const auto kept = std::max<long>(0, (n_steps - first_recorded) / cfg.record_stride + 1);
    traj.time.reserve(static_cast<std::size_t>(kept));
    traj.rows.reserve(static_cast<std::size_t>(kept));

    auto record = [&](long i, const ClosedLoopState& s) {
        if (i < first_recorded || (i - first_recorded) % cfg.record_stride != 0) return;
        const double t = static_cast<double>(i) * dt;
        InstantIndices n;
        rhs(s, t, inputs, &n);
        std::array<double, kClosedLoopStates + 6> row{};
        for (int j = 0; j < kClosedLoopStates; ++j) row[static_cast<std::size_t>(j)] = s(j);
        for (int p = 0; p < 3; ++p) {
            row[static_cast<std::size_t>(kClosedLoopStates + p)] = n.upper[static_cast<std::size_t>(p)];
            row[static_cast<std::size_t>(kClosedLoopStates + 3 + p)] =
                n.lower[static_cast<std::size_t>(p)];
        }
        traj.time.push_back(t);
        traj.rows.push_back(row);
    };

    std::size_t next_event = 0;
    auto apply_events = [&](long i) {
        while (next_event < events.size() && events[next_event].first <= i) {
            inputs.apply(events[next_event].second);
            ++next_event;
        }
    };

    apply_events(0);
    record(0, x);
    for (long i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        const ClosedLoopState k1 = rhs(x, t, inputs, nullptr);
        const ClosedLoopState k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt, inputs, nullptr);
        const ClosedLoopState k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt, inputs, nullptr);
        const ClosedLoopState k4 = rhs(x + dt * k3, t + dt, inputs, nullptr);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check(x, t + dt);
        apply_events(i + 1);
        record(i + 1, x);
    }
    return traj;
}

ClosedLoopState initial_state(const MmcParameters& params) {
    ClosedLoopState x = ClosedLoopState::Zero();
    x.head<kPlantStates>() = dc_equilibrium_state(params);
    return x;
}

}  // namespace

Trajectory simulate_open_loop(const MmcParameters& params, double m, const SimulationConfig& cfg) {
    if (!(m >= 0.0 && m <= 1.0)) {
        throw ModulationOutOfRange("modulation index " + std::to_string(m) + " outside [0, 1]");
    }
    for (const auto& ev : cfg.events) {
        if (ev.channel != SimChannel::v_dc)
            throw InvalidArgument("open-loop runs accept only v_dc events");
    }
    Inputs inputs;
    inputs.v_dc = params.V_dc;
    auto rhs = [&](const ClosedLoopState& x, double t, const Inputs& in, InstantIndices* out) {
        const InstantIndices n = open_loop_indices_at(m, params.omega1, t);
        if (out) *out = n;
        ClosedLoopState dx = ClosedLoopState::Zero();
        dx.head<kPlantStates>() = plant_rhs(x.head<kPlantStates>(), n, in.v_dc, params);
        return dx;
    };
    return integrate(params, cfg, inputs, initial_state(params), false, rhs);
}

Trajectory simulate_closed_loop(const MmcParameters& params, const ControllerParams& ctrl,
                                const std::array<double, 3>& reference,
                                const SimulationConfig& cfg) {
    ctrl.validate();
    if (params.L_load != 0.0)
        throw InvalidParameter("closed-loop simulation requires a resistive load (L_load = 0)");
    if (!(params.V_dc > 0.0)) throw InvalidParameter("V_dc must be > 0 for closed-loop control");
    Inputs inputs;
    inputs.v_dc = params.V_dc;
    inputs.reference = reference;
    auto rhs = [&](const ClosedLoopState& x, double t, const Inputs& in, InstantIndices* out) {
        return closed_loop_rhs(x, t, in.v_dc, in.reference, params, ctrl, out);
    };
    return integrate(params, cfg, inputs, initial_state(params), true, rhs);
}

namespace {

void require_periods(const Trajectory& traj, int periods) {
    if (traj.samples_per_period <= 0) {
        throw InvalidArgument("record stride does not divide the steps per period");
    }
    if (traj.size() < static_cast<std::size_t>(periods * traj.samples_per_period)) {
        throw InsufficientSamples("trajectory holds fewer than " + std::to_string(periods) +
                                  " recorded periods");
    }
}

}  // namespace

double settling_defect(const Trajectory& traj, int column) {
    require_periods(traj, 2);
    const auto n = static_cast<std::size_t>(traj.samples_per_period);
    const std::size_t end = traj.size();
    double diff = 0.0;
    double last = 0.0;
    for (std::size_t i = end - n; i < end; ++i) {
        const double a = traj.rows[i][static_cast<std::size_t>(column)];
        const double b = traj.rows[i - n][static_cast<std::size_t>(column)];
        diff += (a - b) * (a - b);
        last += a * a;
    }
    if (diff == 0.0) return 0.0;
    return last > 0.0 ? std::sqrt(diff / last) : std::numeric_limits<double>::infinity();
}

HarmonicVector settled_spectrum(const Trajectory& traj, int column, int order) {
    const double defect = settling_defect(traj, column);
    if (!(defect < kSettleTolerance)) {
        throw NotSettled("column " + std::to_string(column) +
                         " not settled: last-two-period RMS change " + std::to_string(defect));
    }
    const auto n = static_cast<std::size_t>(traj.samples_per_period);
    const std::size_t start = traj.size() - n;
    std::vector<double> samples;
    samples.reserve(n);
    for (std::size_t i = start; i < traj.size(); ++i)
        samples.push_back(traj.rows[i][static_cast<std::size_t>(column)]);
    return analyze(samples, order, traj.omega1, traj.time[start]);
}

HarmonicVector settled_spectrum(const Trajectory& traj, StateFamily f, Phase p, int order) {
    return settled_spectrum(traj, state_index(f, p), order);
}

double total_harmonic_distortion(const HarmonicVector& x) {
    const double fundamental = std::abs(x[1]);
    if (!(fundamental > 0.0)) throw InvalidArgument("THD undefined for a zero fundamental");
    double sum = 0.0;
    for (int k = 2; k <= x.order(); ++k) sum += std::norm(x[k]);
    return std::sqrt(sum) / fundamental;
}

ComparisonReport compare_spectra(const HarmonicVector& a, const HarmonicVector& b,
                                 const std::vector<int>& dominant, double floor_factor) {
    if (a.order() != b.order()) {
        throw OrderMismatch("cannot compare spectra of order " + std::to_string(a.order()) +
                            " and " + std::to_string(b.order()));
    }
    const int h = a.order();
    std::vector<double> mag(static_cast<std::size_t>(h + 1));
    for (int k = 0; k <= h; ++k)
        mag[static_cast<std::size_t>(k)] = std::max(std::abs(a[k]), std::abs(b[k]));

    std::vector<bool> is_dominant(static_cast<std::size_t>(h + 1), false);
    if (!dominant.empty()) {
        for (int k : dominant) {
            if (k < 0 || k > h) throw InvalidArgument("dominant harmonic outside [0, h]");
            is_dominant[static_cast<std::size_t>(k)] = true;
        }
    } else {
        const double overall = *std::max_element(mag.begin(), mag.end());
        const double ac = h > 0 ? *std::max_element(mag.begin() + 1, mag.end()) : 0.0;
        is_dominant[0] = overall > 0.0 && mag[0] >= 0.02 * overall;
        for (int k = 1; k <= h; ++k)
            is_dominant[static_cast<std::size_t>(k)] = ac > 0.0 && mag[static_cast<std::size_t>(k)] >= 0.02 * ac;
    }

    ComparisonReport report;
    report.order = h;
    double largest = 0.0;
    for (int k = 0; k <= h; ++k)
        if (is_dominant[static_cast<std::size_t>(k)]) largest = std::max(largest, mag[static_cast<std::size_t>(k)]);
    report.floor = floor_factor * largest;

    for (int k = 0; k <= h; ++k) {
        HarmonicComparison row;
        row.k = k;
        row.a = a[k];
        row.b = b[k];
        row.abs_error = std::abs(a[k] - b[k]);
        const double denom = std::max(mag[static_cast<std::size_t>(k)], report.floor);
        row.rel_error = denom > 0.0 ? row.abs_error / denom : 0.0;
        row.dominant = is_dominant[static_cast<std::size_t>(k)];
        if (row.dominant && row.rel_error >= report.max_dominant_rel_error) {
            report.max_dominant_rel_error = row.rel_error;
            report.worst_dominant_k = k;
        }
        report.rows.push_back(row);
    }
    return report;
}

double nrmse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw DimensionMismatch("nrmse needs equal nonempty series");
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        err += (a[i] - b[i]) * (a[i] - b[i]);
        ref += b[i] * b[i];
    }
    if (err == 0.0) return 0.0;
    return ref > 0.0 ? std::sqrt(err / ref) : std::numeric_limits<double>::infinity();
}

}  // namespace hssmmc
