#include "hssmmc/pipeline.hpp"

#include "hssmmc/csv.hpp"
#include "hssmmc/errors.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

namespace hssmmc {

std::vector<int> dominant_harmonics(StateFamily f, int order) {
    std::vector<int> ks;
    switch (f) {
        case StateFamily::i_c: ks = {0, 2}; break;
        case StateFamily::v_cu:
        case StateFamily::v_cl: ks = {0, 1, 2, 3}; break;
        case StateFamily::i_g: ks = {1}; break;
    }
    ks.erase(std::remove_if(ks.begin(), ks.end(), [&](int k) { return k > order; }), ks.end());
    return ks;
}

namespace {

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

std::string percent(double x) { return fmt::format("{:.4f}%", 100.0 * x); }

double max_odd_magnitude(const HarmonicVector& x) {
    double m = 0.0;
    for (int k = 1; k <= x.order(); k += 2) m = std::max(m, std::abs(x[k]));
    return m;
}

}  // namespace

SteadyVerification verify_steady(const RunConfig& cfg) {
    cfg.validate();
    const MmcParameters& params = cfg.params;
    const double period = params.period();

    SteadyVerification v;
    const auto indices = open_loop_insertion_indices(cfg.m, cfg.h, params.omega1);
    const auto model = assemble_steady(params, indices, cfg.h);
    v.hss = solve_steady_state(model, dc_input_vector(params.V_dc, cfg.h));
    v.max_real_eig = max_real_eigenvalue(model.A.dense());

    SimulationConfig sim = cfg.sim;
    sim.events.clear();
    sim.record_stride = 1;
    sim.t_end = cfg.simulation_end();
    sim.record_from = sim.t_end - cfg.record_periods * period;
    const Trajectory traj = simulate_open_loop(params, cfg.m, sim);
    const auto n = static_cast<std::size_t>(traj.samples_per_period);
    const std::size_t start = traj.size() - n;

    v.circulating_ratio = std::numeric_limits<double>::infinity();
    v.capacitor_low_nonzero = true;
    for (StateFamily f : kFamilies) {
        for (Phase p : kPhases) {
            StateComparison s;
            s.family = f;
            s.phase = p;
            const int col = state_index(f, p);
            s.hss = v.hss.get(f, p);
            s.sim = settled_spectrum(traj, col, cfg.h);
            s.sim_wide = settled_spectrum(traj, col, cfg.analysis_order);
            s.report = compare_spectra(s.hss, s.sim, dominant_harmonics(f, cfg.h));
            for (std::size_t i = start; i < traj.size(); ++i) {
                s.time.push_back(traj.time[i]);
                s.sim_wave.push_back(traj.rows[i][static_cast<std::size_t>(col)]);
                s.hss_wave.push_back(synthesize(s.hss, traj.time[i]));
            }
            s.waveform_nrmse = nrmse(s.hss_wave, s.sim_wave);
            v.max_dominant_rel_error = std::max(v.max_dominant_rel_error, s.report.max_dominant_rel_error);
            v.max_waveform_nrmse = std::max(v.max_waveform_nrmse, s.waveform_nrmse);

            const HarmonicVector& w = s.sim_wide;
            if (f == StateFamily::i_c) {
                const double odd = max_odd_magnitude(w);
                const double low = std::min(std::abs(w[0]), std::abs(w[2]));
                const double ratio = odd > 0.0 ? low / odd : std::numeric_limits<double>::infinity();
                v.circulating_ratio = std::min(v.circulating_ratio, ratio);
            } else if (f == StateFamily::v_cu || f == StateFamily::v_cl) {
                for (int k = 0; k <= 3; ++k) {
                    if (!(std::abs(w[k]) > 1e-9 * std::abs(w[0]))) v.capacitor_low_nonzero = false;
                }
                double high = 0.0;
                for (int k = 4; k <= w.order(); ++k) high = std::max(high, std::abs(w[k]));
                const double third = std::abs(w[3]);
                v.capacitor_high_ratio = std::max(
                    v.capacitor_high_ratio,
                    third > 0.0 ? high / third : std::numeric_limits<double>::infinity());
            } else {
                // No fundamental (m = 0): THD is undefined and cannot pass.
                const double thd = std::abs(w[1]) > 0.0 ? total_harmonic_distortion(w)
                                                        : std::numeric_limits<double>::infinity();
                v.ac_current_thd = std::max(v.ac_current_thd, thd);
            }
            v.states.push_back(std::move(s));
        }
    }
    return v;
}

std::string steady_report(const RunConfig& cfg, const SteadyVerification& v) {
    std::string r;
    r += fmt::format("scenario verify-steady  h={} m={} analysis_order={}\n", cfg.h,
                     format_number(cfg.m), cfg.analysis_order);
    r += fmt::format("hss condition estimate {:.6e}  residual {:.3e}  max eig real {}\n",
                     v.hss.condition, v.hss.residual, format_number(v.max_real_eig));
    r += "\nstate   dominant k  max rel err  worst k  waveform nrmse\n";
    for (const auto& s : v.states) {
        std::string ks;
        for (const auto& row : s.report.rows)
            if (row.dominant) ks += std::to_string(row.k);
        r += fmt::format("{:<7} {:<11} {:>11}  {:>7}  {:>14}\n", state_label(s.family, s.phase), ks,
                         percent(s.report.max_dominant_rel_error), s.report.worst_dominant_k,
                         percent(s.waveform_nrmse));
    }
    r += "\n";
    r += fmt::format("dominant harmonics max rel err {} (limit {}) {}\n",
                     percent(v.max_dominant_rel_error), percent(kSteadyDominantTolerance),
                     verdict(v.pass_dominant()));
    r += fmt::format("waveform nrmse max {} (limit {}) {}\n", percent(v.max_waveform_nrmse),
                     percent(kSteadyWaveformTolerance), verdict(v.pass_waveform()));
    r += fmt::format("circulating current dc,2nd over odd min ratio {} (limit >= {}) {}\n",
                     format_number(v.circulating_ratio), format_number(kCirculatingDominanceRatio),
                     verdict(v.pass_circulating()));
    r += fmt::format("capacitor sums dc..3rd nonzero {}  k>=4 over 3rd max {} (limit < {}) {}\n",
                     v.capacitor_low_nonzero ? "yes" : "no", percent(v.capacitor_high_ratio),
                     percent(kCapacitorHighOrderRatio), verdict(v.pass_capacitor()));
    r += fmt::format("ac current thd max {} (limit < {}) {}\n", percent(v.ac_current_thd),
                     percent(kAcCurrentThdLimit), verdict(v.pass_thd()));
    r += fmt::format("overall {}\n", verdict(v.passed()));
    return r;
}

SmallSigVerification verify_smallsig(const RunConfig& cfg) {
    cfg.validate();
    const MmcParameters& params = cfg.params;
    const double period = params.period();
    const double v_ref = cfg.reference_amplitude();
    const std::array<double, 3> reference{v_ref, v_ref, v_ref};
    const Phase phase = cfg.step.phase;
    const int stride = cfg.step.compare_stride;

    SmallSigVerification v;
    v.op = solve_closed_loop_operating_point(params, cfg.ctrl, reference, cfg.h);
    const auto model = assemble_smallsignal(v.op.plant, params, cfg.ctrl, cfg.h);
    v.max_real_eig = eigenvalues(model)(0).real();

    const int spp = steps_per_period(cfg.sim, period);
    const double dt = period / spp;
    const long i_step = std::lround(cfg.step.time / dt);
    const long i_end = i_step + static_cast<long>(cfg.step.window_periods) * spp;
    // Recording starts one period (rounded up to the stride) before the step,
    // on the same stride phase as the envelope samples.
    const long lead = stride * ((spp + stride - 1) / stride);
    if (i_step < lead) throw InvalidParameter("step_time must leave one full period before the step");
    const long i_from = i_step - lead;
    v.step_time = static_cast<double>(i_step) * dt;

    SimulationConfig sim = cfg.sim;
    sim.t_end = static_cast<double>(i_end) * dt;
    sim.record_from = static_cast<double>(i_from) * dt;
    sim.record_stride = stride;
    sim.settle_periods = 0;
    sim.events.clear();
    const Trajectory baseline = simulate_closed_loop(params, cfg.ctrl, reference, sim);
    const auto channel = static_cast<SimChannel>(1 + index_of(phase));
    sim.events.push_back({v.step_time, channel, cfg.step.amplitude});
    const Trajectory stepped = simulate_closed_loop(params, cfg.ctrl, reference, sim);

    const int n = 2 * cfg.h + 1;
    PiecewiseInput du(kSmallSignalInputs * n);
    du.add(v.step_time, reference_step_input(cfg.h, phase, cfg.step.amplitude));
    const EnvelopeTrajectory env =
        envelope_response(model, du, v.step_time, sim.t_end, dt, stride);

    const auto j0 = static_cast<std::size_t>((i_step - i_from) / stride);
    auto compare = [&](StateFamily f) {
        PerturbationComparison c;
        const int col = state_index(f, phase);
        c.hss = reconstruct_perturbation(env, f, phase);
        for (std::size_t j = j0; j < stepped.size(); ++j) {
            c.time.push_back(stepped.time[j]);
            c.sim.push_back(stepped.rows[j][static_cast<std::size_t>(col)] -
                            baseline.rows[j][static_cast<std::size_t>(col)]);
        }
        if (c.hss.size() != c.sim.size()) {
            throw DimensionMismatch("envelope and simulator grids disagree (" +
                                    std::to_string(c.hss.size()) + " vs " +
                                    std::to_string(c.sim.size()) + " samples)");
        }
        c.nrmse = nrmse(c.hss, c.sim);
        for (std::size_t i = 0; i < c.hss.size(); ++i)
            c.peak_error = std::max(c.peak_error, std::abs(c.hss[i] - c.sim[i]));
        const double t_last = stepped.time.back() - period;
        for (std::size_t j = 0; j < stepped.size(); ++j) {
            const double x = std::abs(stepped.rows[j][static_cast<std::size_t>(col)]);
            if (j < j0 && stepped.time[j] >= v.step_time - period - 0.5 * dt)
                c.pre_step_peak = std::max(c.pre_step_peak, x);
            if (stepped.time[j] >= t_last - 0.5 * dt)
                c.post_step_peak = std::max(c.post_step_peak, x);
        }
        return c;
    };
    v.i_c = compare(StateFamily::i_c);
    v.i_g = compare(StateFamily::i_g);
    return v;
}

std::string smallsig_report(const RunConfig& cfg, const SmallSigVerification& v) {
    const char p = phase_letter(cfg.step.phase);
    std::string r;
    r += fmt::format("scenario verify-smallsig  h={} K_p={} K_r={} k_f={} v_ref={}\n", cfg.h,
                     format_number(cfg.ctrl.K_p), format_number(cfg.ctrl.K_r),
                     format_number(cfg.ctrl.k_f), format_number(cfg.reference_amplitude()));
    r += fmt::format("operating point: {} newton iterations, residual {:.3e}\n", v.op.iterations,
                     v.op.residual);
    r += fmt::format("max eig real {}\n", format_number(v.max_real_eig));
    r += fmt::format("step {} on ref_{} at t = {} s, window {} periods\n\n",
                     format_number(cfg.step.amplitude), p, format_number(v.step_time),
                     cfg.step.window_periods);
    auto line = [&](const char* name, const PerturbationComparison& c) {
        return fmt::format(
            "{}{}: nrmse {} (limit {}) {}  peak err {}  peak pre {} post {} {}\n", name, p,
            percent(c.nrmse), percent(kPerturbationTolerance),
            verdict(c.nrmse <= kPerturbationTolerance), format_number(c.peak_error),
            format_number(c.pre_step_peak), format_number(c.post_step_peak),
            c.grew() ? "larger" : "not larger");
    };
    r += line("i_c", v.i_c);
    r += line("i_g", v.i_g);
    r += fmt::format("overall {}\n", verdict(v.passed()));
    return r;
}

namespace {

std::array<std::optional<double>, 7> sweep_components(const OperatingPoint& op) {
    const int h = op.order;
    auto mag = [&](StateFamily f, int k) -> std::optional<double> {
        if (k > h) return std::nullopt;
        return std::abs(op.get(f, Phase::a)[k]);
    };
    return {mag(StateFamily::i_c, 0),  mag(StateFamily::i_c, 2),  mag(StateFamily::v_cu, 0),
            mag(StateFamily::v_cu, 1), mag(StateFamily::v_cu, 2), mag(StateFamily::v_cu, 3),
            mag(StateFamily::i_g, 1)};
}

}  // namespace

std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::string& key,
                                const std::vector<double>& values) {
    std::vector<SweepRow> rows;
    for (double value : values) {
        SweepRow row;
        row.value = value;
        try {
            RunConfig c = cfg;
            set_numeric(c, key, value);
            if (c.sweep.scenario == Scenario::smallsig) {
                const double v_ref = c.reference_amplitude();
                const auto cl = solve_closed_loop_operating_point(c.params, c.ctrl,
                                                                  {v_ref, v_ref, v_ref}, c.h);
                const auto model = assemble_smallsignal(cl.plant, c.params, c.ctrl, c.h);
                row.components = sweep_components(cl.plant);
                row.max_eig_real = eigenvalues(model)(0).real();
            } else {
                const auto indices = open_loop_insertion_indices(c.m, c.h, c.params.omega1);
                const auto model = assemble_steady(c.params, indices, c.h);
                const auto op = solve_steady_state(model, dc_input_vector(c.params.V_dc, c.h));
                row.components = sweep_components(op);
                row.max_eig_real = max_real_eigenvalue(model.A.dense());
            }
            row.ok = true;
        } catch (const Error& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::array<std::optional<double>, 7>> sweep_deltas(const std::vector<SweepRow>& rows) {
    std::vector<const SweepRow*> ok;
    for (const auto& r : rows)
        if (r.ok) ok.push_back(&r);
    std::vector<std::array<std::optional<double>, 7>> deltas;
    for (std::size_t i = 1; i < ok.size(); ++i) {
        std::array<std::optional<double>, 7> d;
        for (std::size_t c = 0; c < 7; ++c) {
            const auto& a = ok[i - 1]->components[c];
            const auto& b = ok[i]->components[c];
            if (a && b && *b != 0.0) d[c] = std::abs(*b - *a) / std::abs(*b);
        }
        deltas.push_back(d);
    }
    return deltas;
}

bool deltas_monotone(const std::vector<std::array<std::optional<double>, 7>>& deltas) {
    for (std::size_t c = 0; c < 7; ++c) {
        std::optional<double> prev;
        for (const auto& d : deltas) {
            if (!d[c]) continue;
            if (prev && *d[c] > *prev) return false;
            prev = d[c];
        }
    }
    return true;
}

std::filesystem::path resolve_output_dir(const std::optional<std::string>& flag,
                                         const RunConfig& cfg) {
    if (flag && !flag->empty()) return *flag;
    if (const char* env = std::getenv("HSSMMC_OUT"); env && *env) return env;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    return "hssmmc-out";
}

namespace {

void write_report(const std::filesystem::path& path, const std::string& body, bool timestamp) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
    if (timestamp) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        out << fmt::format("# generated {:%Y-%m-%dT%H:%M:%SZ}\n", fmt::gmtime(now));
    }
    out << body;
}

std::string spectrum_name(const char* prefix, StateFamily f, Phase p) {
    return fmt::format("{}_{}_{}.csv", prefix, family_name(f), phase_letter(p));
}

void write_plant_spectra(const std::filesystem::path& dir, const char* prefix,
                         const OperatingPoint& op) {
    for (StateFamily f : kFamilies)
        for (Phase p : kPhases) write_spectrum_csv(dir / spectrum_name(prefix, f, p), op.get(f, p));
}

std::string operating_point_summary(const OperatingPoint& op) {
    std::string r = fmt::format("{:<7} {:<16} {:<16} {:<16} {:<16}\n", "state", "|X_0|", "|X_1|", "|X_2|", "|X_3|");
    for (StateFamily f : kFamilies) {
        for (Phase p : kPhases) {
            const auto& x = op.get(f, p);
            r += fmt::format("{:<7}", state_label(f, p));
            for (int k = 0; k <= std::min(3, op.order); ++k)
                r += fmt::format(" {:<16}", format_number(std::abs(x[k])));
            r += "\n";
        }
    }
    return r;
}

std::string settling_summary(const Trajectory& traj) {
    std::string r = "final-period settling defect per state\n";
    const int states = traj.closed_loop ? kClosedLoopStates : kPlantStates;
    const auto labels = smallsignal_state_labels();
    for (int j = 0; j < states; ++j)
        r += fmt::format("{:<7} {:.3e}\n", labels[static_cast<std::size_t>(j)],
                         settling_defect(traj, j));
    return r;
}

int run_steady(const RunConfig& cfg, const RunOptions& opts) {
    const auto indices = open_loop_insertion_indices(cfg.m, cfg.h, cfg.params.omega1);
    const auto model = assemble_steady(cfg.params, indices, cfg.h);
    const auto op = solve_steady_state(model, dc_input_vector(cfg.params.V_dc, cfg.h));
    write_plant_spectra(opts.out_dir, "spectrum", op);
    std::string r = fmt::format("scenario steady  h={} m={}\n", cfg.h, format_number(cfg.m));
    r += fmt::format("condition estimate {:.6e}  residual {:.3e}  max eig real {}\n\n", op.condition,
                     op.residual, format_number(max_real_eigenvalue(model.A.dense())));
    r += operating_point_summary(op);
    write_report(opts.out_dir / "report.txt", r, opts.timestamp);
    return 0;
}

int run_smallsig(const RunConfig& cfg, const RunOptions& opts) {
    const double v_ref = cfg.reference_amplitude();
    const auto op =
        solve_closed_loop_operating_point(cfg.params, cfg.ctrl, {v_ref, v_ref, v_ref}, cfg.h);
    const auto model = assemble_smallsignal(op.plant, cfg.params, cfg.ctrl, cfg.h);
    const auto eig = eigenvalues(model);
    write_eigen_csv(opts.out_dir / "eigenvalues.csv", eig);
    write_plant_spectra(opts.out_dir, "spectrum", op.plant);
    std::string r = fmt::format("scenario smallsig  h={} K_p={} K_r={} k_f={} v_ref={}\n", cfg.h,
                                format_number(cfg.ctrl.K_p), format_number(cfg.ctrl.K_r),
                                format_number(cfg.ctrl.k_f), format_number(v_ref));
    r += fmt::format("operating point: {} newton iterations, residual {:.3e}\n", op.iterations,
                     op.residual);
    r += fmt::format("max eig real {}  ({} eigenvalues)\n\n", format_number(eig(0).real()),
                     eig.size());
    r += operating_point_summary(op.plant);
    write_report(opts.out_dir / "report.txt", r, opts.timestamp);
    return 0;
}

SimulationConfig recorded_run(const RunConfig& cfg) {
    SimulationConfig sim = cfg.sim;
    sim.t_end = cfg.simulation_end();
    sim.record_from = sim.t_end - cfg.record_periods * cfg.params.period();
    return sim;
}

int run_simulate(const RunConfig& cfg, const RunOptions& opts, bool closed) {
    const SimulationConfig sim = recorded_run(cfg);
    Trajectory traj;
    std::string r;
    if (closed) {
        const double v_ref = cfg.reference_amplitude();
        traj = simulate_closed_loop(cfg.params, cfg.ctrl, {v_ref, v_ref, v_ref}, sim);
        r = fmt::format("scenario simulate-closed  v_ref={}", format_number(v_ref));
    } else {
        traj = simulate_open_loop(cfg.params, cfg.m, sim);
        r = fmt::format("scenario simulate-open  m={}", format_number(cfg.m));
    }
    r += fmt::format("  dt={}  t_end={}  events={}\n\n", format_number(traj.dt),
                     format_number(sim.t_end), sim.events.size());
    r += settling_summary(traj);
    write_trajectory_csv(opts.out_dir / "trajectory.csv", traj);
    write_report(opts.out_dir / "report.txt", r, opts.timestamp);
    return 0;
}

int run_verify_steady(const RunConfig& cfg, const RunOptions& opts) {
    const auto v = verify_steady(cfg);
    for (const auto& s : v.states) {
        write_spectrum_csv(opts.out_dir / spectrum_name("spectrum_hss", s.family, s.phase), s.hss);
        write_spectrum_csv(opts.out_dir / spectrum_name("spectrum_sim", s.family, s.phase),
                           s.sim_wide);
        write_waveform_csv(opts.out_dir / spectrum_name("waveform", s.family, s.phase), s.time,
                           s.hss_wave, s.sim_wave);
    }
    write_report(opts.out_dir / "report.txt", steady_report(cfg, v), opts.timestamp);
    return v.passed() ? 0 : 1;
}

int run_verify_smallsig(const RunConfig& cfg, const RunOptions& opts) {
    const auto v = verify_smallsig(cfg);
    const Phase p = cfg.step.phase;
    write_waveform_csv(opts.out_dir / spectrum_name("perturbation", StateFamily::i_c, p), v.i_c.time,
                       v.i_c.hss, v.i_c.sim);
    write_waveform_csv(opts.out_dir / spectrum_name("perturbation", StateFamily::i_g, p), v.i_g.time,
                       v.i_g.hss, v.i_g.sim);
    write_report(opts.out_dir / "report.txt", smallsig_report(cfg, v), opts.timestamp);
    return v.passed() ? 0 : 1;
}

std::string sanitize(std::string s) {
    std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ';');
    return s;
}

int run_sweep_scenario(const RunConfig& cfg, const RunOptions& opts) {
    const auto rows = run_sweep(cfg, cfg.sweep.key, cfg.sweep.values);
    CsvWriter csv(opts.out_dir / "sweep.csv", kSweepColumns);
    for (const auto& row : rows) {
        std::vector<std::string> cells = {format_number(row.value), row.ok ? "ok" : "error"};
        for (const auto& c : row.components) cells.push_back(row.ok && c ? format_number(*c) : "");
        cells.push_back(row.ok ? format_number(row.max_eig_real) : "");
        cells.push_back(sanitize(row.error));
        csv.row(cells);
    }
    const auto deltas = sweep_deltas(rows);
    std::string r = fmt::format("scenario sweep  key={}  base scenario={}  points={}\n",
                                cfg.sweep.key, scenario_name(cfg.sweep.scenario), rows.size());
    r += "\nrelative change between consecutive points\n";
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        r += fmt::format("step {}:", i + 1);
        for (std::size_t c = 0; c < 7; ++c)
            r += fmt::format(" {}={}", kSweepColumns[c + 2],
                             deltas[i][c] ? percent(*deltas[i][c]) : std::string("-"));
        r += "\n";
    }
    r += fmt::format("deltas monotone nonincreasing: {}\n", deltas_monotone(deltas) ? "yes" : "no");
    write_report(opts.out_dir / "report.txt", r, opts.timestamp);
    return 0;
}

}  // namespace

int run_scenario(const RunConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    std::filesystem::create_directories(opts.out_dir);
    switch (cfg.scenario) {
        case Scenario::steady: return run_steady(cfg, opts);
        case Scenario::smallsig: return run_smallsig(cfg, opts);
        case Scenario::simulate_open: return run_simulate(cfg, opts, false);
        case Scenario::simulate_closed: return run_simulate(cfg, opts, true);
        case Scenario::verify_steady: return run_verify_steady(cfg, opts);
        case Scenario::verify_smallsig: return run_verify_smallsig(cfg, opts);
        case Scenario::sweep: return run_sweep_scenario(cfg, opts);
    }
    return 0;
}

}  // namespace hssmmc
