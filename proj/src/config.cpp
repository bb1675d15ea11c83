#include "hssmmc/config.hpp"

#include "hssmmc/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace hssmmc {

Scenario parse_scenario(std::string_view s) {
    if (s == "steady") return Scenario::steady;
    if (s == "smallsig") return Scenario::smallsig;
    if (s == "simulate-open") return Scenario::simulate_open;
    if (s == "simulate-closed") return Scenario::simulate_closed;
    if (s == "verify-steady") return Scenario::verify_steady;
    if (s == "verify-smallsig") return Scenario::verify_smallsig;
    if (s == "sweep") return Scenario::sweep;
    throw InvalidArgument("unknown scenario '" + std::string(s) + "'");
}

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::steady: return "steady";
        case Scenario::smallsig: return "smallsig";
        case Scenario::simulate_open: return "simulate-open";
        case Scenario::simulate_closed: return "simulate-closed";
        case Scenario::verify_steady: return "verify-steady";
        case Scenario::verify_smallsig: return "verify-smallsig";
        case Scenario::sweep: return "sweep";
    }
    return "?";
}

double RunConfig::reference_amplitude() const { return v_ref ? *v_ref : 0.5 * m * params.V_dc; }

double RunConfig::simulation_end() const {
    return t_end ? *t_end : (sim.settle_periods + record_periods) * params.period();
}

void RunConfig::validate() const {
    params.validate();
    ctrl.validate();
    if (!(m >= 0.0 && m <= 1.0)) throw ModulationOutOfRange("m must lie in [0, 1]");
    if (h < 0) throw InvalidParameter("h must be >= 0");
    if (record_periods < 2) throw InvalidParameter("record_periods must be >= 2");
    SimulationConfig s = sim;
    s.t_end = simulation_end();
    s.validate(params.period());
    if (step.window_periods < 1) throw InvalidParameter("window_periods must be >= 1");
    if (step.compare_stride < 1) throw InvalidParameter("compare_stride must be >= 1");
    if (analysis_order < h) throw InvalidParameter("analysis_order must be >= h");
    if (sweep.scenario != Scenario::steady && sweep.scenario != Scenario::smallsig)
        throw InvalidParameter("sweep scenario must be steady or smallsig");
}

namespace {

enum class Rule { any, positive, nonnegative, unit, integer_nonnegative, integer_positive };

struct NumericField {
    Rule rule;
    std::function<void(RunConfig&, double)> assign;
};

const std::map<std::string, NumericField>& numeric_table() {
    static const std::map<std::string, NumericField> table = {
        {"plant.R", {Rule::nonnegative, [](RunConfig& c, double v) { c.params.R = v; }}},
        {"plant.L", {Rule::positive, [](RunConfig& c, double v) { c.params.L = v; }}},
        {"plant.C_sm", {Rule::positive, [](RunConfig& c, double v) { c.params.C_sm = v; }}},
        {"plant.N", {Rule::integer_positive, [](RunConfig& c, double v) { c.params.N = static_cast<int>(v); }}},
        {"plant.V_dc", {Rule::nonnegative, [](RunConfig& c, double v) { c.params.V_dc = v; }}},
        {"plant.omega1", {Rule::positive, [](RunConfig& c, double v) {
             c.params.omega1 = v;
             c.ctrl.omega1 = v;
         }}},
        {"plant.R_load", {Rule::nonnegative, [](RunConfig& c, double v) { c.params.R_load = v; }}},
        {"plant.L_load", {Rule::nonnegative, [](RunConfig& c, double v) { c.params.L_load = v; }}},
        {"controller.K_p", {Rule::nonnegative, [](RunConfig& c, double v) { c.ctrl.K_p = v; }}},
        {"controller.K_r", {Rule::nonnegative, [](RunConfig& c, double v) { c.ctrl.K_r = v; }}},
        {"controller.k_f", {Rule::any, [](RunConfig& c, double v) { c.ctrl.k_f = v; }}},
        {"controller.v_ref", {Rule::nonnegative, [](RunConfig& c, double v) { c.v_ref = v; }}},
        {"model.m", {Rule::unit, [](RunConfig& c, double v) { c.m = v; }}},
        {"model.h", {Rule::integer_nonnegative, [](RunConfig& c, double v) { c.h = static_cast<int>(v); }}},
        {"simulation.dt", {Rule::positive, [](RunConfig& c, double v) { c.sim.dt = v; }}},
        {"simulation.settle_periods",
         {Rule::integer_nonnegative, [](RunConfig& c, double v) { c.sim.settle_periods = static_cast<int>(v); }}},
        {"simulation.record_periods",
         {Rule::integer_positive, [](RunConfig& c, double v) { c.record_periods = static_cast<int>(v); }}},
        {"simulation.t_end", {Rule::positive, [](RunConfig& c, double v) { c.t_end = v; }}},
        {"smallsig.step_time", {Rule::nonnegative, [](RunConfig& c, double v) { c.step.time = v; }}},
        {"smallsig.step_amplitude", {Rule::any, [](RunConfig& c, double v) { c.step.amplitude = v; }}},
        {"smallsig.window_periods",
         {Rule::integer_positive, [](RunConfig& c, double v) { c.step.window_periods = static_cast<int>(v); }}},
        {"smallsig.compare_stride",
         {Rule::integer_positive, [](RunConfig& c, double v) { c.step.compare_stride = static_cast<int>(v); }}},
        {"verify.analysis_order",
         {Rule::integer_positive, [](RunConfig& c, double v) { c.analysis_order = static_cast<int>(v); }}},
    };
    return table;
}

const std::set<std::string> kTextKeys = {"simulation.events", "smallsig.step_phase",
                                         "sweep.scenario",    "sweep.key",
                                         "sweep.values",      "run.scenario",
                                         "run.output_dir"};

const std::vector<std::string> kRequired = {"plant.R",      "plant.L",      "plant.C_sm",
                                            "plant.N",      "plant.V_dc",   "plant.omega1",
                                            "plant.R_load", "model.m"};

std::string check_rule(Rule rule, double v) {
    if (!std::isfinite(v)) return "must be finite";
    switch (rule) {
        case Rule::any: return {};
        case Rule::positive: return v > 0.0 ? "" : "must be > 0";
        case Rule::nonnegative: return v >= 0.0 ? "" : "must be >= 0";
        case Rule::unit: return v >= 0.0 && v <= 1.0 ? "" : "must lie in [0, 1]";
        case Rule::integer_nonnegative:
            return v >= 0.0 && v == std::floor(v) && v < 1e9 ? "" : "must be a nonnegative integer";
        case Rule::integer_positive:
            return v >= 1.0 && v == std::floor(v) && v < 1e9 ? "" : "must be a positive integer";
    }
    return {};
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

void assign_text(RunConfig& cfg, const std::string& key, std::string_view value, int line) {
    try {
        if (key == "simulation.events") {
            cfg.sim.events.clear();
            for (auto item : split(value, ',')) {
                const auto parts = split(item, ':');
                if (parts.size() != 3) throw InvalidArgument("event must be time:channel:delta");
                const auto t = parse_number(parts[0]);
                const auto d = parse_number(parts[2]);
                if (!t || !d) throw InvalidArgument("event time and delta must be numbers");
                cfg.sim.events.push_back({*t, parse_channel(parts[1]), *d});
            }
        } else if (key == "smallsig.step_phase") {
            cfg.step.phase = parse_phase(value);
        } else if (key == "sweep.scenario") {
            cfg.sweep.scenario = parse_scenario(value);
        } else if (key == "sweep.key") {
            if (!numeric_table().count(std::string(value)))
                throw InvalidArgument("sweep key must be a numeric key");
            cfg.sweep.key = std::string(value);
        } else if (key == "sweep.values") {
            cfg.sweep.values.clear();
            for (auto item : split(value, ',')) {
                const auto v = parse_number(item);
                if (!v) throw InvalidArgument("'" + std::string(item) + "' is not a number");
                cfg.sweep.values.push_back(*v);
            }
        } else if (key == "run.scenario") {
            cfg.scenario = parse_scenario(value);
        } else if (key == "run.output_dir") {
            cfg.output_dir = std::string(value);
        }
    } catch (const SchemaViolation&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw SchemaViolation(e.what(), line, key);
    }
}

}  // namespace

std::vector<std::string> numeric_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : numeric_table()) keys.push_back(k);
    return keys;
}

void set_numeric(RunConfig& cfg, const std::string& key, double value) {
    const auto it = numeric_table().find(key);
    if (it == numeric_table().end()) throw SchemaViolation("not a numeric configuration key", 0, key);
    if (auto err = check_rule(it->second.rule, value); !err.empty())
        throw SchemaViolation(err, 0, key);
    it->second.assign(cfg, value);
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaViolation(e.what(), 0, key);
    }
}

RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::map<std::string, int> seen;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        std::string_view raw = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        // Comments start at '#' or ';' at line start or after whitespace.
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if ((raw[i] == '#' || raw[i] == ';') && (i == 0 || raw[i - 1] == ' ' || raw[i - 1] == '\t')) {
                raw = raw.substr(0, i);
                break;
            }
        }
        const auto line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw SchemaViolation("unterminated section header", line_no);
            section = std::string(trim(line.substr(1, line.size() - 2)));
            static const std::set<std::string> sections = {"plant", "controller", "model", "simulation",
                                                           "smallsig", "verify", "sweep", "run"};
            if (!sections.count(section))
                throw SchemaViolation("unknown section", line_no, section);
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw SchemaViolation("expected key = value", line_no);
        if (section.empty()) throw SchemaViolation("key outside any section", line_no);
        const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));

        if (auto [it, inserted] = seen.emplace(key, line_no); !inserted) {
            throw SchemaViolation("duplicate key (first set on line " + std::to_string(it->second) + ")",
                                  line_no, key);
        }

        if (const auto it = numeric_table().find(key); it != numeric_table().end()) {
            const auto v = parse_number(value);
            if (!v) throw SchemaViolation("'" + std::string(value) + "' is not a number", line_no, key);
            if (auto err = check_rule(it->second.rule, *v); !err.empty())
                throw SchemaViolation(err, line_no, key);
            it->second.assign(cfg, *v);
        } else if (kTextKeys.count(key)) {
            assign_text(cfg, key, value, line_no);
        } else {
            throw SchemaViolation("unknown key", line_no, key);
        }
    }

    for (const auto& key : kRequired) {
        if (!seen.count(key)) throw SchemaViolation("missing required key", 0, key);
    }
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaViolation(e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& name_or_path) {
    if (const auto preset = bundled_preset(name_or_path)) return parse_config(*preset);
    std::ifstream in(name_or_path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open config '" + name_or_path + "' (not a file or preset)");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace hssmmc
