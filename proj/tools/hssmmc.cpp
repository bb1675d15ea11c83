#include "hssmmc/config.hpp"
#include "hssmmc/errors.hpp"
#include "hssmmc/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    CLI::App app{"Harmonic state-space analysis of modular multilevel converters"};
    app.set_help_flag("--help", "print this help and exit");
    app.set_version_flag("--version", "hssmmc 1.0");

    std::string scenario;
    std::string config;
    std::optional<std::string> out;
    bool no_timestamp = false;
    std::optional<int> h;
    std::optional<double> m;
    std::optional<std::string> sweep_key;
    std::vector<double> sweep_values;
    bool values_given = false;

    app.add_option("scenario", scenario,
                   "steady | smallsig | simulate-open | simulate-closed | verify-steady | "
                   "verify-smallsig | sweep")
        ->required();
    app.add_option("--config,-c", config, "config file or bundled preset name")->required();
    app.add_option("--out,-o", out, "output directory");
    app.add_flag("--no-timestamp", no_timestamp, "omit the timestamp line from report.txt");
    app.add_option("--h", h, "harmonic truncation order");
    app.add_option("--m", m, "modulation index");
    app.add_option("--key", sweep_key, "swept configuration key, e.g. model.h");
    auto* values_opt = app.add_option("--values", sweep_values, "swept values")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    values_given = values_opt->count() > 0;

    try {
        hssmmc::RunConfig cfg = hssmmc::load_config(config);
        cfg.scenario = hssmmc::parse_scenario(scenario);
        if (h) hssmmc::set_numeric(cfg, "model.h", *h);
        if (m) hssmmc::set_numeric(cfg, "model.m", *m);
        if (sweep_key) {
            const auto keys = hssmmc::numeric_keys();
            if (std::find(keys.begin(), keys.end(), *sweep_key) == keys.end())
                throw hssmmc::SchemaViolation("not a numeric configuration key", 0, *sweep_key);
            cfg.sweep.key = *sweep_key;
        }
        if (values_given) cfg.sweep.values = sweep_values;

        hssmmc::RunOptions opts;
        opts.out_dir = hssmmc::resolve_output_dir(out, cfg);
        opts.timestamp = !no_timestamp;
        const int code = hssmmc::run_scenario(cfg, opts);
        std::fputs(fmt::format("{}: {} ({})\n", scenario, code == 0 ? "ok" : "threshold failure",
                               opts.out_dir.string())
                       .c_str(),
                   stdout);
        return code;
    } catch (const hssmmc::InvalidArgument& e) {
        std::fputs(fmt::format("configuration error: {}\n", e.what()).c_str(), stderr);
        return 2;
    } catch (const hssmmc::NumericalError& e) {
        std::fputs(fmt::format("numerical failure: {}\n", e.what()).c_str(), stderr);
        return 3;
    } catch (const std::exception& e) {
        std::fputs(fmt::format("error: {}\n", e.what()).c_str(), stderr);
        return 3;
    }
}
