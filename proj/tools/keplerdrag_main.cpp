// keplerdrag: command-line front end for the blowup-chart Kepler-with-drag
// toolkit.  Subcommands map onto the scenario engine:
//
//   keplerdrag simulate --config cfg.json [--out DIR] [--delta V] [--jobs N]
//   keplerdrag portrait --config cfg.json [--out DIR]
//   keplerdrag series   --config cfg.json [--out DIR] [--delta V]
//   keplerdrag manifold --config cfg.json [--out DIR] [--delta V]
//   keplerdrag verify   [--config cfg.json] [--delta V] [--inject-fault]
//
// Exit codes: 0 success, 1 config error, 2 runtime failure, 3 verification
// failure.  KEPLERDRAG_JOBS overrides the worker count when --jobs is absent.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "keplerdrag/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerify = 3;

kepler::ScenarioConfig load_checked(const std::string& path, const std::string& mode,
                                    double delta_override) {
    kepler::ScenarioConfig cfg = kepler::load_config_file(path);
    if (cfg.mode != mode)
        throw kepler::ConfigError("config mode \"" + cfg.mode + "\" does not match subcommand \"" +
                                  mode + "\"");
    if (delta_override > 0.0) cfg.delta = delta_override;
    return cfg;
}

int print_verify(const kepler::VerifyReport& rep) {
    for (const auto& c : rep.checks) {
        std::printf("%-28s %s  residual %.3e  (threshold %.1e)%s%s\n", c.name.c_str(),
                    c.pass ? "PASS" : "FAIL", c.residual, c.threshold,
                    c.detail.empty() ? "" : "  ", c.detail.c_str());
    }
    std::printf("verify: %s\n", rep.all_pass ? "ALL PASS" : "FAILED");
    return rep.all_pass ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Blowup-chart toolkit for the Kepler problem with linear drag"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    double delta_override = -1.0;
    int jobs = 0;
    bool inject_fault = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", config_path, "scenario config (JSON)");
        if (config_required) opt->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--delta", delta_override, "override the drag coefficient");
    };

    CLI::App* sim = app.add_subcommand("simulate", "batch-integrate initial conditions");
    add_common(sim, true);
    sim->add_option("--jobs", jobs, "parallel workers (default: KEPLERDRAG_JOBS or all cores)");

    CLI::App* por = app.add_subcommand("portrait", "level-set polylines of the planar flow");
    add_common(por, true);

    CLI::App* ser = app.add_subcommand("series", "invariant-graph series coefficients");
    add_common(ser, true);

    CLI::App* man = app.add_subcommand("manifold", "manifold evaluations, fibers, center fit");
    add_common(man, true);

    CLI::App* ver = app.add_subcommand("verify", "analytic-identity battery");
    add_common(ver, false);
    ver->add_flag("--inject-fault", inject_fault, "negative control: force one check to fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sim->parsed()) {
            auto cfg = load_checked(config_path, "simulate", delta_override);
            auto sum = kepler::run_simulate(cfg, out_dir, jobs);
            std::printf("simulate: %zu orbits, %d failed -> %s/summary.json\n",
                        sum.orbits.size(), sum.n_failed, out_dir.c_str());
            return sum.n_failed == 0 ? kExitOk : kExitRuntime;
        }
        if (por->parsed()) {
            auto cfg = load_checked(config_path, "portrait", delta_override);
            kepler::run_portrait(cfg, out_dir);
            std::printf("portrait: %zu levels -> %s\n", cfg.h_list.size(), out_dir.c_str());
            return kExitOk;
        }
        if (ser->parsed()) {
            auto cfg = load_checked(config_path, "series", delta_override);
            kepler::run_series(cfg, out_dir);
            std::printf("series: N = %d -> %s/coefficients.csv\n", cfg.series_N, out_dir.c_str());
            return kExitOk;
        }
        if (man->parsed()) {
            auto cfg = load_checked(config_path, "manifold", delta_override);
            kepler::run_manifold(cfg, out_dir);
            std::printf("manifold -> %s\n", out_dir.c_str());
            return kExitOk;
        }
        if (ver->parsed()) {
            double delta = delta_override > 0.0 ? delta_override : 1.0;
            bool fault = inject_fault;
            if (!config_path.empty()) {
                auto cfg = load_checked(config_path, "verify", delta_override);
                delta = cfg.delta;
                fault = fault || cfg.inject_fault;
            }
            auto rep = kepler::run_verify(kepler::Params{delta}, fault);
            return print_verify(rep);
        }
    } catch (const kepler::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitConfig;
}
