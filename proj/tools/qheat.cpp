// qheat command-line front end: run / reproduce / scan / validate.

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qheat/analysis.hpp"
#include "qheat/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

int classify(const std::exception& e) {
    if (dynamic_cast<const qheat::app::ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const qheat::app::IoError*>(&e)) return kExitIo;
    return kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantum-heat statistics for few-level systems under repeated "
                 "projective measurements"};
    app.require_subcommand(1);

    qheat::app::GlobalOptions opts;
    std::uint64_t seed_arg = 0;
    unsigned workers_arg = 0;
    std::string format_arg;
    app.add_option("--seed", seed_arg, "override the master seed")
        ->each([&](const std::string&) { opts.seed = seed_arg; });
    app.add_option("--workers", workers_arg, "worker thread count (0 = hardware)")
        ->each([&](const std::string&) { opts.workers = workers_arg; });
    app.add_option("--format", format_arg, "dataset format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->each([&](const std::string&) { opts.format = format_arg; });
    app.add_flag("--quiet", opts.quiet, "suppress progress output");

    std::string config_path, spec_path, figure_id, out_dir = ".";

    CLI::App* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("config", config_path, "config file")->required();

    CLI::App* reproduce = app.add_subcommand("reproduce", "emit a figure dataset");
    reproduce->add_option("figure", figure_id, "figure id (fig1 .. fig6c)")->required();
    reproduce->add_option("--out", out_dir, "output directory");

    CLI::App* scan = app.add_subcommand("scan", "beta_eff scan from a JSON spec");
    scan->add_option("spec", spec_path, "scan spec file")->required();

    CLI::App* validate = app.add_subcommand("validate", "schema-check a config file");
    validate->add_option("config", config_path, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            qheat::app::ExperimentConfig cfg = qheat::app::load_config(config_path);
            qheat::app::apply_overrides(cfg, opts);
            const nlohmann::json summary = qheat::app::run_experiment(cfg);
            if (!opts.quiet) std::cout << summary.dump(2) << "\n";
        } else if (reproduce->parsed()) {
            qheat::app::reproduce_figure(figure_id, out_dir, opts);
            if (!opts.quiet) std::cout << "wrote " << figure_id << " dataset to " << out_dir << "\n";
        } else if (scan->parsed()) {
            std::ifstream is(spec_path);
            if (!is) throw qheat::app::IoError("cannot read scan spec " + spec_path);
            nlohmann::json spec;
            try {
                is >> spec;
            } catch (const nlohmann::json::exception& e) {
                throw qheat::app::ConfigError(std::string("scan: invalid JSON: ") + e.what());
            }
            qheat::app::run_scan(spec, opts);
            if (!opts.quiet) std::cout << "scan complete\n";
        } else if (validate->parsed()) {
            (void)qheat::app::load_config(config_path);
            if (!opts.quiet) std::cout << "config ok\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify(e);
    }
    return kExitOk;
}
