// Command-line front end: runs the four bundled cases under any
// controller, the calibration pipeline, both error studies and the
// knock-integral oracle check.

#include <CLI11.hpp>

#include <string>

#include "ca50/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"cycle-resolved combustion-phasing modeling and control"};
    app.require_subcommand(1);

    ca50::harness::RunManifest manifest;
    app.add_option("--case", manifest.case_id,
                   "case preset name, resolved as <config>/<case>.cfg");
    app.add_option("--controller", manifest.controller,
                   "adaptive | feedforward | pid");
    app.add_option("--seed", manifest.seed, "random seed, recorded in outputs");
    app.add_option("--out", manifest.out_dir, "output directory");
    app.add_option("--config", manifest.config_dir,
                   "configuration directory (presets, plant, coefficients)");
    app.add_option("--duration", manifest.duration_s,
                   "simulated time in seconds");

    auto* cmd_run =
        app.add_subcommand("run", "simulate a case and write traces/summary");
    auto* cmd_calibrate = app.add_subcommand(
        "calibrate", "fit intake and combustion coefficients from a dataset");
    cmd_calibrate->add_option("--data", manifest.dataset_path,
                              "dataset file (default: generate synthetic)");
    auto* cmd_noise = app.add_subcommand(
        "noise-study", "adaptive-control error response to CA50 noise");
    auto* cmd_sens = app.add_subcommand(
        "sensitivity", "CA50 prediction error response to input errors");
    auto* cmd_oracle = app.add_subcommand(
        "oracle-check", "knock integral vs closed form over the envelope");
    for (auto* sub : {cmd_run, cmd_calibrate, cmd_noise, cmd_sens, cmd_oracle}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ca50::harness::kExitConfigError;
    }

    if (cmd_run->parsed()) return ca50::harness::run(manifest);
    if (cmd_calibrate->parsed()) return ca50::harness::calibrate(manifest);
    if (cmd_noise->parsed()) return ca50::harness::noise_study(manifest);
    if (cmd_sens->parsed()) return ca50::harness::sensitivity(manifest);
    if (cmd_oracle->parsed()) return ca50::harness::oracle_check(manifest);
    return ca50::harness::kExitConfigError;
}
