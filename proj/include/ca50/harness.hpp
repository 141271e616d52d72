#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ca50/calibration.hpp"
#include "ca50/types.hpp"
#include "ca50/virtual_engine.hpp"

// Command-line front end plumbing: manifest resolution, case execution
// with trace/summary/plot outputs, the calibration pipeline and both
// error studies.

namespace ca50::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitPlantAbort = 3;

struct RunManifest {
    std::string case_id = "case1";  // resolves to <config_dir>/<case_id>.cfg
    std::string controller = "adaptive";
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::string config_dir = "configs";
    double duration_s = 20.0;
    std::string dataset_path;  // optional, calibrate subcommand only
};

struct SegmentSpec {
    int segment = 1;
    double t_start_s = 0.0;
    double t_end_s = 10.0;
    double ca50_ref_cad = 8.0;
    std::int64_t activation_cycle = 3;  // first closed-loop cycle
};

struct SegmentSummary {
    int cylinder_index = 0;
    int segment = 0;
    std::int64_t settling_cycle = -1;   // -1: never settled
    std::int64_t cycles_to_settle = -1; // settling_cycle - activation_cycle
    double band_lo = 0.0;               // min error, last 20% of segment
    double band_hi = 0.0;               // max error, last 20% of segment
    double band_halfwidth = 0.0;        // max(|band_lo|, |band_hi|)
    double overshoot = 0.0;             // peak |error| after activation
};

// Pure function of the record stream: per cylinder and segment, the
// settling cycle (first cycle after which |error| stays inside the band
// for the rest of the segment), the steady-state min/max error interval
// over the last 20%, and the peak error.
std::vector<SegmentSummary> summarize(const std::vector<CycleRecord>& records,
                                      const std::vector<SegmentSpec>& segments,
                                      double settle_band_cad);

std::vector<SegmentSpec> segments_from_preset(const plant::CasePreset& preset,
                                              double duration_s,
                                              std::int64_t activation_cycle);

// Config loading
plant::CasePreset load_case_preset(const std::string& path);
struct LoadedConfig {
    plant::PlantConfig plant;
    plant::ControllerConfig controller;
    std::string coefficients_path;
};
LoadedConfig load_plant_config(const std::string& config_dir);

struct NoiseStudyRow {
    int cylinder_index = 0;
    double error_std_noise_off = 0.0;
    double error_std_noise_on = 0.0;
};

struct SensitivityReport {
    std::vector<calib::SensitivityRow> rows;
};

// Subcommand entry points; return a process exit status.
int run(const RunManifest& manifest);
int noise_study(const RunManifest& manifest);
int sensitivity(const RunManifest& manifest);
int oracle_check(const RunManifest& manifest);
int calibrate(const RunManifest& manifest);

// Internals exposed for the test suites.
plant::RunResult execute_case(const RunManifest& manifest,
                              const LoadedConfig& cfg,
                              const plant::CasePreset& preset);
std::vector<NoiseStudyRow> noise_study_rows(const RunManifest& manifest,
                                            const LoadedConfig& cfg,
                                            const plant::CasePreset& case2);
struct OracleCheckResult {
    double max_gap_cad = 0.0;
    std::size_t grid_points = 0;
    std::size_t no_ignition_points = 0;
};
OracleCheckResult oracle_check_grid(const CoefficientSet& set,
                                    const EngineGeometry& geom);

}  // namespace ca50::harness
