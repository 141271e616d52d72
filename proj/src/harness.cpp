#include "ca50/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "ca50/combustion.hpp"
#include "ca50/controllers.hpp"
#include "ca50/errors.hpp"
#include "ca50/gas_properties.hpp"
#include "ca50/io.hpp"
#include "ca50/svg_plot.hpp"

namespace ca50::harness {

namespace fs = std::filesystem;

// --- summaries ----------------------------------------------------------

std::vector<SegmentSummary> summarize(const std::vector<CycleRecord>& records,
                                      const std::vector<SegmentSpec>& segments,
                                      double settle_band_cad) {
    if (records.empty()) {
        throw ModelDomainError("summarize: empty record stream");
    }
    std::vector<SegmentSummary> out;
    std::map<int, bool> cylinders;
    for (const auto& r : records) cylinders[r.cylinder_index] = true;

    for (const auto& seg : segments) {
        std::int64_t activation = seg.activation_cycle;
        if (activation < 0) {
            activation = std::numeric_limits<std::int64_t>::max();
            for (const auto& r : records) {
                if (r.sim_time_s >= seg.t_start_s) {
                    activation = std::min(activation, r.cycle_index);
                }
            }
        }
        const double tail_start =
            seg.t_end_s - 0.2 * (seg.t_end_s - seg.t_start_s);

        for (const auto& [cyl, unused] : cylinders) {
            (void)unused;
            SegmentSummary s;
            s.cylinder_index = cyl;
            s.segment = seg.segment;
            s.band_lo = std::numeric_limits<double>::infinity();
            s.band_hi = -std::numeric_limits<double>::infinity();

            std::int64_t last_out_of_band = -1;
            std::int64_t last_cycle = -1;
            bool any = false;
            for (const auto& r : records) {
                if (r.cylinder_index != cyl) continue;
                if (r.sim_time_s < seg.t_start_s || r.sim_time_s >= seg.t_end_s)
                    continue;
                if (r.cycle_index < activation) continue;
                last_cycle = std::max(last_cycle, r.cycle_index);
                if (r.status != CycleStatus::ok) {
                    last_out_of_band = std::max(last_out_of_band, r.cycle_index);
                    continue;
                }
                any = true;
                const double err = r.ca50_true_cad - seg.ca50_ref_cad;
                s.overshoot = std::max(s.overshoot, std::abs(err));
                if (std::abs(err) > settle_band_cad) {
                    last_out_of_band = std::max(last_out_of_band, r.cycle_index);
                }
                if (r.sim_time_s >= tail_start) {
                    s.band_lo = std::min(s.band_lo, err);
                    s.band_hi = std::max(s.band_hi, err);
                }
            }
            if (!any) continue;
            if (last_out_of_band < 0) {
                s.settling_cycle = activation;
            } else if (last_out_of_band < last_cycle) {
                s.settling_cycle = last_out_of_band + 1;
            } else {
                s.settling_cycle = -1;  // never settled
            }
            s.cycles_to_settle =
                s.settling_cycle >= 0 ? s.settling_cycle - activation : -1;
            if (!std::isfinite(s.band_lo)) {
                s.band_lo = s.band_hi = 0.0;
            }
            s.band_halfwidth = std::max(std::abs(s.band_lo), std::abs(s.band_hi));
            out.push_back(s);
        }
    }
    return out;
}

std::vector<SegmentSpec> segments_from_preset(const plant::CasePreset& preset,
                                              double duration_s,
                                              std::int64_t activation_cycle) {
    std::vector<SegmentSpec> segs;
    segs.push_back({1, 0.0, std::min(duration_s, preset.segment_time_s),
                    preset.first.ca50_ref_cad, activation_cycle});
    if (duration_s > preset.segment_time_s) {
        segs.push_back({2, preset.segment_time_s, duration_s,
                        preset.second.ca50_ref_cad, -1});
    }
    return segs;
}

// --- config loading -------------------------------------------------------

plant::CasePreset load_case_preset(const std::string& path) {
    const auto kv = io::KeyValueFile::parse_file(path);
    kv.require_known_keys({"name", "speed_rpm", "charge_temp_k",
                           "boost_target_bar", "phi", "egr_fraction",
                           "ca50_ref_cad", "segment_time_s", "ramp_time_s"});
    plant::CasePreset preset;
    preset.name = kv.get_string("name");
    auto two = [&](const std::string& key) { return kv.get_doubles(key, 2); };
    const auto n = two("speed_rpm");
    const auto t = two("charge_temp_k");
    const auto b = two("boost_target_bar");
    const auto phi = two("phi");
    const auto egr = two("egr_fraction");
    const auto ref = two("ca50_ref_cad");
    preset.first = {n[0], t[0], b[0], phi[0], egr[0], ref[0]};
    preset.second = {n[1], t[1], b[1], phi[1], egr[1], ref[1]};
    preset.segment_time_s = kv.get_double_or("segment_time_s", 10.0);
    preset.ramp_time_s = kv.get_double_or("ramp_time_s", 0.5);
    return preset;
}

LoadedConfig load_plant_config(const std::string& config_dir) {
    const std::string path =
        (fs::path(config_dir) / "plant_default.cfg").string();
    const auto kv = io::KeyValueFile::parse_file(path);
    kv.require_known_keys(
        {"coefficients", "manifold_damped_period_s", "manifold_damping_ratio",
         "egr_tau_s", "ca50_noise_std", "ca50_noise_bound",
         "noise_study_ca50_std", "noise_study_ca50_bound", "o2_noise_std",
         "x_r_jitter", "mismatch_scale", "mismatch_c2_fraction", "ambient_o2",
         "firing_order", "trace_step_cad", "misfire_abort_streak", "pid_kp",
         "pid_ki", "pid_kd", "pid_integral_limit", "default_soi_cad",
         "x_r_bar", "activation_cycle", "wiebe_a", "wiebe_b"});

    LoadedConfig cfg;
    cfg.coefficients_path =
        (fs::path(config_dir) / kv.get_string("coefficients")).string();
    cfg.plant.model = io::load_coefficients(cfg.coefficients_path);
    cfg.plant.manifold_damped_period_s =
        kv.get_double_or("manifold_damped_period_s", 2.6);
    cfg.plant.manifold_damping_ratio =
        kv.get_double_or("manifold_damping_ratio", 0.28);
    cfg.plant.egr_tau_s = kv.get_double_or("egr_tau_s", plant::kEgrActuatorTau);
    cfg.plant.ca50_noise_std = kv.get_double_or("ca50_noise_std", 0.0);
    cfg.plant.ca50_noise_bound = kv.get_double_or("ca50_noise_bound", 0.5);
    cfg.plant.o2_noise_std = kv.get_double_or("o2_noise_std", 0.0);
    cfg.plant.x_r_jitter = kv.get_double_or("x_r_jitter", 0.0);
    cfg.plant.mismatch_scale = kv.get_double_or("mismatch_scale", 1.0);
    if (kv.has("mismatch_c2_fraction")) {
        cfg.plant.mismatch_c2_fraction =
            kv.get_doubles("mismatch_c2_fraction", kNumCylinders);
    }
    cfg.plant.ambient_o2 =
        kv.get_double_or("ambient_o2", gas::kDefaultAmbientO2);
    if (kv.has("firing_order")) {
        const auto fo = kv.get_doubles("firing_order", kNumCylinders);
        cfg.plant.firing_order.clear();
        for (double v : fo) cfg.plant.firing_order.push_back(static_cast<int>(v));
    }
    cfg.plant.trace_step_cad = kv.get_double_or("trace_step_cad", 0.1);
    cfg.plant.misfire_abort_streak =
        static_cast<int>(kv.get_double_or("misfire_abort_streak", 5));
    cfg.plant.wiebe.a = kv.get_double_or("wiebe_a", 6.9078);
    cfg.plant.wiebe.b = kv.get_double_or("wiebe_b", 1.5);

    cfg.controller.pid.kp = kv.get_double_or("pid_kp", 0.45);
    cfg.controller.pid.ki = kv.get_double_or("pid_ki", 0.25);
    cfg.controller.pid.kd = kv.get_double_or("pid_kd", 0.05);
    cfg.controller.pid.integral_limit =
        kv.get_double_or("pid_integral_limit", 40.0);
    cfg.controller.default_soi_cad = kv.get_double_or("default_soi_cad", -5.0);
    cfg.controller.x_r_bar =
        kv.get_double_or("x_r_bar", control::kFeedforwardResidualMean);
    cfg.controller.activation_cycle =
        static_cast<int>(kv.get_double_or("activation_cycle", 3));

    cfg.plant.validate();
    return cfg;
}

// --- output helpers --------------------------------------------------------

namespace {

std::string checksum_hex(std::uint64_t checksum) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(checksum));
    return buf;
}

void write_attribution(std::ofstream& out, const io::RecordFileHeader& h) {
    out << "# seed=" << h.seed << "\n";
    out << "# preset=" << h.preset << "\n";
    out << "# controller=" << h.controller << "\n";
    out << "# coefficients_checksum=" << checksum_hex(h.coefficients_checksum)
        << "\n";
}

void write_summary_files(const std::string& out_dir,
                         const io::RecordFileHeader& header,
                         const std::vector<SegmentSummary>& claim_summary,
                         const std::vector<SegmentSummary>& settle_summary,
                         double claim_band) {
    // settle_summary carries settling into +/-1 CAD; claim_summary the
    // controller-specific steady-state claim band
    std::ofstream txt(fs::path(out_dir) / "summary.txt");
    std::ofstream csv(fs::path(out_dir) / "summary.csv");
    if (!txt || !csv) throw ConfigError("cannot write summary files");
    write_attribution(txt, header);
    write_attribution(csv, header);
    txt << "per-cylinder segment summary (errors in CAD)\n";
    txt << "settle_1cad = cycles after activation until error stays within "
           "+/-1;  settle_claim = same for +/-"
        << io::format_double(claim_band) << "\n\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-9s %-8s %-12s %-13s %-10s %-10s %-10s %-9s\n",
                  "cylinder", "segment", "settle_1cad", "settle_claim",
                  "band_lo", "band_hi", "halfwidth", "overshoot");
    txt << line;
    csv << "cylinder,segment,settle_1cad_cycles,settle_claim_cycles,band_lo,"
           "band_hi,band_halfwidth,overshoot\n";
    for (std::size_t i = 0; i < settle_summary.size(); ++i) {
        const auto& s1 = settle_summary[i];
        const auto& sc = claim_summary[i];
        std::snprintf(line, sizeof(line),
                      "%-9d %-8d %-12lld %-13lld %-10.4f %-10.4f %-10.4f %-9.4f\n",
                      s1.cylinder_index, s1.segment,
                      static_cast<long long>(s1.cycles_to_settle),
                      static_cast<long long>(sc.cycles_to_settle), s1.band_lo,
                      s1.band_hi, s1.band_halfwidth, s1.overshoot);
        txt << line;
        csv << s1.cylinder_index << "," << s1.segment << ","
            << s1.cycles_to_settle << "," << sc.cycles_to_settle << ","
            << io::format_double(s1.band_lo) << ","
            << io::format_double(s1.band_hi) << ","
            << io::format_double(s1.band_halfwidth) << ","
            << io::format_double(s1.overshoot) << "\n";
    }
}

std::string attribution_text(const io::RecordFileHeader& h) {
    std::ostringstream ss;
    ss << "seed=" << h.seed << "\n";
    ss << "preset=" << h.preset << "\n";
    ss << "controller=" << h.controller << "\n";
    ss << "coefficients_checksum=" << checksum_hex(h.coefficients_checksum)
       << "\n";
    return ss.str();
}

void write_plots(const std::string& out_dir,
                 const std::vector<CycleRecord>& records,
                 const plant::CasePreset& preset, double duration_s,
                 const io::RecordFileHeader& header) {
    std::vector<plot::Series> ca50_series(kNumCylinders + 1);
    for (int c = 0; c < kNumCylinders; ++c) {
        ca50_series[static_cast<std::size_t>(c)].label =
            "cylinder " + std::to_string(c + 1);
    }
    plot::Series& ref = ca50_series[kNumCylinders];
    ref.label = "reference";
    ref.x = {0.0, preset.segment_time_s, preset.segment_time_s, duration_s};
    ref.y = {preset.first.ca50_ref_cad, preset.first.ca50_ref_cad,
             preset.second.ca50_ref_cad, preset.second.ca50_ref_cad};

    plot::Series soi1;
    soi1.label = "cylinder 1 SOI";
    for (const auto& r : records) {
        if (r.status != CycleStatus::ok) continue;
        auto& s = ca50_series[static_cast<std::size_t>(r.cylinder_index - 1)];
        s.x.push_back(r.sim_time_s);
        s.y.push_back(r.ca50_true_cad);
        if (r.cylinder_index == 1) {
            soi1.x.push_back(r.sim_time_s);
            soi1.y.push_back(r.soi_cad);
        }
    }
    const std::string attribution = attribution_text(header);
    plot::write_line_chart((fs::path(out_dir) / "ca50.svg").string(),
                           "CA50 per cylinder", "time [s]", "CA50 [CAD aTDC]",
                           ca50_series, attribution);
    plot::write_line_chart((fs::path(out_dir) / "soi_cyl1.svg").string(),
                           "Commanded SOI, cylinder 1", "time [s]",
                           "SOI [CAD aTDC]", {soi1}, attribution);
}

io::RecordFileHeader make_header(const RunManifest& m,
                                 const LoadedConfig& cfg,
                                 const std::string& preset_name) {
    io::RecordFileHeader h;
    h.seed = m.seed;
    h.preset = preset_name;
    h.controller = m.controller;
    h.coefficients_checksum = io::fnv1a_file_checksum(cfg.coefficients_path);
    return h;
}

double claim_band_for(plant::ControllerKind kind) {
    return kind == plant::ControllerKind::adaptive ? 0.1 : 1.3;
}

}  // namespace

plant::RunResult execute_case(const RunManifest& manifest,
                              const LoadedConfig& cfg,
                              const plant::CasePreset& preset) {
    const auto kind = plant::controller_from_name(manifest.controller);
    return plant::run_case(preset, kind, cfg.plant, cfg.controller,
                           manifest.duration_s, manifest.seed);
}

int run(const RunManifest& manifest) {
    try {
        const LoadedConfig cfg = load_plant_config(manifest.config_dir);
        const std::string preset_path =
            (fs::path(manifest.config_dir) / (manifest.case_id + ".cfg"))
                .string();
        if (!fs::exists(preset_path)) {
            throw ConfigError("unknown case '" + manifest.case_id +
                              "': no preset file " + preset_path);
        }
        const auto preset = load_case_preset(preset_path);
        const auto kind = plant::controller_from_name(manifest.controller);
        const auto result = execute_case(manifest, cfg, preset);

        fs::create_directories(manifest.out_dir);
        const auto header = make_header(manifest, cfg, preset.name);
        io::write_records_csv(
            (fs::path(manifest.out_dir) / "records.csv").string(), header,
            result.records);

        const auto segments = segments_from_preset(
            preset, manifest.duration_s, cfg.controller.activation_cycle);
        const auto settle = summarize(result.records, segments, 1.0);
        const auto claim =
            summarize(result.records, segments, claim_band_for(kind));
        write_summary_files(manifest.out_dir, header, claim, settle,
                            claim_band_for(kind));
        try {
            write_plots(manifest.out_dir, result.records, preset,
                        manifest.duration_s, header);
        } catch (const std::exception& e) {
            std::cerr << "warning: plot output failed (" << e.what()
                      << "); CSV outputs are complete\n";
        }
        std::cout << "wrote " << result.records.size() << " records to "
                  << manifest.out_dir << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const PlantAbort& e) {
        std::cerr << "plant abort: " << e.what() << "\n";
        return kExitPlantAbort;
    }
}

std::vector<NoiseStudyRow> noise_study_rows(const RunManifest& manifest,
                                            const LoadedConfig& cfg,
                                            const plant::CasePreset& case2) {
    // first operating condition only
    plant::CasePreset preset = case2;
    preset.second = preset.first;

    RunManifest m = manifest;
    m.duration_s = std::min(manifest.duration_s, preset.segment_time_s);

    LoadedConfig off = cfg;
    off.plant.ca50_noise_std = 0.0;
    const auto r_off = execute_case(m, off, preset);
    const auto r_on = execute_case(m, cfg, preset);

    auto per_cyl_std = [&](const plant::RunResult& rr) {
        std::array<double, kNumCylinders> sum{}, sum2{};
        std::array<int, kNumCylinders> n{};
        for (const auto& r : rr.records) {
            if (r.status != CycleStatus::ok) continue;
            if (r.cycle_index < cfg.controller.activation_cycle) continue;
            const double e = r.ca50_true_cad - preset.first.ca50_ref_cad;
            const auto c = static_cast<std::size_t>(r.cylinder_index - 1);
            sum[c] += e;
            sum2[c] += e * e;
            ++n[c];
        }
        std::array<double, kNumCylinders> out{};
        for (std::size_t c = 0; c < kNumCylinders; ++c) {
            if (n[c] == 0) continue;
            const double mean = sum[c] / n[c];
            out[c] = std::sqrt(std::max(0.0, sum2[c] / n[c] - mean * mean));
        }
        return out;
    };
    const auto s_off = per_cyl_std(r_off);
    const auto s_on = per_cyl_std(r_on);

    std::vector<NoiseStudyRow> rows;
    for (int c = 0; c < kNumCylinders; ++c) {
        rows.push_back({c + 1, s_off[static_cast<std::size_t>(c)],
                        s_on[static_cast<std::size_t>(c)]});
    }
    return rows;
}

int noise_study(const RunManifest& manifest) {
    try {
        if (manifest.controller != "adaptive") {
            throw ConfigError("noise-study requires the adaptive controller");
        }
        LoadedConfig cfg = load_plant_config(manifest.config_dir);
        // the study's noise magnitude is configured separately from the
        // default (noise-free) run configuration
        const auto kv = io::KeyValueFile::parse_file(
            (fs::path(manifest.config_dir) / "plant_default.cfg").string());
        cfg.plant.ca50_noise_std = kv.get_double_or("noise_study_ca50_std", 0.25);
        cfg.plant.ca50_noise_bound =
            kv.get_double_or("noise_study_ca50_bound", 0.5);

        const auto preset = load_case_preset(
            (fs::path(manifest.config_dir) / "case2.cfg").string());
        const auto rows = noise_study_rows(manifest, cfg, preset);

        fs::create_directories(manifest.out_dir);
        const auto header = make_header(manifest, cfg, preset.name);
        std::ofstream txt(fs::path(manifest.out_dir) / "noise_study.txt");
        std::ofstream csv(fs::path(manifest.out_dir) / "noise_study.csv");
        if (!txt || !csv) throw ConfigError("cannot write noise study report");
        write_attribution(txt, header);
        write_attribution(csv, header);
        txt << "CA50 error standard deviation per cylinder, whole run "
               "including the transient\n\n";
        char line[160];
        std::snprintf(line, sizeof(line), "%-9s %-22s %-22s\n", "cylinder",
                      "std_without_noise", "std_with_noise");
        txt << line;
        csv << "cylinder,error_std_noise_off,error_std_noise_on\n";
        for (const auto& r : rows) {
            std::snprintf(line, sizeof(line), "%-9d %-22.4f %-22.4f\n",
                          r.cylinder_index, r.error_std_noise_off,
                          r.error_std_noise_on);
            txt << line;
            csv << r.cylinder_index << ","
                << io::format_double(r.error_std_noise_off) << ","
                << io::format_double(r.error_std_noise_on) << "\n";
        }
        std::cout << "noise study written to " << manifest.out_dir << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const PlantAbort& e) {
        std::cerr << "plant abort: " << e.what() << "\n";
        return kExitPlantAbort;
    }
}

int sensitivity(const RunManifest& manifest) {
    try {
        const LoadedConfig cfg = load_plant_config(manifest.config_dir);
        const auto data = calib::generate_synthetic_dataset(
            cfg.plant.model, cfg.plant.geometry, 0.3, manifest.seed);

        // calibrate from the nominal values (the dataset's regime), then
        // study the calibrated model's input-error response
        calib::OptimizerConfig opt;
        opt.max_iterations = 4000;
        std::array<IntakeCoefficients, kNumCylinders> init{};
        for (int c = 0; c < kNumCylinders; ++c) {
            init[static_cast<std::size_t>(c)] =
                cfg.plant.model.intake[static_cast<std::size_t>(c)];
        }
        const auto intake_fits = calib::calibrate_intake(data, init, opt);
        const auto ca50_fit = calib::calibrate_ca50(
            data, intake_fits, cfg.plant.model.combustion, cfg.plant.geometry,
            opt);
        CoefficientSet fitted;
        for (const auto& f : intake_fits) {
            fitted.intake[static_cast<std::size_t>(f.cylinder_index - 1)] =
                f.coeffs;
        }
        fitted.combustion = ca50_fit.coeffs;

        const auto table = calib::error_response_study(
            data, fitted, cfg.plant.geometry, calib::default_perturbations());

        fs::create_directories(manifest.out_dir);
        const auto header = make_header(manifest, cfg, "synthetic-dataset");
        std::ofstream txt(fs::path(manifest.out_dir) / "sensitivity.txt");
        std::ofstream csv(fs::path(manifest.out_dir) / "sensitivity.csv");
        if (!txt || !csv) throw ConfigError("cannot write sensitivity report");
        write_attribution(txt, header);
        write_attribution(csv, header);
        txt << "CA50 prediction error response to input errors\n\n";
        char line[160];
        std::snprintf(line, sizeof(line), "%-14s %-12s %-12s\n", "error_source",
                      "error_std", "error_max");
        txt << line;
        csv << "error_source,error_std,error_max\n";
        for (const auto& row : table) {
            std::snprintf(line, sizeof(line), "%-14s %-12.4f %-12.4f\n",
                          row.label.c_str(), row.error_std, row.error_max);
            txt << line;
            csv << row.label << "," << io::format_double(row.error_std) << ","
                << io::format_double(row.error_max) << "\n";
        }
        std::cout << "sensitivity study written to " << manifest.out_dir
                  << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const OptimizerFailure& e) {
        std::cerr << "calibration failed: " << e.what() << "\n";
        return kExitConfigError;
    }
}

OracleCheckResult oracle_check_grid(const CoefficientSet& set,
                                    const EngineGeometry& geom) {
    const std::vector<double> ns = {1200, 1275, 1350, 1425, 1500};
    const std::vector<double> ps = {1.43, 1.815, 2.2, 2.585, 2.97};
    const std::vector<double> phis = {0.5, 0.6, 0.7, 0.8, 0.9};
    const std::vector<double> sois = {-10, -7.5, -5, -2.5, 0};
    const std::vector<double> egrs = {0.0, 0.25, 0.5};
    const double t_im = 318.0;  // mid-envelope; T_IVC barely depends on it

    const auto& ic = set.intake[0];
    const auto& cc = set.combustion;
    const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);

    OracleCheckResult res;
    for (double n : ns)
     for (double p : ps)
      for (double phi : phis)
       for (double soi : sois)
        for (double egr : egrs) {
            const double t_ivc = gas::ivc_temperature(ic, t_im, p, phi, n, egr);
            const double p_ivc = gas::ivc_pressure(ic, t_im, n, p);
            const GasState ivc{p_ivc, t_ivc, geom.ivc_cad};
            const GasState soi_state = gas::polytropic_compress(
                ivc, v_ivc, gas::cylinder_volume(geom, soi), cc.k_c, soi);
            const double simplified = combustion::soc_closed_form(
                soi, soi_state, n, egr, phi, cc);
            const auto trace = combustion::make_polytropic_trace(
                geom, ivc, geom.ivc_cad, soi, combustion::kTraceEnd,
                combustion::kOracleTraceStep, cc.k_c);
            ++res.grid_points;
            try {
                const double full = combustion::soc_knock_integral(
                    trace, soi, n, egr, phi, cc);
                res.max_gap_cad =
                    std::max(res.max_gap_cad, std::abs(full - simplified));
            } catch (const NoIgnitionError&) {
                ++res.no_ignition_points;
            }
        }
    return res;
}

int oracle_check(const RunManifest& manifest) {
    try {
        const LoadedConfig cfg = load_plant_config(manifest.config_dir);
        const auto res =
            oracle_check_grid(cfg.plant.model, cfg.plant.geometry);
        fs::create_directories(manifest.out_dir);
        const auto header = make_header(manifest, cfg, "oracle-grid");
        std::ofstream txt(fs::path(manifest.out_dir) / "oracle_check.txt");
        if (!txt) throw ConfigError("cannot write oracle check report");
        write_attribution(txt, header);
        txt << "grid_points " << res.grid_points << "\n";
        txt << "no_ignition_points " << res.no_ignition_points << "\n";
        txt << "max_abs_gap_cad " << io::format_double(res.max_gap_cad) << "\n";
        std::cout << "knock-integral vs closed-form max gap: "
                  << res.max_gap_cad << " CAD over " << res.grid_points
                  << " grid points (" << res.no_ignition_points
                  << " without ignition)\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int calibrate(const RunManifest& manifest) {
    try {
        const LoadedConfig cfg = load_plant_config(manifest.config_dir);
        std::vector<calib::CalibrationSample> data;
        if (!manifest.dataset_path.empty()) {
            data = calib::load_dataset(manifest.dataset_path);
        } else {
            data = calib::generate_synthetic_dataset(
                cfg.plant.model, cfg.plant.geometry, 0.3, manifest.seed);
        }

        calib::OptimizerConfig opt;
        std::array<IntakeCoefficients, kNumCylinders> init{};
        for (int c = 0; c < kNumCylinders; ++c) {
            init[static_cast<std::size_t>(c)] =
                cfg.plant.model.intake[static_cast<std::size_t>(c)];
        }
        const auto intake_fits = calib::calibrate_intake(data, init, opt);
        const auto ca50_fit = calib::calibrate_ca50(
            data, intake_fits, cfg.plant.model.combustion, cfg.plant.geometry,
            opt);

        CoefficientSet fitted = cfg.plant.model;
        for (const auto& f : intake_fits) {
            fitted.intake[static_cast<std::size_t>(f.cylinder_index - 1)] =
                f.coeffs;
        }
        fitted.combustion = ca50_fit.coeffs;

        fs::create_directories(manifest.out_dir);
        const auto header = make_header(manifest, cfg,
                                        manifest.dataset_path.empty()
                                            ? "synthetic-dataset"
                                            : manifest.dataset_path);
        io::save_coefficients(
            (fs::path(manifest.out_dir) / "fitted_coefficients.txt").string(),
            fitted, attribution_text(header));
        std::ofstream txt(fs::path(manifest.out_dir) / "calibration_report.txt");
        if (!txt) throw ConfigError("cannot write calibration report");
        write_attribution(txt, header);
        txt << "samples " << data.size() << "\n\n";
        txt << "intake fits (validation RMSE):\n";
        char line[200];
        for (const auto& f : intake_fits) {
            std::snprintf(line, sizeof(line),
                          "  cylinder %d: T_IVC %.6g K, P_IVC %.6g bar\n",
                          f.cylinder_index, f.t_ivc_validation_rmse,
                          f.p_ivc_validation_rmse);
            txt << line;
        }
        txt << "\nprediction error statistics per cylinder:\n";
        std::snprintf(line, sizeof(line), "%-22s", "statistic");
        txt << line;
        for (int c = 1; c <= kNumCylinders; ++c) {
            std::snprintf(line, sizeof(line), " %9s%d", "cyl", c);
            txt << line;
        }
        txt << "\n";
        auto stat_row = [&](const char* name,
                            const std::array<double, kNumCylinders>& v) {
            std::snprintf(line, sizeof(line), "%-22s", name);
            txt << line;
            for (double x : v) {
                std::snprintf(line, sizeof(line), " %10.4f", x);
                txt << line;
            }
            txt << "\n";
        };
        stat_row("soc_error_std", ca50_fit.validation.soc_error_std);
        stat_row("soc_error_max", ca50_fit.validation.soc_error_max);
        stat_row("ca50_error_std", ca50_fit.validation.ca50_error_std);
        stat_row("ca50_error_max", ca50_fit.validation.ca50_error_max);
        txt << "\nca50 fit: rmse " << io::format_double(ca50_fit.fit.final_rmse)
            << " after " << ca50_fit.fit.iterations << " iterations\n";

        std::ofstream log(fs::path(manifest.out_dir) / "convergence.csv");
        write_attribution(log, header);
        log << "iteration,rmse\n";
        for (std::size_t i = 0; i < ca50_fit.fit.rmse_log.size(); ++i) {
            log << i << "," << io::format_double(ca50_fit.fit.rmse_log[i])
                << "\n";
        }
        std::cout << "calibration outputs written to " << manifest.out_dir
                  << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const OptimizerFailure& e) {
        std::cerr << "calibration failed: " << e.what() << "\n";
        return kExitConfigError;
    }
}

}  // namespace ca50::harness
