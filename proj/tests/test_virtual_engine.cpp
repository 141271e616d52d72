#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "ca50/combustion.hpp"
#include "ca50/errors.hpp"
#include "ca50/gas_properties.hpp"
#include "ca50/harness.hpp"
#include "ca50/io.hpp"
#include "ca50/rng.hpp"
#include "ca50/virtual_engine.hpp"

using namespace ca50;

namespace {

plant::PlantConfig default_plant() {
    static const harness::LoadedConfig cfg =
        harness::load_plant_config(CA50_CONFIG_DIR);
    return cfg.plant;
}

plant::ControllerConfig default_controller() {
    static const harness::LoadedConfig cfg =
        harness::load_plant_config(CA50_CONFIG_DIR);
    return cfg.controller;
}

plant::CasePreset preset(const char* name) {
    return harness::load_case_preset(
        (std::filesystem::path(CA50_CONFIG_DIR) / (std::string(name) + ".cfg"))
            .string());
}

}  // namespace

TEST_CASE("manifold at its target with zero velocity stays put") {
    plant::ManifoldState m;
    m.p_im_bar = m.p_im_target_bar = 1.7;
    m.velocity_bar_per_s = 0.0;
    const auto next = plant::manifold_step(m, 0.37);
    CHECK(next.p_im_bar == doctest::Approx(1.7).epsilon(1e-14));
    CHECK(next.velocity_bar_per_s == doctest::Approx(0.0));
}

TEST_CASE("manifold step response matches the published transient shape") {
    plant::ManifoldState m;
    m.p_im_bar = 1.0;
    m.p_im_target_bar = 2.0;
    double peak = 0.0, peak_time = 0.0;
    double settle_time = -1.0;
    const double dt = 1e-3;
    for (double t = 0.0; t < 10.0; t += dt) {
        m = plant::manifold_step(m, dt);
        if (m.p_im_bar > peak) {
            peak = m.p_im_bar;
            peak_time = t + dt;
        }
        if (std::abs(m.p_im_bar - 2.0) > 0.02 * 1.0) {
            settle_time = t + dt;  // last excursion outside +/-2% of step
        }
    }
    CHECK(peak > 2.0 + 0.05 * 1.0);            // > 5% overshoot
    CHECK(peak_time == doctest::Approx(1.3).epsilon(0.16));
    CHECK(settle_time < 6.0);                   // settled before 6 s
    CHECK(settle_time > 0.0);                   // visible oscillation
}

TEST_CASE("doubling the damping ratio reduces the overshoot") {
    auto overshoot = [](double zeta) {
        plant::ManifoldState m;
        m.p_im_bar = 1.0;
        m.p_im_target_bar = 2.0;
        m.damping_ratio = zeta;
        double peak = 0.0;
        for (double t = 0.0; t < 10.0; t += 1e-3) {
            m = plant::manifold_step(m, 1e-3);
            peak = std::max(peak, m.p_im_bar);
        }
        return peak - 2.0;
    };
    CHECK(overshoot(0.56) < overshoot(0.28));
}

TEST_CASE("EGR actuator") {
    CHECK(plant::egr_actuator_step(0.25, 0.25, 0.01) ==
          doctest::Approx(0.25).epsilon(1e-14));
    // a full 0 -> 0.5 step completes (reaches 98%) in 0.7 s
    double egr = 0.0;
    double at_07 = 0.0;
    double prev = 0.0;
    for (double t = 0.0; t < 1.0; t += 1e-3) {
        egr = plant::egr_actuator_step(egr, 0.5, 1e-3);
        CHECK(egr >= prev);  // monotone toward a monotone target
        prev = egr;
        if (t + 1e-3 >= 0.7 && at_07 == 0.0) at_07 = egr;
    }
    CHECK(at_07 >= 0.49);
}

TEST_CASE("constant-speed firing schedule") {
    const auto events =
        plant::firing_schedule(1200.0, 6, plant::kDefaultFiringOrder, 0.35);
    // 720 CAD at 1200 RPM is a 0.1 s engine cycle; only complete cycles
    // are scheduled
    REQUIRE(events.size() == 18);
    CHECK(events[0].sim_time_s == doctest::Approx(0.0));
    for (std::size_t i = 1; i < events.size(); ++i) {
        CHECK(events[i].sim_time_s - events[i - 1].sim_time_s ==
              doctest::Approx(0.1 / 6.0).epsilon(1e-9));
    }
    // cylinders 2 and 4 fire last within each cycle
    CHECK(events[4].cylinder_index == 2);
    CHECK(events[5].cylinder_index == 4);
    CHECK(events[6].cylinder_index == 1);  // next cycle restarts the order
    CHECK(events[6].cycle_index == 2);
}

TEST_CASE("plant config validation") {
    auto cfg = default_plant();
    cfg.firing_order = {1, 5, 3, 6, 2, 2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_plant();
    cfg.mismatch_c2_fraction = {0.3, 0, 0, 0, 0, 0};  // above the 20% cap
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_plant();
    cfg.ca50_noise_std = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("residual-fraction trajectory stays in the plant's nominal range") {
    const auto cfg = default_plant();
    CHECK(cfg.x_r_nominal(0.0) == doctest::Approx(0.0721));
    CHECK(cfg.x_r_nominal(0.5) == doctest::Approx(0.0415));
    for (double egr = 0.0; egr <= 1.0; egr += 0.02) {
        const double x = cfg.x_r_nominal(egr);
        CHECK(x >= 0.0344);
        CHECK(x <= 0.0909);
    }
}

TEST_CASE("a combustion event is a pure function of its inputs") {
    const auto cfg = default_plant();
    const plant::CylinderInputs in{1.9, 300.0, 1200.0, 0.7, 0.25};
    ControlCommand cmd;
    cmd.soi_cad = -5.0;
    cmd.cylinder_index = 2;
    cmd.cycle_index = 17;
    const auto a = plant::cylinder_cycle(cfg, 2, 17, 1.234, in, cmd, 0.055, 0.1);
    const auto b = plant::cylinder_cycle(cfg, 2, 17, 1.234, in, cmd, 0.055, 0.1);
    CHECK(a.ca50_true_cad == b.ca50_true_cad);
    CHECK(a.soc_cad == b.soc_cad);
    CHECK(a.ca50_measured_cad == doctest::Approx(a.ca50_true_cad + 0.1));
    CHECK(a.status == CycleStatus::ok);
    CHECK(a.p_soi_bar > a.p_ivc_bar);
    CHECK(a.t_soi_k > a.t_ivc_k);
}

TEST_CASE("with zero mismatch the plant tracks the controller model") {
    auto cfg = default_plant();
    cfg.mismatch_scale = 0.0;
    const plant::CylinderInputs in{2.0, 300.0, 1200.0, 0.7, 0.25};
    ControlCommand cmd;
    cmd.soi_cad = -5.0;
    cmd.cylinder_index = 1;
    const double x_r = cfg.x_r_nominal(0.25);
    const auto rec = plant::cylinder_cycle(cfg, 1, 5, 0.5, in, cmd, x_r, 0.0);
    REQUIRE(rec.status == CycleStatus::ok);
    CHECK(rec.ca50_measured_cad == rec.ca50_true_cad);  // no noise draw

    const auto& cc = cfg.model.combustion;
    const GasState soi_state{rec.p_soi_bar, rec.t_soi_k, -5.0};
    const double closed = combustion::ca50_closed_form(
        -5.0, 0.25, 1200.0, 0.7, soi_state, 0.25 + x_r, cc);
    CHECK(std::abs(rec.ca50_true_cad - closed) <= 0.5);
}

TEST_CASE("misfire is recorded and a sustained streak aborts the run") {
    auto cfg = default_plant();
    cfg.model.combustion.c13 *= 100.0;  // delay beyond any trace
    const plant::CylinderInputs in{2.0, 300.0, 1200.0, 0.7, 0.25};
    ControlCommand cmd;
    cmd.soi_cad = -5.0;
    const auto rec = plant::cylinder_cycle(cfg, 1, 3, 0.2, in, cmd, 0.06, 0.0);
    CHECK(rec.status == CycleStatus::misfire);
    CHECK(rec.p_ivc_bar > 0.0);  // intake state still recorded

    CHECK_THROWS_AS(plant::run_case(preset("case1"),
                                    plant::ControllerKind::adaptive, cfg,
                                    default_controller(), 2.0, 1),
                    PlantAbort);
}

TEST_CASE("first cycle carries no injection and no combustion fields") {
    const auto result =
        plant::run_case(preset("case1"), plant::ControllerKind::adaptive,
                        default_plant(), default_controller(), 0.3, 1);
    int first_cycle_records = 0;
    for (const auto& r : result.records) {
        if (r.cycle_index == 1) {
            ++first_cycle_records;
            CHECK(r.status == CycleStatus::no_injection);
            CHECK(r.p_ivc_bar > 0.0);
        } else {
            CHECK(r.status != CycleStatus::no_injection);
        }
    }
    CHECK(first_cycle_records == 6);
}

TEST_CASE("records follow the firing order with one event per slot") {
    const auto cfg = default_plant();
    const auto result =
        plant::run_case(preset("case2"), plant::ControllerKind::adaptive, cfg,
                        default_controller(), 1.0, 3);
    std::map<std::int64_t, std::vector<int>> by_cycle;
    for (const auto& r : result.records) {
        by_cycle[r.cycle_index].push_back(r.cylinder_index);
    }
    for (const auto& [cycle, cylinders] : by_cycle) {
        if (cylinders.size() != 6) continue;  // trailing partial cycle
        CHECK(cylinders == cfg.firing_order);
        (void)cycle;
    }
}

TEST_CASE("cylinder-to-cylinder variation is nonzero") {
    const auto result =
        plant::run_case(preset("case2"), plant::ControllerKind::adaptive,
                        default_plant(), default_controller(), 1.0, 3);
    std::set<double> t_ivc;
    for (const auto& r : result.records) {
        if (r.cycle_index == 5) t_ivc.insert(r.t_ivc_k);
    }
    CHECK(t_ivc.size() == 6);
}

TEST_CASE("same seed reproduces the run; different seeds diverge") {
    auto cfg = default_plant();
    cfg.ca50_noise_std = 0.25;
    const auto a = plant::run_case(preset("case2"),
                                   plant::ControllerKind::adaptive, cfg,
                                   default_controller(), 2.0, 11);
    const auto b = plant::run_case(preset("case2"),
                                   plant::ControllerKind::adaptive, cfg,
                                   default_controller(), 2.0, 11);
    const auto c = plant::run_case(preset("case2"),
                                   plant::ControllerKind::adaptive, cfg,
                                   default_controller(), 2.0, 12);
    REQUIRE(a.records.size() == b.records.size());
    bool all_equal = true;
    bool any_diff_from_c = false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        all_equal = all_equal &&
                    a.records[i].ca50_measured_cad ==
                        b.records[i].ca50_measured_cad &&
                    a.records[i].soi_cad == b.records[i].soi_cad;
        any_diff_from_c =
            any_diff_from_c || a.records[i].ca50_measured_cad !=
                                   c.records[i].ca50_measured_cad;
    }
    CHECK(all_equal);
    CHECK(any_diff_from_c);
}

TEST_CASE("case presets drive the scheduled transients") {
    SUBCASE("reference step of the CA50-step case") {
        const auto p = preset("case2");
        CHECK(p.first.ca50_ref_cad == 8.0);
        CHECK(p.second.ca50_ref_cad == 10.0);
    }
    SUBCASE("boost step of the boost case reaches the plant") {
        const auto result =
            plant::run_case(preset("case1"), plant::ControllerKind::adaptive,
                            default_plant(), default_controller(), 20.0, 5);
        double p_im_late_seg1 = 0.0, p_im_late_seg2 = 0.0;
        for (const auto& r : result.records) {
            if (r.cylinder_index != 1) continue;
            if (r.sim_time_s > 9.5 && r.sim_time_s < 10.0) {
                p_im_late_seg1 = r.p_im_bar;
            }
            if (r.sim_time_s > 19.5) p_im_late_seg2 = r.p_im_bar;
        }
        CHECK(p_im_late_seg1 == doctest::Approx(1.5).epsilon(0.02));
        CHECK(p_im_late_seg2 == doctest::Approx(2.5).epsilon(0.02));
    }
}

TEST_CASE("measurement-noise statistics match the configured magnitude") {
    // distribution level: the sample deviation of the truncated draw
    // tracks the analytic value within 5%
    const rng::TruncatedGaussian dist{0.25, 0.5};
    rng::SplitMix64 r(44);
    double sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = dist.draw(r);
        CHECK(std::abs(x) <= 0.5);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(sd == doctest::Approx(dist.stddev()).epsilon(0.05));

    // plant level: measured-minus-true deviation over a run
    auto cfg = default_plant();
    cfg.ca50_noise_std = 0.25;
    const auto result = plant::run_case(preset("case2"),
                                        plant::ControllerKind::adaptive, cfg,
                                        default_controller(), 20.0, 45);
    double psum = 0.0, psum2 = 0.0;
    int pn = 0;
    for (const auto& rec : result.records) {
        if (rec.status != CycleStatus::ok) continue;
        const double d = rec.ca50_measured_cad - rec.ca50_true_cad;
        CHECK(std::abs(d) <= 0.5);
        psum += d;
        psum2 += d * d;
        ++pn;
    }
    const double pmean = psum / pn;
    const double psd = std::sqrt(psum2 / pn - pmean * pmean);
    CHECK(psd == doctest::Approx(dist.stddev()).epsilon(0.15));
}
