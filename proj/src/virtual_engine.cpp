#include "ca50/virtual_engine.hpp"

#include <algorithm>
#include <cmath>

#include "ca50/combustion.hpp"
#include "ca50/controllers.hpp"
#include "ca50/errors.hpp"
#include "ca50/gas_properties.hpp"

namespace ca50::plant {

ManifoldState manifold_step(const ManifoldState& state, double dt_s) {
    if (!(dt_s > 0.0)) {
        throw ModelDomainError("manifold_step: dt must be positive");
    }
    const double zeta = state.damping_ratio;
    const double wd = 2.0 * M_PI / state.damped_period_s;
    const double wn = wd / std::sqrt(1.0 - zeta * zeta);
    const double lam = zeta * wn;

    const double e0 = state.p_im_bar - state.p_im_target_bar;
    const double v0 = state.velocity_bar_per_s;
    const double decay = std::exp(-lam * dt_s);
    const double c = std::cos(wd * dt_s);
    const double s = std::sin(wd * dt_s);
    const double b = (v0 + lam * e0) / wd;

    ManifoldState next = state;
    const double e = decay * (e0 * c + b * s);
    next.p_im_bar = state.p_im_target_bar + e;
    next.velocity_bar_per_s = -lam * e + decay * (-e0 * wd * s + b * wd * c);
    return next;
}

double egr_actuator_step(double current, double target, double dt_s,
                         double tau_s) {
    if (!(dt_s > 0.0) || !(tau_s > 0.0)) {
        throw ModelDomainError("egr_actuator_step: dt and tau must be positive");
    }
    return current + (target - current) * (1.0 - std::exp(-dt_s / tau_s));
}

std::vector<FiringEvent> firing_schedule(double n_rpm, int n_cyl,
                                         const std::vector<int>& firing_order,
                                         double duration_s) {
    if (!(n_rpm > 0.0) || n_cyl < 1 ||
        firing_order.size() != static_cast<std::size_t>(n_cyl)) {
        throw ModelDomainError("firing_schedule: bad arguments");
    }
    // four-stroke: one 720 CAD engine cycle spans 2 revolutions; only
    // complete cycles are scheduled
    const double cycle_period_s = 120.0 / n_rpm;
    const double slot_period_s = cycle_period_s / n_cyl;
    const auto n_cycles =
        static_cast<std::int64_t>(std::floor(duration_s / cycle_period_s));
    std::vector<FiringEvent> events;
    for (std::int64_t cycle = 1; cycle <= n_cycles; ++cycle) {
        const double t0 = static_cast<double>(cycle - 1) * cycle_period_s;
        for (int s = 0; s < n_cyl; ++s) {
            events.push_back({t0 + s * slot_period_s,
                              firing_order[static_cast<std::size_t>(s)], cycle});
        }
    }
    return events;
}

void PlantConfig::validate() const {
    model.validate();
    geometry.validate();
    if (mismatch_c2_fraction.size() != static_cast<std::size_t>(geometry.n_cylinders)) {
        throw ConfigError("plant: one mismatch fraction per cylinder required");
    }
    for (double f : mismatch_c2_fraction) {
        if (std::abs(f * mismatch_scale) > 0.2) {
            throw ConfigError("plant: mismatch perturbation exceeds 20%");
        }
    }
    if (ca50_noise_std < 0.0 || o2_noise_std < 0.0 || x_r_jitter < 0.0) {
        throw ConfigError("plant: noise magnitudes must be >= 0");
    }
    if (!(manifold_damping_ratio > 0.0 && manifold_damping_ratio < 1.0)) {
        throw ConfigError("plant: manifold damping ratio must be in (0, 1)");
    }
    if (firing_order.size() != static_cast<std::size_t>(geometry.n_cylinders)) {
        throw ConfigError("plant: firing order must list every cylinder once");
    }
    std::vector<int> seen(firing_order.size(), 0);
    for (int c : firing_order) {
        if (c < 1 || c > geometry.n_cylinders || seen[static_cast<std::size_t>(c - 1)]++) {
            throw ConfigError("plant: firing order must list every cylinder once");
        }
    }
}

IntakeCoefficients PlantConfig::plant_intake(int cylinder_index) const {
    IntakeCoefficients c = model.intake[static_cast<std::size_t>(cylinder_index - 1)];
    c.c2 *= 1.0 + mismatch_scale *
                      mismatch_c2_fraction[static_cast<std::size_t>(cylinder_index - 1)];
    return c;
}

double PlantConfig::x_r_nominal(double egr) const {
    const double x =
        x_r_at_zero_egr + (x_r_at_half_egr - x_r_at_zero_egr) * (egr / 0.5);
    return std::clamp(x, x_r_min, x_r_max);
}

CycleRecord cylinder_cycle(const PlantConfig& cfg, int cylinder_index,
                           std::int64_t cycle_index, double sim_time_s,
                           const CylinderInputs& in, const ControlCommand& cmd,
                           double x_r, double ca50_noise) {
    const IntakeCoefficients ic = cfg.plant_intake(cylinder_index);
    CycleRecord r;
    r.cycle_index = cycle_index;
    r.sim_time_s = sim_time_s;
    r.cylinder_index = cylinder_index;
    r.soi_cad = cmd.soi_cad;
    r.soi_clamped = cmd.clamped;
    r.egr = in.egr_actual;
    r.x_r = x_r;
    r.p_im_bar = in.p_im_bar;
    r.t_ivc_k = gas::ivc_temperature(ic, in.t_im_k, in.p_im_bar, in.phi,
                                     in.n_rpm, in.egr_actual);
    r.p_ivc_bar = gas::ivc_pressure(ic, in.t_im_k, in.n_rpm, in.p_im_bar);

    const auto& geom = cfg.geometry;
    const auto& cc = cfg.model.combustion;
    const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);
    const GasState soi_state = gas::polytropic_compress(
        GasState{r.p_ivc_bar, r.t_ivc_k, geom.ivc_cad}, v_ivc,
        gas::cylinder_volume(geom, cmd.soi_cad), cc.k_c, cmd.soi_cad);
    r.p_soi_bar = soi_state.pressure_bar;
    r.t_soi_k = soi_state.temperature_k;

    // ground truth is the full knock-integral chain, not the closed form
    const auto trace = combustion::make_polytropic_trace(
        geom, GasState{r.p_ivc_bar, r.t_ivc_k, geom.ivc_cad}, geom.ivc_cad,
        cmd.soi_cad, combustion::kTraceEnd, cfg.trace_step_cad, cc.k_c);
    try {
        r.soc_cad = combustion::soc_knock_integral(trace, cmd.soi_cad,
                                                   in.n_rpm, in.egr_actual,
                                                   in.phi, cc);
    } catch (const NoIgnitionError&) {
        r.status = CycleStatus::misfire;
        return r;
    }
    r.bd_cad = combustion::burn_duration(in.egr_actual + x_r, in.phi, cc.c15, cc);
    r.ca50_true_cad = combustion::ca50_from_wiebe(r.soc_cad, r.bd_cad, cfg.wiebe);
    r.ca50_measured_cad = r.ca50_true_cad + ca50_noise;
    r.status = CycleStatus::ok;
    return r;
}

ControllerKind controller_from_name(const std::string& name) {
    if (name == "adaptive") return ControllerKind::adaptive;
    if (name == "feedforward") return ControllerKind::feedforward;
    if (name == "pid") return ControllerKind::pid;
    throw ConfigError("unknown controller '" + name +
                      "' (expected adaptive, feedforward or pid)");
}

std::string controller_name(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::adaptive: return "adaptive";
        case ControllerKind::feedforward: return "feedforward";
        case ControllerKind::pid: return "pid";
    }
    return "?";
}

namespace {

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

struct ScheduleValues {
    double n_rpm, phi, boost_target, egr_target, ca50_ref;
    int segment;  // 1 or 2
};

ScheduleValues schedule_at(const CasePreset& p, double t) {
    ScheduleValues v{};
    if (t < p.segment_time_s) {
        v = {p.first.speed_rpm, p.first.phi, p.first.boost_target_bar,
             p.first.egr_target, p.first.ca50_ref_cad, 1};
    } else {
        // speed and equivalence ratio ramp smoothly over ramp_time_s;
        // boost and EGR targets step (their dynamics smooth them)
        const double w = p.ramp_time_s > 0.0
                             ? smoothstep((t - p.segment_time_s) / p.ramp_time_s)
                             : 1.0;
        v.n_rpm = p.first.speed_rpm + w * (p.second.speed_rpm - p.first.speed_rpm);
        v.phi = p.first.phi + w * (p.second.phi - p.first.phi);
        v.boost_target = p.second.boost_target_bar;
        v.egr_target = p.second.egr_target;
        v.ca50_ref = p.second.ca50_ref_cad;
        v.segment = 2;
    }
    return v;
}

struct CylinderControllers {
    AdaptiveObserverState obs{};
    bool obs_ready = false;
    double ff_prev_soi = 0.0;
    PidState pid{};
    double prev_y_meas = 0.0;
    bool has_prev_y = false;
    int misfire_streak = 0;
};

}  // namespace

RunResult run_case(const CasePreset& preset, ControllerKind controller,
                   const PlantConfig& plant_cfg, const ControllerConfig& ctl,
                   double duration_s, std::uint64_t seed) {
    plant_cfg.validate();
    if (!(duration_s > 0.0)) {
        throw ConfigError("run_case: duration must be positive");
    }

    const auto& geom = plant_cfg.geometry;
    const int ncyl = geom.n_cylinders;
    const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);
    const auto& cc = plant_cfg.model.combustion;

    rng::SplitMix64 master(seed);
    rng::SplitMix64 noise_stream = master.fork(1);
    rng::SplitMix64 xr_stream = master.fork(2);
    rng::SplitMix64 o2_stream = master.fork(3);
    const rng::TruncatedGaussian ca50_noise{plant_cfg.ca50_noise_std,
                                            plant_cfg.ca50_noise_bound};

    ManifoldState manifold;
    manifold.t_im_k = preset.first.charge_temp_k;
    manifold.damped_period_s = plant_cfg.manifold_damped_period_s;
    manifold.damping_ratio = plant_cfg.manifold_damping_ratio;
    double egr_actual = 0.0;

    std::vector<CylinderControllers> per_cyl(static_cast<std::size_t>(ncyl));
    for (auto& s : per_cyl) s.ff_prev_soi = ctl.default_soi_cad;

    // ambient-start observer initialization: the state estimates come
    // from the nominal model chain evaluated at ambient manifold pressure
    auto init_observer = [&](int cyl) {
        const auto& ic = plant_cfg.model.intake[static_cast<std::size_t>(cyl - 1)];
        const auto& op = preset.first;
        const double t_ivc = gas::ivc_temperature(ic, op.charge_temp_k, 1.0,
                                                  op.phi, op.speed_rpm,
                                                  op.egr_target);
        const double p_ivc = gas::ivc_pressure(ic, op.charge_temp_k,
                                               op.speed_rpm, 1.0);
        const GasState soi_state = gas::polytropic_compress(
            GasState{p_ivc, t_ivc, geom.ivc_cad}, v_ivc,
            gas::cylinder_volume(geom, ctl.default_soi_cad), cc.k_c,
            ctl.default_soi_cad);
        const auto [x1, x2] = control::true_states(
            op.egr_target, soi_state, op.egr_target + ctl.x_r_bar, cc);
        auto& s = per_cyl[static_cast<std::size_t>(cyl - 1)];
        s.obs.x1_hat = x1;
        s.obs.x2_hat = x2;
        s.obs.cylinder_index = cyl;
        s.obs_ready = true;
    };

    RunResult result;
    const double dt_max = 1e-3;
    double t = 0.0;
    double phase = 0.0;  // engine cycles completed (fractional)
    std::int64_t cycle = 1;
    int slot = 0;

    while (t < duration_s) {
        const ScheduleValues sched = schedule_at(preset, t);
        manifold.p_im_target_bar = sched.boost_target;
        manifold.t_im_k = preset.first.charge_temp_k;

        const double rate = sched.n_rpm / 120.0;  // engine cycles per second
        const double next_event_phase =
            static_cast<double>(cycle - 1) + static_cast<double>(slot) / ncyl;
        double dt = dt_max;
        bool fire = false;
        if (phase + rate * dt >= next_event_phase) {
            dt = std::max((next_event_phase - phase) / rate, 0.0);
            fire = true;
        }
        if (t + dt > duration_s) {
            dt = duration_s - t;
            fire = false;
        }
        if (dt > 0.0) {
            manifold = manifold_step(manifold, dt);
            egr_actual = egr_actuator_step(egr_actual, sched.egr_target, dt,
                                           plant_cfg.egr_tau_s);
            t += dt;
            phase += rate * dt;
        }
        if (!fire) {
            if (dt <= 0.0) break;
            continue;
        }

        // firing event
        const ScheduleValues now = schedule_at(preset, t);
        const int cyl = plant_cfg.firing_order[static_cast<std::size_t>(slot)];
        auto& st = per_cyl[static_cast<std::size_t>(cyl - 1)];
        const CylinderInputs inputs{manifold.p_im_bar, manifold.t_im_k,
                                    now.n_rpm, now.phi, egr_actual};

        if (cycle == 1) {
            // intake only; fuel is not injected on the first cycle
            const IntakeCoefficients ic = plant_cfg.plant_intake(cyl);
            CycleRecord r;
            r.cycle_index = cycle;
            r.sim_time_s = t;
            r.cylinder_index = cyl;
            r.status = CycleStatus::no_injection;
            r.egr = egr_actual;
            r.x_r = plant_cfg.x_r_nominal(egr_actual);
            r.p_im_bar = manifold.p_im_bar;
            r.t_ivc_k = gas::ivc_temperature(ic, inputs.t_im_k, inputs.p_im_bar,
                                             inputs.phi, inputs.n_rpm,
                                             egr_actual);
            r.p_ivc_bar = gas::ivc_pressure(ic, inputs.t_im_k, inputs.n_rpm,
                                            inputs.p_im_bar);
            result.records.push_back(r);
        } else {
            // synthesized oxygen sensing for the controller side
            const double x_exh = plant_cfg.ambient_o2 * (1.0 - now.phi);
            double x_int = plant_cfg.ambient_o2 -
                           egr_actual * (plant_cfg.ambient_o2 - x_exh);
            if (plant_cfg.o2_noise_std > 0.0) {
                x_int = std::clamp(
                    x_int + o2_stream.next_gaussian(plant_cfg.o2_noise_std),
                    x_exh - 0.0015, plant_cfg.ambient_o2 + 0.0015);
            }

            ControlCommand cmd;
            if (cycle < ctl.activation_cycle) {
                cmd.soi_cad = ctl.default_soi_cad;
                cmd.cylinder_index = cyl;
                cmd.cycle_index = cycle;
            } else {
                switch (controller) {
                    case ControllerKind::adaptive: {
                        if (!st.obs_ready) init_observer(cyl);
                        const auto [a, b] =
                            control::alpha_beta(now.n_rpm, now.phi, cc);
                        st.obs.alpha = a;
                        st.obs.beta = b;
                        cmd = control::adaptive_command(now.ca50_ref, st.obs,
                                                        cycle);
                        break;
                    }
                    case ControllerKind::feedforward: {
                        const double egr_est = gas::egr_fraction(
                            plant_cfg.ambient_o2, x_int, x_exh);
                        const auto& ic_model =
                            plant_cfg.model.intake[static_cast<std::size_t>(cyl - 1)];
                        const double t_ivc = gas::ivc_temperature(
                            ic_model, inputs.t_im_k, inputs.p_im_bar, now.phi,
                            now.n_rpm, egr_est);
                        const double p_ivc = gas::ivc_pressure(
                            ic_model, inputs.t_im_k, now.n_rpm,
                            inputs.p_im_bar);
                        const double v_soi_prev =
                            gas::cylinder_volume(geom, st.ff_prev_soi);
                        cmd = control::feedforward_command(
                            now.ca50_ref, egr_est, now.n_rpm, now.phi, p_ivc,
                            t_ivc, v_ivc, v_soi_prev, ctl.x_r_bar, cc, cyl,
                            cycle);
                        break;
                    }
                    case ControllerKind::pid: {
                        const double err =
                            st.has_prev_y ? st.prev_y_meas - now.ca50_ref : 0.0;
                        st.pid.gains = ctl.pid;
                        auto [c, next] = control::pid_command(
                            st.pid, err, ctl.default_soi_cad, cyl, cycle);
                        st.pid = next;
                        cmd = c;
                        break;
                    }
                }
            }

            const double x_r =
                plant_cfg.x_r_jitter > 0.0
                    ? std::clamp(plant_cfg.x_r_nominal(egr_actual) +
                                     xr_stream.next_uniform(
                                         -plant_cfg.x_r_jitter,
                                         plant_cfg.x_r_jitter),
                                 plant_cfg.x_r_min, plant_cfg.x_r_max)
                    : plant_cfg.x_r_nominal(egr_actual);
            const double noise = plant_cfg.ca50_noise_std > 0.0
                                     ? ca50_noise.draw(noise_stream)
                                     : 0.0;
            CycleRecord r = cylinder_cycle(plant_cfg, cyl, cycle, t, inputs,
                                           cmd, x_r, noise);
            if (controller == ControllerKind::adaptive && st.obs_ready) {
                r.x1_hat = st.obs.x1_hat;
                r.x2_hat = st.obs.x2_hat;
            }
            result.records.push_back(r);

            if (r.status == CycleStatus::misfire) {
                if (++st.misfire_streak > plant_cfg.misfire_abort_streak) {
                    throw PlantAbort(
                        "cylinder " + std::to_string(cyl) + " misfired " +
                        std::to_string(st.misfire_streak) +
                        " consecutive cycles at t=" + std::to_string(t));
                }
            } else {
                st.misfire_streak = 0;
                // controller bookkeeping from this cycle's measurement
                st.prev_y_meas = r.ca50_measured_cad;
                st.has_prev_y = true;
                if (controller == ControllerKind::adaptive &&
                    cycle + 1 >= ctl.activation_cycle) {
                    if (!st.obs_ready) init_observer(cyl);
                    const auto [a, b] = control::alpha_beta(now.n_rpm, now.phi, cc);
                    st.obs.alpha = a;
                    st.obs.beta = b;
                    st.obs = control::adaptive_observer_update(
                        st.obs, r.ca50_measured_cad, now.ca50_ref);
                }
                if (controller == ControllerKind::feedforward) {
                    st.ff_prev_soi = cmd.soi_cad;
                }
            }
        }

        if (++slot >= ncyl) {
            slot = 0;
            ++cycle;
        }
        result.total_cycles = cycle;
    }
    return result;
}

}  // namespace ca50::plant
