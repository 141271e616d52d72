#include "ca50/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "ca50/combustion.hpp"
#include "ca50/errors.hpp"
#include "ca50/gas_properties.hpp"

namespace ca50::control {

namespace {

ControlCommand clamp_soi(double soi, int cylinder, std::int64_t cycle) {
    ControlCommand cmd;
    cmd.cylinder_index = cylinder;
    cmd.cycle_index = cycle;
    cmd.soi_cad = std::clamp(soi, kSoiMinCad, kSoiMaxCad);
    cmd.clamped = cmd.soi_cad != soi;
    return cmd;
}

}  // namespace

std::pair<double, double> alpha_beta(double n_rpm, double phi,
                                     const CombustionCoefficients& c) {
    if (!(n_rpm > 0.0 && phi > 0.0)) {
        throw ModelDomainError("alpha_beta: N and phi must be positive");
    }
    return {n_rpm * std::pow(phi, -c.c12), std::pow(phi, c.c17)};
}

double learning_rate(double alpha, double beta) {
    const double denom = alpha * alpha + beta * beta;
    if (!(denom > 0.0)) {
        throw ModelDomainError("learning_rate: alpha and beta both zero");
    }
    return 0.3 / denom;
}

ControlCommand adaptive_command(double ca50_ref_cad,
                                const AdaptiveObserverState& obs,
                                std::int64_t cycle_index) {
    const double u =
        ca50_ref_cad - obs.alpha * obs.x1_hat - obs.beta * obs.x2_hat;
    return clamp_soi(u, obs.cylinder_index, cycle_index);
}

AdaptiveObserverState adaptive_observer_update(const AdaptiveObserverState& obs,
                                               double y_measured_cad,
                                               double ca50_ref_cad) {
    const double eta = learning_rate(obs.alpha, obs.beta);
    const double err = y_measured_cad - ca50_ref_cad;
    AdaptiveObserverState next = obs;
    next.x1_hat += eta * obs.alpha * err;
    next.x2_hat += eta * obs.beta * err;
    return next;
}

std::pair<double, double> true_states(double egr, const GasState& soi_state,
                                      double x_d,
                                      const CombustionCoefficients& c) {
    if (!soi_state.valid() || !(x_d >= 0.0)) {
        throw ModelDomainError("true_states: invalid inputs");
    }
    const double x1 =
        (c.c10 * egr + c.c11) *
        std::exp(c.c13 * std::pow(soi_state.pressure_bar, c.c14) /
                 soi_state.temperature_k);
    const double x2 = c.c18 * std::pow(1.0 + x_d, c.c16);
    return {x1, x2};
}

ControlCommand feedforward_command(double ca50_ref_cad, double egr,
                                   double n_rpm, double phi, double p_ivc_bar,
                                   double t_ivc_k, double v_ivc_l,
                                   double v_soi_prev_l, double x_r_bar,
                                   const CombustionCoefficients& c,
                                   int cylinder_index,
                                   std::int64_t cycle_index) {
    const GasState soi_state = gas::polytropic_compress(
        GasState{p_ivc_bar, t_ivc_k, 0.0}, v_ivc_l, v_soi_prev_l, c.k_c);
    const double soi =
        ca50_ref_cad - combustion::ignition_delay(soi_state, n_rpm, egr, phi, c) -
        combustion::midburn_offset(egr + x_r_bar, phi, c);
    return clamp_soi(soi, cylinder_index, cycle_index);
}

std::pair<ControlCommand, PidState> pid_command(const PidState& state,
                                                double error_cad,
                                                double soi_base_cad,
                                                int cylinder_index,
                                                std::int64_t cycle_index) {
    PidState next = state;
    next.integral += error_cad;
    if (state.gains.integral_limit > 0.0) {
        next.integral = std::clamp(next.integral, -state.gains.integral_limit,
                                   state.gains.integral_limit);
    }
    const double deriv = state.has_prev ? error_cad - state.prev_error : 0.0;
    next.prev_error = error_cad;
    next.has_prev = true;

    const double correction = state.gains.kp * error_cad +
                              state.gains.ki * next.integral +
                              state.gains.kd * deriv;
    // late combustion (positive error) -> advance injection
    const double soi = soi_base_cad - correction;
    return {clamp_soi(soi, cylinder_index, cycle_index), next};
}

LyapunovAudit lyapunov_audit(const std::vector<double>& errors,
                             double rel_tol) {
    LyapunovAudit audit;
    audit.v.reserve(errors.size());
    for (double e : errors) audit.v.push_back(e * e);
    for (std::size_t k = 0; k + 1 < audit.v.size(); ++k) {
        const double dv = audit.v[k + 1] - audit.v[k];
        audit.delta_v.push_back(dv);
        const double expected = -0.51 * audit.v[k];
        const double scale = std::max(audit.v[k], 1e-300);
        if (std::abs(dv - expected) > rel_tol * scale) {
            audit.applicable = false;
        }
    }
    return audit;
}

}  // namespace ca50::control
