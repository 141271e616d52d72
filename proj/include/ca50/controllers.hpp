#pragma once

#include <utility>
#include <vector>

#include "ca50/types.hpp"

// Cycle-domain combustion-phasing controllers: the adaptive feedback
// controller (state-space model, gradient-descent observer, fixed-ratio
// learning rate), the feedforward model inversion, and a PID baseline.
// All laws are pure given a state snapshot; each cylinder owns its own
// state and there is no cross-cylinder coupling.

namespace ca50::control {

// Calibrated injection-timing range; commands are clamped to it.
inline constexpr double kSoiMinCad = -10.0;
inline constexpr double kSoiMaxCad = 0.0;

// alpha = N phi^-c12, beta = phi^c17
std::pair<double, double> alpha_beta(double n_rpm, double phi,
                                     const CombustionCoefficients& c);

// eta = 0.3 / (alpha^2 + beta^2)
double learning_rate(double alpha, double beta);

// u = y_d - alpha x1_hat - beta x2_hat, clamped to the SOI range.
ControlCommand adaptive_command(double ca50_ref_cad,
                                const AdaptiveObserverState& obs,
                                std::int64_t cycle_index = 0);

// Gradient-descent observer step: both states move along (alpha, beta)
// scaled by 0.3 (y - y_d) / (alpha^2 + beta^2).
AdaptiveObserverState adaptive_observer_update(const AdaptiveObserverState& obs,
                                               double y_measured_cad,
                                               double ca50_ref_cad);

// Ground-truth states of the state-space form:
// x1 = (c10 EGR + c11) exp(c13 P^c14 / T), x2 = c18 (1 + X_d)^c16
std::pair<double, double> true_states(double egr, const GasState& soi_state,
                                      double x_d,
                                      const CombustionCoefficients& c);

// Model inversion for open-loop control.  P/T at SOI are produced
// internally from the IVC state through the polytropic relation; the
// previous cycle's SOI supplies the cylinder volume at injection.
ControlCommand feedforward_command(double ca50_ref_cad, double egr,
                                   double n_rpm, double phi, double p_ivc_bar,
                                   double t_ivc_k, double v_ivc_l,
                                   double v_soi_prev_l, double x_r_bar,
                                   const CombustionCoefficients& c,
                                   int cylinder_index = 0,
                                   std::int64_t cycle_index = 0);

// Mean residual fraction assumed by the feedforward law.
inline constexpr double kFeedforwardResidualMean = 0.0642;

// Discrete PID on CA50 error with integral anti-windup; positive error
// (combustion later than reference) advances injection.
std::pair<ControlCommand, PidState> pid_command(const PidState& state,
                                                double error_cad,
                                                double soi_base_cad = -5.0,
                                                int cylinder_index = 0,
                                                std::int64_t cycle_index = 0);

struct LyapunovAudit {
    std::vector<double> v;        // V(k) = e(k)^2
    std::vector<double> delta_v;  // V(k+1) - V(k)
    bool applicable = true;       // false if the frozen-state assumption
                                  // visibly does not hold
};

// Checks the contraction V(k+1) - V(k) = -0.51 e(k)^2 on an error
// sequence from a matched-plant, frozen-states run.
LyapunovAudit lyapunov_audit(const std::vector<double>& errors,
                             double rel_tol = 1e-9);

}  // namespace ca50::control
