#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ca50/rng.hpp"
#include "ca50/types.hpp"

// Synthetic six-cylinder plant: per-cylinder intake and full
// knock-integral combustion truth models, scripted airpath transients,
// firing-order scheduling, measurement noise and configurable
// plant-vs-controller model mismatch.

namespace ca50::plant {

struct ManifoldState {
    double p_im_bar = 1.0;
    double p_im_target_bar = 1.0;
    double t_im_k = 300.0;
    double velocity_bar_per_s = 0.0;
    // underdamped second-order response parameters
    double damped_period_s = 2.6;
    double damping_ratio = 0.28;
};

// Exact propagation of the second-order response over dt toward the
// current target.
ManifoldState manifold_step(const ManifoldState& state, double dt_s);

// First-order actuator; tau sized so a full 0 -> 0.5 step reaches 98%
// in 0.7 s by default.
inline constexpr double kEgrActuatorTau = 0.1785;
double egr_actuator_step(double current, double target, double dt_s,
                         double tau_s = kEgrActuatorTau);

struct FiringEvent {
    double sim_time_s = 0.0;
    int cylinder_index = 0;  // 1-based
    std::int64_t cycle_index = 0;
};

inline const std::vector<int> kDefaultFiringOrder = {1, 5, 3, 6, 2, 4};

// Constant-speed schedule: one event per cylinder per 720 CAD engine
// cycle, evenly spaced, ordered by the firing order.
std::vector<FiringEvent> firing_schedule(double n_rpm, int n_cyl,
                                         const std::vector<int>& firing_order,
                                         double duration_s);

struct PlantConfig {
    CoefficientSet model{};  // nominal set; the plant perturbs its own copy
    EngineGeometry geometry{};
    WiebeParams wiebe{};

    double manifold_damped_period_s = 2.6;
    double manifold_damping_ratio = 0.28;
    double egr_tau_s = kEgrActuatorTau;

    double ca50_noise_std = 0.0;    // truncated Gaussian, 0 disables
    double ca50_noise_bound = 0.5;
    double o2_noise_std = 0.0;

    // plant-vs-controller mismatch: per-cylinder fractional offsets on
    // the intake temperature model's linear coefficient, scaled by
    // mismatch_scale (0 = matched plant).  Bounded to +/-20%.
    std::vector<double> mismatch_c2_fraction = {0.010, -0.008, 0.006,
                                                -0.004, 0.002,  -0.010};
    double mismatch_scale = 1.0;

    // residual-fraction trajectory: affine in the EGR fraction with
    // optional uniform jitter, clamped to the plant's nominal range
    double x_r_at_zero_egr = 0.0721;
    double x_r_at_half_egr = 0.0415;
    double x_r_min = 0.0344;
    double x_r_max = 0.0909;
    double x_r_jitter = 0.0;

    double ambient_o2 = 0.2095;
    std::vector<int> firing_order = kDefaultFiringOrder;
    double trace_step_cad = 0.1;
    int misfire_abort_streak = 5;

    void validate() const;
    // the plant's own intake coefficients for one cylinder (mismatched)
    IntakeCoefficients plant_intake(int cylinder_index) const;
    double x_r_nominal(double egr) const;
};

struct CylinderInputs {
    double p_im_bar = 0.0;
    double t_im_k = 0.0;
    double n_rpm = 0.0;
    double phi = 0.0;
    double egr_actual = 0.0;
};

// One combustion event, pure in all inputs: the x_r draw and the
// measurement-noise draw are passed in so a recorded cycle can be
// replayed exactly.  Throws NoIgnitionError via status = misfire only;
// other model errors propagate.
CycleRecord cylinder_cycle(const PlantConfig& cfg, int cylinder_index,
                           std::int64_t cycle_index, double sim_time_s,
                           const CylinderInputs& in, const ControlCommand& cmd,
                           double x_r, double ca50_noise);

struct CasePreset {
    std::string name;
    OperatingPoint first{};
    OperatingPoint second{};
    double segment_time_s = 10.0;  // switch time
    double ramp_time_s = 0.5;      // speed/phi ramp at the boundary
};

enum class ControllerKind { adaptive, feedforward, pid };

ControllerKind controller_from_name(const std::string& name);
std::string controller_name(ControllerKind kind);

struct ControllerConfig {
    PidGains pid{0.45, 0.25, 0.05, 40.0};
    double default_soi_cad = -5.0;  // open-loop command on cycle 2
    double x_r_bar = 0.0642;        // feedforward mean residual fraction
    int activation_cycle = 3;       // closed loop from this cycle on
};

struct RunResult {
    std::vector<CycleRecord> records;
    std::int64_t total_cycles = 0;
};

// Simulates a two-segment case under the selected controller.
// Deterministic given the seed.
RunResult run_case(const CasePreset& preset, ControllerKind controller,
                   const PlantConfig& plant_cfg, const ControllerConfig& ctl,
                   double duration_s, std::uint64_t seed);

}  // namespace ca50::plant
