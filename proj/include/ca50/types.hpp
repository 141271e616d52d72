#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ca50 {

inline constexpr int kNumCylinders = 6;

// Convention used throughout: pressure in bar, temperature in K, engine
// speed in RPM, crank angle in CAD aTDC of the compression stroke,
// volume in liters, time in seconds.

struct EngineGeometry {
    double bore_mm = 126.0;
    double stroke_mm = 166.0;
    double rod_length_mm = 251.0;
    double compression_ratio = 17.0;
    int n_cylinders = kNumCylinders;
    double ivo_cad = -363.5;
    double ivc_cad = -148.5;
    double evo_cad = 137.0;
    double evc_cad = 389.0;

    void validate() const;  // throws std::domain_error on bad geometry

    double displacement_per_cylinder_l() const;
    double clearance_volume_l() const;
};

struct GasState {
    double pressure_bar = 0.0;
    double temperature_k = 0.0;
    double crank_angle_cad = 0.0;

    bool valid() const { return pressure_bar > 0.0 && temperature_k > 0.0; }
};

struct ChargeComposition {
    double egr = 0.0;       // EGR fraction [0,1]
    double x_r = 0.0;       // residual gas fraction [0,1)
    double phi = 1.0;       // diesel equivalence ratio

    double x_d() const { return egr + x_r; }  // dilution fraction
};

// Intake-side model coefficients, one set per cylinder.
// c1..c7 drive the IVC temperature model, c8..c9 the IVC pressure model.
struct IntakeCoefficients {
    double c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0, c6 = 0, c7 = 0;
    double c8 = 0, c9 = 0;
};

// Shared combustion-phasing coefficients.  c15 is the raw burn-duration
// scale; it is not part of the published table and is derived from c18
// and the Wiebe parameters so both burn-duration routes agree.
struct CombustionCoefficients {
    double c10 = 0, c11 = 0, c12 = 0, c13 = 0, c14 = 0;
    double c15 = 0;
    double c16 = 0, c17 = 0, c18 = 0;
    double k_c = 0;
};

struct WiebeParams {
    double a = 6.9078;  // 99.9% burned at theta = SOC + BD
    double b = 1.5;

    double midburn_scale() const;  // (ln2/a)^(1/b), the CA50-to-BD factor
};

struct CoefficientSet {
    std::array<IntakeCoefficients, kNumCylinders> intake{};
    CombustionCoefficients combustion{};

    void validate() const;  // sign assertions for the published model forms
};

// One row of Tables 7-10: the commanded condition for a 10 s segment.
struct OperatingPoint {
    double speed_rpm = 1200.0;
    double charge_temp_k = 300.0;
    double boost_target_bar = 2.0;
    double phi = 0.7;
    double egr_target = 0.25;
    double ca50_ref_cad = 8.0;
};

struct ControlCommand {
    double soi_cad = 0.0;
    int cylinder_index = 0;  // 1-based
    std::int64_t cycle_index = 0;
    bool clamped = false;
};

enum class CycleStatus { ok, no_injection, misfire };

struct CycleRecord {
    std::int64_t cycle_index = 0;
    double sim_time_s = 0.0;
    int cylinder_index = 0;  // 1-based
    CycleStatus status = CycleStatus::ok;
    double soi_cad = 0.0;
    double soc_cad = 0.0;
    double bd_cad = 0.0;
    double ca50_true_cad = 0.0;
    double ca50_measured_cad = 0.0;
    double p_ivc_bar = 0.0;
    double t_ivc_k = 0.0;
    double p_soi_bar = 0.0;
    double t_soi_k = 0.0;
    double egr = 0.0;
    double x_r = 0.0;
    double p_im_bar = 0.0;
    // observer state estimates at command time (adaptive runs only)
    double x1_hat = 0.0;
    double x2_hat = 0.0;
    bool soi_clamped = false;
};

struct AdaptiveObserverState {
    double x1_hat = 0.0;  // ignition-delay state estimate (CAD * min)
    double x2_hat = 0.0;  // dilution state estimate (CAD)
    double alpha = 0.0;
    double beta = 0.0;
    int cylinder_index = 0;
};

struct PidGains {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double integral_limit = 0.0;  // anti-windup clamp on the accumulator
};

struct PidState {
    PidGains gains{};
    double integral = 0.0;
    double prev_error = 0.0;
    bool has_prev = false;
};

}  // namespace ca50
