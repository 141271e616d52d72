#pragma once

#include "ca50/types.hpp"

// Intake-side quantities: EGR fraction from oxygen sensing, per-cylinder
// IVC pressure/temperature, residual and dilution fractions, polytropic
// compression to the injection angle, and crank-resolved cylinder volume.
// All functions are pure; thread-safe without restriction.

namespace ca50::gas {

// Intake O2 may read above ambient by this much (sensor jitter around
// zero EGR) before it is treated as a domain error.
inline constexpr double kO2SensorTolerance = 0.002;
inline constexpr double kDefaultAmbientO2 = 0.2095;

// EGR = (x_amb - x_int) / (x_amb - x_exh), clamped to [0, 1].
double egr_fraction(double x_o2_amb, double x_o2_int, double x_o2_exh);

// T_IVC = (c1 T_im^2 + c2 T_im + c3) phi^c4 N^c5 P_im^c7 / (1+EGR)^c6
double ivc_temperature(const IntakeCoefficients& c, double t_im_k,
                       double p_im_bar, double phi, double n_rpm, double egr);

// P_IVC = T_im^c8 N^c9 P_im
double ivc_pressure(const IntakeCoefficients& c, double t_im_k, double n_rpm,
                    double p_im_bar);

// X_r = m_r / (m_air + m_fuel + m_egr)
double residual_gas_fraction(double m_r_kg, double m_air_kg, double m_fuel_kg,
                             double m_egr_kg);

// P_soi = P * (V_ivc/V_soi)^k_c,  T_soi = T * (V_ivc/V_soi)^(k_c - 1)
GasState polytropic_compress(const GasState& ivc_state, double v_ivc_l,
                             double v_soi_l, double k_c,
                             double soi_cad = 0.0);

// Slider-crank volume: clearance plus swept displacement.  Periodic with
// 360 CAD geometrically; valve events are handled by the callers.
double cylinder_volume(const EngineGeometry& geom, double theta_cad);

}  // namespace ca50::gas
