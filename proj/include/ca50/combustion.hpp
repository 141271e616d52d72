#pragma once

#include <vector>

#include "ca50/types.hpp"

// SOC, burn duration, burn fraction and CA50.  Both the full
// knock-integral formulation (used by the virtual engine as ground
// truth) and the closed-form simplification (used by the controllers).

namespace ca50::combustion {

// In-cylinder states sampled at strictly increasing crank angles,
// starting at the injection angle.
struct CompressionTrace {
    std::vector<double> theta_cad;
    std::vector<double> pressure_bar;
    std::vector<double> temperature_k;

    std::size_t size() const { return theta_cad.size(); }
    void validate() const;
};

inline constexpr double kProductionTraceStep = 0.1;   // CAD
inline constexpr double kOracleTraceStep = 0.01;      // CAD
inline constexpr double kTraceEnd = 90.0;             // CAD aTDC

// Polytropic trace from `start_cad` to `end_cad`, anchored at a known
// state: pressure/temperature follow (V_anchor / V(theta))^k from the
// anchored state at anchor_cad.
CompressionTrace make_polytropic_trace(const EngineGeometry& geom,
                                       const GasState& anchor,
                                       double anchor_cad, double start_cad,
                                       double end_cad, double step_cad,
                                       double k_c);

// Ignition time scale tau = phi^c12 exp(-c13 P^c14 / T) / (c10 EGR + c11).
double arrhenius_time_scale(const GasState& state, double egr, double phi,
                            const CombustionCoefficients& c);

// Knock integral: first crank angle where the accumulated integral of
// exp(-c13 P^c14 / T) reaches (c10 EGR + c11) N phi^-c12, located by
// trapezoidal accumulation plus linear interpolation in the crossing
// step.  Throws NoIgnitionError if the trace ends first.
double soc_knock_integral(const CompressionTrace& trace, double soi_cad,
                          double n_rpm, double egr, double phi,
                          const CombustionCoefficients& c);

// Closed form: SOC = SOI + (c10 EGR + c11) N phi^-c12 exp(c13 P^c14 / T)
double soc_closed_form(double soi_cad, const GasState& soi_state, double n_rpm,
                       double egr, double phi,
                       const CombustionCoefficients& c);

// The (SOC - SOI) term of the closed form.
double ignition_delay(const GasState& soi_state, double n_rpm, double egr,
                      double phi, const CombustionCoefficients& c);

// BD = c15 (1 + X_d)^c16 phi^c17
double burn_duration(double x_d, double phi, double c15,
                     const CombustionCoefficients& c);

// x_b(theta) = 1 - exp(-a ((theta - SOC)/BD)^b)
double wiebe_burn_fraction(double theta_cad, double soc_cad, double bd_cad,
                           const WiebeParams& w);

// CA50 = SOC + (ln2/a)^(1/b) BD
double ca50_from_wiebe(double soc_cad, double bd_cad, const WiebeParams& w);

// The composite c18 (1 + X_d)^c16 phi^c17 term (CA50 - SOC).
double midburn_offset(double x_d, double phi, const CombustionCoefficients& c);

// CA50 = SOI + ignition delay + midburn offset (all closed form).
double ca50_closed_form(double soi_cad, double egr, double n_rpm, double phi,
                        const GasState& soi_state, double x_d,
                        const CombustionCoefficients& c);

}  // namespace ca50::combustion
