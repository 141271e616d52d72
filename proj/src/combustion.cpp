#include "ca50/combustion.hpp"

#include <cmath>
#include <stdexcept>

#include "ca50/errors.hpp"
#include "ca50/gas_properties.hpp"
#include "ca50/kernels.hpp"

namespace ca50 {

double WiebeParams::midburn_scale() const {
    if (!(a > 0.0 && b > 0.0)) {
        throw ModelDomainError("Wiebe parameters must be positive");
    }
    return std::pow(std::log(2.0) / a, 1.0 / b);
}

namespace combustion {

void CompressionTrace::validate() const {
    if (theta_cad.size() != pressure_bar.size() ||
        theta_cad.size() != temperature_k.size() || theta_cad.size() < 2) {
        throw ModelDomainError("trace needs >= 2 consistent samples");
    }
    for (std::size_t i = 0; i < theta_cad.size(); ++i) {
        if (i > 0 && !(theta_cad[i] > theta_cad[i - 1])) {
            throw ModelDomainError("trace crank angles must strictly increase");
        }
        if (!(pressure_bar[i] > 0.0 && temperature_k[i] > 0.0)) {
            throw ModelDomainError("trace states must be positive");
        }
    }
}

CompressionTrace make_polytropic_trace(const EngineGeometry& geom,
                                       const GasState& anchor,
                                       double anchor_cad, double start_cad,
                                       double end_cad, double step_cad,
                                       double k_c) {
    if (!(step_cad > 0.0) || !(end_cad > start_cad)) {
        throw ModelDomainError("make_polytropic_trace: bad angle range");
    }
    const double v_anchor = gas::cylinder_volume(geom, anchor_cad);
    const auto n = static_cast<std::size_t>(
                       std::floor((end_cad - start_cad) / step_cad + 1e-9)) + 1;

    CompressionTrace tr;
    tr.theta_cad.resize(n);
    std::vector<double> ratio(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double th = start_cad + static_cast<double>(i) * step_cad;
        tr.theta_cad[i] = th;
        ratio[i] = v_anchor / gas::cylinder_volume(geom, th);
    }
    tr.pressure_bar.resize(n);
    tr.temperature_k.resize(n);
    kernels::polytropic_states(ratio, anchor.pressure_bar,
                               anchor.temperature_k, k_c, tr.pressure_bar,
                               tr.temperature_k);
    return tr;
}

double arrhenius_time_scale(const GasState& state, double egr, double phi,
                            const CombustionCoefficients& c) {
    if (!state.valid() || !(phi > 0.0)) {
        throw ModelDomainError("arrhenius_time_scale: invalid state or phi");
    }
    const double affine = c.c10 * egr + c.c11;
    if (!(affine > 0.0)) {
        throw ModelDomainError(
            "arrhenius_time_scale: c10*EGR + c11 must be positive");
    }
    return std::pow(phi, c.c12) *
           std::exp(-c.c13 * std::pow(state.pressure_bar, c.c14) /
                    state.temperature_k) /
           affine;
}

double soc_knock_integral(const CompressionTrace& trace, double soi_cad,
                          double n_rpm, double egr, double phi,
                          const CombustionCoefficients& c) {
    trace.validate();
    if (std::abs(trace.theta_cad.front() - soi_cad) > 1e-9) {
        throw ModelDomainError("soc_knock_integral: trace must start at SOI");
    }
    const double affine = c.c10 * egr + c.c11;
    if (!(affine > 0.0)) {
        throw ModelDomainError(
            "soc_knock_integral: c10*EGR + c11 must be positive");
    }
    const double target = affine * n_rpm * std::pow(phi, -c.c12);

    std::vector<double> g(trace.size());
    kernels::arrhenius_integrand(trace.pressure_bar, trace.temperature_k,
                                 c.c13, c.c14, g);

    double acc = 0.0;
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const double dth = trace.theta_cad[i] - trace.theta_cad[i - 1];
        const double inc = 0.5 * (g[i - 1] + g[i]) * dth;
        if (acc + inc >= target) {
            const double frac = (target - acc) / inc;
            return trace.theta_cad[i - 1] + frac * dth;
        }
        acc += inc;
    }
    throw NoIgnitionError("knock integral did not reach unity within trace");
}

double ignition_delay(const GasState& soi_state, double n_rpm, double egr,
                      double phi, const CombustionCoefficients& c) {
    if (!soi_state.valid() || !(phi > 0.0) || !(n_rpm > 0.0)) {
        throw ModelDomainError("ignition_delay: invalid inputs");
    }
    const double affine = c.c10 * egr + c.c11;
    if (!(affine > 0.0)) {
        throw ModelDomainError("ignition_delay: c10*EGR + c11 must be positive");
    }
    return affine * n_rpm * std::pow(phi, -c.c12) *
           std::exp(c.c13 * std::pow(soi_state.pressure_bar, c.c14) /
                    soi_state.temperature_k);
}

double soc_closed_form(double soi_cad, const GasState& soi_state, double n_rpm,
                       double egr, double phi,
                       const CombustionCoefficients& c) {
    return soi_cad + ignition_delay(soi_state, n_rpm, egr, phi, c);
}

double burn_duration(double x_d, double phi, double c15,
                     const CombustionCoefficients& c) {
    if (!(x_d >= 0.0) || !(phi > 0.0) || !(c15 > 0.0)) {
        throw ModelDomainError("burn_duration: invalid inputs");
    }
    return c15 * std::pow(1.0 + x_d, c.c16) * std::pow(phi, c.c17);
}

double wiebe_burn_fraction(double theta_cad, double soc_cad, double bd_cad,
                           const WiebeParams& w) {
    if (!(bd_cad > 0.0)) {
        throw ModelDomainError("wiebe_burn_fraction: BD must be positive");
    }
    if (theta_cad < soc_cad) {
        throw ModelDomainError(
            "wiebe_burn_fraction: burn fraction undefined before SOC");
    }
    return 1.0 -
           std::exp(-w.a * std::pow((theta_cad - soc_cad) / bd_cad, w.b));
}

double ca50_from_wiebe(double soc_cad, double bd_cad, const WiebeParams& w) {
    if (!(bd_cad > 0.0)) {
        throw ModelDomainError("ca50_from_wiebe: BD must be positive");
    }
    return soc_cad + w.midburn_scale() * bd_cad;
}

double midburn_offset(double x_d, double phi, const CombustionCoefficients& c) {
    if (!(x_d >= 0.0) || !(phi > 0.0)) {
        throw ModelDomainError("midburn_offset: invalid inputs");
    }
    return c.c18 * std::pow(1.0 + x_d, c.c16) * std::pow(phi, c.c17);
}

double ca50_closed_form(double soi_cad, double egr, double n_rpm, double phi,
                        const GasState& soi_state, double x_d,
                        const CombustionCoefficients& c) {
    return soi_cad + ignition_delay(soi_state, n_rpm, egr, phi, c) +
           midburn_offset(x_d, phi, c);
}

}  // namespace combustion
}  // namespace ca50
