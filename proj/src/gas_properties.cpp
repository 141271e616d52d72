#include "ca50/gas_properties.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ca50/errors.hpp"

namespace ca50 {

void EngineGeometry::validate() const {
    if (!(compression_ratio > 1.0)) {
        throw ModelDomainError("compression ratio must exceed 1");
    }
    if (!(rod_length_mm > stroke_mm / 2.0)) {
        throw ModelDomainError("rod length must exceed half the stroke");
    }
    if (!(bore_mm > 0.0) || !(stroke_mm > 0.0) || n_cylinders < 1) {
        throw ModelDomainError("bore, stroke and cylinder count must be positive");
    }
}

double EngineGeometry::displacement_per_cylinder_l() const {
    const double area_mm2 = M_PI / 4.0 * bore_mm * bore_mm;
    return area_mm2 * stroke_mm * 1e-6;
}

double EngineGeometry::clearance_volume_l() const {
    return displacement_per_cylinder_l() / (compression_ratio - 1.0);
}

namespace gas {

double egr_fraction(double x_o2_amb, double x_o2_int, double x_o2_exh) {
    for (double x : {x_o2_amb, x_o2_int, x_o2_exh}) {
        if (!(x >= 0.0 && x <= 1.0)) {
            throw ModelDomainError("oxygen fraction outside [0, 1]");
        }
    }
    if (!(x_o2_amb > x_o2_exh)) {
        throw ModelDomainError("ambient O2 must exceed exhaust O2");
    }
    const double den = x_o2_amb - x_o2_exh;
    if (den < 1e-6) {
        throw IllConditionedSensingError(
            "ambient/exhaust O2 difference below 1e-6");
    }
    // Sensor jitter: intake may read slightly outside [exh, amb]; clamp
    // within the tolerance band, error beyond it.
    if (x_o2_int > x_o2_amb + kO2SensorTolerance ||
        x_o2_int < x_o2_exh - kO2SensorTolerance) {
        throw ModelDomainError("intake O2 outside the ambient/exhaust band");
    }
    return std::clamp((x_o2_amb - x_o2_int) / den, 0.0, 1.0);
}

double ivc_temperature(const IntakeCoefficients& c, double t_im_k,
                       double p_im_bar, double phi, double n_rpm, double egr) {
    if (!(t_im_k > 0.0 && p_im_bar > 0.0 && phi > 0.0 && n_rpm > 0.0)) {
        throw ModelDomainError("ivc_temperature: inputs must be positive");
    }
    if (!(egr >= 0.0 && egr <= 1.0)) {
        throw ModelDomainError("ivc_temperature: EGR outside [0, 1]");
    }
    const double poly = (c.c1 * t_im_k + c.c2) * t_im_k + c.c3;
    const double t = poly * std::pow(phi, c.c4) * std::pow(n_rpm, c.c5) *
                     std::pow(p_im_bar, c.c7) / std::pow(1.0 + egr, c.c6);
    if (!std::isfinite(t)) {
        throw ModelDomainError(
            "ivc_temperature: non-finite result for T_im=" +
            std::to_string(t_im_k) + " P_im=" + std::to_string(p_im_bar) +
            " phi=" + std::to_string(phi) + " N=" + std::to_string(n_rpm) +
            " EGR=" + std::to_string(egr));
    }
    return t;
}

double ivc_pressure(const IntakeCoefficients& c, double t_im_k, double n_rpm,
                    double p_im_bar) {
    if (!(t_im_k > 0.0 && n_rpm > 0.0 && p_im_bar > 0.0)) {
        throw ModelDomainError("ivc_pressure: inputs must be positive");
    }
    return std::pow(t_im_k, c.c8) * std::pow(n_rpm, c.c9) * p_im_bar;
}

double residual_gas_fraction(double m_r_kg, double m_air_kg, double m_fuel_kg,
                             double m_egr_kg) {
    if (m_r_kg < 0.0 || m_air_kg < 0.0 || m_fuel_kg < 0.0 || m_egr_kg < 0.0) {
        throw ModelDomainError("residual_gas_fraction: negative mass");
    }
    const double den = m_air_kg + m_fuel_kg + m_egr_kg;
    if (!(den > 0.0)) {
        throw ModelDomainError("residual_gas_fraction: zero charge mass");
    }
    return m_r_kg / den;
}

GasState polytropic_compress(const GasState& ivc_state, double v_ivc_l,
                             double v_soi_l, double k_c, double soi_cad) {
    if (!ivc_state.valid()) {
        throw ModelDomainError("polytropic_compress: invalid gas state");
    }
    if (!(v_ivc_l > 0.0 && v_soi_l > 0.0)) {
        throw ModelDomainError("polytropic_compress: volumes must be positive");
    }
    if (!(k_c > 1.0)) {
        throw ModelDomainError("polytropic_compress: k_c must exceed 1");
    }
    const double ratio = v_ivc_l / v_soi_l;
    return GasState{ivc_state.pressure_bar * std::pow(ratio, k_c),
                    ivc_state.temperature_k * std::pow(ratio, k_c - 1.0),
                    soi_cad};
}

double cylinder_volume(const EngineGeometry& geom, double theta_cad) {
    const double a = geom.stroke_mm / 2.0;  // crank radius
    const double l = geom.rod_length_mm;
    const double th = theta_cad * M_PI / 180.0;
    const double s = a * (1.0 - std::cos(th)) +
                     l * (1.0 - std::sqrt(1.0 - std::pow(a * std::sin(th) / l, 2)));
    const double area_mm2 = M_PI / 4.0 * geom.bore_mm * geom.bore_mm;
    return geom.clearance_volume_l() + area_mm2 * s * 1e-6;
}

}  // namespace gas
}  // namespace ca50
