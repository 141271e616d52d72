#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ca50/combustion.hpp"
#include "ca50/errors.hpp"
#include "ca50/gas_properties.hpp"
#include "ca50/io.hpp"
#include "ca50/rng.hpp"

using namespace ca50;

namespace {

const CoefficientSet& published() {
    static const CoefficientSet set = io::load_coefficients(
        (std::filesystem::path(CA50_CONFIG_DIR) / "coefficients_published.txt")
            .string());
    return set;
}

const CoefficientSet& desk() {
    static const CoefficientSet set = io::load_coefficients(
        (std::filesystem::path(CA50_CONFIG_DIR) / "coefficients_default.txt")
            .string());
    return set;
}

combustion::CompressionTrace constant_trace(double soi, double end,
                                            double step, double p, double t) {
    combustion::CompressionTrace tr;
    for (double th = soi; th <= end + 1e-9; th += step) {
        tr.theta_cad.push_back(th);
        tr.pressure_bar.push_back(p);
        tr.temperature_k.push_back(t);
    }
    return tr;
}

}  // namespace

TEST_CASE("arrhenius time scale") {
    const auto& cc = published().combustion;
    const GasState state{50.0, 900.0, 0.0};
    CHECK(combustion::arrhenius_time_scale(state, 0.25, 0.7, cc) ==
          doctest::Approx(437.435076966519).epsilon(1e-10));
    // unit equivalence ratio drops its factor
    const double tau1 = combustion::arrhenius_time_scale(state, 0.25, 1.0, cc);
    const double tau = combustion::arrhenius_time_scale(state, 0.25, 0.7, cc);
    CHECK(tau1 == doctest::Approx(tau / std::pow(0.7, cc.c12)));
    CHECK(tau > 0.0);
}

TEST_CASE("arrhenius time scale is monotone in temperature") {
    // with c13 > 0 and c14 < 0 a hotter charge shrinks the magnitude of
    // the (negative) exponential argument, so the integrand rises with
    // temperature and ignition arrives sooner
    const auto& cc = published().combustion;
    double prev = combustion::arrhenius_time_scale(GasState{50, 500, 0}, 0.25,
                                                   0.7, cc);
    for (double t = 520; t <= 1200; t += 20) {
        const double tau =
            combustion::arrhenius_time_scale(GasState{50, t, 0}, 0.25, 0.7, cc);
        CHECK(tau > prev);
        prev = tau;
    }
}

TEST_CASE("arrhenius rejects a nonpositive EGR-affine term") {
    CombustionCoefficients cc = published().combustion;
    cc.c10 = -1.0;
    cc.c11 = 0.1;
    CHECK_THROWS_AS(
        combustion::arrhenius_time_scale(GasState{50, 900, 0}, 0.5, 0.7, cc),
        ModelDomainError);
}

TEST_CASE("knock integral on a constant trace equals the closed form") {
    const auto& cc = published().combustion;
    const GasState state{60.0, 950.0, -5.0};
    const double closed =
        combustion::soc_closed_form(-5.0, state, 1200, 0.25, 0.7, cc);
    const auto trace = constant_trace(-5.0, 30.0, 0.1, 60.0, 950.0);
    const double full =
        combustion::soc_knock_integral(trace, -5.0, 1200, 0.25, 0.7, cc);
    CHECK(full == doctest::Approx(closed).epsilon(1e-6));
}

TEST_CASE("knock integral against the closed form on a polytropic trace") {
    // nominal first-segment conditions of the boost-step case
    const auto& set = desk();
    const auto& cc = set.combustion;
    EngineGeometry geom;
    const auto& ic = set.intake[0];
    const double t_ivc = gas::ivc_temperature(ic, 300, 1.5, 0.7, 1200, 0.25);
    const double p_ivc = gas::ivc_pressure(ic, 300, 1200, 1.5);
    const GasState ivc{p_ivc, t_ivc, geom.ivc_cad};
    const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);

    const double soi = -5.0;
    const auto soi_state = gas::polytropic_compress(
        ivc, v_ivc, gas::cylinder_volume(geom, soi), cc.k_c, soi);
    const double closed =
        combustion::soc_closed_form(soi, soi_state, 1200, 0.25, 0.7, cc);
    const auto trace = combustion::make_polytropic_trace(
        geom, ivc, geom.ivc_cad, soi, combustion::kTraceEnd,
        combustion::kOracleTraceStep, cc.k_c);
    const double full =
        combustion::soc_knock_integral(trace, soi, 1200, 0.25, 0.7, cc);
    CHECK(std::abs(full - closed) <= 0.5);
}

TEST_CASE("doubling engine speed delays the start of combustion") {
    const auto& cc = published().combustion;
    const auto trace = constant_trace(-5.0, 60.0, 0.1, 60.0, 950.0);
    const double slow =
        combustion::soc_knock_integral(trace, -5.0, 1200, 0.25, 0.7, cc);
    const double fast =
        combustion::soc_knock_integral(trace, -5.0, 2400, 0.25, 0.7, cc);
    CHECK(fast > slow);
}

TEST_CASE("knock integral reports no ignition on an exhausted trace") {
    const auto& cc = published().combustion;
    // ultra-cold charge: the integrand never accumulates to the target
    const auto trace = constant_trace(-5.0, 40.0, 0.1, 60.0, 100.0);
    CHECK_THROWS_AS(
        combustion::soc_knock_integral(trace, -5.0, 1200, 0.25, 0.7, cc),
        NoIgnitionError);
}

TEST_CASE("trace validation") {
    combustion::CompressionTrace tr;
    tr.theta_cad = {0.0, 0.0};
    tr.pressure_bar = {1.0, 1.0};
    tr.temperature_k = {300.0, 300.0};
    CHECK_THROWS_AS(tr.validate(), ModelDomainError);  // not increasing
    tr.theta_cad = {0.0, 1.0};
    tr.pressure_bar = {1.0, -1.0};
    CHECK_THROWS_AS(tr.validate(), ModelDomainError);  // nonpositive state
}

TEST_CASE("closed-form start of combustion") {
    const auto& cc = published().combustion;
    const GasState state{60.0, 950.0, -5.0};
    CHECK(combustion::soc_closed_form(-5.0, state, 1200, 0.25, 0.7, cc) ==
          doctest::Approx(-2.832318396991).epsilon(1e-10));
    // the delay term is strictly positive
    rng::SplitMix64 r(8);
    for (int i = 0; i < 100; ++i) {
        const GasState s{r.next_uniform(20, 150), r.next_uniform(300, 1200),
                         0.0};
        CHECK(combustion::ignition_delay(s, r.next_uniform(1000, 2000),
                                         r.next_uniform(0, 0.5),
                                         r.next_uniform(0.4, 1.0), cc) > 0.0);
    }
    // raising injection pressure shortens the delay (c14 < 0)
    const double lo = combustion::ignition_delay(GasState{50, 950, 0}, 1200,
                                                 0.25, 0.7, cc);
    const double hi = combustion::ignition_delay(GasState{80, 950, 0}, 1200,
                                                 0.25, 0.7, cc);
    CHECK(hi < lo);
}

TEST_CASE("burn duration") {
    const auto& cc = published().combustion;
    CHECK(combustion::burn_duration(0.0, 1.0, cc.c15, cc) ==
          doctest::Approx(cc.c15).epsilon(1e-15));
    // strictly increasing in dilution (c16 > 0)
    double prev = combustion::burn_duration(0.0, 0.7, cc.c15, cc);
    for (double xd = 0.05; xd <= 0.6; xd += 0.05) {
        const double bd = combustion::burn_duration(xd, 0.7, cc.c15, cc);
        CHECK(bd > prev);
        prev = bd;
    }
    // power law: doubling (1 + x_d) scales by 2^c16
    const double base = combustion::burn_duration(0.0, 0.7, cc.c15, cc);
    const double doubled = combustion::burn_duration(1.0, 0.7, cc.c15, cc);
    CHECK(doubled == doctest::Approx(base * std::pow(2.0, cc.c16))
                         .epsilon(1e-12));
    CHECK_THROWS_AS(combustion::burn_duration(-0.1, 0.7, cc.c15, cc),
                    ModelDomainError);
}

TEST_CASE("wiebe burn fraction") {
    const WiebeParams w{};
    CHECK(combustion::wiebe_burn_fraction(3.0, 3.0, 20.0, w) == 0.0);
    const double mid = 3.0 + 20.0 * w.midburn_scale();
    CHECK(combustion::wiebe_burn_fraction(mid, 3.0, 20.0, w) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(combustion::wiebe_burn_fraction(3.0 + 2000.0, 3.0, 20.0, w) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(combustion::wiebe_burn_fraction(2.9, 3.0, 20.0, w),
                    ModelDomainError);
    CHECK_THROWS_AS(combustion::wiebe_burn_fraction(3.5, 3.0, 0.0, w),
                    ModelDomainError);
}

TEST_CASE("wiebe burn fraction is monotone in crank angle") {
    const WiebeParams w{};
    double prev = -1.0;
    for (double th = 0.0; th <= 80.0; th += 0.05) {
        const double xb = combustion::wiebe_burn_fraction(th, 0.0, 25.0, w);
        CHECK(xb - prev >= -1e-12);
        prev = xb;
    }
}

TEST_CASE("midburn angle from the wiebe curve") {
    SUBCASE("vanishing burn duration collapses onto SOC") {
        const WiebeParams w{};
        CHECK(combustion::ca50_from_wiebe(2.0, 1e-12, w) ==
              doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("a = ln 2 and b = 1 give SOC + BD exactly") {
        const WiebeParams w{std::log(2.0), 1.0};
        CHECK(combustion::ca50_from_wiebe(2.0, 17.0, w) ==
              doctest::Approx(19.0).epsilon(1e-12));
    }
    SUBCASE("bisection round trip on random parameters") {
        rng::SplitMix64 r(9);
        for (int i = 0; i < 1000; ++i) {
            const WiebeParams w{r.next_uniform(0.5, 12.0),
                                r.next_uniform(0.5, 4.0)};
            const double soc = r.next_uniform(-10.0, 10.0);
            const double bd = r.next_uniform(2.0, 60.0);
            const double ca50 = combustion::ca50_from_wiebe(soc, bd, w);
            // independent bisection for the half-burn angle
            double lo = soc, hi = soc + 40.0 * bd;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (combustion::wiebe_burn_fraction(mid, soc, bd, w) < 0.5) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            CHECK(ca50 == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));
            CHECK(combustion::wiebe_burn_fraction(ca50, soc, bd, w) ==
                  doctest::Approx(0.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("closed-form CA50") {
    const auto& cc = published().combustion;
    const GasState state{60.0, 950.0, -5.0};
    SUBCASE("equals SOC plus the composite midburn term exactly") {
        const double ca50 = combustion::ca50_closed_form(-5.0, 0.25, 1200, 0.7,
                                                         state, 0.3142, cc);
        const double soc =
            combustion::soc_closed_form(-5.0, state, 1200, 0.25, 0.7, cc);
        CHECK(ca50 == doctest::Approx(soc + combustion::midburn_offset(
                                                0.3142, 0.7, cc))
                          .epsilon(1e-15));
    }
    SUBCASE("unit sensitivity to the injection angle at a frozen state") {
        const double a = combustion::ca50_closed_form(-5.0, 0.25, 1200, 0.7,
                                                      state, 0.3142, cc);
        const double b = combustion::ca50_closed_form(-4.0, 0.25, 1200, 0.7,
                                                      state, 0.3142, cc);
        CHECK(b - a == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("value at the boost-step case's first operating point") {
        EngineGeometry geom;
        const auto& ic = published().intake[0];
        const double t_ivc =
            gas::ivc_temperature(ic, 300, 1.5, 0.7, 1200, 0.25);
        const double p_ivc = gas::ivc_pressure(ic, 300, 1200, 1.5);
        const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);
        const auto soi_state = gas::polytropic_compress(
            GasState{p_ivc, t_ivc, geom.ivc_cad}, v_ivc,
            gas::cylinder_volume(geom, -5.0), cc.k_c, -5.0);
        const double ca50 = combustion::ca50_closed_form(
            -5.0, 0.25, 1200, 0.7, soi_state, 0.25 + 0.0642, cc);
        CHECK(ca50 == doctest::Approx(1406.693802).epsilon(1e-8));
    }
}

TEST_CASE("closed-form CA50 is strictly increasing in EGR") {
    const auto& cc = published().combustion;
    rng::SplitMix64 r(10);
    for (int i = 0; i < 300; ++i) {
        const GasState s{r.next_uniform(30, 120), r.next_uniform(400, 1100),
                         0.0};
        const double n = r.next_uniform(1200, 1500);
        const double phi = r.next_uniform(0.5, 0.9);
        const double soi = r.next_uniform(-10, 0);
        const double egr = r.next_uniform(0.0, 0.48);
        const double x_r = r.next_uniform(0.0344, 0.0909);
        const double lo = combustion::ca50_closed_form(soi, egr, n, phi, s,
                                                       egr + x_r, cc);
        const double hi = combustion::ca50_closed_form(
            soi, egr + 0.02, n, phi, s, egr + 0.02 + x_r, cc);
        CHECK(hi > lo);
    }
}

TEST_CASE("all closed-form outputs stay finite across the envelope") {
    const auto& set = desk();
    const auto& cc = set.combustion;
    EngineGeometry geom;
    const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);
    rng::SplitMix64 r(11);
    for (int i = 0; i < 500; ++i) {
        const double t_im = r.next_uniform(302.52, 333.29);
        const double p_im = r.next_uniform(1.43, 2.97);
        const double n = r.next_uniform(1200, 1500);
        const double phi = r.next_uniform(0.5, 0.9);
        const double egr = r.next_uniform(0.0, 0.5);
        const double soi = r.next_uniform(-10, 0);
        const auto& ic = set.intake[static_cast<std::size_t>(i % 6)];
        const double t_ivc = gas::ivc_temperature(ic, t_im, p_im, phi, n, egr);
        const double p_ivc = gas::ivc_pressure(ic, t_im, n, p_im);
        const auto state = gas::polytropic_compress(
            GasState{p_ivc, t_ivc, geom.ivc_cad}, v_ivc,
            gas::cylinder_volume(geom, soi), cc.k_c, soi);
        const double ca50 = combustion::ca50_closed_form(
            soi, egr, n, phi, state, egr + 0.0642, cc);
        CHECK(std::isfinite(t_ivc));
        CHECK(std::isfinite(p_ivc));
        CHECK(std::isfinite(ca50));
    }
}
