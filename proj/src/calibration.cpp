#include "ca50/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ca50/combustion.hpp"
#include "ca50/errors.hpp"
#include "ca50/gas_properties.hpp"
#include "ca50/io.hpp"
#include "ca50/rng.hpp"

namespace ca50::calib {

double rmse(std::span<const double> predictions,
            std::span<const double> targets) {
    if (predictions.size() != targets.size() || predictions.empty()) {
        throw ModelDomainError("rmse: sequences must be nonempty and equal");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

namespace {

// Mean squared error: the descent objective.  Smooth in the
// coefficients everywhere (RMSE has a gradient kink at zero error), and
// monotone in RMSE, so accepted iterations decrease both.
double eval_mse(const BatchEvaluator& evaluate, std::span<const double> coeffs,
                std::span<const double> targets, std::vector<double>& work) {
    evaluate(coeffs, work);
    double acc = 0.0;
    for (std::size_t i = 0; i < work.size(); ++i) {
        const double d = work[i] - targets[i];
        acc += d * d;
    }
    const double m = acc / static_cast<double>(work.size());
    return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
}

}  // namespace

FitResult batch_gradient_descent(const BatchEvaluator& evaluate,
                                 std::span<const double> targets,
                                 std::vector<double> initial,
                                 const OptimizerConfig& config) {
    if (targets.empty()) {
        throw ModelDomainError("batch_gradient_descent: empty dataset");
    }
    if (!(config.learning_rate > 0.0) || config.stop_tolerance < 0.0) {
        throw ModelDomainError("batch_gradient_descent: bad optimizer config");
    }
    const std::size_t np = initial.size();

    // Coefficient magnitudes span many decades; normalize each by its
    // initial magnitude so no coordinate dominates the gradient.
    std::vector<double> scale(np);
    for (std::size_t i = 0; i < np; ++i) {
        scale[i] = std::abs(initial[i]) > 0.0 ? std::abs(initial[i]) : 1.0;
    }

    std::vector<double> theta = std::move(initial);
    std::vector<double> work(targets.size());

    if (config.sensitivity_scaling) {
        // Equalize the RMS output response of a unit normalized step in
        // each coordinate (the magnitudes alone leave sensitivities
        // spanning several decades for the exponential terms).
        std::vector<double> lo(targets.size()), hi(targets.size());
        std::vector<double> sens(np, 0.0);
        double max_sens = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            const double h = config.fd_step * scale[i];
            const double saved = theta[i];
            theta[i] = saved + h;
            evaluate(theta, hi);
            theta[i] = saved - h;
            evaluate(theta, lo);
            theta[i] = saved;
            double acc = 0.0;
            for (std::size_t j = 0; j < targets.size(); ++j) {
                const double d = (hi[j] - lo[j]) / (2.0 * config.fd_step);
                acc += d * d;
            }
            sens[i] = std::sqrt(acc / static_cast<double>(targets.size()));
            if (std::isfinite(sens[i])) max_sens = std::max(max_sens, sens[i]);
        }
        if (max_sens > 0.0) {
            for (std::size_t i = 0; i < np; ++i) {
                const double floor = 1e-9 * max_sens;
                const double s = std::isfinite(sens[i])
                                     ? std::max(sens[i], floor)
                                     : max_sens;
                scale[i] /= s;
            }
        }
    }
    std::vector<double> grad(np);
    std::vector<double> trial(np);

    FitResult result;
    double current = eval_mse(evaluate, theta, targets, work);
    if (!std::isfinite(current)) {
        throw OptimizerFailure(
            "batch_gradient_descent: non-finite error at the initial point",
            result.rmse_log);
    }
    result.rmse_log.push_back(std::sqrt(current));

    double lr = config.learning_rate;
    int consecutive_failures = 0;

    int iter = 0;
    for (; iter < config.max_iterations; ++iter) {
        // central finite differences in normalized coordinates
        double gnorm2 = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            const double h = config.fd_step * scale[i];
            const double saved = theta[i];
            theta[i] = saved + h;
            const double fp = eval_mse(evaluate, theta, targets, work);
            theta[i] = saved - h;
            const double fm = eval_mse(evaluate, theta, targets, work);
            theta[i] = saved;
            grad[i] = (fp - fm) / (2.0 * config.fd_step);
            gnorm2 += grad[i] * grad[i];
        }
        result.final_gradient_norm = std::sqrt(gnorm2);
        if (result.final_gradient_norm <= 1e-12 * (1.0 + current)) {
            break;  // already optimal
        }

        auto probe = [&](double s) {
            for (std::size_t i = 0; i < np; ++i) {
                trial[i] = theta[i] - s * grad[i] * scale[i];
            }
            return eval_mse(evaluate, trial, targets, work);
        };

        double step = lr;
        double candidate = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int bt = 0; bt <= config.max_backtracks; ++bt) {
            candidate = probe(step);
            if (candidate < current) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (accepted) {
            // expand along the ray while it keeps improving, so a
            // previously collapsed step size recovers within one iteration
            for (int ex = 0; ex < 60; ++ex) {
                const double wider = probe(step * 2.0);
                if (!(wider < candidate)) break;
                step *= 2.0;
                candidate = wider;
            }
            probe(step);  // leave `trial` at the chosen step
        }
        if (!accepted) {
            // cannot decrease along the gradient at any probed step; near
            // a stationary point that is numerical optimality, with a
            // large gradient it counts toward divergence
            if (result.final_gradient_norm <= 1e-6 * (1.0 + current) &&
                result.final_gradient_norm * step <= 1e-15 * (1.0 + current)) {
                break;
            }
            lr = step;
            if (++consecutive_failures >= 10) {
                throw OptimizerFailure(
                    "batch_gradient_descent: RMSE failed to decrease for 10 "
                    "consecutive backtracked iterations",
                    result.rmse_log);
            }
            continue;
        }
        consecutive_failures = 0;
        const double improvement = std::sqrt(current) - std::sqrt(candidate);
        theta = trial;
        current = candidate;
        result.rmse_log.push_back(std::sqrt(current));
        lr = step * config.step_growth;
        if (improvement < config.stop_tolerance) break;  // cannot decrease
    }

    result.coefficients = std::move(theta);
    result.final_rmse = std::sqrt(current);
    result.iterations = iter;
    return result;
}

namespace {

// Damped Gauss-Newton (Levenberg-Marquardt) on the batch residuals.
// The combustion-phasing fit couples near-collinear exponential terms;
// plain descent (in any diagonal or statically whitened scaling) needs
// ~1e5 iterations there, so the staged fits below use second-order
// steps.  The convergence-log contract is the same: RMSE per accepted
// iteration, monotone nonincreasing.
FitResult lm_fit(const BatchEvaluator& evaluate,
                 std::span<const double> targets, std::vector<double> theta,
                 const OptimizerConfig& config) {
    const std::size_t np = theta.size();
    const std::size_t n = targets.size();
    const int max_outer = std::min(config.max_iterations, 400);

    std::vector<double> scale(np);
    for (std::size_t i = 0; i < np; ++i) {
        scale[i] = std::abs(theta[i]) > 0.0 ? std::abs(theta[i]) : 1.0;
    }

    std::vector<double> pred(n), hi(n), lo(n), trial(np);
    std::vector<std::vector<double>> jac(np, std::vector<double>(n));

    auto mse_of = [&](std::span<const double> th) {
        evaluate(th, pred);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = pred[j] - targets[j];
            acc += d * d;
        }
        const double m = acc / static_cast<double>(n);
        return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
    };

    FitResult result;
    double current = mse_of(theta);
    if (!std::isfinite(current)) {
        throw OptimizerFailure("lm_fit: non-finite error at the initial point",
                               result.rmse_log);
    }
    result.rmse_log.push_back(std::sqrt(current));

    double lambda = 1e-3;
    int iter = 0;
    for (; iter < max_outer; ++iter) {
        // Jacobian in normalized coordinates
        for (std::size_t i = 0; i < np; ++i) {
            const double h = config.fd_step * scale[i];
            const double saved = theta[i];
            theta[i] = saved + h;
            evaluate(theta, hi);
            theta[i] = saved - h;
            evaluate(theta, lo);
            theta[i] = saved;
            for (std::size_t j = 0; j < n; ++j) {
                jac[i][j] = (hi[j] - lo[j]) / (2.0 * config.fd_step);
            }
        }
        evaluate(theta, pred);
        std::vector<double> g(np, 0.0);
        std::vector<std::vector<double>> gram(np, std::vector<double>(np, 0.0));
        for (std::size_t a = 0; a < np; ++a) {
            for (std::size_t j = 0; j < n; ++j) {
                g[a] += jac[a][j] * (pred[j] - targets[j]);
            }
            g[a] /= static_cast<double>(n);
            for (std::size_t b = 0; b <= a; ++b) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    acc += jac[a][j] * jac[b][j];
                }
                gram[a][b] = gram[b][a] = acc / static_cast<double>(n);
            }
        }
        result.final_gradient_norm = 0.0;
        for (double v : g) result.final_gradient_norm += v * v;
        result.final_gradient_norm = std::sqrt(result.final_gradient_norm);
        if (result.final_gradient_norm <= 1e-14 * (1.0 + current)) break;

        bool accepted = false;
        double candidate = current;
        for (int attempt = 0; attempt < 40; ++attempt) {
            // (G + lambda diag(G)) * delta = -g, solved by Cholesky
            std::vector<std::vector<double>> a(np,
                                               std::vector<double>(np, 0.0));
            for (std::size_t p = 0; p < np; ++p) {
                for (std::size_t q = 0; q <= p; ++q) a[p][q] = gram[p][q];
                a[p][p] += lambda * std::max(gram[p][p], 1e-30);
            }
            bool ok = true;
            for (std::size_t p = 0; p < np && ok; ++p) {
                for (std::size_t q = 0; q <= p; ++q) {
                    double acc = a[p][q];
                    for (std::size_t k = 0; k < q; ++k) {
                        acc -= a[p][k] * a[q][k];
                    }
                    if (p == q) {
                        if (!(acc > 0.0)) {
                            ok = false;
                            break;
                        }
                        a[p][p] = std::sqrt(acc);
                    } else {
                        a[p][q] = acc / a[q][q];
                    }
                }
            }
            if (!ok) {
                lambda *= 4.0;
                continue;
            }
            std::vector<double> y(np), delta(np);
            for (std::size_t p = 0; p < np; ++p) {
                double acc = -g[p];
                for (std::size_t k = 0; k < p; ++k) acc -= a[p][k] * y[k];
                y[p] = acc / a[p][p];
            }
            for (std::size_t p = np; p-- > 0;) {
                double acc = y[p];
                for (std::size_t k = p + 1; k < np; ++k) {
                    acc -= a[k][p] * delta[k];
                }
                delta[p] = acc / a[p][p];
            }
            for (std::size_t p = 0; p < np; ++p) {
                trial[p] = theta[p] + delta[p] * scale[p];
            }
            candidate = mse_of(trial);
            if (candidate < current) {
                accepted = true;
                lambda = std::max(lambda / 3.0, 1e-12);
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) break;  // error cannot decrease further

        const double improvement = std::sqrt(current) - std::sqrt(candidate);
        theta = trial;
        current = candidate;
        result.rmse_log.push_back(std::sqrt(current));
        if (improvement < config.stop_tolerance) break;
    }

    result.coefficients = std::move(theta);
    result.final_rmse = std::sqrt(current);
    result.iterations = iter;
    return result;
}

}  // namespace

// --- intake fits -------------------------------------------------------

namespace {

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// seeded 70/30 split
Split split_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng::SplitMix64 r(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = r.next_u64() % i;
        std::swap(idx[i - 1], idx[j]);
    }
    Split s;
    const std::size_t ntrain = std::max<std::size_t>(1, (n * 7) / 10);
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ntrain));
    s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(ntrain), idx.end());
    if (s.validation.empty()) s.validation = s.train;
    return s;
}

struct IntakeRows {
    std::vector<double> t_im, ln_phi, ln_n, ln_p, ln_dil;
    std::vector<double> t_target, p_target, ln_t_im;
};

IntakeRows collect_rows(const std::vector<CalibrationSample>& data,
                        const std::vector<std::size_t>& idx) {
    IntakeRows rows;
    for (std::size_t i : idx) {
        const auto& s = data[i];
        rows.t_im.push_back(s.t_im_k);
        rows.ln_phi.push_back(std::log(s.phi));
        rows.ln_n.push_back(std::log(s.n_rpm));
        rows.ln_p.push_back(std::log(s.p_im_bar));
        rows.ln_dil.push_back(std::log(1.0 + s.egr));
        rows.ln_t_im.push_back(std::log(s.t_im_k));
        rows.t_target.push_back(s.t_ivc_k);
        rows.p_target.push_back(s.p_ivc_bar);
    }
    return rows;
}

std::vector<double> t_model_predict(const IntakeRows& rows,
                                    std::span<const double> c) {
    std::vector<double> out(rows.t_im.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double poly = (c[0] * rows.t_im[i] + c[1]) * rows.t_im[i] + c[2];
        out[i] = poly * std::exp(c[3] * rows.ln_phi[i] + c[4] * rows.ln_n[i] +
                                 c[6] * rows.ln_p[i] - c[5] * rows.ln_dil[i]);
    }
    return out;
}

std::vector<double> p_model_predict(const IntakeRows& rows,
                                    std::span<const double> c) {
    std::vector<double> out(rows.t_im.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(c[0] * rows.ln_t_im[i] + c[1] * rows.ln_n[i] +
                          rows.ln_p[i]);
    }
    return out;
}

}  // namespace

std::vector<CylinderIntakeFit> calibrate_intake(
    const std::vector<CalibrationSample>& data,
    const std::array<IntakeCoefficients, kNumCylinders>& initial,
    const OptimizerConfig& config, std::uint64_t split_seed) {
    std::map<int, std::vector<std::size_t>> by_cylinder;
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_cylinder[data[i].cylinder_index].push_back(i);
    }
    if (by_cylinder.empty()) {
        throw ModelDomainError("calibrate_intake: empty dataset");
    }

    std::vector<CylinderIntakeFit> fits;
    for (const auto& [cyl, idx] : by_cylinder) {
        if (cyl < 1 || cyl > kNumCylinders) {
            throw ModelDomainError("calibrate_intake: cylinder index out of range");
        }
        if (idx.size() < 30) {
            throw ModelDomainError(
                "calibrate_intake: need >= 30 samples per cylinder, cylinder " +
                std::to_string(cyl) + " has " + std::to_string(idx.size()));
        }
        const auto split = split_indices(idx.size(), split_seed + static_cast<std::uint64_t>(cyl));
        auto pick = [&](const std::vector<std::size_t>& sel) {
            std::vector<std::size_t> out;
            out.reserve(sel.size());
            for (std::size_t k : sel) out.push_back(idx[k]);
            return out;
        };
        const IntakeRows train = collect_rows(data, pick(split.train));
        const IntakeRows val = collect_rows(data, pick(split.validation));
        const auto& init = initial[static_cast<std::size_t>(cyl - 1)];

        CylinderIntakeFit fit;
        fit.cylinder_index = cyl;

        {   // temperature model: c1..c7
            std::vector<double> theta = {init.c1, init.c2, init.c3, init.c4,
                                         init.c5, init.c6, init.c7};
            auto eval = [&train](std::span<const double> c,
                                 std::span<double> out) {
                const auto pred = t_model_predict(train, c);
                std::copy(pred.begin(), pred.end(), out.begin());
            };
            const auto res = lm_fit(eval, train.t_target, theta, config);
            fit.coeffs.c1 = res.coefficients[0];
            fit.coeffs.c2 = res.coefficients[1];
            fit.coeffs.c3 = res.coefficients[2];
            fit.coeffs.c4 = res.coefficients[3];
            fit.coeffs.c5 = res.coefficients[4];
            fit.coeffs.c6 = res.coefficients[5];
            fit.coeffs.c7 = res.coefficients[6];
            fit.t_ivc_train_rmse = res.final_rmse;
            const auto vp = t_model_predict(val, res.coefficients);
            fit.t_ivc_validation_rmse = rmse(vp, val.t_target);
        }
        {   // pressure model: c8, c9
            std::vector<double> theta = {init.c8, init.c9};
            auto eval = [&train](std::span<const double> c,
                                 std::span<double> out) {
                const auto pred = p_model_predict(train, c);
                std::copy(pred.begin(), pred.end(), out.begin());
            };
            const auto res = lm_fit(eval, train.p_target, theta, config);
            fit.coeffs.c8 = res.coefficients[0];
            fit.coeffs.c9 = res.coefficients[1];
            fit.p_ivc_train_rmse = res.final_rmse;
            const auto vp = p_model_predict(val, res.coefficients);
            fit.p_ivc_validation_rmse = rmse(vp, val.p_target);
        }
        fits.push_back(fit);
    }
    return fits;
}

// --- pooled CA50 fit ----------------------------------------------------



namespace {

struct Ca50Rows {
    std::vector<double> soi, egr, n, ln_phi, ln_p_soi, inv_t_soi, ln_dil;
    std::vector<double> ca50_target, soc_target;
    std::vector<int> cylinder;
};

Ca50Rows assemble_ca50_rows(const std::vector<CalibrationSample>& data,
                            const std::vector<CylinderIntakeFit>& intake,
                            const EngineGeometry& geom, double k_c) {
    std::map<int, const CylinderIntakeFit*> by_cyl;
    for (const auto& f : intake) by_cyl[f.cylinder_index] = &f;

    const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);
    Ca50Rows rows;
    for (const auto& s : data) {
        auto it = by_cyl.find(s.cylinder_index);
        if (it == by_cyl.end()) {
            throw ModelDomainError(
                "calibrate_ca50: no intake fit for cylinder " +
                std::to_string(s.cylinder_index));
        }
        const auto& ic = it->second->coeffs;
        const double t_ivc = gas::ivc_temperature(ic, s.t_im_k, s.p_im_bar,
                                                  s.phi, s.n_rpm, s.egr);
        const double p_ivc = gas::ivc_pressure(ic, s.t_im_k, s.n_rpm,
                                               s.p_im_bar);
        const GasState soi_state = gas::polytropic_compress(
            GasState{p_ivc, t_ivc, geom.ivc_cad}, v_ivc,
            gas::cylinder_volume(geom, s.soi_cad), k_c, s.soi_cad);
        rows.soi.push_back(s.soi_cad);
        rows.egr.push_back(s.egr);
        rows.n.push_back(s.n_rpm);
        rows.ln_phi.push_back(std::log(s.phi));
        rows.ln_p_soi.push_back(std::log(soi_state.pressure_bar));
        rows.inv_t_soi.push_back(1.0 / soi_state.temperature_k);
        rows.ln_dil.push_back(std::log(1.0 + s.egr + s.x_r));
        rows.ca50_target.push_back(s.ca50_cad);
        rows.soc_target.push_back(s.soc_cad);
        rows.cylinder.push_back(s.cylinder_index);
    }
    return rows;
}

// Fit-coordinate layout: c10 c11 c12 ln(c13) c14 c16 c17 c18.  The
// Arrhenius scale is searched in log space: the loss valley of the
// (c13, c14) pair is straight there, where in linear space its curvature
// stalls gradient descent.
double ca50_row(const Ca50Rows& r, std::size_t i, std::span<const double> c) {
    const double delay = (c[0] * r.egr[i] + c[1]) * r.n[i] *
                         std::exp(-c[2] * r.ln_phi[i] +
                                  std::exp(c[3] + c[4] * r.ln_p_soi[i]) *
                                      r.inv_t_soi[i]);
    const double mid = c[7] * std::exp(c[5] * r.ln_dil[i] + c[6] * r.ln_phi[i]);
    return r.soi[i] + delay + mid;
}

double soc_row(const Ca50Rows& r, std::size_t i, std::span<const double> c) {
    return r.soi[i] + (c[0] * r.egr[i] + c[1]) * r.n[i] *
                          std::exp(-c[2] * r.ln_phi[i] +
                                   std::exp(c[3] + c[4] * r.ln_p_soi[i]) *
                                       r.inv_t_soi[i]);
}

void per_cylinder_stats(const std::vector<int>& cylinder,
                        const std::vector<double>& errors,
                        std::array<double, kNumCylinders>& std_out,
                        std::array<double, kNumCylinders>& max_out) {
    std::array<double, kNumCylinders> sum{}, sum2{}, mx{};
    std::array<int, kNumCylinders> count{};
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const auto c = static_cast<std::size_t>(cylinder[i] - 1);
        sum[c] += errors[i];
        sum2[c] += errors[i] * errors[i];
        mx[c] = std::max(mx[c], std::abs(errors[i]));
        ++count[c];
    }
    for (std::size_t c = 0; c < kNumCylinders; ++c) {
        if (count[c] == 0) continue;
        const double n = count[c];
        const double mean = sum[c] / n;
        std_out[c] = std::sqrt(std::max(0.0, sum2[c] / n - mean * mean));
        max_out[c] = mx[c];
    }
}

}  // namespace

Ca50FitReport calibrate_ca50(const std::vector<CalibrationSample>& data,
                             const std::vector<CylinderIntakeFit>& intake,
                             const CombustionCoefficients& initial,
                             const EngineGeometry& geom,
                             const OptimizerConfig& config) {
    if (data.empty()) throw ModelDomainError("calibrate_ca50: empty dataset");
    if (!(initial.c13 > 0.0) || !(initial.c18 > 0.0)) {
        throw ModelDomainError(
            "calibrate_ca50: initial c13 and c18 must be positive");
    }
    const Ca50Rows rows = assemble_ca50_rows(data, intake, geom, initial.k_c);
    const std::size_t n = rows.ca50_target.size();

    FitResult stage1, stage2;

    // Stage 1: the ignition-delay block against the SOC targets.  Fitted
    // jointly with the burn-duration block it is unidentifiable in
    // practice: the mid-burn term happily absorbs delay error while the
    // stiff exponential coordinates stay put.  The fit runs on the log
    // of the delay, where the Jacobian columns decorrelate; gradient
    // descent on the CAD-space residual stalls in a near-collinear
    // valley.
    std::vector<double> delay_theta = {initial.c10, initial.c11, initial.c12,
                                       std::log(initial.c13), initial.c14};
    {
        std::vector<double> ln_delay_target(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = rows.soc_target[i] - rows.soi[i];
            if (!(d > 0.0)) {
                throw ModelDomainError(
                    "calibrate_ca50: SOC target at or before injection");
            }
            ln_delay_target[i] = std::log(d);
        }
        auto eval = [&rows](std::span<const double> c, std::span<double> out) {
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double pre = (c[0] * rows.egr[i] + c[1]) * rows.n[i];
                out[i] = std::log(pre) - c[2] * rows.ln_phi[i] +
                         std::exp(c[3] + c[4] * rows.ln_p_soi[i]) *
                             rows.inv_t_soi[i];
            }
        };
        auto res = lm_fit(eval, ln_delay_target, delay_theta, config);
        delay_theta = res.coefficients;
        stage1 = std::move(res);
    }

    // Stage 2: the burn-duration block against the CA50 remainder.
    std::vector<double> mid_target(n);
    for (std::size_t i = 0; i < n; ++i) {
        mid_target[i] = rows.ca50_target[i] - soc_row(rows, i, delay_theta);
    }
    std::vector<double> mid_theta = {initial.c16, initial.c17,
                                     std::log(initial.c18)};
    {
        auto eval = [&rows](std::span<const double> c, std::span<double> out) {
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = std::exp(c[2] + c[0] * rows.ln_dil[i] +
                                  c[1] * rows.ln_phi[i]);
            }
        };
        auto res = lm_fit(eval, mid_target, mid_theta, config);
        mid_theta = res.coefficients;
        stage2 = std::move(res);
    }

    // Stage 3: joint polish of all eight against the CA50 targets.
    std::vector<double> theta = {delay_theta[0], delay_theta[1],
                                 delay_theta[2], delay_theta[3],
                                 delay_theta[4], mid_theta[0],
                                 mid_theta[1],   std::exp(mid_theta[2])};
    auto eval = [&rows](std::span<const double> c, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = ca50_row(rows, i, c);
        }
    };
    OptimizerConfig polish = config;
    polish.max_iterations = std::min(config.max_iterations, 2000);
    const auto res = lm_fit(eval, rows.ca50_target, theta, polish);

    Ca50FitReport report;
    report.coeffs = initial;
    report.coeffs.c10 = res.coefficients[0];
    report.coeffs.c11 = res.coefficients[1];
    report.coeffs.c12 = res.coefficients[2];
    report.coeffs.c13 = std::exp(res.coefficients[3]);
    report.coeffs.c14 = res.coefficients[4];
    report.coeffs.c16 = res.coefficients[5];
    report.coeffs.c17 = res.coefficients[6];
    report.coeffs.c18 = res.coefficients[7];
    report.coeffs.c15 = report.coeffs.c18 / WiebeParams{}.midburn_scale();
    report.delay_fit = std::move(stage1);
    report.mid_fit = std::move(stage2);
    report.fit = res;

    std::vector<double> ca50_err(rows.ca50_target.size());
    std::vector<double> soc_err(rows.soc_target.size());
    for (std::size_t i = 0; i < ca50_err.size(); ++i) {
        ca50_err[i] = ca50_row(rows, i, res.coefficients) - rows.ca50_target[i];
        soc_err[i] = soc_row(rows, i, res.coefficients) - rows.soc_target[i];
    }
    per_cylinder_stats(rows.cylinder, soc_err, report.validation.soc_error_std,
                       report.validation.soc_error_max);
    per_cylinder_stats(rows.cylinder, ca50_err,
                       report.validation.ca50_error_std,
                       report.validation.ca50_error_max);
    return report;
}

// --- sensitivity study --------------------------------------------------

std::vector<Perturbation> default_perturbations() {
    return {{"t_im", 5.0},  {"t_im", -5.0}, {"p_im", 0.1},  {"p_im", -0.1},
            {"egr", 0.05},  {"egr", -0.05}, {"phi", 0.05},  {"phi", -0.05},
            {"x_r", 0.03},  {"x_r", -0.03}};
}

namespace {

CalibrationSample perturb(const CalibrationSample& s, const Perturbation& p) {
    CalibrationSample out = s;
    if (p.field == "t_im") out.t_im_k += p.delta;
    else if (p.field == "p_im") out.p_im_bar += p.delta;
    else if (p.field == "egr") out.egr = std::max(0.0, out.egr + p.delta);
    else if (p.field == "phi") out.phi += p.delta;
    else if (p.field == "x_r") out.x_r = std::max(0.0, out.x_r + p.delta);
    else if (!p.field.empty() && p.field != "none") {
        throw ModelDomainError("error_response_study: unknown field '" +
                               p.field + "'");
    }
    return out;
}

double predict_ca50(const CalibrationSample& s, const CoefficientSet& model,
                    const EngineGeometry& geom, double v_ivc) {
    const auto& ic = model.intake[static_cast<std::size_t>(s.cylinder_index - 1)];
    const double t_ivc =
        gas::ivc_temperature(ic, s.t_im_k, s.p_im_bar, s.phi, s.n_rpm, s.egr);
    const double p_ivc = gas::ivc_pressure(ic, s.t_im_k, s.n_rpm, s.p_im_bar);
    const GasState soi_state = gas::polytropic_compress(
        GasState{p_ivc, t_ivc, geom.ivc_cad}, v_ivc,
        gas::cylinder_volume(geom, s.soi_cad), model.combustion.k_c, s.soi_cad);
    return combustion::ca50_closed_form(s.soi_cad, s.egr, s.n_rpm, s.phi,
                                        soi_state, s.egr + s.x_r,
                                        model.combustion);
}

}  // namespace

std::vector<SensitivityRow> error_response_study(
    const std::vector<CalibrationSample>& data, const CoefficientSet& model,
    const EngineGeometry& geom,
    const std::vector<Perturbation>& perturbations) {
    if (data.empty()) {
        throw ModelDomainError("error_response_study: empty dataset");
    }
    const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);

    auto stats_for = [&](const Perturbation& p) {
        double sum = 0.0, sum2 = 0.0, mx = 0.0;
        for (const auto& s : data) {
            const double e =
                predict_ca50(perturb(s, p), model, geom, v_ivc) - s.ca50_cad;
            sum += e;
            sum2 += e * e;
            mx = std::max(mx, std::abs(e));
        }
        const double n = static_cast<double>(data.size());
        const double mean = sum / n;
        return SensitivityRow{
            "", std::sqrt(std::max(0.0, sum2 / n - mean * mean)), mx};
    };

    std::vector<SensitivityRow> table;
    auto baseline = stats_for(Perturbation{"none", 0.0});
    baseline.label = "baseline";
    table.push_back(baseline);
    for (const auto& p : perturbations) {
        auto row = stats_for(p);
        std::ostringstream label;
        label << p.field << (p.delta >= 0 ? "+" : "") << p.delta;
        row.label = label.str();
        table.push_back(row);
    }
    return table;
}

// --- synthetic dataset ---------------------------------------------------

std::vector<CalibrationSample> generate_synthetic_dataset(
    const CoefficientSet& truth, const EngineGeometry& geom,
    double ca50_noise_std, std::uint64_t seed) {
    // 3 x 2 x 4 x 2 x 3 x 2 = 288 operating points
    const std::vector<double> ns = {1200, 1350, 1500};
    const std::vector<double> ts = {kEnvelope.t_im_min, kEnvelope.t_im_max};
    const std::vector<double> ps = {1.43, 1.9433, 2.4567, 2.97};
    const std::vector<double> phis = {0.5, 0.9};
    const std::vector<double> egrs = {0.0, 0.25, 0.5};
    const std::vector<double> sois = {-9.0, -2.0};

    rng::SplitMix64 r(seed);
    const double v_ivc = gas::cylinder_volume(geom, geom.ivc_cad);
    std::vector<CalibrationSample> data;
    for (double n : ns)
     for (double t : ts)
      for (double p : ps)
       for (double phi : phis)
        for (double egr : egrs)
         for (double soi : sois) {
            const double x_r = std::clamp(
                0.0721 + (0.0415 - 0.0721) * (egr / 0.5) +
                    r.next_uniform(-0.008, 0.008),
                0.0344, 0.0909);
            for (int cyl = 1; cyl <= kNumCylinders; ++cyl) {
                const auto& ic = truth.intake[static_cast<std::size_t>(cyl - 1)];
                CalibrationSample s;
                s.cylinder_index = cyl;
                s.t_im_k = t;
                s.p_im_bar = p;
                s.n_rpm = n;
                s.phi = phi;
                s.egr = egr;
                s.soi_cad = soi;
                s.x_r = x_r;
                s.x_o2_amb = gas::kDefaultAmbientO2;
                s.x_o2_exh = gas::kDefaultAmbientO2 * (1.0 - phi);
                s.x_o2_int = s.x_o2_amb - egr * (s.x_o2_amb - s.x_o2_exh);
                s.t_ivc_k = gas::ivc_temperature(ic, t, p, phi, n, egr);
                s.p_ivc_bar = gas::ivc_pressure(ic, t, n, p);
                const GasState soi_state = gas::polytropic_compress(
                    GasState{s.p_ivc_bar, s.t_ivc_k, geom.ivc_cad}, v_ivc,
                    gas::cylinder_volume(geom, soi), truth.combustion.k_c,
                    soi);
                s.soc_cad = combustion::soc_closed_form(
                    soi, soi_state, n, egr, phi, truth.combustion);
                s.ca50_cad = combustion::ca50_closed_form(
                                 soi, egr, n, phi, soi_state, egr + x_r,
                                 truth.combustion) +
                             (ca50_noise_std > 0.0
                                  ? r.next_gaussian(ca50_noise_std)
                                  : 0.0);
                data.push_back(s);
            }
         }
    return data;
}

// --- dataset files --------------------------------------------------------

namespace {
constexpr const char* kDatasetHeader =
    "cylinder t_im p_im n phi egr soi x_r x_o2_amb x_o2_int x_o2_exh "
    "t_ivc p_ivc soc ca50";
}

std::vector<CalibrationSample> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    std::vector<CalibrationSample> data;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != kDatasetHeader) {
                throw ConfigError(path + ": unexpected dataset header row");
            }
            saw_header = true;
            continue;
        }
        std::istringstream ss(line);
        CalibrationSample s;
        if (!(ss >> s.cylinder_index >> s.t_im_k >> s.p_im_bar >> s.n_rpm >>
              s.phi >> s.egr >> s.soi_cad >> s.x_r >> s.x_o2_amb >>
              s.x_o2_int >> s.x_o2_exh >> s.t_ivc_k >> s.p_ivc_bar >>
              s.soc_cad >> s.ca50_cad)) {
            throw ConfigError(path + ": malformed dataset row");
        }
        data.push_back(s);
    }
    if (!saw_header) throw ConfigError(path + ": missing dataset header");
    return data;
}

void save_dataset(const std::string& path,
                  const std::vector<CalibrationSample>& data) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset: " + path);
    out << kDatasetHeader << "\n";
    for (const auto& s : data) {
        out << s.cylinder_index << " " << io::format_double(s.t_im_k) << " "
            << io::format_double(s.p_im_bar) << " "
            << io::format_double(s.n_rpm) << " " << io::format_double(s.phi)
            << " " << io::format_double(s.egr) << " "
            << io::format_double(s.soi_cad) << " " << io::format_double(s.x_r)
            << " " << io::format_double(s.x_o2_amb) << " "
            << io::format_double(s.x_o2_int) << " "
            << io::format_double(s.x_o2_exh) << " "
            << io::format_double(s.t_ivc_k) << " "
            << io::format_double(s.p_ivc_bar) << " "
            << io::format_double(s.soc_cad) << " "
            << io::format_double(s.ca50_cad) << "\n";
    }
}

}  // namespace ca50::calib
