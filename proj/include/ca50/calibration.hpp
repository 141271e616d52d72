#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ca50/types.hpp"

// Fits the per-cylinder intake coefficients and the shared combustion
// coefficients from a dataset of cycles by batch gradient descent on
// RMSE, and runs the input-error sensitivity study.

namespace ca50::calib {

// The operating envelope the models are calibrated over.
struct CalibratedEnvelope {
    double n_min = 1200.0, n_max = 1500.0;
    double t_im_min = 302.52, t_im_max = 333.29;
    double p_im_min = 1.43, p_im_max = 2.97;
    double phi_min = 0.5, phi_max = 0.9;
    double egr_min = 0.0, egr_max = 0.5;
    double soi_min = -10.0, soi_max = 0.0;
};
inline constexpr CalibratedEnvelope kEnvelope{};

struct CalibrationSample {
    int cylinder_index = 1;  // 1-based
    // inputs
    double t_im_k = 0, p_im_bar = 0, n_rpm = 0, phi = 0, egr = 0;
    double soi_cad = 0, x_r = 0;
    double x_o2_amb = 0, x_o2_int = 0, x_o2_exh = 0;
    // targets
    double t_ivc_k = 0, p_ivc_bar = 0, soc_cad = 0, ca50_cad = 0;
};

struct OptimizerConfig {
    double learning_rate = 0.1;   // step scale in normalized coordinates
    int max_iterations = 60000;
    double stop_tolerance = 1e-10;  // RMSE improvement threshold
    std::string gradient_method = "central-fd";
    double fd_step = 1e-6;          // relative finite-difference step
    int max_backtracks = 30;        // halvings per iteration
    double step_growth = 1.2;       // growth on accepted steps
    // Coordinates are normalized by initial magnitude and, when enabled,
    // additionally by each coefficient's initial output sensitivity, so
    // no coordinate dominates the gradient.
    bool sensitivity_scaling = true;
};

struct FitResult {
    std::vector<double> coefficients;
    std::vector<double> rmse_log;  // accepted iterations, nonincreasing
    double final_rmse = 0.0;
    int iterations = 0;
    double final_gradient_norm = 0.0;
};

double rmse(std::span<const double> predictions,
            std::span<const double> targets);

// predictions for the whole dataset given a coefficient vector
using BatchEvaluator =
    std::function<void(std::span<const double>, std::span<double>)>;

FitResult batch_gradient_descent(const BatchEvaluator& evaluate,
                                 std::span<const double> targets,
                                 std::vector<double> initial,
                                 const OptimizerConfig& config);

struct CylinderIntakeFit {
    int cylinder_index = 0;
    IntakeCoefficients coeffs{};
    double t_ivc_train_rmse = 0.0;
    double t_ivc_validation_rmse = 0.0;
    double p_ivc_train_rmse = 0.0;
    double p_ivc_validation_rmse = 0.0;
};

// Independent per-cylinder fits of the IVC temperature and pressure
// models.  Samples are grouped by cylinder_index; one fit per cylinder
// present in the data.  A fixed seeded 70/30 train/validation split is
// applied per cylinder.
std::vector<CylinderIntakeFit> calibrate_intake(
    const std::vector<CalibrationSample>& data,
    const std::array<IntakeCoefficients, kNumCylinders>& initial,
    const OptimizerConfig& config, std::uint64_t split_seed = 7);

// Per-cylinder prediction-error statistics: std-dev and max error for
// SOC and CA50 (6 columns x 4 statistics rows).
struct ValidationStats {
    std::array<double, kNumCylinders> soc_error_std{};
    std::array<double, kNumCylinders> soc_error_max{};
    std::array<double, kNumCylinders> ca50_error_std{};
    std::array<double, kNumCylinders> ca50_error_max{};
};

struct Ca50FitReport {
    CombustionCoefficients coeffs{};
    ValidationStats validation{};
    FitResult delay_fit{};  // ignition-delay block against SOC targets
    FitResult mid_fit{};    // burn-duration block against the remainder
    FitResult fit{};        // joint polish against CA50 targets
};

// Pooled fit of the shared combustion coefficients; the injection-angle
// state for every sample comes from the supplied per-cylinder intake
// fits through the polytropic relation (k_c held fixed).
Ca50FitReport calibrate_ca50(const std::vector<CalibrationSample>& data,
                             const std::vector<CylinderIntakeFit>& intake,
                             const CombustionCoefficients& initial,
                             const EngineGeometry& geom,
                             const OptimizerConfig& config);

struct Perturbation {
    std::string field;  // one of: t_im, p_im, egr, phi, x_r
    double delta = 0.0;
};

struct SensitivityRow {
    std::string label;
    double error_std = 0.0;
    double error_max = 0.0;
};

// The published perturbation suite: +/-5 K charge temperature, +/-0.1
// bar boost, +/-5% EGR, +/-0.05 equivalence ratio, +/-0.03 residual.
std::vector<Perturbation> default_perturbations();

// Re-predicts CA50 with each input perturbed and reports error std-dev
// and max against the unperturbed targets.  First row is the baseline.
std::vector<SensitivityRow> error_response_study(
    const std::vector<CalibrationSample>& data, const CoefficientSet& model,
    const EngineGeometry& geom, const std::vector<Perturbation>& perturbations);

// Synthetic dataset: a fixed grid of 288 operating points spanning the
// calibrated envelope, one sample per cylinder per point, targets from
// the supplied coefficient set, optional Gaussian noise on CA50.
std::vector<CalibrationSample> generate_synthetic_dataset(
    const CoefficientSet& truth, const EngineGeometry& geom,
    double ca50_noise_std, std::uint64_t seed);

std::vector<CalibrationSample> load_dataset(const std::string& path);
void save_dataset(const std::string& path,
                  const std::vector<CalibrationSample>& data);

}  // namespace ca50::calib
