#ifndef MMV_SIM_HPP
#define MMV_SIM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmv/model.hpp"
#include "mmv/oracle.hpp"
#include "mmv/pde.hpp"
#include "mmv/strategy.hpp"

namespace mmv {

enum class Measure { UnderP, UnderQ };

/// Portfolio control as a feedback map of (wealth, density, factor, time).
using PiControl = std::function<double(double x, double y, double z, double t)>;
/// Distortion control as a feedback map of (factor, time).
using EtaControl = std::function<EtaPair(double z, double t)>;

PiControl saddle_pi_control(const ControlFields& fields);
PiControl reduced_pi_control(const ControlFields& fields);
EtaControl saddle_eta_control(const ControlFields& fields);

PiControl scale_pi(PiControl base, double factor);
PiControl shift_pi(PiControl base, double shift);
EtaControl scale_eta(EtaControl base, double factor);
EtaControl shift_eta(EtaControl base, double shift);  // shifts both components

/// Simulated trajectories of (X, Y, Z) with the driving noise increments.
/// Y is updated by exact exponential increments so it stays positive and the
/// density martingale property survives discretization.
struct PathBundle {
    Eigen::VectorXd times;          // t0 = s_0 < ... < s_N = T
    Eigen::MatrixXd X, Y, Z;        // path x time level
    Eigen::MatrixXd dW1, dW2;       // path x step; empty when noise not stored
    Measure measure = Measure::UnderP;
    std::string eta_label;
    bool antithetic = true;
    double x0 = 0.0, y0 = 1.0;
    std::int64_t excursion_steps = 0;    // coefficient evaluations clamped to the grid
    std::int64_t coefficient_steps = 0;  // total coefficient evaluations
};

struct SimOptions {
    bool store_noise = true;
    // abort when this fraction of path-steps leaves the grid domain
    double excursion_abort_fraction = 0.01;
    std::string eta_label;  // carried into PathBundle for reporting
};

inline SimOptions no_noise_options() {
    SimOptions options;
    options.store_noise = false;
    return options;
}

/// Euler-Maruyama for X and Z, exact exponential update for Y, under P
/// (system driven by P-Brownian noise) or under the distorted measure
/// (drift-adjusted system). Z-dependent coefficient and control evaluations
/// are clamped to the grid domain and counted; throws ExcessiveExcursion past
/// the abort fraction.
PathBundle simulate_system(const FactorMarketModel& model, const PdeSolution& sol,
                           const PiControl& pi, const EtaControl& eta, Measure measure,
                           const Anchor& anchor, const McConfig& cfg,
                           const SimOptions& options = {});

struct ReductionIdentityReport {
    double max_abs_error = 0.0;
    Eigen::VectorXd per_time_max;  // max over paths at each time level
};

/// Pathwise check of the reduction identity
///   2 Y_t G(Z_t, t) = X_t - x0 + 2 y0 G(z0, t0)
/// for a bundle simulated at the saddle controls.
ReductionIdentityReport check_reduction_identity(const PathBundle& bundle,
                                                 const PdeSolution& sol, const Anchor& anchor);

struct ObjectiveEstimate {
    double J = 0.0;
    double std_error = 0.0;
    std::int64_t n_units = 0;
};

/// E^eta[-X_T - Y_T] by simulating the distorted system directly.
ObjectiveEstimate estimate_objective_under_Q(const FactorMarketModel& model, const PdeSolution& sol,
                                             const PiControl& pi, const EtaControl& eta,
                                             const Anchor& anchor, const McConfig& cfg);

/// Same objective through the P-system with density reweighting
/// (Y_T / y0) (-X_T - Y_T); cross-validates the direct estimate.
ObjectiveEstimate estimate_objective_under_P(const FactorMarketModel& model, const PdeSolution& sol,
                                             const PiControl& pi, const EtaControl& eta,
                                             const Anchor& anchor, const McConfig& cfg);

/// Recomputes the objective estimate from stored paths; x_shift adds a
/// constant to X_T, which must shift an UnderQ estimate by exactly -x_shift.
ObjectiveEstimate estimate_objective_from_bundle(const PathBundle& bundle, double x_shift = 0.0);
/// Per-path shift variant (monotonicity checks).
ObjectiveEstimate estimate_objective_from_bundle(const PathBundle& bundle,
                                                 const Eigen::VectorXd& x_shift);

struct PenaltyEstimate {
    double C = 0.0;
    double std_error = 0.0;
    std::int64_t n_units = 0;
};

/// Quadratic penalty E^P[(dQ/dP)^2] - 1 from a bundle simulated under P.
PenaltyEstimate estimate_penalty(const PathBundle& bundle);

struct DensityCheck {
    double mean = 0.0;       // sample mean of Y_T / y0 under P
    double std_error = 0.0;
};

DensityCheck density_martingale_check(const PathBundle& bundle);

struct SupValueStat {
    double mean_sup_abs = 0.0;  // mean over paths of sup_t |-X_t + G(Z_t,t) Y_t|
    double max_sup_abs = 0.0;
};

/// Sample statistics of sup_t |V| along the paths; monitoring for the
/// integrability condition that cannot be machine-verified.
SupValueStat sup_value_statistic(const PathBundle& bundle, const PdeSolution& sol);

struct SaddleCertRow {
    std::string label;
    double J = 0.0;
    double std_error = 0.0;
    double diff_mean = 0.0;  // J(perturbed) - J(saddle), pathwise with CRN
    double diff_se = 0.0;
    bool ok = false;
};

struct SaddleCertification {
    double J_saddle = 0.0;
    double se_saddle = 0.0;
    double value_function = 0.0;  // -x0 + G(z0, t0) y0
    bool value_match = false;     // |J_saddle - value_function| <= 3 se
    std::vector<SaddleCertRow> eta_rows;
    std::vector<SaddleCertRow> pi_rows;
    bool passed = false;
};

struct PerturbationSpec {
    std::vector<double> scales{0.5, 0.9, 1.1, 1.5};
    std::vector<double> shifts{-0.2, 0.2};
};

/// Monte Carlo saddle certificate with common random numbers:
///   J(pi*, eta) <= J(pi*, eta*) + 3 SE  for every perturbed eta,
///   J(pi*, eta*) <= J(pi, eta*) + 3 SE  for every perturbed pi,
/// where SE is the standard error of the pathwise difference.
SaddleCertification certify_saddle_mc(const FactorMarketModel& model, const PdeSolution& sol,
                                      const Anchor& anchor, const McConfig& cfg,
                                      const PerturbationSpec& perturbations = {});

/// Writes (path, t, X, Y, Z) rows for the first max_paths paths.
void export_bundle_csv(const PathBundle& bundle, const std::string& path, int max_paths = 100);

}  // namespace mmv

#endif  // MMV_SIM_HPP
