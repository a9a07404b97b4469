#ifndef MMV_MEANVAR_HPP
#define MMV_MEANVAR_HPP

#include <Eigen/Dense>

#include "mmv/model.hpp"
#include "mmv/oracle.hpp"
#include "mmv/pde.hpp"

namespace mmv {

/// Sample moments of the return kernel
///   R_T = exp{ Int zeta (mu - r) - (1/2) zeta^2 sigma^2 ds + Int zeta sigma dW }.
struct RMoments {
    double ER = 0.0;
    double ER2 = 0.0;
    double VarR = 0.0;  // ER2 - ER^2 on the sample
    double se_ER = 0.0;
    double se_ER2 = 0.0;
    std::int64_t n_units = 0;
};

/// Simulates Z under the physical measure together with the exponential R
/// increments and returns the R_T moments with standard errors.
RMoments simulate_R(const FactorMarketModel& model, const PdeSolution& sol, double z0,
                    const McConfig& cfg);

/// Lagrange multiplier gamma*(A) = (A - x) ER / (1 - ER); throws DegenerateER
/// when ER is 1 within tolerance (no variance to trade against the mean).
double lagrange_gamma(double A, double x, double ER);

struct OptimalTarget {
    double A_star = 0.0;
    double gamma_star = 0.0;
};

/// Optimal mean target and its multiplier:
///   A* = x + (1/(2 theta)) (1 - ER)^2 / VarR,
///   gamma*(A*) = (1/(2 theta)) (1 - ER) ER / VarR.
OptimalTarget optimal_A(double x, double theta, double ER, double VarR);

/// Mean-variance feedback strategy
///   pi(x,z,t) = (x - x0 - (1/(2 theta)) (1 - ER)/VarR) zeta(z,t).
double mv_strategy(const PdeSolution& sol, const FactorMarketModel& model,
                   double x, double z, double t,
                   double x0, double theta, double ER, double VarR);

/// Risk aversion that matches the mean-variance intercept to the monotone
/// one: theta = (1 - ER) / (4 y0 |G_anchor| VarR). In the constant-coefficient
/// market this reduces to 1/(4 y0).
double theta_equivalence(double G_anchor, double y0, double ER, double VarR);
double theta_equivalence(const PdeSolution& sol, double z0, double t0, double y0,
                         double ER, double VarR);

/// Closed forms available in the constant-coefficient market:
///   ER = ER2 = e^{-lambda^2 T},  VarR = e^{-lambda^2 T} - e^{-2 lambda^2 T},
///   G0 = -e^{lambda^2 T}.
struct BsClosedForms {
    double ER = 0.0;
    double ER2 = 0.0;
    double VarR = 0.0;
    double G0 = 0.0;
};

BsClosedForms bs_closed_forms(const FactorMarketModel& model);

struct DualityReport {
    Eigen::MatrixXd H;           // n_z x n_t
    double max_abs_GH_plus_1 = 0.0;  // over interior nodes
};

/// Solves the dual equation
///   H_t + (a - 2 rho b lambda) H_z + (1/2) b^2 H_zz
///     - rho^2 b^2 H_z^2 / H - lambda^2 H = 0,  H(z,T) = 1,
/// semi-implicitly (nonlinear term lagged one level) and reports
/// max |G H + 1| against the given G solve.
DualityReport solve_H_and_check_duality(const FactorMarketModel& model, const GridSpec& grid,
                                        const PdeSolution& g_sol,
                                        const SolveOptions& options = {});

/// Aggregate of the mean-variance construction for reporting.
struct MeanVarianceSolution {
    double ER = 0.0, ER2 = 0.0, VarR = 0.0;
    double gamma_star = 0.0, A_star = 0.0;
    double theta = 0.0;
    double phi_second_moment = 0.0;   // E phi_T^2 = VarR / (1 - ER)^2
    double strategy_intercept = 0.0;  // x0 + (1/(2 theta)) (1 - ER)/VarR
};

MeanVarianceSolution build_mean_variance_solution(double x0, double y0, double G_anchor,
                                                  double ER, double ER2, double VarR);

}  // namespace mmv

#endif  // MMV_MEANVAR_HPP
