#ifndef MMV_PDE_HPP
#define MMV_PDE_HPP

#include <Eigen/Dense>
#include <functional>

#include "mmv/errors.hpp"
#include "mmv/model.hpp"

namespace mmv {

/// Uniform space-time grid: n_z nodes on [z_lo, z_hi], n_t levels on [0, T].
struct GridSpec {
    double z_lo = -6.0;
    double z_hi = 6.0;
    int n_z = 401;
    int n_t = 401;

    double dz() const { return (z_hi - z_lo) / static_cast<double>(n_z - 1); }
    Eigen::VectorXd z_nodes() const { return Eigen::VectorXd::LinSpaced(n_z, z_lo, z_hi); }
    void validate() const;
};

/// Truncated domain sized so the factor stays inside with high probability:
/// the OU family gets mean +- 6 stationary standard deviations, other
/// families z0 +- 6 b sqrt(T) around the start point.
GridSpec suggest_grid(const FactorMarketModel& model, double z0 = 0.0,
                      int n_z = 401, int n_t = 401);

enum class CaseTag { CaseI, CaseII };

/// |2 rho^2 - 1| at or below this switches the solve to the exponential
/// transform (Case II).
inline constexpr double kCaseSwitchTol = 1.0e-6;

/// Value-surface component G on the grid, with its z-derivative and the
/// linear unknown F the solve actually marched.
///
/// G(z, T) = -1 exactly at the terminal level and G < 0 everywhere.
struct PdeSolution {
    GridSpec grid;
    double horizon = 0.0;
    CaseTag case_tag = CaseTag::CaseI;
    double alpha = 0.0;  // 1/(2 rho^2 - 1); meaningful in Case I only

    Eigen::MatrixXd F;    // n_z x n_t, column j = time level j
    Eigen::MatrixXd G;    // n_z x n_t, strictly negative
    Eigen::MatrixXd G_z;  // centered z-derivative of G, one-sided at edges

    double dt() const { return horizon / static_cast<double>(grid.n_t - 1); }
    Eigen::VectorXd t_levels() const { return Eigen::VectorXd::LinSpaced(grid.n_t, 0.0, horizon); }
};

struct SolveOptions {
    double theta_scheme = 0.5;    // 0.5 = Crank-Nicolson
    double residual_tol = 1e-2;   // diagnostic threshold for GridTooCoarse
};

/// General backward one-step-theta march for
///   F_t + drift(z) F_z + half_b2(z) F_zz + reaction(z) F + source = 0,
///   F(z, T) = terminal(z),
/// on the truncated domain with zero-second-derivative boundary rows.
/// The first-order term is upwinded at nodes where |drift| dz > b^2.
/// source may be empty; when given it is evaluated on the already-computed
/// later-time level (explicit treatment).
Eigen::MatrixXd march_backward_theta(
    const GridSpec& grid, double horizon,
    const std::function<double(double)>& drift,
    const std::function<double(double)>& half_b2,
    const std::function<double(double)>& reaction,
    const Eigen::VectorXd& terminal,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& source = nullptr,
    double theta_scheme = 0.5);

/// Case I (rho^2 != 1/2) linear unknown:
///   F_t + [a - 2 rho b lambda] F_z + (1/2) b^2 F_zz + (2 rho^2 - 1) lambda^2 F = 0,
///   F(z, T) = 1.
/// Throws NonPositiveF if the solution loses positivity and GridTooCoarse if
/// the diagnostic residual of the marched field exceeds options.residual_tol.
Eigen::MatrixXd solve_case1(const FactorMarketModel& model, const GridSpec& grid,
                            const SolveOptions& options = {});

/// Case II (rho^2 == 1/2) linear unknown:
///   F_t + [a - 2 rho b lambda] F_z + (1/2) b^2 F_zz + lambda^2 = 0,
///   F(z, T) = 0.
/// The drift keeps the signed 2 rho b lambda so rho = -1/sqrt(2) is handled.
Eigen::MatrixXd solve_case2(const FactorMarketModel& model, const GridSpec& grid,
                            const SolveOptions& options = {});

/// Maps the linear unknown back to G: Case I gives G = -exp(alpha ln F),
/// Case II gives G = -exp(F); fills G_z by centered differences.
PdeSolution assemble_G(const Eigen::MatrixXd& F, CaseTag case_tag,
                       const FactorMarketModel& model, const GridSpec& grid);

/// Dispatches on |2 rho^2 - 1| against kCaseSwitchTol and assembles.
PdeSolution solve_G(const FactorMarketModel& model, const GridSpec& grid,
                    const SolveOptions& options = {});

struct ResidualReport {
    Eigen::MatrixXd field;  // n_z x n_t; NaN outside the interior stencil
    double max_norm = 0.0;  // over interior nodes only
};

/// Direct finite-difference check that the assembled G satisfies
///   G_t + (a - 2 rho b lambda) G_z + (1/2) b^2 G_zz
///     - rho_bar^2 b^2 G_z^2 / G + lambda^2 G = 0
/// with centered stencils at interior (z, t) nodes.
ResidualReport residual_resulting_equation(const PdeSolution& sol,
                                           const FactorMarketModel& model);

struct GEval {
    double g = 0.0;
    double g_z = 0.0;
};

/// Bilinear interpolation of G and G_z at (z, t). Throws OutOfDomain outside
/// the grid rectangle.
GEval eval_G(const PdeSolution& sol, double z, double t);

/// Bilinear interpolation of the linear unknown F at (z, t).
double eval_F(const PdeSolution& sol, double z, double t);

/// As eval_G but clamps (z, t) into the grid rectangle; *clamped reports
/// whether clamping occurred.
GEval eval_G_clamped(const PdeSolution& sol, double z, double t, bool* clamped = nullptr);

}  // namespace mmv

#endif  // MMV_PDE_HPP
