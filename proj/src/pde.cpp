#include "mmv/pde.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mmv/tridiag.hpp"

namespace mmv {

namespace {

double two_rho_sq_minus_one(const FactorMarketModel& model) {
    return 2.0 * model.rho() * model.rho() - 1.0;
}

struct Bands {
    Eigen::VectorXd sub, diag, super;  // spatial operator L
};

// Rows of L F = drift F_z + half_b2 F_zz + reaction F with upwinding where the
// cell Peclet number |drift| dz / half_b2 exceeds 2; boundary rows carry the
// zero-second-derivative (linear extrapolation) closure.
Bands assemble_operator(const GridSpec& grid,
                        const std::function<double(double)>& drift,
                        const std::function<double(double)>& half_b2,
                        const std::function<double(double)>& reaction) {
    const int n = grid.n_z;
    const double dz = grid.dz();
    Bands L;
    L.sub = Eigen::VectorXd::Zero(n - 1);
    L.diag = Eigen::VectorXd::Zero(n);
    L.super = Eigen::VectorXd::Zero(n - 1);

    const Eigen::VectorXd z = grid.z_nodes();
    for (int i = 1; i + 1 < n; ++i) {
        const double m = drift(z[i]);
        const double d = half_b2(z[i]);
        const double c = reaction(z[i]);
        const double diff = d / (dz * dz);
        double lower, center, upper;
        if (std::abs(m) * dz > 2.0 * d) {
            if (m > 0.0) {
                lower = diff;
                center = -2.0 * diff - m / dz + c;
                upper = diff + m / dz;
            } else {
                lower = diff - m / dz;
                center = -2.0 * diff + m / dz + c;
                upper = diff;
            }
        } else {
            lower = diff - m / (2.0 * dz);
            center = -2.0 * diff + c;
            upper = diff + m / (2.0 * dz);
        }
        L.sub[i - 1] = lower;
        L.diag[i] = center;
        L.super[i] = upper;
    }

    {
        const double m = drift(z[0]);
        const double c = reaction(z[0]);
        L.diag[0] = -m / dz + c;
        L.super[0] = m / dz;
    }
    {
        const double m = drift(z[n - 1]);
        const double c = reaction(z[n - 1]);
        L.sub[n - 2] = -m / dz;
        L.diag[n - 1] = m / dz + c;
    }
    return L;
}

Eigen::VectorXd apply_operator(const Bands& L, const Eigen::VectorXd& f) {
    const Eigen::Index n = f.size();
    Eigen::VectorXd out(n);
    out[0] = L.diag[0] * f[0] + L.super[0] * f[1];
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        out[i] = L.sub[i - 1] * f[i - 1] + L.diag[i] * f[i] + L.super[i] * f[i + 1];
    }
    out[n - 1] = L.sub[n - 2] * f[n - 2] + L.diag[n - 1] * f[n - 1];
    return out;
}

// Centered-difference residual of the marched field against its own linear
// equation, reported over interior (z, t) nodes.
double linear_diagnostic_residual(const Eigen::MatrixXd& F, const GridSpec& grid, double horizon,
                                  const std::function<double(double)>& drift,
                                  const std::function<double(double)>& half_b2,
                                  const std::function<double(double)>& reaction,
                                  const Eigen::VectorXd& source) {
    const int n_z = grid.n_z;
    const int n_t = grid.n_t;
    const double dz = grid.dz();
    const double dt = horizon / static_cast<double>(n_t - 1);
    const Eigen::VectorXd z = grid.z_nodes();
    double worst = 0.0;
    for (int i = 1; i + 1 < n_z; ++i) {
        const double m = drift(z[i]);
        const double d = half_b2(z[i]);
        const double c = reaction(z[i]);
        const double s = source.size() > 0 ? source[i] : 0.0;
        for (int j = 1; j + 1 < n_t; ++j) {
            const double ft = (F(i, j + 1) - F(i, j - 1)) / (2.0 * dt);
            const double fz = (F(i + 1, j) - F(i - 1, j)) / (2.0 * dz);
            const double fzz = (F(i + 1, j) - 2.0 * F(i, j) + F(i - 1, j)) / (dz * dz);
            worst = std::max(worst, std::abs(ft + m * fz + d * fzz + c * F(i, j) + s));
        }
    }
    return worst;
}

void column_derivative(const Eigen::MatrixXd& G, int j, double dz, Eigen::MatrixXd& G_z) {
    const Eigen::Index n = G.rows();
    G_z(0, j) = (-3.0 * G(0, j) + 4.0 * G(1, j) - G(2, j)) / (2.0 * dz);
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        G_z(i, j) = (G(i + 1, j) - G(i - 1, j)) / (2.0 * dz);
    }
    G_z(n - 1, j) = (3.0 * G(n - 1, j) - 4.0 * G(n - 2, j) + G(n - 3, j)) / (2.0 * dz);
}

struct CellLocator {
    int i0;
    double w;
};

CellLocator locate(double x, double lo, double step, int n, const char* axis) {
    const double span = step * (n - 1);
    const double tol = 1e-9 * std::max(1.0, std::abs(span));
    if (x < lo - tol || x > lo + span + tol) {
        std::ostringstream msg;
        msg << axis << " = " << x << " outside [" << lo << ", " << lo + span << "]";
        throw OutOfDomain(msg.str());
    }
    double s = (x - lo) / step;
    const double snapped = std::round(s);
    if (std::abs(s - snapped) < 1e-9) s = snapped;  // keep node lookups exact
    int i0 = static_cast<int>(std::floor(s));
    if (i0 < 0) i0 = 0;
    if (i0 > n - 2) i0 = n - 2;
    return {i0, s - i0};
}

}  // namespace

void GridSpec::validate() const {
    if (!(z_lo < z_hi)) throw std::invalid_argument("grid: z_lo must be < z_hi");
    if (n_z < 3) throw std::invalid_argument("grid: n_z must be >= 3");
    if (n_t < 2) throw std::invalid_argument("grid: n_t must be >= 2");
}

GridSpec suggest_grid(const FactorMarketModel& model, double z0, int n_z, int n_t) {
    GridSpec grid;
    grid.n_z = n_z;
    grid.n_t = n_t;
    if (model.kind() == FamilyKind::OuTanh) {
        const OuTanhParams& p = model.ou_tanh_params();
        const double stationary_sd = p.beta / std::sqrt(2.0 * p.kappa);
        grid.z_lo = p.m - 6.0 * stationary_sd;
        grid.z_hi = p.m + 6.0 * stationary_sd;
    } else {
        const double spread =
            6.0 * std::max(1e-3, model.factor_vol(z0)) * std::sqrt(model.horizon());
        grid.z_lo = z0 - spread;
        grid.z_hi = z0 + spread;
    }
    return grid;
}

Eigen::MatrixXd march_backward_theta(
    const GridSpec& grid, double horizon,
    const std::function<double(double)>& drift,
    const std::function<double(double)>& half_b2,
    const std::function<double(double)>& reaction,
    const Eigen::VectorXd& terminal,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& source,
    double theta_scheme) {
    grid.validate();
    if (!(horizon > 0.0)) throw std::invalid_argument("march_backward_theta: horizon must be positive");
    if (terminal.size() != grid.n_z) throw std::invalid_argument("march_backward_theta: terminal size mismatch");

    const int n_z = grid.n_z;
    const int n_t = grid.n_t;
    const double dt = horizon / static_cast<double>(n_t - 1);

    const Bands L = assemble_operator(grid, drift, half_b2, reaction);

    // implicit bands: I - theta dt L
    Eigen::VectorXd imp_sub = -theta_scheme * dt * L.sub;
    Eigen::VectorXd imp_diag = Eigen::VectorXd::Ones(n_z) - theta_scheme * dt * L.diag;
    Eigen::VectorXd imp_super = -theta_scheme * dt * L.super;

    Eigen::MatrixXd F(n_z, n_t);
    F.col(n_t - 1) = terminal;

    Eigen::VectorXd rhs(n_z), next(n_z), scratch(n_z);
    for (int j = n_t - 2; j >= 0; --j) {
        const Eigen::VectorXd& later = F.col(j + 1);
        rhs = later + (1.0 - theta_scheme) * dt * apply_operator(L, later);
        if (source) rhs += dt * source(later);
        solve_tridiagonal(imp_sub, imp_diag, imp_super, rhs, next, scratch);
        F.col(j) = next;
    }
    return F;
}

Eigen::MatrixXd solve_case1(const FactorMarketModel& model, const GridSpec& grid,
                            const SolveOptions& options) {
    const double k = two_rho_sq_minus_one(model);
    if (std::abs(k) <= kCaseSwitchTol)
        throw std::invalid_argument("solve_case1: rho^2 too close to 1/2; use solve_case2");

    auto drift = [&model](double z) {
        return model.factor_drift(z) -
               2.0 * model.rho() * model.factor_vol(z) * market_price_of_risk(model, z);
    };
    auto half_b2 = [&model](double z) {
        const double b = model.factor_vol(z);
        return 0.5 * b * b;
    };
    auto reaction = [&model, k](double z) {
        const double lam = market_price_of_risk(model, z);
        return k * lam * lam;
    };

    Eigen::MatrixXd F = march_backward_theta(grid, model.horizon(), drift, half_b2, reaction,
                                             Eigen::VectorXd::Ones(grid.n_z), nullptr,
                                             options.theta_scheme);

    if ((F.array() <= 0.0).any()) {
        throw NonPositiveF("solve_case1: F lost positivity; widen the domain or refine the time grid");
    }
    const double resid = linear_diagnostic_residual(F, grid, model.horizon(), drift, half_b2,
                                                    reaction, Eigen::VectorXd());
    if (resid > options.residual_tol) {
        std::ostringstream msg;
        msg << "solve_case1: diagnostic residual " << resid << " exceeds " << options.residual_tol;
        throw GridTooCoarse(msg.str());
    }
    return F;
}

Eigen::MatrixXd solve_case2(const FactorMarketModel& model, const GridSpec& grid,
                            const SolveOptions& options) {
    if (std::abs(two_rho_sq_minus_one(model)) > kCaseSwitchTol)
        throw std::invalid_argument("solve_case2: rho^2 must equal 1/2 within tolerance");
    auto drift = [&model](double z) {
        return model.factor_drift(z) -
               2.0 * model.rho() * model.factor_vol(z) * market_price_of_risk(model, z);
    };
    auto half_b2 = [&model](double z) {
        const double b = model.factor_vol(z);
        return 0.5 * b * b;
    };
    auto reaction = [](double) { return 0.0; };

    const Eigen::VectorXd z = grid.z_nodes();
    Eigen::VectorXd lambda_sq(grid.n_z);
    for (int i = 0; i < grid.n_z; ++i) {
        const double lam = market_price_of_risk(model, z[i]);
        lambda_sq[i] = lam * lam;
    }
    auto source = [&lambda_sq](const Eigen::VectorXd&) { return lambda_sq; };

    Eigen::MatrixXd F = march_backward_theta(grid, model.horizon(), drift, half_b2, reaction,
                                             Eigen::VectorXd::Zero(grid.n_z), source,
                                             options.theta_scheme);

    const double resid = linear_diagnostic_residual(F, grid, model.horizon(), drift, half_b2,
                                                    reaction, lambda_sq);
    if (resid > options.residual_tol) {
        std::ostringstream msg;
        msg << "solve_case2: diagnostic residual " << resid << " exceeds " << options.residual_tol;
        throw GridTooCoarse(msg.str());
    }
    return F;
}

PdeSolution assemble_G(const Eigen::MatrixXd& F, CaseTag case_tag,
                       const FactorMarketModel& model, const GridSpec& grid) {
    grid.validate();
    if (F.rows() != grid.n_z || F.cols() != grid.n_t)
        throw std::invalid_argument("assemble_G: F does not match the grid");

    PdeSolution sol;
    sol.grid = grid;
    sol.horizon = model.horizon();
    sol.case_tag = case_tag;
    sol.F = F;

    if (case_tag == CaseTag::CaseI) {
        const double k = two_rho_sq_minus_one(model);
        sol.alpha = 1.0 / k;
        if ((F.array() <= 0.0).any())
            throw NonPositiveF("assemble_G: Case I requires F > 0 everywhere");
        sol.G = -(sol.alpha * F.array().log()).exp();
    } else {
        sol.alpha = 0.0;
        if (!F.allFinite()) throw std::invalid_argument("assemble_G: Case II requires finite F");
        sol.G = -F.array().exp();
    }

    sol.G_z.resize(grid.n_z, grid.n_t);
    const double dz = grid.dz();
    for (int j = 0; j < grid.n_t; ++j) {
        column_derivative(sol.G, j, dz, sol.G_z);
    }

    if ((sol.G.col(grid.n_t - 1).array() != -1.0).any())
        throw std::logic_error("assemble_G: terminal level of G is not exactly -1");
    return sol;
}

PdeSolution solve_G(const FactorMarketModel& model, const GridSpec& grid,
                    const SolveOptions& options) {
    if (std::abs(two_rho_sq_minus_one(model)) <= kCaseSwitchTol) {
        return assemble_G(solve_case2(model, grid, options), CaseTag::CaseII, model, grid);
    }
    return assemble_G(solve_case1(model, grid, options), CaseTag::CaseI, model, grid);
}

ResidualReport residual_resulting_equation(const PdeSolution& sol,
                                           const FactorMarketModel& model) {
    const int n_z = sol.grid.n_z;
    const int n_t = sol.grid.n_t;
    const double dz = sol.grid.dz();
    const double dt = sol.dt();
    const Eigen::VectorXd z = sol.grid.z_nodes();
    const double rho = model.rho();
    const double rho_bar_sq = model.rho_bar() * model.rho_bar();

    ResidualReport report;
    report.field = Eigen::MatrixXd::Constant(n_z, n_t, std::numeric_limits<double>::quiet_NaN());

    for (int i = 1; i + 1 < n_z; ++i) {
        const double lam = market_price_of_risk(model, z[i]);
        const double b = model.factor_vol(z[i]);
        const double m = model.factor_drift(z[i]) - 2.0 * rho * b * lam;
        for (int j = 1; j + 1 < n_t; ++j) {
            const double g = sol.G(i, j);
            const double gt = (sol.G(i, j + 1) - sol.G(i, j - 1)) / (2.0 * dt);
            const double gz = (sol.G(i + 1, j) - sol.G(i - 1, j)) / (2.0 * dz);
            const double gzz = (sol.G(i + 1, j) - 2.0 * g + sol.G(i - 1, j)) / (dz * dz);
            const double resid = gt + m * gz + 0.5 * b * b * gzz -
                                 rho_bar_sq * b * b * gz * gz / g + lam * lam * g;
            report.field(i, j) = resid;
            report.max_norm = std::max(report.max_norm, std::abs(resid));
        }
    }
    return report;
}

GEval eval_G(const PdeSolution& sol, double z, double t) {
    const CellLocator zi = locate(z, sol.grid.z_lo, sol.grid.dz(), sol.grid.n_z, "z");
    const CellLocator tj = locate(t, 0.0, sol.dt(), sol.grid.n_t, "t");

    auto bilinear = [&](const Eigen::MatrixXd& M) {
        const double v00 = M(zi.i0, tj.i0);
        const double v10 = M(zi.i0 + 1, tj.i0);
        const double v01 = M(zi.i0, tj.i0 + 1);
        const double v11 = M(zi.i0 + 1, tj.i0 + 1);
        return (1.0 - zi.w) * ((1.0 - tj.w) * v00 + tj.w * v01) +
               zi.w * ((1.0 - tj.w) * v10 + tj.w * v11);
    };
    return {bilinear(sol.G), bilinear(sol.G_z)};
}

double eval_F(const PdeSolution& sol, double z, double t) {
    const CellLocator zi = locate(z, sol.grid.z_lo, sol.grid.dz(), sol.grid.n_z, "z");
    const CellLocator tj = locate(t, 0.0, sol.dt(), sol.grid.n_t, "t");
    return (1.0 - zi.w) * ((1.0 - tj.w) * sol.F(zi.i0, tj.i0) + tj.w * sol.F(zi.i0, tj.i0 + 1)) +
           zi.w * ((1.0 - tj.w) * sol.F(zi.i0 + 1, tj.i0) + tj.w * sol.F(zi.i0 + 1, tj.i0 + 1));
}

GEval eval_G_clamped(const PdeSolution& sol, double z, double t, bool* clamped) {
    const double z_cl = std::min(std::max(z, sol.grid.z_lo), sol.grid.z_hi);
    const double t_cl = std::min(std::max(t, 0.0), sol.horizon);
    if (clamped) *clamped = (z_cl != z) || (t_cl != t);
    return eval_G(sol, z_cl, t_cl);
}

}  // namespace mmv
