#include "mmv/meanvar.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmv/rng.hpp"
#include "mmv/stats.hpp"
#include "mmv/strategy.hpp"

namespace mmv {

namespace {

constexpr double kDegenerateTol = 1e-10;

struct RPair {
    double r = 0.0;
    std::int64_t excursions = 0;
};

RPair simulate_R_path(const FactorMarketModel& model, const PdeSolution& sol,
                      double z0, int n_steps, PathRng& rng, double sign) {
    const double T = model.horizon();
    const double ds = T / static_cast<double>(n_steps);
    const double sqrt_ds = std::sqrt(ds);
    const double rho = model.rho();
    const double rho_bar = model.rho_bar();
    const double r_rate = model.rate();

    double z = z0;
    double log_r = 0.0;
    RPair out;
    for (int k = 0; k < n_steps; ++k) {
        const double t = ds * k;
        const double z_cl = std::min(std::max(z, sol.grid.z_lo), sol.grid.z_hi);
        if (z_cl != z) ++out.excursions;

        const double zeta_t = zeta_value(sol, model, z_cl, t);
        const double mu = model.mu(z_cl);
        const double sigma = model.sigma(z_cl);
        const double dw1 = sign * sqrt_ds * rng.next_gaussian();
        const double dw2 = sign * sqrt_ds * rng.next_gaussian();

        log_r += (zeta_t * (mu - r_rate) - 0.5 * zeta_t * zeta_t * sigma * sigma) * ds +
                 zeta_t * sigma * dw1;
        z += model.factor_drift(z_cl) * ds +
             model.factor_vol(z_cl) * (rho * dw1 + rho_bar * dw2);
    }
    out.r = std::exp(log_r);
    return out;
}

}  // namespace

RMoments simulate_R(const FactorMarketModel& model, const PdeSolution& sol, double z0,
                    const McConfig& cfg) {
    if (cfg.n_paths < 1) throw std::invalid_argument("simulate_R: n_paths must be >= 1");
    if (cfg.n_steps < 1) throw std::invalid_argument("simulate_R: n_steps must be >= 1");

    const std::int64_t n_units = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    std::atomic<std::int64_t> excursions{0};
    std::atomic<std::int64_t> steps{0};

    std::vector<MomentSums> r_partials;
    MomentSums r_sums, r2_sums;
    {
        // accumulate R and R^2 in one pass over units
        struct Pair {
            MomentSums r, r2;
        };
        const std::int64_t block = 4096;
        const std::int64_t n_blocks = (n_units + block - 1) / block;
        std::vector<Pair> partials(static_cast<std::size_t>(n_blocks));
        for (std::int64_t b = 0; b < n_blocks; ++b) {
            const std::int64_t lo = b * block;
            const std::int64_t hi = std::min(lo + block, n_units);
            for (std::int64_t u = lo; u < hi; ++u) {
                double r_unit, r2_unit;
                std::int64_t exc = 0, stp = 0;
                PathRng rng_plus(cfg.seed, static_cast<std::uint64_t>(u));
                const RPair plus = simulate_R_path(model, sol, z0, cfg.n_steps, rng_plus, +1.0);
                exc += plus.excursions;
                stp += cfg.n_steps;
                if (cfg.antithetic && 2 * u + 1 < cfg.n_paths) {
                    PathRng rng_minus(cfg.seed, static_cast<std::uint64_t>(u));
                    const RPair minus = simulate_R_path(model, sol, z0, cfg.n_steps, rng_minus, -1.0);
                    exc += minus.excursions;
                    stp += cfg.n_steps;
                    r_unit = 0.5 * (plus.r + minus.r);
                    r2_unit = 0.5 * (plus.r * plus.r + minus.r * minus.r);
                } else {
                    r_unit = plus.r;
                    r2_unit = plus.r * plus.r;
                }
                partials[static_cast<std::size_t>(b)].r.add(r_unit);
                partials[static_cast<std::size_t>(b)].r2.add(r2_unit);
                excursions.fetch_add(exc, std::memory_order_relaxed);
                steps.fetch_add(stp, std::memory_order_relaxed);
            }
        }
        for (const auto& p : partials) {
            r_sums.combine(p.r);
            r2_sums.combine(p.r2);
        }
    }

    if (steps.load() > 0 &&
        static_cast<double>(excursions.load()) > 0.01 * static_cast<double>(steps.load())) {
        std::ostringstream msg;
        msg << "simulate_R: excursion fraction "
            << static_cast<double>(excursions.load()) / static_cast<double>(steps.load())
            << " exceeds 0.01";
        throw ExcessiveExcursion(msg.str());
    }

    RMoments moments;
    moments.ER = r_sums.mean();
    moments.ER2 = r2_sums.mean();
    moments.VarR = moments.ER2 - moments.ER * moments.ER;
    moments.se_ER = r_sums.std_error();
    moments.se_ER2 = r2_sums.std_error();
    moments.n_units = r_sums.count();
    return moments;
}

double lagrange_gamma(double A, double x, double ER) {
    if (std::abs(1.0 - ER) <= kDegenerateTol)
        throw DegenerateER("lagrange_gamma: E R_T = 1; the mean cannot be traded against variance");
    return (A - x) * ER / (1.0 - ER);
}

OptimalTarget optimal_A(double x, double theta, double ER, double VarR) {
    if (!(theta > 0.0)) throw std::invalid_argument("optimal_A: theta must be positive");
    if (VarR <= kDegenerateTol)
        throw DegenerateVariance("optimal_A: Var R_T is zero within tolerance");
    const double one_minus = 1.0 - ER;
    OptimalTarget target;
    target.A_star = x + (0.5 / theta) * one_minus * one_minus / VarR;
    target.gamma_star = (0.5 / theta) * one_minus * ER / VarR;
    return target;
}

double mv_strategy(const PdeSolution& sol, const FactorMarketModel& model,
                   double x, double z, double t,
                   double x0, double theta, double ER, double VarR) {
    if (!(theta > 0.0)) throw std::invalid_argument("mv_strategy: theta must be positive");
    if (VarR <= kDegenerateTol)
        throw DegenerateVariance("mv_strategy: Var R_T is zero within tolerance");
    const double intercept = x0 + (0.5 / theta) * (1.0 - ER) / VarR;
    return (x - intercept) * zeta_value(sol, model, z, t);
}

double theta_equivalence(double G_anchor, double y0, double ER, double VarR) {
    if (!(y0 > 0.0)) throw std::invalid_argument("theta_equivalence: y0 must be positive");
    if (std::abs(1.0 - ER) <= kDegenerateTol)
        throw DegenerateER("theta_equivalence: E R_T = 1");
    if (VarR <= kDegenerateTol)
        throw DegenerateVariance("theta_equivalence: Var R_T is zero within tolerance");
    return (1.0 - ER) / (4.0 * y0 * std::abs(G_anchor) * VarR);
}

double theta_equivalence(const PdeSolution& sol, double z0, double t0, double y0,
                         double ER, double VarR) {
    return theta_equivalence(eval_G(sol, z0, t0).g, y0, ER, VarR);
}

BsClosedForms bs_closed_forms(const FactorMarketModel& model) {
    if (model.kind() != FamilyKind::ConstantCoefficients)
        throw std::invalid_argument("bs_closed_forms: requires the constant-coefficient family");
    const double lam = market_price_of_risk(model, 0.0);
    const double lt = lam * lam * model.horizon();
    BsClosedForms cf;
    cf.ER = std::exp(-lt);
    cf.ER2 = cf.ER;
    cf.VarR = cf.ER - std::exp(-2.0 * lt);
    cf.G0 = -std::exp(lt);
    return cf;
}

DualityReport solve_H_and_check_duality(const FactorMarketModel& model, const GridSpec& grid,
                                        const PdeSolution& g_sol,
                                        const SolveOptions& options) {
    grid.validate();
    if (g_sol.grid.n_z != grid.n_z || g_sol.grid.n_t != grid.n_t ||
        g_sol.grid.z_lo != grid.z_lo || g_sol.grid.z_hi != grid.z_hi)
        throw std::invalid_argument("solve_H_and_check_duality: grid does not match the G solve");

    auto drift = [&model](double z) {
        return model.factor_drift(z) -
               2.0 * model.rho() * model.factor_vol(z) * market_price_of_risk(model, z);
    };
    auto half_b2 = [&model](double z) {
        const double b = model.factor_vol(z);
        return 0.5 * b * b;
    };
    auto reaction = [&model](double z) {
        const double lam = market_price_of_risk(model, z);
        return -lam * lam;
    };

    const Eigen::VectorXd z = grid.z_nodes();
    const double dz = grid.dz();
    const double rho_sq = model.rho() * model.rho();
    // - rho^2 b^2 H_z^2 / H evaluated on the later time level
    auto lagged_source = [&](const Eigen::VectorXd& level) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(grid.n_z);
        for (int i = 1; i + 1 < grid.n_z; ++i) {
            const double hz = (level[i + 1] - level[i - 1]) / (2.0 * dz);
            const double b = model.factor_vol(z[i]);
            s[i] = -rho_sq * b * b * hz * hz / level[i];
        }
        // one-sided at the boundary rows, consistent with the linear closure
        {
            const double hz = (-3.0 * level[0] + 4.0 * level[1] - level[2]) / (2.0 * dz);
            const double b = model.factor_vol(z[0]);
            s[0] = -rho_sq * b * b * hz * hz / level[0];
        }
        {
            const int n = grid.n_z;
            const double hz =
                (3.0 * level[n - 1] - 4.0 * level[n - 2] + level[n - 3]) / (2.0 * dz);
            const double b = model.factor_vol(z[n - 1]);
            s[n - 1] = -rho_sq * b * b * hz * hz / level[n - 1];
        }
        return s;
    };

    Eigen::MatrixXd H = march_backward_theta(grid, model.horizon(), drift, half_b2, reaction,
                                             Eigen::VectorXd::Ones(grid.n_z), lagged_source,
                                             options.theta_scheme);

    // nonlinear residual diagnostic, centered stencils on interior nodes
    {
        const double dt = model.horizon() / static_cast<double>(grid.n_t - 1);
        double worst = 0.0;
        for (int i = 1; i + 1 < grid.n_z; ++i) {
            const double lam = market_price_of_risk(model, z[i]);
            const double b = model.factor_vol(z[i]);
            const double m = drift(z[i]);
            for (int j = 1; j + 1 < grid.n_t; ++j) {
                const double h = H(i, j);
                const double ht = (H(i, j + 1) - H(i, j - 1)) / (2.0 * dt);
                const double hzv = (H(i + 1, j) - H(i - 1, j)) / (2.0 * dz);
                const double hzz = (H(i + 1, j) - 2.0 * h + H(i - 1, j)) / (dz * dz);
                worst = std::max(worst, std::abs(ht + m * hzv + 0.5 * b * b * hzz -
                                                 rho_sq * b * b * hzv * hzv / h -
                                                 lam * lam * h));
            }
        }
        if (worst > options.residual_tol) {
            std::ostringstream msg;
            msg << "solve_H_and_check_duality: diagnostic residual " << worst << " exceeds "
                << options.residual_tol;
            throw GridTooCoarse(msg.str());
        }
    }

    DualityReport report;
    report.H = H;
    for (int i = 1; i + 1 < grid.n_z; ++i) {
        for (int j = 1; j + 1 < grid.n_t; ++j) {
            report.max_abs_GH_plus_1 =
                std::max(report.max_abs_GH_plus_1, std::abs(g_sol.G(i, j) * H(i, j) + 1.0));
        }
    }
    return report;
}

MeanVarianceSolution build_mean_variance_solution(double x0, double y0, double G_anchor,
                                                  double ER, double ER2, double VarR) {
    MeanVarianceSolution mv;
    mv.ER = ER;
    mv.ER2 = ER2;
    mv.VarR = VarR;
    mv.theta = theta_equivalence(G_anchor, y0, ER, VarR);
    const OptimalTarget target = optimal_A(x0, mv.theta, ER, VarR);
    mv.A_star = target.A_star;
    mv.gamma_star = target.gamma_star;
    const double one_minus = 1.0 - ER;
    mv.phi_second_moment = VarR / (one_minus * one_minus);
    mv.strategy_intercept = x0 + (0.5 / mv.theta) * one_minus / VarR;
    return mv;
}

}  // namespace mmv
