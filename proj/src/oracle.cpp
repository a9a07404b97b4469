#include "mmv/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "mmv/rng.hpp"
#include "mmv/stats.hpp"

namespace mmv {

namespace {

void check_config(const FactorMarketModel& model, double t, const McConfig& cfg) {
    if (cfg.n_paths < 1) throw std::invalid_argument("mc: n_paths must be >= 1");
    if (cfg.n_steps < 1) throw std::invalid_argument("mc: n_steps must be >= 1");
    if (!(t < model.horizon())) throw std::invalid_argument("mc: start time t must be < horizon");
}

// Integral of lambda^2 along one Euler path of the shifted-drift factor
// diffusion; `sign` flips the Wiener increments for the antithetic partner.
double path_lambda_sq_integral(const FactorMarketModel& model, double z0, double t,
                               int n_steps, PathRng& rng, double sign) {
    const double dt = (model.horizon() - t) / static_cast<double>(n_steps);
    const double sqrt_dt = std::sqrt(dt);
    const double rho = model.rho();
    double z = z0;
    double integral = 0.0;
    for (int k = 0; k < n_steps; ++k) {
        const double lam = market_price_of_risk(model, z);
        const double b = model.factor_vol(z);
        integral += lam * lam * dt;
        const double dw = sign * sqrt_dt * rng.next_gaussian();
        z += (model.factor_drift(z) - 2.0 * rho * b * lam) * dt + b * dw;
    }
    return integral;
}

struct PathAndUnitSums {
    MomentSums paths;  // every path value
    MomentSums units;  // pair means when antithetic
    void combine(const PathAndUnitSums& other) {
        paths.combine(other.paths);
        units.combine(other.units);
    }
};

template <class Transform>
McEstimate estimate_functional(const FactorMarketModel& model, double z, double t,
                               const McConfig& cfg, Transform&& transform) {
    check_config(model, t, cfg);
    const std::int64_t n_units = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;

    const PathAndUnitSums sums = accumulate_partials<PathAndUnitSums>(
        n_units, cfg.n_threads, [&](std::int64_t u, PathAndUnitSums& acc) {
            if (cfg.antithetic) {
                PathRng rng_plus(cfg.seed, static_cast<std::uint64_t>(u));
                const double v_plus =
                    transform(path_lambda_sq_integral(model, z, t, cfg.n_steps, rng_plus, +1.0));
                acc.paths.add(v_plus);
                const std::int64_t partner = 2 * u + 1;
                if (partner < cfg.n_paths) {
                    PathRng rng_minus(cfg.seed, static_cast<std::uint64_t>(u));
                    const double v_minus = transform(
                        path_lambda_sq_integral(model, z, t, cfg.n_steps, rng_minus, -1.0));
                    acc.paths.add(v_minus);
                    acc.units.add(0.5 * (v_plus + v_minus));
                } else {
                    acc.units.add(v_plus);
                }
            } else {
                PathRng rng(cfg.seed, static_cast<std::uint64_t>(u));
                const double v =
                    transform(path_lambda_sq_integral(model, z, t, cfg.n_steps, rng, +1.0));
                acc.paths.add(v);
                acc.units.add(v);
            }
        });

    McEstimate est;
    est.mean = sums.paths.mean();
    est.std_error = sums.paths.std_error();
    est.unit_std_error = sums.units.std_error();
    est.n_units = sums.units.count();
    return est;
}

}  // namespace

Eigen::MatrixXd simulate_Z_tilde(const FactorMarketModel& model, double z, double t,
                                 const McConfig& cfg) {
    check_config(model, t, cfg);
    const double dt = (model.horizon() - t) / static_cast<double>(cfg.n_steps);
    const double sqrt_dt = std::sqrt(dt);
    const double rho = model.rho();

    Eigen::MatrixXd paths(cfg.n_paths, cfg.n_steps + 1);
    for (std::int64_t p = 0; p < cfg.n_paths; ++p) {
        const std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(p >> 1)
                                                    : static_cast<std::uint64_t>(p);
        const double sign = (cfg.antithetic && (p & 1)) ? -1.0 : 1.0;
        PathRng rng(cfg.seed, stream);
        double zz = z;
        paths(p, 0) = zz;
        for (int k = 0; k < cfg.n_steps; ++k) {
            const double lam = market_price_of_risk(model, zz);
            const double b = model.factor_vol(zz);
            const double dw = sign * sqrt_dt * rng.next_gaussian();
            zz += (model.factor_drift(zz) - 2.0 * rho * b * lam) * dt + b * dw;
            paths(p, k + 1) = zz;
        }
    }
    return paths;
}

McEstimate estimate_F1(const FactorMarketModel& model, double z, double t, const McConfig& cfg) {
    const double k = 2.0 * model.rho() * model.rho() - 1.0;
    return estimate_functional(model, z, t, cfg,
                               [k](double integral) { return std::exp(k * integral); });
}

McEstimate estimate_F2(const FactorMarketModel& model, double z, double t, const McConfig& cfg) {
    return estimate_functional(model, z, t, cfg, [](double integral) { return integral; });
}

}  // namespace mmv
