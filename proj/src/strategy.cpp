#include "mmv/strategy.hpp"

#include <stdexcept>

namespace mmv {

ControlFields::ControlFields(const PdeSolution& sol_, const FactorMarketModel& model_,
                             const Anchor& anchor_)
    : sol(sol_), model(model_), anchor(anchor_) {
    if (!(anchor.y0 > 0.0)) throw std::invalid_argument("anchor: y0 must be positive");
    if (!(anchor.t0 >= 0.0 && anchor.t0 < model.horizon()))
        throw std::invalid_argument("anchor: t0 must lie in [0, T)");
    const GEval g0 = eval_G(sol, anchor.z0, anchor.t0);
    if (!(g0.g < 0.0)) throw std::logic_error("anchor: G(z0, t0) must be negative");
}

double zeta_value(const PdeSolution& sol, const FactorMarketModel& model, double z, double t) {
    const GEval g = eval_G(sol, z, t);
    const double lam = market_price_of_risk(model, z);
    const double s = model.sigma(z);
    return -(lam / s - (model.rho() * model.factor_vol(z) / s) * (g.g_z / g.g));
}

double zeta(const ControlFields& fields, double z, double t) {
    return zeta_value(fields.sol, fields.model, z, t);
}

double optimal_pi(const ControlFields& fields, double y, double z, double t) {
    if (!(y > 0.0)) throw std::invalid_argument("optimal_pi: y must be positive");
    const GEval g = eval_G(fields.sol, z, t);
    return 2.0 * y * g.g * zeta(fields, z, t);
}

EtaPair optimal_eta(const ControlFields& fields, double z, double t) {
    const GEval g = eval_G(fields.sol, z, t);
    const double lam = market_price_of_risk(fields.model, z);
    return {-lam, -fields.model.rho_bar() * fields.model.factor_vol(z) * (g.g_z / g.g)};
}

EtaPair inner_max_eta(const ControlFields& fields, double y, double z, double t, double pi) {
    if (!(y > 0.0)) throw std::invalid_argument("inner_max_eta: y must be positive");
    const GEval g = eval_G(fields.sol, z, t);
    const double ratio = g.g_z / g.g;
    const double b = fields.model.factor_vol(z);
    return {fields.model.sigma(z) * pi / (2.0 * y * g.g) - fields.model.rho() * b * ratio,
            -fields.model.rho_bar() * b * ratio};
}

double reduced_pi(const ControlFields& fields, double x, double z, double t) {
    const GEval g0 = eval_G(fields.sol, fields.anchor.z0, fields.anchor.t0);
    return (x - fields.anchor.x0 + 2.0 * fields.anchor.y0 * g0.g) * zeta(fields, z, t);
}

}  // namespace mmv
