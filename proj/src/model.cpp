#include "mmv/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace mmv {

namespace {

void check_market_constants(double r, double rho, double horizon) {
    if (!(r >= 0.0)) throw std::invalid_argument("riskless rate r must be nonnegative");
    if (!(rho >= -1.0 && rho <= 1.0)) throw std::invalid_argument("correlation rho must lie in [-1, 1]");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon_T must be positive");
}

}  // namespace

FactorMarketModel::FactorMarketModel(FamilyKind kind, Coefficient mu, Coefficient sigma,
                                     Coefficient a, Coefficient b,
                                     double r, double rho, double horizon,
                                     const AssumptionBounds& bounds)
    : kind_(kind),
      mu_(std::move(mu)),
      sigma_(std::move(sigma)),
      a_(std::move(a)),
      b_(std::move(b)),
      r_(r),
      rho_(rho),
      rho_bar_(std::sqrt(std::max(0.0, 1.0 - rho * rho))),
      horizon_(horizon),
      bounds_(bounds) {}

FactorMarketModel FactorMarketModel::constant_coefficients(const ConstantCoefficientParams& p,
                                                           double r, double rho, double horizon) {
    check_market_constants(r, rho, horizon);
    if (!(p.sigma > 0.0)) throw std::invalid_argument("constant family requires sigma > 0");
    if (!(p.b > 0.0)) throw std::invalid_argument("constant family requires b > 0");
    AssumptionBounds bounds;
    bounds.sigma_min = p.sigma;
    bounds.ellipticity = p.b * p.b;
    bounds.lambda_max = std::abs((p.mu - r) / p.sigma);
    FactorMarketModel model(FamilyKind::ConstantCoefficients,
                            [mu = p.mu](double) { return mu; },
                            [s = p.sigma](double) { return s; },
                            [a = p.a](double) { return a; },
                            [b = p.b](double) { return b; },
                            r, rho, horizon, bounds);
    model.const_params_ = p;
    return model;
}

FactorMarketModel FactorMarketModel::ou_tanh(const OuTanhParams& p,
                                             double r, double rho, double horizon) {
    check_market_constants(r, rho, horizon);
    if (!(p.sigma0 > 0.0)) throw std::invalid_argument("ou_tanh family requires sigma0 > 0");
    if (!(p.beta > 0.0)) throw std::invalid_argument("ou_tanh family requires beta > 0");
    if (!(p.kappa > 0.0)) throw std::invalid_argument("ou_tanh family requires kappa > 0");
    AssumptionBounds bounds;
    bounds.sigma_min = p.sigma0;
    bounds.ellipticity = p.beta * p.beta;
    bounds.lambda_max = std::abs(p.lambda0) + std::abs(p.lambda1);
    FactorMarketModel model(FamilyKind::OuTanh,
                            [p, r](double z) { return r + p.sigma0 * (p.lambda0 + p.lambda1 * std::tanh(z)); },
                            [s = p.sigma0](double) { return s; },
                            [p](double z) { return p.kappa * (p.m - z); },
                            [b = p.beta](double) { return b; },
                            r, rho, horizon, bounds);
    model.ou_params_ = p;
    return model;
}

FactorMarketModel FactorMarketModel::custom(Coefficient mu, Coefficient sigma,
                                            Coefficient a, Coefficient b,
                                            double r, double rho, double horizon,
                                            const AssumptionBounds& declared) {
    check_market_constants(r, rho, horizon);
    return FactorMarketModel(FamilyKind::Custom, std::move(mu), std::move(sigma),
                             std::move(a), std::move(b), r, rho, horizon, declared);
}

const ConstantCoefficientParams& FactorMarketModel::constant_params() const {
    if (kind_ != FamilyKind::ConstantCoefficients)
        throw std::logic_error("constant_params: model is not the constant-coefficient family");
    return const_params_;
}

const OuTanhParams& FactorMarketModel::ou_tanh_params() const {
    if (kind_ != FamilyKind::OuTanh)
        throw std::logic_error("ou_tanh_params: model is not the ou_tanh family");
    return ou_params_;
}

double market_price_of_risk(const FactorMarketModel& model, double z) {
    const double s = model.sigma(z);
    if (!(s > 0.0)) {
        std::ostringstream msg;
        msg << "sigma(" << z << ") = " << s << " is not positive";
        throw NonPositiveVolatility(msg.str());
    }
    return (model.mu(z) - model.rate()) / s;
}

AuditReport audit_assumptions(const FactorMarketModel& model,
                              double z_lo, double z_hi, int n_samples,
                              double lipschitz_threshold) {
    if (!(z_lo < z_hi)) throw std::invalid_argument("audit_assumptions: z_lo must be < z_hi");
    if (n_samples < 2) throw std::invalid_argument("audit_assumptions: n_samples must be >= 2");

    AuditReport report;
    report.z_lo = z_lo;
    report.z_hi = z_hi;
    report.n_samples = n_samples;
    report.min_sigma = std::numeric_limits<double>::infinity();
    report.min_b_squared = std::numeric_limits<double>::infinity();
    report.max_abs_lambda = 0.0;

    const double h = (z_hi - z_lo) / static_cast<double>(n_samples - 1);
    const double r = model.rate();

    double sigma_bad_lo = 0.0, sigma_bad_hi = 0.0;
    bool sigma_bad = false;

    std::vector<double> av(n_samples), bv(n_samples), lam(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        const double z = z_lo + h * i;
        const double s = model.sigma(z);
        const double b = model.factor_vol(z);
        av[i] = model.factor_drift(z);
        bv[i] = b;
        lam[i] = s > 0.0 ? (model.mu(z) - r) / s
                         : std::numeric_limits<double>::quiet_NaN();

        report.min_sigma = std::min(report.min_sigma, s);
        report.min_b_squared = std::min(report.min_b_squared, b * b);
        if (s > 0.0) report.max_abs_lambda = std::max(report.max_abs_lambda, std::abs(lam[i]));
        if (s <= 0.0) {
            if (!sigma_bad) sigma_bad_lo = z;
            sigma_bad_hi = z;
            sigma_bad = true;
        }
    }

    for (int i = 0; i + 1 < n_samples; ++i) {
        report.lip_a = std::max(report.lip_a, std::abs(av[i + 1] - av[i]) / h);
        report.lip_b = std::max(report.lip_b, std::abs(bv[i + 1] - bv[i]) / h);
        if (std::isnan(lam[i]) || std::isnan(lam[i + 1])) continue;
        report.lip_b_lambda = std::max(report.lip_b_lambda,
                                       std::abs(bv[i + 1] * lam[i + 1] - bv[i] * lam[i]) / h);
        report.lip_lambda_sq = std::max(report.lip_lambda_sq,
                                        std::abs(lam[i + 1] * lam[i + 1] - lam[i] * lam[i]) / h);
    }

    const AssumptionBounds& bounds = model.bounds();
    std::ostringstream msg;
    if (sigma_bad) {
        msg.str("");
        msg << "NonPositiveVolatility: sigma(z) <= 0 on [" << sigma_bad_lo << ", " << sigma_bad_hi << "]";
        report.violations.push_back(msg.str());
    } else if (bounds.sigma_min > 0.0 && report.min_sigma < bounds.sigma_min * (1.0 - 1e-12)) {
        msg.str("");
        msg << "VolatilityBelowDeclaredMin: min sigma = " << report.min_sigma
            << " < declared " << bounds.sigma_min;
        report.violations.push_back(msg.str());
    }
    if (!(report.min_b_squared > 0.0)) {
        report.violations.push_back("EllipticityFailure: b(z)^2 reaches 0 on the audited domain");
    } else if (bounds.ellipticity > 0.0 && report.min_b_squared < bounds.ellipticity * (1.0 - 1e-12)) {
        msg.str("");
        msg << "EllipticityBelowDeclared: min b^2 = " << report.min_b_squared
            << " < declared " << bounds.ellipticity;
        report.violations.push_back(msg.str());
    }
    if (sigma_bad || !std::isfinite(report.max_abs_lambda)) {
        report.violations.push_back("UnboundedMarketPriceOfRisk: lambda undefined or not finite");
    } else if (bounds.lambda_max > 0.0 && report.max_abs_lambda > bounds.lambda_max * (1.0 + 1e-12)) {
        msg.str("");
        msg << "MarketPriceOfRiskAboveDeclared: max |lambda| = " << report.max_abs_lambda
            << " > declared " << bounds.lambda_max;
        report.violations.push_back(msg.str());
    }
    const double worst_lip = std::max(std::max(report.lip_a, report.lip_b),
                                      std::max(report.lip_b_lambda, report.lip_lambda_sq));
    if (!std::isfinite(worst_lip) || worst_lip > lipschitz_threshold) {
        msg.str("");
        msg << "LipschitzQuotientTooLarge: max quotient = " << worst_lip
            << " > threshold " << lipschitz_threshold;
        report.violations.push_back(msg.str());
    }

    return report;
}

}  // namespace mmv
