#ifndef MMV_MODEL_HPP
#define MMV_MODEL_HPP

#include <functional>
#include <string>
#include <vector>

#include "mmv/errors.hpp"

namespace mmv {

enum class FamilyKind { ConstantCoefficients, OuTanh, Custom };

/// Black-Scholes-style market with a dummy factor: all coefficients constant.
struct ConstantCoefficientParams {
    double mu = 0.10;
    double sigma = 0.20;
    double a = 0.0;
    double b = 0.30;
};

/// Ornstein-Uhlenbeck factor with tanh-saturated market price of risk:
///   a(z) = kappa (m - z),  b(z) = beta,  sigma(z) = sigma0,
///   mu(z) = r + sigma0 (lambda0 + lambda1 tanh z).
struct OuTanhParams {
    double kappa = 1.0;
    double m = 0.0;
    double beta = 0.5;
    double sigma0 = 0.2;
    double lambda0 = 0.3;
    double lambda1 = 0.1;
};

/// Bounds the coefficient functions are declared to satisfy on the domain of
/// interest; audited numerically by audit_assumptions.
struct AssumptionBounds {
    double sigma_min = 0.0;     // sigma(z) >= sigma_min > 0
    double ellipticity = 0.0;   // b(z)^2 >= ellipticity > 0
    double lambda_max = 0.0;    // sup |lambda(z)| <= lambda_max
};

/// One-factor market: riskless rate r, risky asset with coefficients
/// mu(z), sigma(z), factor diffusion with drift a(z) and volatility b(z),
/// correlation rho between asset and factor noise. Immutable after
/// construction; safe to share across threads.
class FactorMarketModel {
public:
    using Coefficient = std::function<double(double)>;

    static FactorMarketModel constant_coefficients(const ConstantCoefficientParams& p,
                                                   double r, double rho, double horizon);
    static FactorMarketModel ou_tanh(const OuTanhParams& p,
                                     double r, double rho, double horizon);

    /// Arbitrary coefficient functions, accepted at the caller's risk; run
    /// audit_assumptions before trusting downstream solves.
    static FactorMarketModel custom(Coefficient mu, Coefficient sigma,
                                    Coefficient a, Coefficient b,
                                    double r, double rho, double horizon,
                                    const AssumptionBounds& declared);

    double mu(double z) const { return mu_(z); }
    double sigma(double z) const { return sigma_(z); }
    double factor_drift(double z) const { return a_(z); }
    double factor_vol(double z) const { return b_(z); }

    double rate() const { return r_; }
    double rho() const { return rho_; }
    double rho_bar() const { return rho_bar_; }
    double horizon() const { return horizon_; }
    FamilyKind kind() const { return kind_; }
    const AssumptionBounds& bounds() const { return bounds_; }

    const ConstantCoefficientParams& constant_params() const;
    const OuTanhParams& ou_tanh_params() const;

private:
    FactorMarketModel(FamilyKind kind, Coefficient mu, Coefficient sigma,
                      Coefficient a, Coefficient b,
                      double r, double rho, double horizon,
                      const AssumptionBounds& bounds);

    FamilyKind kind_;
    Coefficient mu_, sigma_, a_, b_;
    double r_, rho_, rho_bar_, horizon_;
    AssumptionBounds bounds_;
    ConstantCoefficientParams const_params_{};
    OuTanhParams ou_params_{};
};

/// lambda(z) = (mu(z) - r) / sigma(z). Throws NonPositiveVolatility when
/// sigma(z) <= 0.
double market_price_of_risk(const FactorMarketModel& model, double z);

struct AuditReport {
    double z_lo = 0.0, z_hi = 0.0;
    int n_samples = 0;

    double min_sigma = 0.0;
    double min_b_squared = 0.0;
    double max_abs_lambda = 0.0;

    // max finite-difference quotients |f(z+h)-f(z)| / h on the sample grid
    double lip_a = 0.0;
    double lip_b = 0.0;
    double lip_b_lambda = 0.0;
    double lip_lambda_sq = 0.0;

    std::vector<std::string> violations;
    bool passed() const { return violations.empty(); }
};

/// Samples the coefficient functions on a uniform grid over [z_lo, z_hi] and
/// checks the standing assumptions against the model's declared bounds. A
/// failing audit is a report, not an error.
AuditReport audit_assumptions(const FactorMarketModel& model,
                              double z_lo, double z_hi, int n_samples,
                              double lipschitz_threshold = 1.0e3);

}  // namespace mmv

#endif  // MMV_MODEL_HPP
