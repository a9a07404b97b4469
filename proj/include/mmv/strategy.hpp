#ifndef MMV_STRATEGY_HPP
#define MMV_STRATEGY_HPP

#include "mmv/model.hpp"
#include "mmv/pde.hpp"

namespace mmv {

/// Fixed initial condition the implementable (reduced) strategy is pinned to.
struct Anchor {
    double x0 = 1.0;
    double y0 = 0.5;  // parameterizes risk aversion through theta = 1/(4 y0)
    double z0 = 0.0;
    double t0 = 0.0;
};

struct EtaPair {
    double eta1 = 0.0;
    double eta2 = 0.0;
};

/// Saddle-point feedback maps read off a solved value surface. Holds
/// references only; keep the solution and model alive while in use.
struct ControlFields {
    const PdeSolution& sol;
    const FactorMarketModel& model;
    Anchor anchor;

    ControlFields(const PdeSolution& sol_, const FactorMarketModel& model_, const Anchor& anchor_);
};

/// Shared strategy loading
///   zeta(z,t) = -[ lambda/sigma - (rho b / sigma) (G_z/G) ].
double zeta_value(const PdeSolution& sol, const FactorMarketModel& model, double z, double t);
double zeta(const ControlFields& fields, double z, double t);

/// Investor's saddle portfolio pi*(y,z,t) = 2 y G(z,t) zeta(z,t).
double optimal_pi(const ControlFields& fields, double y, double z, double t);

/// Market's saddle distortion (eta1*, eta2*) = (-lambda, -rho_bar b G_z/G).
EtaPair optimal_eta(const ControlFields& fields, double z, double t);

/// Inner maximizer for an arbitrary portfolio pi:
///   eta1*(pi) = sigma pi / (2 y G) - rho b G_z/G,   eta2* as above.
/// At pi = optimal_pi this collapses to -lambda identically.
EtaPair inner_max_eta(const ControlFields& fields, double y, double z, double t, double pi);

/// Wealth-feedback form pinned to the anchor:
///   pi_hat(x,z,t) = (x - x0 + 2 y0 G(z0,t0)) zeta(z,t).
double reduced_pi(const ControlFields& fields, double x, double z, double t);

}  // namespace mmv

#endif  // MMV_STRATEGY_HPP
