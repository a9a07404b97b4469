#ifndef MMV_CONFIG_HPP
#define MMV_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "mmv/model.hpp"
#include "mmv/oracle.hpp"
#include "mmv/pde.hpp"
#include "mmv/strategy.hpp"

namespace mmv {

struct ProbePoint {
    double z = 0.0;
    double t = 0.0;
};

struct ToleranceOverrides {
    double eps_residual = -1.0;      // <= 0 selects the adaptive default
    double grid_residual_tol = 1e-2;
    double mv_equality_rel_tol = 1e-6;
    // absolute floor added to the 3 SE band in the oracle comparison; covers
    // the PDE discretization error when the sampler variance collapses
    double oracle_abs_floor = 1e-6;
};

/// Full run configuration parsed from a JSON document; see README for the
/// schema. Invalid or missing fields raise ConfigError naming the field.
struct RunConfig {
    explicit RunConfig(FactorMarketModel model_) : model(std::move(model_)) {}

    FactorMarketModel model;
    double audit_z_lo = -6.0;
    double audit_z_hi = 6.0;
    int audit_samples = 2001;

    GridSpec grid;
    McConfig mc;
    // path budget for stored-trajectory diagnostics (reduction identity,
    // penalty, density checks); streaming estimators use mc.n_paths
    std::int64_t sim_bundle_paths = 20000;
    Anchor anchor;
    std::optional<double> theta;
    std::vector<ProbePoint> probes;
    std::string output_dir = "out";
    ToleranceOverrides tolerances;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
};

}  // namespace mmv

#endif  // MMV_CONFIG_HPP
