#include "mmv/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mmv {

namespace {

using nlohmann::json;

template <class T>
T require(const json& node, const std::string& scope, const std::string& key) {
    if (!node.contains(key)) throw ConfigError(scope + key, "missing");
    try {
        return node.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(scope + key, e.what());
    }
}

template <class T>
T optional_or(const json& node, const std::string& scope, const std::string& key, T fallback) {
    if (!node.contains(key)) return fallback;
    try {
        return node.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(scope + key, e.what());
    }
}

FactorMarketModel parse_model(const json& root) {
    if (!root.contains("model")) throw ConfigError("model", "missing");
    const json& m = root.at("model");
    const std::string family = require<std::string>(m, "model.", "family");
    const double r = require<double>(m, "model.", "r");
    const double rho = require<double>(m, "model.", "rho");
    const double horizon = require<double>(m, "model.", "horizon_T");
    if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("model.rho", "must lie in [-1, 1]");
    if (!(horizon > 0.0)) throw ConfigError("model.horizon_T", "must be positive");

    try {
        if (family == "constant") {
            ConstantCoefficientParams p;
            p.mu = require<double>(m, "model.", "mu");
            p.sigma = require<double>(m, "model.", "sigma");
            p.a = optional_or<double>(m, "model.", "a", 0.0);
            p.b = require<double>(m, "model.", "b");
            return FactorMarketModel::constant_coefficients(p, r, rho, horizon);
        }
        if (family == "ou_tanh") {
            OuTanhParams p;
            p.kappa = require<double>(m, "model.", "kappa");
            p.m = require<double>(m, "model.", "m");
            p.beta = require<double>(m, "model.", "beta");
            p.sigma0 = require<double>(m, "model.", "sigma0");
            p.lambda0 = require<double>(m, "model.", "lambda0");
            p.lambda1 = require<double>(m, "model.", "lambda1");
            return FactorMarketModel::ou_tanh(p, r, rho, horizon);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
    throw ConfigError("model.family", "must be 'constant' or 'ou_tanh', got '" + family + "'");
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("(document)", std::string("not valid JSON: ") + e.what());
    }

    RunConfig cfg{parse_model(root)};

    if (root.contains("audit")) {
        const json& a = root.at("audit");
        cfg.audit_z_lo = optional_or<double>(a, "audit.", "z_lo", cfg.audit_z_lo);
        cfg.audit_z_hi = optional_or<double>(a, "audit.", "z_hi", cfg.audit_z_hi);
        cfg.audit_samples = optional_or<int>(a, "audit.", "n_samples", cfg.audit_samples);
        if (!(cfg.audit_z_lo < cfg.audit_z_hi)) throw ConfigError("audit.z_lo", "must be < audit.z_hi");
        if (cfg.audit_samples < 2) throw ConfigError("audit.n_samples", "must be >= 2");
    }

    // anchor can appear before grid in the document; parse z0 first for the
    // default-domain rule
    double anchor_z0 = 0.0;
    if (root.contains("anchor") && root.at("anchor").contains("z0")) {
        anchor_z0 = require<double>(root.at("anchor"), "anchor.", "z0");
    }

    cfg.grid = suggest_grid(cfg.model, anchor_z0);
    if (root.contains("grid")) {
        const json& g = root.at("grid");
        cfg.grid.z_lo = optional_or<double>(g, "grid.", "z_lo", cfg.grid.z_lo);
        cfg.grid.z_hi = optional_or<double>(g, "grid.", "z_hi", cfg.grid.z_hi);
        cfg.grid.n_z = optional_or<int>(g, "grid.", "n_z", cfg.grid.n_z);
        cfg.grid.n_t = optional_or<int>(g, "grid.", "n_t", cfg.grid.n_t);
        if (!(cfg.grid.z_lo < cfg.grid.z_hi)) throw ConfigError("grid.z_lo", "must be < grid.z_hi");
        if (cfg.grid.n_z < 3) throw ConfigError("grid.n_z", "must be >= 3");
        if (cfg.grid.n_t < 2) throw ConfigError("grid.n_t", "must be >= 2");
    }

    if (root.contains("mc")) {
        const json& mc = root.at("mc");
        cfg.mc.n_paths = optional_or<std::int64_t>(mc, "mc.", "n_paths", cfg.mc.n_paths);
        cfg.mc.n_steps = optional_or<int>(mc, "mc.", "n_steps", cfg.mc.n_steps);
        cfg.mc.seed = optional_or<std::uint64_t>(mc, "mc.", "seed", cfg.mc.seed);
        cfg.mc.antithetic = optional_or<bool>(mc, "mc.", "antithetic", cfg.mc.antithetic);
        cfg.mc.n_threads = optional_or<int>(mc, "mc.", "n_threads", cfg.mc.n_threads);
        cfg.sim_bundle_paths =
            optional_or<std::int64_t>(mc, "mc.", "sim_bundle_paths", cfg.sim_bundle_paths);
        if (cfg.mc.n_paths < 1) throw ConfigError("mc.n_paths", "must be >= 1");
        if (cfg.mc.n_steps < 1) throw ConfigError("mc.n_steps", "must be >= 1");
        if (cfg.sim_bundle_paths < 1) throw ConfigError("mc.sim_bundle_paths", "must be >= 1");
    }

    if (root.contains("anchor")) {
        const json& a = root.at("anchor");
        cfg.anchor.x0 = optional_or<double>(a, "anchor.", "x0", cfg.anchor.x0);
        cfg.anchor.y0 = optional_or<double>(a, "anchor.", "y0", cfg.anchor.y0);
        cfg.anchor.z0 = optional_or<double>(a, "anchor.", "z0", cfg.anchor.z0);
        cfg.anchor.t0 = optional_or<double>(a, "anchor.", "t0", cfg.anchor.t0);
        if (!(cfg.anchor.y0 > 0.0)) throw ConfigError("anchor.y0", "must be positive");
        if (!(cfg.anchor.t0 >= 0.0 && cfg.anchor.t0 < cfg.model.horizon()))
            throw ConfigError("anchor.t0", "must lie in [0, horizon_T)");
    }

    if (root.contains("theta")) {
        const double theta = require<double>(root, "", "theta");
        if (!(theta > 0.0)) throw ConfigError("theta", "must be positive");
        cfg.theta = theta;
    }

    if (root.contains("probes")) {
        if (!root.at("probes").is_array()) throw ConfigError("probes", "must be an array");
        int idx = 0;
        for (const auto& p : root.at("probes")) {
            std::ostringstream scope;
            scope << "probes[" << idx << "].";
            ProbePoint probe;
            probe.z = require<double>(p, scope.str(), "z");
            probe.t = require<double>(p, scope.str(), "t");
            if (!(probe.t >= 0.0 && probe.t < cfg.model.horizon()))
                throw ConfigError(scope.str() + "t", "must lie in [0, horizon_T)");
            cfg.probes.push_back(probe);
            ++idx;
        }
    }

    cfg.output_dir = optional_or<std::string>(root, "", "output_dir", cfg.output_dir);

    if (root.contains("tolerances")) {
        const json& t = root.at("tolerances");
        cfg.tolerances.eps_residual =
            optional_or<double>(t, "tolerances.", "eps_residual", cfg.tolerances.eps_residual);
        cfg.tolerances.grid_residual_tol = optional_or<double>(
            t, "tolerances.", "grid_residual_tol", cfg.tolerances.grid_residual_tol);
        cfg.tolerances.mv_equality_rel_tol = optional_or<double>(
            t, "tolerances.", "mv_equality_rel_tol", cfg.tolerances.mv_equality_rel_tol);
        cfg.tolerances.oracle_abs_floor = optional_or<double>(
            t, "tolerances.", "oracle_abs_floor", cfg.tolerances.oracle_abs_floor);
        if (!(cfg.tolerances.grid_residual_tol > 0.0))
            throw ConfigError("tolerances.grid_residual_tol", "must be positive");
        if (!(cfg.tolerances.mv_equality_rel_tol > 0.0))
            throw ConfigError("tolerances.mv_equality_rel_tol", "must be positive");
    }

    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("(document)", "cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

}  // namespace mmv
