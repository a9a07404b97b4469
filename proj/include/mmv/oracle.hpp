#ifndef MMV_ORACLE_HPP
#define MMV_ORACLE_HPP

#include <Eigen/Dense>
#include <cstdint>

#include "mmv/model.hpp"

namespace mmv {

/// Monte Carlo configuration. Each path consumes the substream addressed by
/// (seed, path index), so results are bit-reproducible for a fixed config
/// regardless of thread count or evaluation order.
struct McConfig {
    std::int64_t n_paths = 100000;
    int n_steps = 256;
    std::uint64_t seed = 0x5eed0001u;
    bool antithetic = true;  // pair 2j / 2j+1 shares substream j with flipped noise
    int n_threads = 0;       // 0 = hardware concurrency
};

struct McEstimate {
    double mean = 0.0;
    /// Per-path sample standard error sd(values)/sqrt(n_paths). With
    /// antithetic pairing this is conservative (it ignores the negative
    /// within-pair correlation) and remains comparable across conventions.
    double std_error = 0.0;
    /// Standard error over independent units (pairs when antithetic); the
    /// sharp sampling error of the reported mean.
    double unit_std_error = 0.0;
    std::int64_t n_units = 0;
};

/// Euler-Maruyama paths of the auxiliary factor diffusion
///   dZ~ = [a(Z~) - 2 rho b(Z~) lambda(Z~)] ds + b(Z~) dW,  Z~_t = z,
/// on [t, T]. Returns an n_paths x (n_steps + 1) matrix; intended for tests
/// and diagnostics (the estimators below stream paths without storing them).
Eigen::MatrixXd simulate_Z_tilde(const FactorMarketModel& model, double z, double t,
                                 const McConfig& cfg);

/// Estimates F1(z, t) = E[ exp{ (2 rho^2 - 1) Int_t^T lambda^2(Z~_s) ds } ]
/// with left-endpoint quadrature on the Euler grid.
McEstimate estimate_F1(const FactorMarketModel& model, double z, double t, const McConfig& cfg);

/// Estimates F2(z, t) = E[ Int_t^T lambda^2(Z~_s) ds ], same grid and rule.
McEstimate estimate_F2(const FactorMarketModel& model, double z, double t, const McConfig& cfg);

}  // namespace mmv

#endif  // MMV_ORACLE_HPP
