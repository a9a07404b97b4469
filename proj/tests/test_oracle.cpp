#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mmv/oracle.hpp"
#include "mmv/pde.hpp"
#include "test_support.hpp"

using namespace mmv;
using namespace mmv::testing;

namespace {

McConfig small_cfg(std::uint64_t seed = 42) {
    McConfig cfg;
    cfg.n_paths = 20000;
    cfg.n_steps = 64;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("zero market price of risk gives F1 = 1 and F2 = 0 exactly") {
    const auto model = flat_model(0.3);
    const McEstimate f1 = estimate_F1(model, 0.7, 0.0, small_cfg());
    CHECK(f1.mean == 1.0);
    CHECK(f1.std_error == 0.0);
    const McEstimate f2 = estimate_F2(model, 0.7, 0.0, small_cfg());
    CHECK(f2.mean == 0.0);
    CHECK(f2.std_error == 0.0);
}

TEST_CASE("constant lambda makes the path integral deterministic") {
    // lambda = 0.4, rho = 0, T - t = 1: integrand identically e^{-0.16}
    const auto model = bs_model(0.0);
    const McEstimate f1 = estimate_F1(model, 0.0, 0.0, small_cfg());
    CHECK(f1.mean == doctest::Approx(std::exp(-0.16)).epsilon(1e-13));
    CHECK(f1.std_error <= 1e-14);

    const McEstimate f2 = estimate_F2(model, 0.0, 0.0, small_cfg());
    CHECK(f2.mean == doctest::Approx(0.16).epsilon(1e-13));
    CHECK(f2.std_error <= 1e-14);
}

TEST_CASE("estimates are bit-identical across repeated calls and thread counts") {
    const auto model = ou_model(0.5);
    McConfig cfg = small_cfg(9001);
    const McEstimate first = estimate_F1(model, 0.2, 0.1, cfg);
    const McEstimate second = estimate_F1(model, 0.2, 0.1, cfg);
    CHECK(first.mean == second.mean);
    CHECK(first.std_error == second.std_error);

    cfg.n_threads = 1;
    const McEstimate serial = estimate_F1(model, 0.2, 0.1, cfg);
    cfg.n_threads = 4;
    const McEstimate parallel = estimate_F1(model, 0.2, 0.1, cfg);
    CHECK(serial.mean == parallel.mean);
    CHECK(serial.std_error == parallel.std_error);
}

TEST_CASE("degenerate diffusion leaves the path constant") {
    const auto model = FactorMarketModel::custom(
        [](double) { return 0.02; }, [](double) { return 0.2; },
        [](double) { return 0.0; }, [](double) { return 0.0; },
        0.02, 0.0, 1.0, AssumptionBounds{0.2, 0.0, 0.0});
    McConfig cfg = small_cfg();
    cfg.n_paths = 8;
    cfg.n_steps = 16;
    const Eigen::MatrixXd paths = simulate_Z_tilde(model, 1.25, 0.0, cfg);
    CHECK((paths.array() == 1.25).all());
}

TEST_CASE("shifted-drift mean matches the OU closed form when lambda is constant") {
    OuTanhParams p;
    p.kappa = 1.0;
    p.m = 0.0;
    p.beta = 0.5;
    p.sigma0 = 0.2;
    p.lambda0 = 0.3;
    p.lambda1 = 0.0;  // constant lambda: drift stays linear in z
    const double rho = 0.5;
    const auto model = FactorMarketModel::ou_tanh(p, 0.02, rho, 1.0);

    McConfig cfg = small_cfg(5150);
    cfg.n_paths = 40000;
    cfg.n_steps = 256;
    const double z0 = 0.8;
    const Eigen::MatrixXd paths = simulate_Z_tilde(model, z0, 0.0, cfg);
    const Eigen::VectorXd z_T = paths.col(cfg.n_steps);
    const double sample_mean = z_T.mean();
    const double sample_se =
        std::sqrt((z_T.array() - sample_mean).square().sum() / (z_T.size() - 1.0)) /
        std::sqrt(static_cast<double>(z_T.size()));

    // dZ~ = [kappa(m - z) - 2 rho beta lambda0] ds + beta dW has OU mean
    // m' + (z0 - m') e^{-kappa T} with m' = m - 2 rho beta lambda0 / kappa
    const double m_shift = p.m - 2.0 * rho * p.beta * p.lambda0 / p.kappa;
    const double expected = m_shift + (z0 - m_shift) * std::exp(-p.kappa * 1.0);
    // antithetic pairing makes the naive SE conservative; allow Euler bias too
    CHECK(std::abs(sample_mean - expected) <= 3.0 * sample_se + 2e-3);
}

TEST_CASE("trajectories repeat bit for bit under a fixed seed") {
    const auto model = ou_model(0.5);
    McConfig cfg = small_cfg(606);
    cfg.n_paths = 32;
    cfg.n_steps = 24;
    const Eigen::MatrixXd a = simulate_Z_tilde(model, 0.4, 0.25, cfg);
    const Eigen::MatrixXd b = simulate_Z_tilde(model, 0.4, 0.25, cfg);
    CHECK((a.array() == b.array()).all());
}

TEST_CASE("estimators are positive") {
    const auto model = ou_model(0.5);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        McConfig cfg = small_cfg(seed);
        cfg.n_paths = 2000;
        CHECK(estimate_F1(model, -0.5, 0.25, cfg).mean > 0.0);
        CHECK(estimate_F2(model, -0.5, 0.25, cfg).mean >= 0.0);
    }
}

TEST_CASE("constant-lambda estimates carry no time-step bias") {
    const auto model = bs_model(0.0);
    const double closed = std::exp(-0.16);
    for (int n_steps : {4, 16, 128}) {
        McConfig cfg = small_cfg();
        cfg.n_paths = 512;
        cfg.n_steps = n_steps;
        CHECK(std::abs(estimate_F1(model, 0.0, 0.0, cfg).mean - closed) <= 1e-13);
    }
}

TEST_CASE("time-step bias decays at first order on the factor model") {
    const auto model = ou_model(0.5);
    const PdeSolution sol = solve_G(model, GridSpec{-6.0, 6.0, 401, 401});
    const double reference = eval_F(sol, 0.0, 0.0);

    McConfig cfg = small_cfg(31337);
    cfg.n_paths = 200000;

    cfg.n_steps = 4;
    const double err_coarse = std::abs(estimate_F1(model, 0.0, 0.0, cfg).mean - reference);
    cfg.n_steps = 8;
    const double err_mid = std::abs(estimate_F1(model, 0.0, 0.0, cfg).mean - reference);
    cfg.n_steps = 16;
    const double err_fine = std::abs(estimate_F1(model, 0.0, 0.0, cfg).mean - reference);

    // observed order >= 0.9 in log2 between successive halvings
    CHECK(err_coarse / err_mid >= std::pow(2.0, 0.9));
    CHECK(err_mid / err_fine >= std::pow(2.0, 0.9));
}

TEST_CASE("antithetic pairing reduces the per-unit standard error") {
    const auto model = ou_model(0.5);
    McConfig plain = small_cfg(2024);
    plain.antithetic = false;
    McConfig paired = small_cfg(2024);
    paired.antithetic = true;
    const McEstimate loose = estimate_F1(model, 0.0, 0.0, plain);
    const McEstimate tight = estimate_F1(model, 0.0, 0.0, paired);
    // negative within-pair correlation: pair SE well below the per-path SE
    CHECK(tight.unit_std_error < 0.5 * tight.std_error);
    CHECK(loose.unit_std_error == loose.std_error);
    CHECK(std::abs(tight.mean - loose.mean) <=
          4.0 * std::sqrt(loose.std_error * loose.std_error + tight.std_error * tight.std_error));
}
