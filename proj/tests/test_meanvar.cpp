#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mmv/meanvar.hpp"
#include "mmv/strategy.hpp"
#include "test_support.hpp"

using namespace mmv;
using namespace mmv::testing;

namespace {

McConfig mv_cfg(std::int64_t n_paths = 40000, int n_steps = 64, std::uint64_t seed = 11) {
    McConfig cfg;
    cfg.n_paths = n_paths;
    cfg.n_steps = n_steps;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("flat market has R identically one") {
    const auto model = flat_model(0.0);
    const PdeSolution sol = solve_G(model, coarse_grid());
    const RMoments moments = simulate_R(model, sol, 0.0, mv_cfg(512, 16));
    CHECK(moments.ER == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(moments.ER2 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(moments.VarR) <= 1e-13);
}

TEST_CASE("constant-coefficient R moments match the closed forms") {
    const auto model = bs_model(0.0);
    const PdeSolution sol = solve_G(model, reference_grid());
    const RMoments moments = simulate_R(model, sol, 0.0, mv_cfg(100000, 32, 8675309));
    const BsClosedForms cf = bs_closed_forms(model);
    CHECK(std::abs(moments.ER - cf.ER) <= 3.0 * moments.se_ER);
    CHECK(std::abs(moments.ER2 - cf.ER2) <= 3.0 * moments.se_ER2);
    CHECK(moments.VarR == doctest::Approx(moments.ER2 - moments.ER * moments.ER).epsilon(1e-14));
    CHECK(std::abs(moments.VarR - cf.VarR) <= 3.0 * (moments.se_ER2 + 2.0 * moments.se_ER));
}

TEST_CASE("R moments are reproducible for a fixed seed") {
    const auto model = ou_model(0.5);
    const PdeSolution sol = solve_G(model, coarse_grid());
    const RMoments a = simulate_R(model, sol, 0.0, mv_cfg(4000, 32));
    const RMoments b = simulate_R(model, sol, 0.0, mv_cfg(4000, 32));
    CHECK(a.ER == b.ER);
    CHECK(a.ER2 == b.ER2);
}

TEST_CASE("lagrange multiplier formula") {
    CHECK(lagrange_gamma(1.0, 1.0, 0.8) == 0.0);
    const double er = std::exp(-0.16);
    CHECK(lagrange_gamma(1.5, 1.0, er) ==
          doctest::Approx(0.5 * er / (1.0 - er)).epsilon(1e-14));
    CHECK(lagrange_gamma(1.5, 1.0, er) == doctest::Approx(2.881626).epsilon(1e-5));
    CHECK_THROWS_AS(lagrange_gamma(1.5, 1.0, 1.0), DegenerateER);
}

TEST_CASE("optimal target and multiplier closed forms") {
    const double er = std::exp(-0.16);
    const double var = er - std::exp(-0.32);
    const OptimalTarget target = optimal_A(1.0, 0.5, er, var);
    // (1 - ER)^2 / VarR = (1 - ER)/ER = e^{0.16} - 1
    CHECK(target.A_star == doctest::Approx(std::exp(0.16)).epsilon(1e-12));
    CHECK(target.A_star == doctest::Approx(1.173511).epsilon(1e-6));
    CHECK(target.gamma_star == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("consistency with the multiplier formula") {
        CHECK(lagrange_gamma(target.A_star, 1.0, er) ==
              doctest::Approx(target.gamma_star).epsilon(1e-12));
    }
    SUBCASE("infinite risk aversion pins the target to current wealth") {
        const OptimalTarget rigid = optimal_A(1.0, 1e12, er, var);
        CHECK(rigid.A_star == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(rigid.gamma_star) <= 1e-9);
    }
    SUBCASE("degenerate variance is rejected") {
        CHECK_THROWS_AS(optimal_A(1.0, 0.5, 1.0, 0.0), DegenerateVariance);
    }
}

TEST_CASE("mean-variance strategy reproduces the monotone one with matched theta") {
    const auto model = bs_model(0.0);
    const PdeSolution sol = solve_G(model, reference_grid());
    const Anchor anchor{1.0, 0.5, 0.0, 0.0};
    const ControlFields fields{sol, model, anchor};
    const BsClosedForms cf = bs_closed_forms(model);
    const double theta = theta_equivalence(cf.G0, anchor.y0, cf.ER, cf.VarR);

    // at x = x0: (1/(2 theta)) e^{lambda^2 T} (lambda/sigma) = 2 y0 e^{0.16} * 2
    const double at_anchor = mv_strategy(sol, model, anchor.x0, 0.0, 0.0, anchor.x0,
                                         theta, cf.ER, cf.VarR);
    CHECK(at_anchor == doctest::Approx(2.0 * std::exp(0.16)).epsilon(1e-6));

    // closed-form intercept vs the solved G(z0, t0): gap is the PDE error
    for (double x : {0.0, 1.0, 3.5}) {
        for (double t : {0.0, 0.4, 0.9}) {
            const double mv = mv_strategy(sol, model, x, 0.0, t, anchor.x0, theta, cf.ER, cf.VarR);
            const double monotone = reduced_pi(fields, x, 0.0, t);
            CHECK(mv == doctest::Approx(monotone).epsilon(1e-6));
        }
    }

    SUBCASE("the strategy vanishes at its intercept level") {
        const double intercept = anchor.x0 + (0.5 / theta) * (1.0 - cf.ER) / cf.VarR;
        CHECK(mv_strategy(sol, model, intercept, 0.4, 0.3, anchor.x0, theta, cf.ER, cf.VarR) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("flat market mean-variance construction is degenerate") {
    CHECK_THROWS_AS(mv_strategy(solve_G(flat_model(0.0), coarse_grid()), flat_model(0.0),
                                1.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.0),
                    DegenerateVariance);
}

TEST_CASE("theta equivalence gives 1/(4 y0) in the constant-coefficient market") {
    const auto model = bs_model(0.0);
    const BsClosedForms cf = bs_closed_forms(model);
    CHECK(std::abs(theta_equivalence(cf.G0, 0.5, cf.ER, cf.VarR) - 0.5) <= 1e-12);
    CHECK(std::abs(theta_equivalence(cf.G0, 0.25, cf.ER, cf.VarR) - 1.0) <= 1e-12);
    CHECK_THROWS_AS(theta_equivalence(cf.G0, 0.5, 1.0, cf.VarR), DegenerateER);
    CHECK_THROWS_AS(theta_equivalence(cf.G0, 0.5, cf.ER, 0.0), DegenerateVariance);
}

TEST_CASE("matched theta reproduces the monotone strategy on the factor model") {
    const auto model = ou_model(0.5);
    const PdeSolution sol = solve_G(model, GridSpec{-6.0, 6.0, 201, 201});
    const Anchor anchor{1.0, 0.5, 0.0, 0.0};
    const ControlFields fields{sol, model, anchor};
    const RMoments moments = simulate_R(model, sol, anchor.z0, mv_cfg(20000, 64, 5555));
    const double theta =
        theta_equivalence(sol, anchor.z0, anchor.t0, anchor.y0, moments.ER, moments.VarR);

    for (double x : {0.2, 1.0, 2.5}) {
        for (double z : {-1.0, 0.0, 1.25}) {
            for (double t : {0.0, 0.5, 0.95}) {
                const double mv = mv_strategy(sol, model, x, z, t, anchor.x0, theta,
                                              moments.ER, moments.VarR);
                const double monotone = reduced_pi(fields, x, z, t);
                if (monotone != 0.0) {
                    CHECK(rel_diff(mv, monotone) <= 1e-6);
                }
            }
        }
    }
}

TEST_CASE("loading ratio between the strategies is constant across the grid") {
    const auto model = ou_model(0.5);
    const PdeSolution sol = solve_G(model, GridSpec{-6.0, 6.0, 201, 201});
    const Anchor anchor{1.0, 0.5, 0.0, 0.0};
    const ControlFields fields{sol, model, anchor};
    const double er = 0.9, var = 0.05, theta = 0.7, x = 2.0;

    double first_ratio = 0.0;
    bool have_first = false;
    for (double z : {-1.5, -0.3, 0.6, 1.8}) {
        for (double t : {0.1, 0.45, 0.8}) {
            const double mv = mv_strategy(sol, model, x, z, t, anchor.x0, theta, er, var);
            const double monotone = reduced_pi(fields, x, z, t);
            const double ratio = mv / monotone;
            if (!have_first) {
                first_ratio = ratio;
                have_first = true;
            } else {
                CHECK(ratio == doctest::Approx(first_ratio).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("H solve and duality") {
    SUBCASE("flat market has H identically one") {
        const auto model = flat_model(0.0);
        const GridSpec grid = coarse_grid();
        const PdeSolution sol = solve_G(model, grid);
        const DualityReport report = solve_H_and_check_duality(model, grid, sol);
        CHECK((report.H.array() - 1.0).abs().maxCoeff() <= 1e-13);
        CHECK(report.max_abs_GH_plus_1 <= 1e-12);
    }
    SUBCASE("constant-coefficient H matches exp(-lambda^2 (T - t))") {
        const auto model = bs_model(0.0);
        const GridSpec grid = reference_grid();
        const PdeSolution sol = solve_G(model, grid);
        const DualityReport report = solve_H_and_check_duality(model, grid, sol);
        CHECK(report.H(200, 0) == doctest::Approx(std::exp(-0.16)).epsilon(1e-6));
        CHECK(report.max_abs_GH_plus_1 <= 1e-4);
    }
    SUBCASE("duality tightens under refinement") {
        const auto model = ou_model(0.5);
        const GridSpec coarse{-6.0, 6.0, 101, 101};
        const GridSpec fine{-6.0, 6.0, 201, 201};
        const double gap_coarse =
            solve_H_and_check_duality(model, coarse, solve_G(model, coarse)).max_abs_GH_plus_1;
        const double gap_fine =
            solve_H_and_check_duality(model, fine, solve_G(model, fine)).max_abs_GH_plus_1;
        CHECK(gap_fine <= 1e-3);
        CHECK(gap_fine < gap_coarse);
    }
    SUBCASE("mismatched grids are rejected") {
        const auto model = ou_model(0.5);
        const PdeSolution sol = solve_G(model, coarse_grid());
        CHECK_THROWS_AS(solve_H_and_check_duality(model, GridSpec{-5.0, 5.0, 101, 101}, sol),
                        std::invalid_argument);
    }
}

TEST_CASE("aggregate solution fields are mutually consistent") {
    const auto model = bs_model(0.0);
    const BsClosedForms cf = bs_closed_forms(model);
    const MeanVarianceSolution mv =
        build_mean_variance_solution(1.0, 0.5, cf.G0, cf.ER, cf.ER2, cf.VarR);
    CHECK(mv.theta == doctest::Approx(0.5).epsilon(1e-12));
    const double one_minus = 1.0 - cf.ER;
    CHECK(mv.phi_second_moment == doctest::Approx(cf.VarR / (one_minus * one_minus)).epsilon(1e-14));
    // A* = x + 1/(2 theta E phi^2)
    CHECK(mv.A_star ==
          doctest::Approx(1.0 + 0.5 / (mv.theta * mv.phi_second_moment)).epsilon(1e-12));
    // intercept equals the monotone level x0 + 2 y0 |G0|
    CHECK(mv.strategy_intercept ==
          doctest::Approx(1.0 + 2.0 * 0.5 * std::abs(cf.G0)).epsilon(1e-12));
}
