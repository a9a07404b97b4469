#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mmv/oracle.hpp"
#include "mmv/pde.hpp"
#include "test_support.hpp"

using namespace mmv;
using namespace mmv::testing;

TEST_CASE("zero market price of risk keeps F1 at its terminal value") {
    const auto model = flat_model(0.3);
    const Eigen::MatrixXd F = solve_case1(model, coarse_grid());
    CHECK((F.array() - 1.0).abs().maxCoeff() <= 1e-13);
}

TEST_CASE("zero market price of risk keeps F2 at zero") {
    const auto model = flat_model(1.0 / std::sqrt(2.0));
    const Eigen::MatrixXd F = solve_case2(model, coarse_grid());
    CHECK(F.array().abs().maxCoeff() <= 1e-13);
}

TEST_CASE("constant-coefficient F1 matches exp((2 rho^2 - 1) lambda^2 T)") {
    // lambda = 0.4, rho = 0 => F1(z, 0) = e^{-0.16}
    const auto model = bs_model(0.0);
    const Eigen::MatrixXd F = solve_case1(model, reference_grid());
    const double expected = std::exp(-0.16);
    for (int i = 0; i < F.rows(); i += 40) {
        CHECK(F(i, 0) == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("constant-coefficient F2 equals lambda^2 (T - t)") {
    const auto model = bs_model(1.0 / std::sqrt(2.0));
    const GridSpec grid = coarse_grid();
    const Eigen::MatrixXd F = solve_case2(model, grid);
    const double dt = model.horizon() / (grid.n_t - 1);
    for (int j = 0; j < grid.n_t; j += 20) {
        const double expected = 0.16 * (model.horizon() - j * dt);
        CHECK(F(50, j) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("assemble_G reproduces the closed-form surface in both cases") {
    const double expected = -std::exp(0.16);
    {
        const auto model = bs_model(0.0);
        const PdeSolution sol = solve_G(model, reference_grid());
        CHECK(sol.case_tag == CaseTag::CaseI);
        CHECK(sol.alpha == doctest::Approx(-1.0));
        CHECK(eval_G(sol, 0.0, 0.0).g == doctest::Approx(expected).epsilon(1e-6));
    }
    {
        const auto model = bs_model(1.0 / std::sqrt(2.0));
        const PdeSolution sol = solve_G(model, reference_grid());
        CHECK(sol.case_tag == CaseTag::CaseII);
        CHECK(eval_G(sol, 0.0, 0.0).g == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("terminal level is exactly -1 with zero derivative") {
    const auto model = ou_model(0.5);
    const PdeSolution sol = solve_G(model, coarse_grid());
    const int last = sol.grid.n_t - 1;
    CHECK((sol.G.col(last).array() == -1.0).all());
    CHECK(sol.G_z.col(last).array().abs().maxCoeff() == 0.0);
    const GEval terminal = eval_G(sol, 1.3, model.horizon());
    CHECK(terminal.g == -1.0);
    CHECK(terminal.g_z == 0.0);
}

TEST_CASE("flat market gives G identically -1") {
    const auto model = flat_model(0.2);
    const PdeSolution sol = solve_G(model, coarse_grid());
    CHECK((sol.G.array() + 1.0).abs().maxCoeff() <= 1e-13);
    CHECK(sol.G_z.array().abs().maxCoeff() <= 1e-12);
    const ResidualReport residual = residual_resulting_equation(sol, model);
    CHECK(residual.max_norm <= 1e-12);
}

TEST_CASE("G stays negative within the lambda_max envelope") {
    for (double rho : {0.0, 0.5, -0.8, 1.0 / std::sqrt(2.0)}) {
        const auto model = ou_model(rho);
        const PdeSolution sol = solve_G(model, coarse_grid());
        const double lt = model.bounds().lambda_max * model.bounds().lambda_max * model.horizon();
        CHECK(sol.G.maxCoeff() < 0.0);
        CHECK(sol.G.array().abs().minCoeff() >= std::exp(-lt) - 1e-9);
        CHECK(sol.G.array().abs().maxCoeff() <= std::exp(lt) + 1e-9);
    }
}

TEST_CASE("residual of the nonlinear equation shrinks at second order") {
    const auto model = ou_model(0.5);
    const GridSpec g1{-6.0, 6.0, 101, 101};
    const GridSpec g2{-6.0, 6.0, 201, 201};
    const double r1 = residual_resulting_equation(solve_G(model, g1), model).max_norm;
    const double r2 = residual_resulting_equation(solve_G(model, g2), model).max_norm;
    CHECK(r2 > 0.0);
    CHECK(r1 / r2 >= 3.0);
}

TEST_CASE("constant-coefficient residual also refines at second order") {
    const auto model = bs_model(0.0);
    const GridSpec g1{-6.0, 6.0, 51, 51};
    const GridSpec g2{-6.0, 6.0, 101, 101};
    const double r1 = residual_resulting_equation(solve_G(model, g1), model).max_norm;
    const double r2 = residual_resulting_equation(solve_G(model, g2), model).max_norm;
    CHECK(r1 / r2 >= 3.0);
}

TEST_CASE("case transforms agree near rho^2 = 1/2") {
    const auto model_mid = ou_model(1.0 / std::sqrt(2.0));
    const GridSpec grid{-6.0, 6.0, 201, 201};
    const PdeSolution sol_mid = solve_G(model_mid, grid);
    REQUIRE(sol_mid.case_tag == CaseTag::CaseII);
    for (double offset : {1e-4, -1e-4}) {
        const auto model_near = ou_model(std::sqrt(0.5 + offset));
        const PdeSolution sol_near = solve_G(model_near, grid);
        REQUIRE(sol_near.case_tag == CaseTag::CaseI);
        for (double z : {-1.0, 0.0, 1.5}) {
            const double g_mid = eval_G(sol_mid, z, 0.0).g;
            const double g_near = eval_G(sol_near, z, 0.0).g;
            CHECK(rel_diff(g_near, g_mid) <= 1e-3);
        }
    }
}

TEST_CASE("max |G_z| does not grow under grid refinement") {
    const auto model = ou_model(0.5);
    const double coarse = solve_G(model, GridSpec{-6.0, 6.0, 101, 101}).G_z.array().abs().maxCoeff();
    const double fine = solve_G(model, GridSpec{-6.0, 6.0, 201, 201}).G_z.array().abs().maxCoeff();
    CHECK(fine <= coarse * 1.05 + 1e-12);
}

TEST_CASE("pde F matches the Feynman-Kac oracle at a probe point") {
    const auto model = ou_model(0.5);
    const PdeSolution sol = solve_G(model, GridSpec{-6.0, 6.0, 201, 201});
    McConfig cfg;
    cfg.n_paths = 40000;
    cfg.n_steps = 128;
    cfg.seed = 777;
    const McEstimate mc = estimate_F1(model, 0.0, 0.0, cfg);
    const double f_pde = eval_F(sol, 0.0, 0.0);
    CHECK(std::abs(f_pde - mc.mean) <= 3.0 * mc.std_error + 2e-4);
}

TEST_CASE("eval_G returns stored values at nodes and means at midpoints") {
    const auto model = ou_model(0.5);
    const GridSpec grid{-2.0, 2.0, 41, 21};
    const PdeSolution sol = solve_G(model, grid);
    const double dz = grid.dz();
    const double dt = sol.dt();

    const GEval node = eval_G(sol, grid.z_lo + 7 * dz, 3 * dt);
    CHECK(node.g == sol.G(7, 3));
    CHECK(node.g_z == sol.G_z(7, 3));

    const GEval mid_z = eval_G(sol, grid.z_lo + 7.5 * dz, 3 * dt);
    CHECK(mid_z.g == doctest::Approx(0.5 * (sol.G(7, 3) + sol.G(8, 3))).epsilon(1e-14));

    const GEval mid_t = eval_G(sol, grid.z_lo + 7 * dz, 3.5 * dt);
    CHECK(mid_t.g == doctest::Approx(0.5 * (sol.G(7, 3) + sol.G(7, 4))).epsilon(1e-14));
}

TEST_CASE("eval_G rejects points outside the grid") {
    const auto model = ou_model(0.5);
    const PdeSolution sol = solve_G(model, GridSpec{-2.0, 2.0, 41, 21});
    CHECK_THROWS_AS(eval_G(sol, -2.5, 0.5), OutOfDomain);
    CHECK_THROWS_AS(eval_G(sol, 0.0, 1.5), OutOfDomain);
    CHECK_THROWS_AS(eval_G(sol, 0.0, -0.2), OutOfDomain);
    bool clamped = false;
    const GEval edge = eval_G_clamped(sol, -2.5, 0.5, &clamped);
    CHECK(clamped);
    CHECK(edge.g == doctest::Approx(eval_G(sol, -2.0, 0.5).g));
}

TEST_CASE("assemble_G refuses non-positive F in the power transform") {
    const auto model = bs_model(0.0);
    const GridSpec grid{-1.0, 1.0, 5, 4};
    Eigen::MatrixXd F = Eigen::MatrixXd::Ones(5, 4);
    F(2, 1) = -0.25;
    CHECK_THROWS_AS(assemble_G(F, CaseTag::CaseI, model, grid), NonPositiveF);
}

TEST_CASE("a violently under-resolved grid is rejected") {
    OuTanhParams p;
    p.kappa = 1.0;
    p.m = 0.0;
    p.beta = 0.5;
    p.sigma0 = 0.2;
    p.lambda0 = 0.3;
    p.lambda1 = 2.0;  // steep lambda(z), unresolvable at dz = 2
    const auto model = FactorMarketModel::ou_tanh(p, 0.02, 0.5, 1.0);
    CHECK_THROWS_AS(solve_case1(model, GridSpec{-6.0, 6.0, 7, 5}), GridTooCoarse);
}

TEST_CASE("suggested domain tracks the stationary spread of the factor") {
    const GridSpec ou = suggest_grid(ou_model(0.5));
    // beta / sqrt(2 kappa) = 0.3536: mean +- 6 sd
    CHECK(ou.z_lo == doctest::Approx(-6.0 * 0.5 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(ou.z_hi == -ou.z_lo);
    const GridSpec bs = suggest_grid(bs_model(0.0), 1.0);
    CHECK(bs.z_lo == doctest::Approx(1.0 - 6.0 * 0.3).epsilon(1e-12));
    CHECK(bs.z_hi == doctest::Approx(1.0 + 6.0 * 0.3).epsilon(1e-12));
}

TEST_CASE("case dispatch honors the switch tolerance") {
    const auto model = bs_model(0.0);
    CHECK_THROWS_AS(solve_case2(model, coarse_grid()), std::invalid_argument);
    const auto model_mid = bs_model(1.0 / std::sqrt(2.0));
    CHECK_THROWS_AS(solve_case1(model_mid, coarse_grid()), std::invalid_argument);
}
