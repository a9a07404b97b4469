#include "mmv/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmv {

namespace {

// Per-state generator coefficients:
//   L = c0 + c_pi pi + c_pi_eta1 pi eta1 + c_quad (eta1^2 + eta2^2)
//       + c_eta1 eta1 + c_eta2 eta2.
struct GeneratorQuadratic {
    double c0, c_pi, c_pi_eta1, c_quad, c_eta1, c_eta2;

    double operator()(double pi, double eta1, double eta2) const {
        return c0 + c_pi * pi + c_pi_eta1 * pi * eta1 +
               c_quad * (eta1 * eta1 + eta2 * eta2) + c_eta1 * eta1 + c_eta2 * eta2;
    }
};

GeneratorQuadratic make_quadratic(const FactorMarketModel& model, double z, double y,
                                  double g, double g_z, double g_zz, double g_t) {
    const double lam = market_price_of_risk(model, z);
    const double sigma = model.sigma(z);
    const double b = model.factor_vol(z);
    const double a = model.factor_drift(z);
    GeneratorQuadratic q{};
    q.c0 = y * g_t + a * y * g_z + 0.5 * b * b * y * g_zz;
    q.c_pi = -lam * sigma;  // -(mu - r)
    q.c_pi_eta1 = -sigma;
    q.c_quad = y * g;
    q.c_eta1 = 2.0 * b * model.rho() * y * g_z;
    q.c_eta2 = 2.0 * b * model.rho_bar() * y * g_z;
    return q;
}

struct Scan1d {
    double arg = 0.0;
    double value = 0.0;
};

template <class F>
Scan1d scan_max_1d(F&& f, double lo, double hi, int n) {
    Scan1d best{lo, f(lo)};
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (int i = 1; i < n; ++i) {
        const double x = lo + h * i;
        const double v = f(x);
        if (v > best.value) best = {x, v};
    }
    return best;
}

// Iteratively re-scans a shrinking window around the incumbent argmax. Each
// stage narrows the window to +-1 grid cell, so the final argument resolution
// is (hi-lo) * (2/(n-1))^stages.
template <class F>
Scan1d zoom_max_1d(F&& f, double lo, double hi, int n, int stages) {
    Scan1d best = scan_max_1d(f, lo, hi, n);
    double w_lo = lo, w_hi = hi;
    for (int s = 1; s < stages; ++s) {
        const double h = (w_hi - w_lo) / static_cast<double>(n - 1);
        w_lo = std::max(lo, best.arg - h);
        w_hi = std::min(hi, best.arg + h);
        const Scan1d refined = scan_max_1d(f, w_lo, w_hi, n);
        if (refined.value > best.value) best = refined;
    }
    return best;
}

struct Scan2d {
    double arg1 = 0.0;
    double arg2 = 0.0;
    double value = 0.0;
};

template <class F>
Scan2d scan_max_2d(F&& f, double lo1, double hi1, double lo2, double hi2, int n) {
    Scan2d best{lo1, lo2, f(lo1, lo2)};
    const double h1 = (hi1 - lo1) / static_cast<double>(n - 1);
    const double h2 = (hi2 - lo2) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) {
        const double x1 = lo1 + h1 * i;
        for (int j = 0; j < n; ++j) {
            const double x2 = lo2 + h2 * j;
            const double v = f(x1, x2);
            if (v > best.value) best = {x1, x2, v};
        }
    }
    return best;
}

template <class F>
Scan2d zoom_max_2d(F&& f, double lo1, double hi1, double lo2, double hi2, int n, int stages) {
    Scan2d best = scan_max_2d(f, lo1, hi1, lo2, hi2, n);
    double a_lo = lo1, a_hi = hi1, b_lo = lo2, b_hi = hi2;
    for (int s = 1; s < stages; ++s) {
        const double h1 = (a_hi - a_lo) / static_cast<double>(n - 1);
        const double h2 = (b_hi - b_lo) / static_cast<double>(n - 1);
        a_lo = std::max(lo1, best.arg1 - h1);
        a_hi = std::min(hi1, best.arg1 + h1);
        b_lo = std::max(lo2, best.arg2 - h2);
        b_hi = std::min(hi2, best.arg2 + h2);
        const Scan2d refined = scan_max_2d(f, a_lo, a_hi, b_lo, b_hi, n);
        if (refined.value > best.value) best = refined;
    }
    return best;
}

constexpr int kZoomStagesEta = 5;
constexpr int kZoomStagesPi = 4;
constexpr int kZoomStagesMaxMin = 6;

double pi_halfwidth(const ControlBox& box, const FactorMarketModel& model, double y, double g) {
    const double lam_max = model.bounds().lambda_max;
    const double sigma_min = model.bounds().sigma_min;
    double w = box.pi_mult * y * std::abs(g) * (sigma_min > 0.0 ? lam_max / sigma_min : lam_max);
    return std::max(w, 1.0);
}

double default_eps(const PdeSolution& sol, const FactorMarketModel& model, double eps_residual) {
    if (eps_residual > 0.0) return eps_residual;
    const ResidualReport r = residual_resulting_equation(sol, model);
    return std::max(1.0e-3, 10.0 * r.max_norm);
}

void check_scan_inputs(const StateGrid& states, const ControlBox& box, int n_scan) {
    if (n_scan < 10) throw std::invalid_argument("verify: n_scan must be >= 10 per axis");
    if (!(box.eta_lo < box.eta_hi)) throw std::invalid_argument("verify: control box is empty");
    if (states.z_indices.empty() || states.t_indices.empty() || states.y_values.empty())
        throw std::invalid_argument("verify: state grid is empty");
    for (double y : states.y_values)
        if (!(y > 0.0)) throw std::invalid_argument("verify: state y values must be positive");
}

}  // namespace

GeneratorSurface::GeneratorSurface(const PdeSolution& sol) : sol_(&sol) {
    const int n_z = sol.grid.n_z;
    const int n_t = sol.grid.n_t;
    const double dt = sol.dt();
    const double dz = sol.grid.dz();

    G_t_.resize(n_z, n_t);
    for (int j = 0; j + 1 < n_t; ++j) {
        G_t_.col(j) = (sol.G.col(j + 1) - sol.G.col(j)) / dt;
    }
    G_t_.col(n_t - 1) = G_t_.col(n_t - 2);

    G_zz_.resize(n_z, n_t);
    for (int j = 0; j < n_t; ++j) {
        G_zz_(0, j) = (-3.0 * sol.G_z(0, j) + 4.0 * sol.G_z(1, j) - sol.G_z(2, j)) / (2.0 * dz);
        for (int i = 1; i + 1 < n_z; ++i) {
            G_zz_(i, j) = (sol.G_z(i + 1, j) - sol.G_z(i - 1, j)) / (2.0 * dz);
        }
        G_zz_(n_z - 1, j) =
            (3.0 * sol.G_z(n_z - 1, j) - 4.0 * sol.G_z(n_z - 2, j) + sol.G_z(n_z - 3, j)) / (2.0 * dz);
    }
}

double GeneratorSurface::apply(const FactorMarketModel& model, const GeneratorState& state,
                               const GeneratorControl& control) const {
    if (!(state.y > 0.0)) throw std::invalid_argument("generator: state y must be positive");
    if (!(state.t >= 0.0 && state.t < sol_->horizon))
        throw OutOfDomain("generator: state t must lie in [0, T)");

    const GEval g = eval_G(*sol_, state.z, state.t);

    // bilinear interpolation of the derivative fields, same cell as eval_G
    const double dz = sol_->grid.dz();
    const double dt = sol_->dt();
    const double sz = (state.z - sol_->grid.z_lo) / dz;
    const double st = state.t / dt;
    const int i0 = std::min(std::max(static_cast<int>(std::floor(sz)), 0), sol_->grid.n_z - 2);
    const int j0 = std::min(std::max(static_cast<int>(std::floor(st)), 0), sol_->grid.n_t - 2);
    const double wz = sz - i0;
    const double wt = st - j0;
    auto bilinear = [&](const Eigen::MatrixXd& M) {
        return (1.0 - wz) * ((1.0 - wt) * M(i0, j0) + wt * M(i0, j0 + 1)) +
               wz * ((1.0 - wt) * M(i0 + 1, j0) + wt * M(i0 + 1, j0 + 1));
    };
    const double g_zz = bilinear(G_zz_);
    const double g_t = bilinear(G_t_);

    const GeneratorQuadratic q =
        make_quadratic(model, state.z, state.y, g.g, g.g_z, g_zz, g_t);
    return q(control.pi, control.eta1, control.eta2);
}

double generator_apply(const PdeSolution& sol, const FactorMarketModel& model,
                       const GeneratorState& state, const GeneratorControl& control) {
    return GeneratorSurface(sol).apply(model, state, control);
}

StateGrid default_state_grid(const PdeSolution& sol, double y0,
                             int n_z_states, int n_t_states, int margin_cells) {
    StateGrid grid;
    const int z_first = margin_cells;
    const int z_last = sol.grid.n_z - 1 - margin_cells;
    const int n_z = std::max(1, std::min(n_z_states, z_last - z_first + 1));
    for (int k = 0; k < n_z; ++k) {
        grid.z_indices.push_back(z_first + static_cast<int>(std::llround(
            static_cast<double>(k) * (z_last - z_first) / std::max(1, n_z - 1))));
    }
    const int t_last = sol.grid.n_t - 2;  // t strictly below T
    const int n_t = std::max(1, std::min(n_t_states, t_last + 1));
    for (int k = 0; k < n_t; ++k) {
        grid.t_indices.push_back(static_cast<int>(std::llround(
            static_cast<double>(k) * t_last / std::max(1, n_t - 1))));
    }
    grid.y_values = {0.5 * y0, y0, 2.0 * y0};
    grid.x = 0.0;
    return grid;
}

VerificationReport verify_saddle_conditions(const PdeSolution& sol, const FactorMarketModel& model,
                                            const StateGrid& states, const ControlBox& box,
                                            int n_scan, double eps_residual) {
    check_scan_inputs(states, box, n_scan);
    const GeneratorSurface surface(sol);
    const Eigen::VectorXd z = sol.grid.z_nodes();
    const Eigen::VectorXd t = sol.t_levels();

    VerificationReport report;
    report.eps_residual = default_eps(sol, model, eps_residual);
    report.terminal_exact = (sol.G.col(sol.grid.n_t - 1).array() == -1.0).all();
    report.worst_min_over_pi = std::numeric_limits<double>::infinity();

    for (int iz : states.z_indices) {
        for (int jt : states.t_indices) {
            const double g = sol.G(iz, jt);
            const double g_z = sol.G_z(iz, jt);
            const double g_zz = surface.G_zz()(iz, jt);
            const double g_t = surface.G_t()(iz, jt);
            const double lam = market_price_of_risk(model, z[iz]);
            const double sigma = model.sigma(z[iz]);
            const double b = model.factor_vol(z[iz]);
            const double ratio = g_z / g;

            for (double y : states.y_values) {
                const GeneratorQuadratic L = make_quadratic(model, z[iz], y, g, g_z, g_zz, g_t);
                const double zeta_node = -(lam / sigma - (model.rho() * b / sigma) * ratio);
                const double pi_star = 2.0 * y * g * zeta_node;
                const double eta1_star = -lam;
                const double eta2_star = -model.rho_bar() * b * ratio;

                SaddleNodeReport node;
                node.z = z[iz];
                node.t = t[jt];
                node.y = y;

                node.max_over_eta = zoom_max_2d(
                    [&](double e1, double e2) { return L(pi_star, e1, e2); },
                    box.eta_lo, box.eta_hi, box.eta_lo, box.eta_hi,
                    n_scan, kZoomStagesEta).value;

                const double w = pi_halfwidth(box, model, y, g);
                node.min_over_pi = -scan_max_1d(
                    [&](double pi) { return -L(pi, eta1_star, eta2_star); },
                    -w, w, n_scan).value;

                node.saddle_residual = std::abs(L(pi_star, eta1_star, eta2_star));

                if (node.max_over_eta > report.worst_max_over_eta ||
                    node.saddle_residual > report.worst_saddle_residual) {
                    report.worst_node = node;
                }
                report.worst_max_over_eta = std::max(report.worst_max_over_eta, node.max_over_eta);
                report.worst_min_over_pi = std::min(report.worst_min_over_pi, node.min_over_pi);
                report.worst_saddle_residual =
                    std::max(report.worst_saddle_residual, node.saddle_residual);
                report.nodes.push_back(node);
            }
        }
    }

    report.passed = report.terminal_exact &&
                    report.worst_max_over_eta <= report.eps_residual &&
                    report.worst_min_over_pi >= -report.eps_residual &&
                    report.worst_saddle_residual <= report.eps_residual;
    return report;
}

MinimaxReport verify_lower_equals_upper(const PdeSolution& sol, const FactorMarketModel& model,
                                        const StateGrid& states, const ControlBox& box,
                                        int n_scan, double eps_residual) {
    check_scan_inputs(states, box, n_scan);
    const GeneratorSurface surface(sol);
    const Eigen::VectorXd z = sol.grid.z_nodes();
    const Eigen::VectorXd t = sol.t_levels();

    MinimaxReport report;
    report.eps_residual = default_eps(sol, model, eps_residual);

    for (int iz : states.z_indices) {
        for (int jt : states.t_indices) {
            const double g = sol.G(iz, jt);
            const double g_z = sol.G_z(iz, jt);
            const double g_zz = surface.G_zz()(iz, jt);
            const double g_t = surface.G_t()(iz, jt);

            for (double y : states.y_values) {
                const GeneratorQuadratic L = make_quadratic(model, z[iz], y, g, g_z, g_zz, g_t);
                const double w = pi_halfwidth(box, model, y, g);

                auto max_over_eta = [&](double pi) {
                    return zoom_max_2d(
                        [&](double e1, double e2) { return L(pi, e1, e2); },
                        box.eta_lo, box.eta_hi, box.eta_lo, box.eta_hi,
                        n_scan, kZoomStagesEta).value;
                };
                // min over pi of a pi-affine slice is attained on the scan grid
                auto min_over_pi = [&](double e1, double e2) {
                    return -scan_max_1d([&](double pi) { return -L(pi, e1, e2); },
                                        -w, w, n_scan).value;
                };

                MinimaxNodeReport node;
                node.z = z[iz];
                node.t = t[jt];
                node.y = y;
                node.minmax = -zoom_max_1d([&](double pi) { return -max_over_eta(pi); },
                                           -w, w, n_scan, kZoomStagesPi).value;
                node.maxmin = zoom_max_2d(min_over_pi, box.eta_lo, box.eta_hi,
                                          box.eta_lo, box.eta_hi,
                                          n_scan, kZoomStagesMaxMin).value;

                report.worst_abs_minmax = std::max(report.worst_abs_minmax, std::abs(node.minmax));
                report.worst_abs_maxmin = std::max(report.worst_abs_maxmin, std::abs(node.maxmin));
                report.worst_gap = std::max(report.worst_gap, std::abs(node.minmax - node.maxmin));
                report.nodes.push_back(node);
            }
        }
    }

    report.passed = report.worst_abs_minmax <= report.eps_residual &&
                    report.worst_abs_maxmin <= report.eps_residual &&
                    report.worst_gap <= 2.0 * report.eps_residual;
    return report;
}

}  // namespace mmv
