#include "mmv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "mmv/csv.hpp"
#include "mmv/game.hpp"
#include "mmv/meanvar.hpp"
#include "mmv/sim.hpp"
#include "mmv/stats.hpp"
#include "mmv/strategy.hpp"

namespace mmv::cli {

namespace {

namespace fs = std::filesystem;

std::string out_path(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output_dir);
    return (fs::path(cfg.output_dir) / name).string();
}

void log_audit(const RunConfig& cfg, std::ostream& log) {
    const AuditReport audit =
        audit_assumptions(cfg.model, cfg.audit_z_lo, cfg.audit_z_hi, cfg.audit_samples);
    log << "audit: min sigma = " << audit.min_sigma << ", min b^2 = " << audit.min_b_squared
        << ", max |lambda| = " << audit.max_abs_lambda << "\n";
    for (const auto& v : audit.violations) log << "audit warning: " << v << "\n";
}

SolveOptions solve_options(const RunConfig& cfg) {
    SolveOptions options;
    options.residual_tol = cfg.tolerances.grid_residual_tol;
    return options;
}

std::vector<ProbePoint> effective_probes(const RunConfig& cfg) {
    if (!cfg.probes.empty()) return cfg.probes;
    const double T = cfg.model.horizon();
    return {{-1.0, 0.0}, {-0.5, 0.25 * T}, {0.0, 0.0}, {0.5, 0.25 * T}, {1.0, 0.5 * T}};
}

struct KeyValueCsv {
    CsvWriter writer;
    explicit KeyValueCsv(const std::string& path) : writer(path, {"key", "value"}) {}
    void put(const std::string& key, double value) {
        writer.row({key, CsvWriter::format(value)});
    }
    void put(const std::string& key, const std::string& value) { writer.row({key, value}); }
};

}  // namespace

int run_solve(const RunConfig& cfg, std::ostream& log) {
    log_audit(cfg, log);
    const PdeSolution sol = solve_G(cfg.model, cfg.grid, solve_options(cfg));
    const ResidualReport residual = residual_resulting_equation(sol, cfg.model);

    {
        CsvWriter csv(out_path(cfg, "solution.csv"), {"t", "z", "G", "G_z", "F", "residual"});
        const Eigen::VectorXd z = cfg.grid.z_nodes();
        const Eigen::VectorXd t = sol.t_levels();
        for (int j = 0; j < cfg.grid.n_t; ++j) {
            for (int i = 0; i < cfg.grid.n_z; ++i) {
                csv.row_values({t[j], z[i], sol.G(i, j), sol.G_z(i, j), sol.F(i, j),
                                residual.field(i, j)});
            }
        }
    }
    {
        KeyValueCsv summary(out_path(cfg, "solve_summary.csv"));
        summary.put("case", sol.case_tag == CaseTag::CaseI ? "I" : "II");
        summary.put("alpha", sol.alpha);
        summary.put("residual_max_norm", residual.max_norm);
        summary.put("G_min", sol.G.minCoeff());
        summary.put("G_max", sol.G.maxCoeff());
        summary.put("G_at_anchor", eval_G(sol, cfg.anchor.z0, cfg.anchor.t0).g);
    }

    log << "solve: case " << (sol.case_tag == CaseTag::CaseI ? "I" : "II")
        << ", residual max-norm " << residual.max_norm << "\n";
    log << "solve: G(z0, t0) = " << eval_G(sol, cfg.anchor.z0, cfg.anchor.t0).g << "\n";
    return kExitOk;
}

int run_oracle(const RunConfig& cfg, std::ostream& log) {
    log_audit(cfg, log);
    const PdeSolution sol = solve_G(cfg.model, cfg.grid, solve_options(cfg));
    const bool case2 = sol.case_tag == CaseTag::CaseII;

    CsvWriter csv(out_path(cfg, "oracle.csv"),
                  {"z", "t", "F_pde", "mc_mean", "mc_se", "abs_diff", "within_3se"});
    bool all_ok = true;
    for (const ProbePoint& probe : effective_probes(cfg)) {
        const double f_pde = eval_F(sol, probe.z, probe.t);
        const McEstimate mc = case2 ? estimate_F2(cfg.model, probe.z, probe.t, cfg.mc)
                                    : estimate_F1(cfg.model, probe.z, probe.t, cfg.mc);
        const double diff = std::abs(f_pde - mc.mean);
        const bool ok = diff <= 3.0 * mc.std_error +
                                cfg.tolerances.oracle_abs_floor * std::max(1.0, std::abs(f_pde));
        all_ok = all_ok && ok;
        csv.row({CsvWriter::format(probe.z), CsvWriter::format(probe.t),
                 CsvWriter::format(f_pde), CsvWriter::format(mc.mean),
                 CsvWriter::format(mc.std_error), CsvWriter::format(diff), ok ? "1" : "0"});
        log << "oracle: probe (z=" << probe.z << ", t=" << probe.t << ") pde=" << f_pde
            << " mc=" << mc.mean << " +- " << mc.std_error << (ok ? " ok" : " MISMATCH") << "\n";
    }
    return all_ok ? kExitOk : kExitChecksFailed;
}

int run_verify(const RunConfig& cfg, std::ostream& log) {
    log_audit(cfg, log);
    const PdeSolution sol = solve_G(cfg.model, cfg.grid, solve_options(cfg));
    const StateGrid states = default_state_grid(sol, cfg.anchor.y0);
    const ControlBox box;

    const VerificationReport saddle = verify_saddle_conditions(
        sol, cfg.model, states, box, 21, cfg.tolerances.eps_residual);
    const MinimaxReport minimax = verify_lower_equals_upper(
        sol, cfg.model, states, box, 21, cfg.tolerances.eps_residual);

    {
        CsvWriter csv(out_path(cfg, "verify_nodes.csv"),
                      {"z", "t", "y", "max_over_eta", "min_over_pi", "saddle_residual"});
        for (const auto& node : saddle.nodes) {
            csv.row_values({node.z, node.t, node.y, node.max_over_eta, node.min_over_pi,
                            node.saddle_residual});
        }
    }
    {
        CsvWriter csv(out_path(cfg, "verify_minimax.csv"), {"z", "t", "y", "minmax", "maxmin"});
        for (const auto& node : minimax.nodes) {
            csv.row_values({node.z, node.t, node.y, node.minmax, node.maxmin});
        }
    }
    {
        KeyValueCsv summary(out_path(cfg, "verify_summary.csv"));
        summary.put("eps_residual", saddle.eps_residual);
        summary.put("terminal_exact", saddle.terminal_exact ? 1.0 : 0.0);
        summary.put("worst_max_over_eta", saddle.worst_max_over_eta);
        summary.put("worst_min_over_pi", saddle.worst_min_over_pi);
        summary.put("worst_saddle_residual", saddle.worst_saddle_residual);
        summary.put("worst_abs_minmax", minimax.worst_abs_minmax);
        summary.put("worst_abs_maxmin", minimax.worst_abs_maxmin);
        summary.put("worst_minimax_gap", minimax.worst_gap);
        summary.put("saddle_passed", saddle.passed ? 1.0 : 0.0);
        summary.put("minimax_passed", minimax.passed ? 1.0 : 0.0);
    }

    log << "verify: eps = " << saddle.eps_residual
        << ", max over eta = " << saddle.worst_max_over_eta
        << ", min over pi = " << saddle.worst_min_over_pi
        << ", saddle residual = " << saddle.worst_saddle_residual << "\n";
    log << "verify: |minmax| = " << minimax.worst_abs_minmax
        << ", |maxmin| = " << minimax.worst_abs_maxmin << ", gap = " << minimax.worst_gap << "\n";
    log << "verify: " << (saddle.passed && minimax.passed ? "certified" : "FAILED") << "\n";
    return (saddle.passed && minimax.passed) ? kExitOk : kExitChecksFailed;
}

int run_simulate(const RunConfig& cfg, std::ostream& log) {
    log_audit(cfg, log);
    const PdeSolution sol = solve_G(cfg.model, cfg.grid, solve_options(cfg));
    const ControlFields fields(sol, cfg.model, cfg.anchor);
    const PiControl pi_star = saddle_pi_control(fields);
    const EtaControl eta_star = saddle_eta_control(fields);

    bool all_ok = true;

    McConfig bundle_cfg = cfg.mc;
    bundle_cfg.n_paths = std::min(cfg.mc.n_paths, cfg.sim_bundle_paths);
    const PathBundle bundle_p = simulate_system(cfg.model, sol, pi_star, eta_star,
                                                Measure::UnderP, cfg.anchor, bundle_cfg);
    const ReductionIdentityReport reduction = check_reduction_identity(bundle_p, sol, cfg.anchor);
    {
        CsvWriter csv(out_path(cfg, "reduction_identity.csv"), {"t", "max_abs_error"});
        for (Eigen::Index k = 0; k < bundle_p.times.size(); ++k) {
            csv.row_values({bundle_p.times[k], reduction.per_time_max[k]});
        }
    }
    export_bundle_csv(bundle_p, out_path(cfg, "paths_sample.csv"));
    log << "simulate: reduction identity max error = " << reduction.max_abs_error << "\n";

    const ObjectiveEstimate j_q = estimate_objective_under_Q(cfg.model, sol, pi_star, eta_star,
                                                             cfg.anchor, cfg.mc);
    const ObjectiveEstimate j_p = estimate_objective_from_bundle(bundle_p);
    const double value_fn = -cfg.anchor.x0 + eval_G(sol, cfg.anchor.z0, cfg.anchor.t0).g * cfg.anchor.y0;
    const double combined_se = std::sqrt(j_q.std_error * j_q.std_error +
                                         j_p.std_error * j_p.std_error);
    const bool pq_agree = std::abs(j_q.J - j_p.J) <= 3.0 * std::max(combined_se, 1e-15);
    all_ok = all_ok && pq_agree;
    {
        CsvWriter csv(out_path(cfg, "objectives.csv"), {"label", "J", "std_error"});
        csv.row({"under_Q_saddle", CsvWriter::format(j_q.J), CsvWriter::format(j_q.std_error)});
        csv.row({"under_P_saddle", CsvWriter::format(j_p.J), CsvWriter::format(j_p.std_error)});
        csv.row({"value_function", CsvWriter::format(value_fn), CsvWriter::format(0.0)});
    }
    log << "simulate: J under Q = " << j_q.J << " +- " << j_q.std_error
        << ", J under P = " << j_p.J << " +- " << j_p.std_error
        << ", value function = " << value_fn << (pq_agree ? "" : " [P/Q MISMATCH]") << "\n";

    const DensityCheck density = density_martingale_check(bundle_p);
    const bool density_ok =
        std::abs(density.mean - 1.0) <= 3.0 * std::max(density.std_error, 1e-15);
    all_ok = all_ok && density_ok;
    log << "simulate: mean Y_T/y0 under P = " << density.mean << " +- " << density.std_error
        << (density_ok ? "" : " [MARTINGALE CHECK FAILED]") << "\n";

    const PenaltyEstimate penalty = estimate_penalty(bundle_p);
    const PathBundle bundle_q = simulate_system(cfg.model, sol, pi_star, eta_star,
                                                Measure::UnderQ, cfg.anchor, bundle_cfg,
                                                no_noise_options());
    MomentSums y_q_sums;
    {
        const Eigen::Index last = bundle_q.Y.cols() - 1;
        Eigen::VectorXd y_T = bundle_q.Y.col(last);
        for (Eigen::Index p = 0; p < y_T.size(); p += bundle_q.antithetic ? 2 : 1) {
            if (bundle_q.antithetic && p + 1 < y_T.size()) {
                y_q_sums.add(0.5 * (y_T[p] + y_T[p + 1]));
            } else {
                y_q_sums.add(y_T[p]);
            }
        }
    }
    const double ey_q = y_q_sums.mean();
    const double penalty_pred = cfg.anchor.y0 * (penalty.C + 1.0);
    const double pen_se = std::sqrt(y_q_sums.std_error() * y_q_sums.std_error() +
                                    cfg.anchor.y0 * cfg.anchor.y0 *
                                        penalty.std_error * penalty.std_error);
    const bool penalty_ok = std::abs(ey_q - penalty_pred) <= 3.0 * std::max(pen_se, 1e-15);
    all_ok = all_ok && penalty_ok;
    {
        KeyValueCsv summary(out_path(cfg, "penalty.csv"));
        summary.put("C", penalty.C);
        summary.put("C_std_error", penalty.std_error);
        summary.put("EQ_Y_T", ey_q);
        summary.put("y0_times_C_plus_1", penalty_pred);
        summary.put("consistency_ok", penalty_ok ? 1.0 : 0.0);
    }
    log << "simulate: penalty C = " << penalty.C << " +- " << penalty.std_error
        << ", E^Q Y_T = " << ey_q << " vs y0 (C+1) = " << penalty_pred
        << (penalty_ok ? "" : " [PENALTY CHECK FAILED]") << "\n";

    const SaddleCertification cert = certify_saddle_mc(cfg.model, sol, cfg.anchor, cfg.mc);
    all_ok = all_ok && cert.passed;
    {
        CsvWriter csv(out_path(cfg, "saddle_certification.csv"),
                      {"label", "J", "std_error", "diff_mean", "diff_se", "ok"});
        auto emit = [&csv](const SaddleCertRow& row) {
            csv.row({row.label, CsvWriter::format(row.J), CsvWriter::format(row.std_error),
                     CsvWriter::format(row.diff_mean), CsvWriter::format(row.diff_se),
                     row.ok ? "1" : "0"});
        };
        csv.row({"saddle", CsvWriter::format(cert.J_saddle), CsvWriter::format(cert.se_saddle),
                 CsvWriter::format(0.0), CsvWriter::format(0.0), cert.value_match ? "1" : "0"});
        for (const auto& row : cert.eta_rows) emit(row);
        for (const auto& row : cert.pi_rows) emit(row);
    }
    log << "simulate: saddle certification " << (cert.passed ? "passed" : "FAILED")
        << " (J at saddle = " << cert.J_saddle << " +- " << cert.se_saddle << ")\n";

    const SupValueStat sup = sup_value_statistic(bundle_p, sol);
    log << "simulate: sup_t |V| along paths: mean = " << sup.mean_sup_abs
        << ", max = " << sup.max_sup_abs << "\n";

    return all_ok ? kExitOk : kExitChecksFailed;
}

int run_compare_mv(const RunConfig& cfg, std::ostream& log) {
    log_audit(cfg, log);
    const PdeSolution sol = solve_G(cfg.model, cfg.grid, solve_options(cfg));
    const ControlFields fields(sol, cfg.model, cfg.anchor);

    RMoments moments;
    try {
        moments = simulate_R(cfg.model, sol, cfg.anchor.z0, cfg.mc);
    } catch (const ExcessiveExcursion& e) {
        log << "compare-mv: " << e.what() << "\n";
        return kExitChecksFailed;
    }
    log << "compare-mv: ER = " << moments.ER << " +- " << moments.se_ER
        << ", ER2 = " << moments.ER2 << " +- " << moments.se_ER2
        << ", VarR = " << moments.VarR << "\n";

    const double g_anchor = eval_G(sol, cfg.anchor.z0, cfg.anchor.t0).g;
    MeanVarianceSolution mv;
    try {
        mv = build_mean_variance_solution(cfg.anchor.x0, cfg.anchor.y0, g_anchor,
                                          moments.ER, moments.ER2, moments.VarR);
    } catch (const DegenerateER& e) {
        log << "compare-mv: DegenerateER: " << e.what() << "\n";
        return kExitChecksFailed;
    } catch (const DegenerateVariance& e) {
        log << "compare-mv: DegenerateVariance: " << e.what() << "\n";
        return kExitChecksFailed;
    }
    log << "compare-mv: theta (intercept-matching) = " << mv.theta
        << ", A* = " << mv.A_star << ", gamma* = " << mv.gamma_star << "\n";

    // strategies tabulated at fixed wealth x = x0; the z- and t-loading is
    // shared, so the ratio column must be constant
    const int stride_z = std::max(1, (cfg.grid.n_z - 1) / 24);
    const int stride_t = std::max(1, (cfg.grid.n_t - 1) / 8);
    const Eigen::VectorXd z = cfg.grid.z_nodes();
    const Eigen::VectorXd t = sol.t_levels();

    double worst_rel = 0.0;
    {
        CsvWriter csv(out_path(cfg, "compare_mv.csv"), {"z", "t", "monotone_pi", "mv_pi", "ratio"});
        for (int j = 0; j + 1 < cfg.grid.n_t; j += stride_t) {
            for (int i = 0; i < cfg.grid.n_z; i += stride_z) {
                const double monotone = reduced_pi(fields, cfg.anchor.x0, z[i], t[j]);
                const double mv_pi = mv_strategy(sol, cfg.model, cfg.anchor.x0, z[i], t[j],
                                                 cfg.anchor.x0, mv.theta, moments.ER,
                                                 moments.VarR);
                const double ratio = monotone != 0.0 ? mv_pi / monotone : 1.0;
                const double rel = monotone != 0.0
                                       ? std::abs(mv_pi - monotone) / std::abs(monotone)
                                       : std::abs(mv_pi - monotone);
                worst_rel = std::max(worst_rel, rel);
                csv.row_values({z[i], t[j], monotone, mv_pi, ratio});
            }
        }
    }
    {
        KeyValueCsv summary(out_path(cfg, "compare_mv_summary.csv"));
        summary.put("ER", moments.ER);
        summary.put("ER_std_error", moments.se_ER);
        summary.put("ER2", moments.ER2);
        summary.put("VarR", moments.VarR);
        summary.put("A_star", mv.A_star);
        summary.put("gamma_star", mv.gamma_star);
        summary.put("theta", mv.theta);
        summary.put("phi_second_moment", mv.phi_second_moment);
        summary.put("strategy_intercept", mv.strategy_intercept);
        summary.put("max_rel_strategy_gap", worst_rel);
        if (cfg.theta) {
            // target and multiplier for the caller's own risk aversion
            const OptimalTarget user = optimal_A(cfg.anchor.x0, *cfg.theta,
                                                 moments.ER, moments.VarR);
            summary.put("theta_user", *cfg.theta);
            summary.put("A_star_user", user.A_star);
            summary.put("gamma_star_user", user.gamma_star);
        }
    }

    const bool ok = worst_rel <= cfg.tolerances.mv_equality_rel_tol;
    log << "compare-mv: max relative strategy gap = " << worst_rel
        << (ok ? " (strategies coincide)" : " [EQUALITY CHECK FAILED]") << "\n";
    return ok ? kExitOk : kExitChecksFailed;
}

RunConfig example_bs_config(const std::string& output_dir, std::uint64_t seed) {
    std::ostringstream json;
    json << R"({
  "model": {"family": "constant", "r": 0.02, "rho": 0.0, "horizon_T": 1.0,
            "mu": 0.10, "sigma": 0.20, "a": 0.0, "b": 0.30},
  "grid": {"z_lo": -6.0, "z_hi": 6.0, "n_z": 401, "n_t": 401},
  "mc": {"n_paths": 100000, "n_steps": 256, "seed": )"
         << seed << R"(},
  "anchor": {"x0": 1.0, "y0": 0.5, "z0": 0.0, "t0": 0.0},
  "output_dir": ")" << output_dir << R"("
})";
    return RunConfig::from_json_text(json.str());
}

int run_example_bs(const std::string& output_dir, std::uint64_t seed, std::ostream& log) {
    const RunConfig cfg = example_bs_config(output_dir, seed);
    bool all_ok = true;

    const double lam = market_price_of_risk(cfg.model, 0.0);
    const double lt = lam * lam * cfg.model.horizon();
    log << "example-bs: lambda = " << lam << ", lambda^2 T = " << lt << "\n";

    const PdeSolution sol = solve_G(cfg.model, cfg.grid, solve_options(cfg));
    const double g0 = eval_G(sol, 0.0, 0.0).g;
    const double g0_exact = -std::exp(lt);
    const bool g_ok = std::abs(g0 - g0_exact) <= 1e-4 * std::abs(g0_exact);
    all_ok = all_ok && g_ok;
    log << "example-bs: G(z0, 0) = " << g0 << " vs closed form " << g0_exact
        << (g_ok ? " ok" : " MISMATCH") << "\n";

    const ControlFields fields(sol, cfg.model, cfg.anchor);
    const double pi0 = optimal_pi(fields, cfg.anchor.y0, 0.0, 0.0);
    const double pi0_exact = 2.0 * cfg.anchor.y0 * std::exp(lt) * lam / cfg.model.sigma(0.0);
    const bool pi_ok = std::abs(pi0 - pi0_exact) <= 1e-4 * std::abs(pi0_exact);
    all_ok = all_ok && pi_ok;
    log << "example-bs: pi*(y0, z0, 0) = " << pi0 << " vs closed form " << pi0_exact
        << (pi_ok ? " ok" : " MISMATCH") << "\n";

    const BsClosedForms cf = bs_closed_forms(cfg.model);
    const RMoments moments = simulate_R(cfg.model, sol, 0.0, cfg.mc);
    const bool er_ok = std::abs(moments.ER - cf.ER) <= 3.0 * std::max(moments.se_ER, 1e-15);
    const bool er2_ok = std::abs(moments.ER2 - cf.ER2) <= 3.0 * std::max(moments.se_ER2, 1e-15);
    all_ok = all_ok && er_ok && er2_ok;
    log << "example-bs: ER = " << moments.ER << " vs " << cf.ER << (er_ok ? " ok" : " MISMATCH")
        << "; ER2 = " << moments.ER2 << " vs " << cf.ER2 << (er2_ok ? " ok" : " MISMATCH") << "\n";

    const double theta = theta_equivalence(cf.G0, cfg.anchor.y0, cf.ER, cf.VarR);
    const double theta_exact = 1.0 / (4.0 * cfg.anchor.y0);
    const bool theta_ok = std::abs(theta - theta_exact) <= 1e-10;
    all_ok = all_ok && theta_ok;
    log << "example-bs: theta = " << theta << " vs 1/(4 y0) = " << theta_exact
        << (theta_ok ? " ok" : " MISMATCH") << "\n";

    double worst_rel = 0.0;
    for (double x : {0.0, 0.5, 1.0, 2.0}) {
        for (double t : {0.0, 0.25, 0.5, 0.75}) {
            const double monotone = reduced_pi(fields, x, 0.0, t);
            const double mv = mv_strategy(sol, cfg.model, x, 0.0, t, cfg.anchor.x0,
                                          theta, cf.ER, cf.VarR);
            if (monotone != 0.0)
                worst_rel = std::max(worst_rel, std::abs(mv - monotone) / std::abs(monotone));
        }
    }
    const bool strategies_ok = worst_rel <= 1e-6;
    all_ok = all_ok && strategies_ok;
    log << "example-bs: max relative gap between monotone and mean-variance strategies = "
        << worst_rel << (strategies_ok ? " ok" : " MISMATCH") << "\n";

    {
        KeyValueCsv summary(out_path(cfg, "example_bs_summary.csv"));
        summary.put("lambda", lam);
        summary.put("G0", g0);
        summary.put("G0_closed_form", g0_exact);
        summary.put("pi_star_at_anchor", pi0);
        summary.put("ER_mc", moments.ER);
        summary.put("ER_closed_form", cf.ER);
        summary.put("VarR_closed_form", cf.VarR);
        summary.put("theta", theta);
        summary.put("theta_expected", theta_exact);
        summary.put("max_rel_strategy_gap", worst_rel);
        summary.put("all_ok", all_ok ? 1.0 : 0.0);
    }

    log << "example-bs: " << (all_ok ? "all checks passed" : "CHECKS FAILED") << "\n";
    return all_ok ? kExitOk : kExitChecksFailed;
}

}  // namespace mmv::cli
