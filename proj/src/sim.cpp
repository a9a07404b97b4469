#include "mmv/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmv/csv.hpp"
#include "mmv/rng.hpp"
#include "mmv/stats.hpp"

namespace mmv {

namespace {

struct PathTerminal {
    double x = 0.0;
    double y = 0.0;
    std::int64_t excursions = 0;
};

// Advances one path from (x0, y0, z0, t0) to T. The sink receives every
// completed level for bundle storage; pass a no-op for streaming use.
template <class Sink>
PathTerminal step_path(const FactorMarketModel& model, const PdeSolution& sol,
                       const PiControl& pi, const EtaControl& eta, Measure measure,
                       const Anchor& anchor, int n_steps, PathRng& rng, double sign,
                       Sink&& sink) {
    const double T = model.horizon();
    const double ds = (T - anchor.t0) / static_cast<double>(n_steps);
    const double sqrt_ds = std::sqrt(ds);
    const double rho = model.rho();
    const double rho_bar = model.rho_bar();
    const double r = model.rate();

    double x = anchor.x0, y = anchor.y0, z = anchor.z0;
    PathTerminal out;
    for (int k = 0; k < n_steps; ++k) {
        const double t = anchor.t0 + ds * k;
        const double z_cl = std::min(std::max(z, sol.grid.z_lo), sol.grid.z_hi);
        if (z_cl != z) ++out.excursions;

        const double mu = model.mu(z_cl);
        const double sigma = model.sigma(z_cl);
        const double a = model.factor_drift(z_cl);
        const double b = model.factor_vol(z_cl);
        const double pi_t = pi(x, y, z_cl, t);
        const EtaPair e = eta(z_cl, t);

        const double dw1 = sign * sqrt_ds * rng.next_gaussian();
        const double dw2 = sign * sqrt_ds * rng.next_gaussian();
        const double eta_sq = e.eta1 * e.eta1 + e.eta2 * e.eta2;

        if (measure == Measure::UnderP) {
            x += pi_t * (mu - r) * ds + pi_t * sigma * dw1;
            y *= std::exp(e.eta1 * dw1 + e.eta2 * dw2 - 0.5 * eta_sq * ds);
            z += a * ds + b * (rho * dw1 + rho_bar * dw2);
        } else {
            x += pi_t * (mu - r + sigma * e.eta1) * ds + pi_t * sigma * dw1;
            y *= std::exp(e.eta1 * dw1 + e.eta2 * dw2 + 0.5 * eta_sq * ds);
            z += (a + b * rho * e.eta1 + b * rho_bar * e.eta2) * ds +
                 b * (rho * dw1 + rho_bar * dw2);
        }
        sink(k, x, y, z, dw1, dw2);
    }
    out.x = x;
    out.y = y;
    return out;
}

struct NoSink {
    void operator()(int, double, double, double, double, double) const {}
};

void check_sim_inputs(const FactorMarketModel& model, const Anchor& anchor, const McConfig& cfg) {
    if (cfg.n_paths < 1) throw std::invalid_argument("sim: n_paths must be >= 1");
    if (cfg.n_steps < 1) throw std::invalid_argument("sim: n_steps must be >= 1");
    if (!(anchor.t0 < model.horizon())) throw std::invalid_argument("sim: t0 must be < horizon");
    if (!(anchor.y0 > 0.0)) throw std::invalid_argument("sim: y0 must be positive");
}

void throw_if_excessive(std::int64_t excursions, std::int64_t total, double fraction) {
    if (total > 0 && static_cast<double>(excursions) > fraction * static_cast<double>(total)) {
        std::ostringstream msg;
        msg << "excursion fraction " << static_cast<double>(excursions) / static_cast<double>(total)
            << " exceeds " << fraction << "; widen the grid domain";
        throw ExcessiveExcursion(msg.str());
    }
}

// Streams per-path objective values into pair-aware moment sums.
template <class Value>
ObjectiveEstimate stream_objective(const FactorMarketModel& model, const PdeSolution& sol,
                                   const PiControl& pi, const EtaControl& eta, Measure measure,
                                   const Anchor& anchor, const McConfig& cfg, Value&& value) {
    check_sim_inputs(model, anchor, cfg);
    const std::int64_t n_units = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    std::atomic<std::int64_t> excursions{0};
    std::atomic<std::int64_t> steps{0};

    MomentSums sums = accumulate_units(n_units, cfg.n_threads, [&](std::int64_t u, MomentSums& acc) {
        if (cfg.antithetic) {
            PathRng rng_plus(cfg.seed, static_cast<std::uint64_t>(u));
            const PathTerminal plus = step_path(model, sol, pi, eta, measure, anchor,
                                                cfg.n_steps, rng_plus, +1.0, NoSink{});
            std::int64_t exc = plus.excursions;
            std::int64_t stp = cfg.n_steps;
            double v = value(plus);
            if (2 * u + 1 < cfg.n_paths) {
                PathRng rng_minus(cfg.seed, static_cast<std::uint64_t>(u));
                const PathTerminal minus = step_path(model, sol, pi, eta, measure, anchor,
                                                     cfg.n_steps, rng_minus, -1.0, NoSink{});
                exc += minus.excursions;
                stp += cfg.n_steps;
                v = 0.5 * (v + value(minus));
            }
            acc.add(v);
            excursions.fetch_add(exc, std::memory_order_relaxed);
            steps.fetch_add(stp, std::memory_order_relaxed);
        } else {
            PathRng rng(cfg.seed, static_cast<std::uint64_t>(u));
            const PathTerminal term = step_path(model, sol, pi, eta, measure, anchor,
                                                cfg.n_steps, rng, +1.0, NoSink{});
            acc.add(value(term));
            excursions.fetch_add(term.excursions, std::memory_order_relaxed);
            steps.fetch_add(cfg.n_steps, std::memory_order_relaxed);
        }
    });

    throw_if_excessive(excursions.load(), steps.load(), SimOptions{}.excursion_abort_fraction);
    return {sums.mean(), sums.std_error(), sums.count()};
}

// Pair-aware reduction of per-path values already in memory.
MomentSums reduce_path_values(const Eigen::VectorXd& values, bool antithetic) {
    MomentSums sums;
    const std::int64_t n = values.size();
    if (antithetic) {
        for (std::int64_t p = 0; p < n; p += 2) {
            sums.add(p + 1 < n ? 0.5 * (values[p] + values[p + 1]) : values[p]);
        }
    } else {
        for (std::int64_t p = 0; p < n; ++p) sums.add(values[p]);
    }
    return sums;
}

Eigen::VectorXd objective_values_from_bundle(const PathBundle& bundle,
                                             const Eigen::VectorXd* shift, double const_shift) {
    const Eigen::Index n_paths = bundle.X.rows();
    const Eigen::Index last = bundle.X.cols() - 1;
    Eigen::VectorXd values(n_paths);
    for (Eigen::Index p = 0; p < n_paths; ++p) {
        const double x_T = bundle.X(p, last) + (shift ? (*shift)[p] : const_shift);
        const double y_T = bundle.Y(p, last);
        double v = -x_T - y_T;
        if (bundle.measure == Measure::UnderP) v *= y_T / bundle.y0;
        values[p] = v;
    }
    return values;
}

}  // namespace

PiControl saddle_pi_control(const ControlFields& fields) {
    return [&fields](double, double y, double z, double t) {
        return optimal_pi(fields, y, z, t);
    };
}

PiControl reduced_pi_control(const ControlFields& fields) {
    return [&fields](double x, double, double z, double t) {
        return reduced_pi(fields, x, z, t);
    };
}

EtaControl saddle_eta_control(const ControlFields& fields) {
    return [&fields](double z, double t) { return optimal_eta(fields, z, t); };
}

PiControl scale_pi(PiControl base, double factor) {
    return [base = std::move(base), factor](double x, double y, double z, double t) {
        return factor * base(x, y, z, t);
    };
}

PiControl shift_pi(PiControl base, double shift) {
    return [base = std::move(base), shift](double x, double y, double z, double t) {
        return base(x, y, z, t) + shift;
    };
}

EtaControl scale_eta(EtaControl base, double factor) {
    return [base = std::move(base), factor](double z, double t) {
        const EtaPair e = base(z, t);
        return EtaPair{factor * e.eta1, factor * e.eta2};
    };
}

EtaControl shift_eta(EtaControl base, double shift) {
    return [base = std::move(base), shift](double z, double t) {
        const EtaPair e = base(z, t);
        return EtaPair{e.eta1 + shift, e.eta2 + shift};
    };
}

PathBundle simulate_system(const FactorMarketModel& model, const PdeSolution& sol,
                           const PiControl& pi, const EtaControl& eta, Measure measure,
                           const Anchor& anchor, const McConfig& cfg,
                           const SimOptions& options) {
    check_sim_inputs(model, anchor, cfg);
    const int n_steps = cfg.n_steps;
    const std::int64_t n_paths = cfg.n_paths;

    PathBundle bundle;
    bundle.times = Eigen::VectorXd::LinSpaced(n_steps + 1, anchor.t0, model.horizon());
    bundle.X.resize(n_paths, n_steps + 1);
    bundle.Y.resize(n_paths, n_steps + 1);
    bundle.Z.resize(n_paths, n_steps + 1);
    if (options.store_noise) {
        bundle.dW1.resize(n_paths, n_steps);
        bundle.dW2.resize(n_paths, n_steps);
    }
    bundle.measure = measure;
    bundle.eta_label = options.eta_label;
    bundle.antithetic = cfg.antithetic;
    bundle.x0 = anchor.x0;
    bundle.y0 = anchor.y0;

    for (std::int64_t p = 0; p < n_paths; ++p) {
        const std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(p >> 1)
                                                    : static_cast<std::uint64_t>(p);
        const double sign = (cfg.antithetic && (p & 1)) ? -1.0 : 1.0;
        PathRng rng(cfg.seed, stream);
        bundle.X(p, 0) = anchor.x0;
        bundle.Y(p, 0) = anchor.y0;
        bundle.Z(p, 0) = anchor.z0;
        const PathTerminal term = step_path(
            model, sol, pi, eta, measure, anchor, n_steps, rng, sign,
            [&](int k, double x, double y, double z, double dw1, double dw2) {
                bundle.X(p, k + 1) = x;
                bundle.Y(p, k + 1) = y;
                bundle.Z(p, k + 1) = z;
                if (options.store_noise) {
                    bundle.dW1(p, k) = dw1;
                    bundle.dW2(p, k) = dw2;
                }
            });
        bundle.excursion_steps += term.excursions;
        bundle.coefficient_steps += n_steps;
    }

    throw_if_excessive(bundle.excursion_steps, bundle.coefficient_steps,
                       options.excursion_abort_fraction);
    return bundle;
}

ReductionIdentityReport check_reduction_identity(const PathBundle& bundle,
                                                 const PdeSolution& sol, const Anchor& anchor) {
    const double g0 = eval_G(sol, anchor.z0, anchor.t0).g;
    // error = |2 Y G(Z,t) - (X - x0 + 2 y0 G0)|
    const double offset = anchor.x0 - 2.0 * anchor.y0 * g0;

    ReductionIdentityReport report;
    const Eigen::Index n_levels = bundle.times.size();
    report.per_time_max = Eigen::VectorXd::Zero(n_levels);
    for (Eigen::Index k = 0; k < n_levels; ++k) {
        const double t = bundle.times[k];
        double worst = 0.0;
        for (Eigen::Index p = 0; p < bundle.X.rows(); ++p) {
            const GEval g = eval_G_clamped(sol, bundle.Z(p, k), t);
            const double err = std::abs(2.0 * bundle.Y(p, k) * g.g - bundle.X(p, k) + offset);
            worst = std::max(worst, err);
        }
        report.per_time_max[k] = worst;
        report.max_abs_error = std::max(report.max_abs_error, worst);
    }
    return report;
}

ObjectiveEstimate estimate_objective_under_Q(const FactorMarketModel& model, const PdeSolution& sol,
                                             const PiControl& pi, const EtaControl& eta,
                                             const Anchor& anchor, const McConfig& cfg) {
    return stream_objective(model, sol, pi, eta, Measure::UnderQ, anchor, cfg,
                            [](const PathTerminal& term) { return -term.x - term.y; });
}

ObjectiveEstimate estimate_objective_under_P(const FactorMarketModel& model, const PdeSolution& sol,
                                             const PiControl& pi, const EtaControl& eta,
                                             const Anchor& anchor, const McConfig& cfg) {
    const double y0 = anchor.y0;
    return stream_objective(model, sol, pi, eta, Measure::UnderP, anchor, cfg,
                            [y0](const PathTerminal& term) {
                                return (term.y / y0) * (-term.x - term.y);
                            });
}

ObjectiveEstimate estimate_objective_from_bundle(const PathBundle& bundle, double x_shift) {
    const MomentSums sums =
        reduce_path_values(objective_values_from_bundle(bundle, nullptr, x_shift),
                           bundle.antithetic);
    return {sums.mean(), sums.std_error(), sums.count()};
}

ObjectiveEstimate estimate_objective_from_bundle(const PathBundle& bundle,
                                                 const Eigen::VectorXd& x_shift) {
    if (x_shift.size() != bundle.X.rows())
        throw std::invalid_argument("estimate_objective_from_bundle: shift size mismatch");
    const MomentSums sums =
        reduce_path_values(objective_values_from_bundle(bundle, &x_shift, 0.0),
                           bundle.antithetic);
    return {sums.mean(), sums.std_error(), sums.count()};
}

PenaltyEstimate estimate_penalty(const PathBundle& bundle) {
    if (bundle.measure != Measure::UnderP)
        throw std::invalid_argument("estimate_penalty: bundle must be simulated under P");
    const Eigen::Index last = bundle.X.cols() - 1;
    Eigen::VectorXd values(bundle.Y.rows());
    for (Eigen::Index p = 0; p < bundle.Y.rows(); ++p) {
        const double w = bundle.Y(p, last) / bundle.y0;
        values[p] = w * w - 1.0;
    }
    const MomentSums sums = reduce_path_values(values, bundle.antithetic);
    return {sums.mean(), sums.std_error(), sums.count()};
}

DensityCheck density_martingale_check(const PathBundle& bundle) {
    if (bundle.measure != Measure::UnderP)
        throw std::invalid_argument("density_martingale_check: bundle must be simulated under P");
    const Eigen::Index last = bundle.X.cols() - 1;
    Eigen::VectorXd values = bundle.Y.col(last) / bundle.y0;
    const MomentSums sums = reduce_path_values(values, bundle.antithetic);
    return {sums.mean(), sums.std_error()};
}

SupValueStat sup_value_statistic(const PathBundle& bundle, const PdeSolution& sol) {
    SupValueStat stat;
    double total = 0.0;
    for (Eigen::Index p = 0; p < bundle.X.rows(); ++p) {
        double sup = 0.0;
        for (Eigen::Index k = 0; k < bundle.times.size(); ++k) {
            const GEval g = eval_G_clamped(sol, bundle.Z(p, k), bundle.times[k]);
            sup = std::max(sup, std::abs(-bundle.X(p, k) + g.g * bundle.Y(p, k)));
        }
        total += sup;
        stat.max_sup_abs = std::max(stat.max_sup_abs, sup);
    }
    stat.mean_sup_abs = total / static_cast<double>(bundle.X.rows());
    return stat;
}

void export_bundle_csv(const PathBundle& bundle, const std::string& path, int max_paths) {
    CsvWriter csv(path, {"path", "t", "X", "Y", "Z"});
    const Eigen::Index n = std::min<Eigen::Index>(bundle.X.rows(), max_paths);
    for (Eigen::Index p = 0; p < n; ++p) {
        for (Eigen::Index k = 0; k < bundle.times.size(); ++k) {
            csv.row_values({static_cast<double>(p), bundle.times[k], bundle.X(p, k),
                            bundle.Y(p, k), bundle.Z(p, k)});
        }
    }
}

SaddleCertification certify_saddle_mc(const FactorMarketModel& model, const PdeSolution& sol,
                                      const Anchor& anchor, const McConfig& cfg,
                                      const PerturbationSpec& perturbations) {
    check_sim_inputs(model, anchor, cfg);
    const ControlFields fields(sol, model, anchor);
    const PiControl pi_star = saddle_pi_control(fields);
    const EtaControl eta_star = saddle_eta_control(fields);

    // Per-path objective values under a given control pair; the shared seed
    // gives common random numbers across every run.
    auto path_values = [&](const PiControl& pi, const EtaControl& eta) {
        Eigen::VectorXd values(cfg.n_paths);
        std::int64_t excursions = 0;
        for (std::int64_t p = 0; p < cfg.n_paths; ++p) {
            const std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(p >> 1)
                                                        : static_cast<std::uint64_t>(p);
            const double sign = (cfg.antithetic && (p & 1)) ? -1.0 : 1.0;
            PathRng rng(cfg.seed, stream);
            const PathTerminal term = step_path(model, sol, pi, eta, Measure::UnderQ, anchor,
                                                cfg.n_steps, rng, sign, NoSink{});
            values[p] = -term.x - term.y;
            excursions += term.excursions;
        }
        throw_if_excessive(excursions, cfg.n_paths * static_cast<std::int64_t>(cfg.n_steps),
                           SimOptions{}.excursion_abort_fraction);
        return values;
    };

    const Eigen::VectorXd saddle_values = path_values(pi_star, eta_star);
    const MomentSums saddle_sums = reduce_path_values(saddle_values, cfg.antithetic);

    SaddleCertification cert;
    cert.J_saddle = saddle_sums.mean();
    cert.se_saddle = saddle_sums.std_error();
    cert.value_function = -anchor.x0 + eval_G(sol, anchor.z0, anchor.t0).g * anchor.y0;
    cert.value_match =
        std::abs(cert.J_saddle - cert.value_function) <= 3.0 * std::max(cert.se_saddle, 1e-15);

    auto evaluate = [&](const std::string& label, const PiControl& pi, const EtaControl& eta,
                        bool eta_side) {
        const Eigen::VectorXd values = path_values(pi, eta);
        const MomentSums sums = reduce_path_values(values, cfg.antithetic);
        const MomentSums diff = reduce_path_values(values - saddle_values, cfg.antithetic);
        SaddleCertRow row;
        row.label = label;
        row.J = sums.mean();
        row.std_error = sums.std_error();
        row.diff_mean = diff.mean();
        row.diff_se = diff.std_error();
        const double slack = 3.0 * std::max(row.diff_se, 1e-15);
        // eta perturbations may not beat the saddle; pi perturbations may not undercut it
        row.ok = eta_side ? (row.diff_mean <= slack) : (row.diff_mean >= -slack);
        return row;
    };

    auto label_of = [](const char* stem, double value) {
        std::ostringstream out;
        out << stem << value;
        return out.str();
    };

    for (double s : perturbations.scales) {
        cert.eta_rows.push_back(evaluate(label_of("eta_scale_", s), pi_star,
                                         scale_eta(eta_star, s), true));
        cert.pi_rows.push_back(evaluate(label_of("pi_scale_", s), scale_pi(pi_star, s),
                                        eta_star, false));
    }
    for (double c : perturbations.shifts) {
        cert.eta_rows.push_back(evaluate(label_of("eta_shift_", c), pi_star,
                                         shift_eta(eta_star, c), true));
        cert.pi_rows.push_back(evaluate(label_of("pi_shift_", c), shift_pi(pi_star, c),
                                        eta_star, false));
    }

    cert.passed = cert.value_match;
    for (const auto& row : cert.eta_rows) cert.passed = cert.passed && row.ok;
    for (const auto& row : cert.pi_rows) cert.passed = cert.passed && row.ok;
    return cert;
}

}  // namespace mmv
