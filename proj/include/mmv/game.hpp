#ifndef MMV_GAME_HPP
#define MMV_GAME_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mmv/model.hpp"
#include "mmv/pde.hpp"
#include "mmv/strategy.hpp"

namespace mmv {

struct GeneratorState {
    double x = 0.0;
    double y = 1.0;  // must be positive
    double z = 0.0;
    double t = 0.0;  // in [0, T)
};

struct GeneratorControl {
    double pi = 0.0;
    double eta1 = 0.0;
    double eta2 = 0.0;
};

/// Discrete derivative fields of the ansatz V(x,y,z,t) = -x + G(z,t) y, taken
/// from the stored surface (not from the equation), so generator evaluations
/// cross-check the solve rather than restate it. G_t uses the one-step
/// difference toward the later level; G_zz is the centered difference of the
/// stored G_z.
class GeneratorSurface {
public:
    explicit GeneratorSurface(const PdeSolution& sol);

    double apply(const FactorMarketModel& model, const GeneratorState& state,
                 const GeneratorControl& control) const;

    const PdeSolution& solution() const { return *sol_; }
    const Eigen::MatrixXd& G_t() const { return G_t_; }
    const Eigen::MatrixXd& G_zz() const { return G_zz_; }

private:
    const PdeSolution* sol_;
    Eigen::MatrixXd G_t_, G_zz_;
};

/// One-shot evaluation of L^{pi,eta} V at the given state; builds the
/// derivative fields each call, so prefer GeneratorSurface in loops.
double generator_apply(const PdeSolution& sol, const FactorMarketModel& model,
                       const GeneratorState& state, const GeneratorControl& control);

/// States examined by the verification: a cartesian set of grid node indices
/// and density levels y (x is irrelevant to the generator of this ansatz and
/// held fixed).
struct StateGrid {
    std::vector<int> z_indices;
    std::vector<int> t_indices;
    std::vector<double> y_values;
    double x = 0.0;
};

/// Interior nodes at least `margin_cells` cells from the z-boundary and time
/// levels in [0, T), subsampled to roughly the requested counts.
StateGrid default_state_grid(const PdeSolution& sol, double y0,
                             int n_z_states = 15, int n_t_states = 10,
                             int margin_cells = 2);

struct ControlBox {
    double eta_lo = -3.0;
    double eta_hi = 3.0;
    // pi scan half-width = pi_mult * y |G| lambda_max / sigma_min, per state
    double pi_mult = 10.0;
};

struct SaddleNodeReport {
    double z = 0.0, t = 0.0, y = 0.0;
    double max_over_eta = 0.0;   // condition (i):  should be <= eps
    double min_over_pi = 0.0;    // condition (ii): should be >= -eps
    double saddle_residual = 0.0;  // condition (iii): |L| at the saddle pair
};

struct VerificationReport {
    double eps_residual = 0.0;
    bool passed = false;
    bool terminal_exact = false;   // V(x,y,z,T) = -x - y on the grid
    double worst_max_over_eta = 0.0;
    double worst_min_over_pi = 0.0;
    double worst_saddle_residual = 0.0;
    SaddleNodeReport worst_node;
    std::vector<SaddleNodeReport> nodes;
};

/// Scans the verification-theorem conditions at every state node:
///   (i)  max_eta L^{pi*,eta} V <= eps,
///   (ii) min_pi  L^{pi,eta*} V >= -eps,
///   (iii) |L^{pi*,eta*} V| <= eps,
///   (iv) terminal value -x - y exact.
/// eps_residual <= 0 selects the default max(1e-3, 10 * PDE residual norm).
VerificationReport verify_saddle_conditions(const PdeSolution& sol, const FactorMarketModel& model,
                                            const StateGrid& states, const ControlBox& box,
                                            int n_scan = 21, double eps_residual = -1.0);

struct MinimaxNodeReport {
    double z = 0.0, t = 0.0, y = 0.0;
    double minmax = 0.0;  // min over pi of max over eta
    double maxmin = 0.0;  // max over eta of min over pi
};

struct MinimaxReport {
    double eps_residual = 0.0;
    bool passed = false;
    double worst_abs_minmax = 0.0;
    double worst_abs_maxmin = 0.0;
    double worst_gap = 0.0;  // |minmax - maxmin|
    std::vector<MinimaxNodeReport> nodes;
};

/// Checks that the scanned upper and lower Isaacs values both vanish:
/// |minmax| <= eps, |maxmin| <= eps, |minmax - maxmin| <= 2 eps.
MinimaxReport verify_lower_equals_upper(const PdeSolution& sol, const FactorMarketModel& model,
                                        const StateGrid& states, const ControlBox& box,
                                        int n_scan = 21, double eps_residual = -1.0);

}  // namespace mmv

#endif  // MMV_GAME_HPP
