#ifndef MMV_TRIDIAG_HPP
#define MMV_TRIDIAG_HPP

#include <Eigen/Dense>
#include <stdexcept>

namespace mmv {

/// Thomas algorithm for T x = rhs with bands (sub, diag, super);
/// sub and super have length n-1. scratch must have length n.
inline void solve_tridiagonal(const Eigen::VectorXd& sub,
                              const Eigen::VectorXd& diag,
                              const Eigen::VectorXd& super,
                              const Eigen::VectorXd& rhs,
                              Eigen::VectorXd& x,
                              Eigen::VectorXd& scratch) {
    const Eigen::Index n = diag.size();
    if (sub.size() != n - 1 || super.size() != n - 1 || rhs.size() != n)
        throw std::invalid_argument("solve_tridiagonal: band size mismatch");
    x.resize(n);
    scratch.resize(n);

    double pivot = diag[0];
    if (pivot == 0.0) throw std::runtime_error("solve_tridiagonal: zero pivot");
    x[0] = rhs[0] / pivot;
    for (Eigen::Index i = 1; i < n; ++i) {
        scratch[i] = super[i - 1] / pivot;
        pivot = diag[i] - sub[i - 1] * scratch[i];
        if (pivot == 0.0) throw std::runtime_error("solve_tridiagonal: zero pivot");
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / pivot;
    }
    for (Eigen::Index i = n - 2; i >= 0; --i) {
        x[i] -= scratch[i + 1] * x[i + 1];
    }
}

}  // namespace mmv

#endif  // MMV_TRIDIAG_HPP
