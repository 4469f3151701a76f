#pragma once

#include <Eigen/Dense>

#include <functional>

namespace proxmsm {

// Stacked M-estimation sandwich. psi writes the full stacked per-record moment vector
// (nuisance blocks followed by the MSMM block) at theta; the system is square
// (dim theta == dim psi). Returns Cov(theta_hat) = A^{-1} B A^{-T} / n with
// A = d/dtheta' Pn[psi] (central differences, step fd_step) and B = Pn[psi psi'],
// symmetrized. Throws NumericalError "variance not estimable" when A is singular and
// when the result fails the PSD check at tolerance psd_tol.
Eigen::MatrixXd stacked_sandwich(
    const std::function<void(const Eigen::VectorXd&, Eigen::Index, Eigen::Ref<Eigen::VectorXd>)>& psi,
    const Eigen::VectorXd& theta_hat, Eigen::Index n, double fd_step = 1e-6,
    double psd_tol = 1e-8);

}  // namespace proxmsm
