#include "proxmsm/sandwich.hpp"

#include <cmath>

#include "proxmsm/errors.hpp"

namespace proxmsm {

namespace {

Eigen::VectorXd mean_psi(
    const std::function<void(const Eigen::VectorXd&, Eigen::Index, Eigen::Ref<Eigen::VectorXd>)>&
        psi,
    const Eigen::VectorXd& theta, Eigen::Index n, Eigen::Index k) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd buf(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        psi(theta, i, buf);
        sum += buf;
    }
    return sum / static_cast<double>(n);
}

}  // namespace

Eigen::MatrixXd stacked_sandwich(
    const std::function<void(const Eigen::VectorXd&, Eigen::Index, Eigen::Ref<Eigen::VectorXd>)>&
        psi,
    const Eigen::VectorXd& theta_hat, Eigen::Index n, double fd_step, double psd_tol) {
    const Eigen::Index k = theta_hat.size();

    // B = Pn[psi psi']
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd buf(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        psi(theta_hat, i, buf);
        B.selfadjointView<Eigen::Lower>().rankUpdate(buf);
    }
    B = Eigen::MatrixXd(B.selfadjointView<Eigen::Lower>()) / static_cast<double>(n);

    // A = d/dtheta' Pn[psi], central differences
    Eigen::MatrixXd A(k, k);
    Eigen::VectorXd t = theta_hat;
    for (Eigen::Index j = 0; j < k; ++j) {
        const double h = fd_step * std::max(1.0, std::abs(theta_hat[j]));
        t[j] = theta_hat[j] + h;
        const Eigen::VectorXd fp = mean_psi(psi, t, n, k);
        t[j] = theta_hat[j] - h;
        const Eigen::VectorXd fm = mean_psi(psi, t, n, k);
        t[j] = theta_hat[j];
        A.col(j) = (fp - fm) / (2 * h);
    }
    if (!A.allFinite()) throw NumericalError("variance not estimable");

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw NumericalError("variance not estimable");
    const Eigen::MatrixXd Ainv_B = lu.solve(B);
    Eigen::MatrixXd cov =
        lu.solve(Ainv_B.transpose()).transpose() / static_cast<double>(n);  // A^-1 B A^-T / n
    cov = 0.5 * (cov + cov.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    const double max_eig = eig.eigenvalues().maxCoeff();
    if (eig.eigenvalues().minCoeff() < -psd_tol * std::max(1.0, max_eig))
        throw NumericalError("variance not estimable: covariance not PSD");
    return cov;
}

}  // namespace proxmsm
