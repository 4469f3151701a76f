#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

#include "proxmsm/errors.hpp"

namespace proxmsm {

enum class JacobianMode { Analytic, CentralDiff };

struct SolverConfig {
    int max_iterations = 100;
    double tol = 1e-10;          // convergence on ||Pn[moment]||_inf
    double damping = 0.5;        // step-halving factor
    int max_halvings = 30;
    JacobianMode jacobian = JacobianMode::Analytic;
    double fd_step = 1e-6;
    int random_restarts = 20;    // uniform on [-1,1]^k, deterministic
    double predictor_guard = 30; // |linear predictor| cap inside exp-family moments

    void validate() const;
};

// Just-identified sample moment system: theta has dim k and the estimating equation is
// Pn[moment(theta, record)] = 0. moment() may throw PredictorOverflow to signal the
// guard; the solver treats such trial points as rejected, and anywhere else the
// overflow surfaces as an ordinary numerical error.
struct PredictorOverflow : NumericalError {
    PredictorOverflow() : NumericalError("q-bridge numerically unstable") {}
};

struct MomentSystem {
    int dim = 0;
    Eigen::Index n = 0;
    // writes the k moments of record i at theta into out
    std::function<void(const Eigen::VectorXd& theta, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out)>
        moment;
    // optional analytic Jacobian of the mean moment; if absent central differences are used
    std::function<void(const Eigen::VectorXd& theta, Eigen::Ref<Eigen::MatrixXd> out)> mean_jacobian;

    Eigen::VectorXd mean_moment(const Eigen::VectorXd& theta) const;
};

struct NewtonResult {
    Eigen::VectorXd theta;
    bool converged = false;
    int iterations = 0;
    int restarts_used = 0;
    double final_norm = 0;
    std::string message;
};

// Damped Newton from theta0 (default zero), with deterministic random restarts if the
// initial attempt diverges. Never throws on non-convergence; inspect `converged`.
NewtonResult solve_newton(const MomentSystem& system, const SolverConfig& config,
                          const Eigen::VectorXd& theta0 = Eigen::VectorXd());

// Just-identified linear GMM: solves Pn[m (y - phi'b)] = 0, i.e. Pn[m phi'] b = Pn[m y].
// Throws NumericalError(context + ...) if the cross-moment matrix has condition number
// above cond_limit.
Eigen::VectorXd linear_moment_solve(const Eigen::MatrixXd& instruments,
                                    const Eigen::MatrixXd& regressors,
                                    const Eigen::VectorXd& targets,
                                    const std::string& context,
                                    double cond_limit = 1e12);

// Solves G b = rhs with the same conditioning check; G is an already-averaged
// cross-moment matrix.
Eigen::VectorXd solve_cross_moment(const Eigen::MatrixXd& G, const Eigen::VectorXd& rhs,
                                   const std::string& context, double cond_limit = 1e12);

}  // namespace proxmsm
