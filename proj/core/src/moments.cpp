#include "proxmsm/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "proxmsm/errors.hpp"

namespace proxmsm {

void SolverConfig::validate() const {
    if (!(tol > 0)) throw ValidationError("solver tolerance must be positive");
    if (max_iterations < 1) throw ValidationError("solver max_iterations must be >= 1");
    if (!(damping > 0 && damping < 1)) throw ValidationError("damping factor must be in (0,1)");
}

Eigen::VectorXd MomentSystem::mean_moment(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd buf(dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        moment(theta, i, buf);
        sum += buf;
    }
    return sum / static_cast<double>(n);
}

namespace {

bool try_mean(const MomentSystem& sys, const Eigen::VectorXd& theta, Eigen::VectorXd& out) {
    try {
        out = sys.mean_moment(theta);
    } catch (const PredictorOverflow&) {
        return false;
    }
    return out.allFinite();
}

bool jacobian_at(const MomentSystem& sys, const SolverConfig& cfg, const Eigen::VectorXd& theta,
                 Eigen::MatrixXd& J) {
    if (cfg.jacobian == JacobianMode::Analytic && sys.mean_jacobian) {
        try {
            sys.mean_jacobian(theta, J);
        } catch (const PredictorOverflow&) {
            return false;
        }
        return J.allFinite();
    }
    Eigen::VectorXd fp(sys.dim), fm(sys.dim);
    Eigen::VectorXd t = theta;
    for (int j = 0; j < sys.dim; ++j) {
        const double h = cfg.fd_step;
        t[j] = theta[j] + h;
        if (!try_mean(sys, t, fp)) return false;
        t[j] = theta[j] - h;
        if (!try_mean(sys, t, fm)) return false;
        t[j] = theta[j];
        J.col(j) = (fp - fm) / (2 * h);
    }
    return J.allFinite();
}

NewtonResult newton_attempt(const MomentSystem& sys, const SolverConfig& cfg,
                            const Eigen::VectorXd& start) {
    NewtonResult res;
    res.theta = start;

    Eigen::VectorXd f(sys.dim);
    if (!try_mean(sys, res.theta, f)) {
        res.final_norm = std::numeric_limits<double>::infinity();
        res.message = "q-bridge numerically unstable";
        return res;
    }
    double norm = f.lpNorm<Eigen::Infinity>();
    double merit = 0.5 * f.squaredNorm();

    Eigen::MatrixXd J(sys.dim, sys.dim);
    int slow_iters = 0;
    for (int iter = 0; iter < cfg.max_iterations && norm > cfg.tol; ++iter) {
        ++res.iterations;
        const double merit_before = merit;
        if (!jacobian_at(sys, cfg, res.theta, J)) {
            res.message = "q-bridge numerically unstable";
            break;
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
        Eigen::VectorXd dx = -lu.solve(f);
        const Eigen::VectorXd grad = J.transpose() * f;  // gradient of the merit function
        double slope = grad.dot(dx);
        if (!dx.allFinite() || slope >= 0) {
            // Newton direction unusable; descend the merit function directly.
            dx = -grad;
            slope = -grad.squaredNorm();
            if (!(slope < 0)) {
                res.message = "stationary point of the moment norm";
                break;
            }
        }

        // Armijo backtracking on 0.5 ||F||^2.
        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd f_try(sys.dim);
        for (int h = 0; h <= cfg.max_halvings; ++h) {
            const Eigen::VectorXd x_try = res.theta + step * dx;
            if (try_mean(sys, x_try, f_try)) {
                const double m_try = 0.5 * f_try.squaredNorm();
                if (m_try <= merit + 1e-4 * step * slope) {
                    res.theta = x_try;
                    f = f_try;
                    merit = m_try;
                    norm = f.lpNorm<Eigen::Infinity>();
                    accepted = true;
                    break;
                }
            }
            step *= cfg.damping;
        }

        if (!accepted) {
            // Levenberg-Marquardt fallback: damp toward the gradient direction until the
            // merit function decreases. Fails only near a stationary point of the merit.
            const Eigen::MatrixXd JtJ = J.transpose() * J;
            double lambda = 1e-4 * std::max(JtJ.diagonal().maxCoeff(), 1e-12);
            for (int t = 0; t < 24; ++t) {
                Eigen::MatrixXd damped = JtJ;
                damped.diagonal().array() += lambda;
                const Eigen::VectorXd dlm = damped.llt().solve(-grad);
                const Eigen::VectorXd x_try = res.theta + dlm;
                if (dlm.allFinite() && try_mean(sys, x_try, f_try)) {
                    const double m_try = 0.5 * f_try.squaredNorm();
                    if (m_try < merit) {
                        res.theta = x_try;
                        f = f_try;
                        merit = m_try;
                        norm = f.lpNorm<Eigen::Infinity>();
                        accepted = true;
                        break;
                    }
                }
                lambda *= 10;
            }
        }
        if (!accepted) {
            res.message = "line search stalled";
            break;
        }
        // Repeated negligible progress means a stationary point of the merit with
        // F != 0; no root is reachable from here.
        if (merit_before - merit <= 1e-9 * (1.0 + merit_before)) {
            if (++slow_iters >= 3 && norm > cfg.tol) {
                res.message = "stalled: no further progress";
                break;
            }
        } else {
            slow_iters = 0;
        }
    }

    res.final_norm = norm;
    res.converged = norm <= cfg.tol;
    if (res.converged) res.message.clear();
    return res;
}

}  // namespace

NewtonResult solve_newton(const MomentSystem& system, const SolverConfig& config,
                          const Eigen::VectorXd& theta0) {
    config.validate();
    const Eigen::VectorXd start =
        theta0.size() ? theta0 : Eigen::VectorXd::Zero(system.dim).eval();

    NewtonResult best = newton_attempt(system, config, start);
    if (best.converged) return best;

    // Deterministic restarts; the fixed seed keeps fits reproducible. A run of
    // restarts that stops improving the best norm signals a rootless sample moment
    // system, so give up early rather than exhaust the budget. The moment systems can
    // have multiple roots; among converged restarts the smallest-coefficient root is
    // returned, since it produces the most regular weights.
    std::mt19937_64 rng(0x9E3779B97F4A7C15ull);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    int no_improvement = 0;
    int extra_after_converged = 0;
    NewtonResult best_root;
    SolverConfig restart_cfg = config;
    restart_cfg.max_iterations = std::min(config.max_iterations, 40);
    for (int r = 1; r <= config.random_restarts && no_improvement < 6; ++r) {
        Eigen::VectorXd x0(system.dim);
        for (int j = 0; j < system.dim; ++j) x0[j] = unif(rng);
        NewtonResult attempt = newton_attempt(system, restart_cfg, x0);
        attempt.restarts_used = r;
        attempt.iterations += best.iterations;
        if (attempt.converged) {
            if (!best_root.converged ||
                attempt.theta.lpNorm<Eigen::Infinity>() <
                    best_root.theta.lpNorm<Eigen::Infinity>())
                best_root = attempt;
            if (++extra_after_converged >= 4) break;
            continue;
        }
        if (best_root.converged) {
            if (++extra_after_converged >= 4) break;
            continue;
        }
        if (attempt.final_norm < 0.9 * best.final_norm) {
            no_improvement = 0;
            best = attempt;
        } else {
            ++no_improvement;
        }
    }
    return best_root.converged ? best_root : best;
}

Eigen::VectorXd solve_cross_moment(const Eigen::MatrixXd& G, const Eigen::VectorXd& rhs,
                                   const std::string& context, double cond_limit) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
    if (!(smin > 0) || smax / smin > cond_limit) throw NumericalError(context);
    return svd.solve(rhs);
}

Eigen::VectorXd linear_moment_solve(const Eigen::MatrixXd& instruments,
                                    const Eigen::MatrixXd& regressors,
                                    const Eigen::VectorXd& targets, const std::string& context,
                                    double cond_limit) {
    const double n = static_cast<double>(instruments.rows());
    const Eigen::MatrixXd G = instruments.transpose() * regressors / n;
    const Eigen::VectorXd rhs = instruments.transpose() * targets / n;
    return solve_cross_moment(G, rhs, context, cond_limit);
}

}  // namespace proxmsm
