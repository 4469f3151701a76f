#include "proxmsm/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "proxmsm/errors.hpp"
#include "proxmsm/sandwich.hpp"

namespace proxmsm {

std::string estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::POR: return "POR";
        case EstimatorKind::PIPW: return "PIPW";
        case EstimatorKind::PDR: return "PDR";
        case EstimatorKind::DRSRA: return "DR-SRA";
    }
    return "?";
}

namespace {

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

Eigen::VectorXd v_row(const PanelDataset& data, Eigen::Index i) {
    return data.v().row(i).transpose();
}

// Per-regime design and index vectors, cached as n x p matrices.
struct DesignCache {
    std::vector<TreatmentRegime> regimes;
    std::vector<Eigen::MatrixXd> design;  // per regime
    std::vector<Eigen::MatrixXd> index;   // d(regime, v)
    int p = 0;
};

DesignCache build_design_cache(const PanelDataset& data, const MsmmSpec& spec,
                               const std::optional<IndexFunction>& d_opt) {
    DesignCache c;
    c.p = spec.p;
    c.regimes = spec.support.regimes();
    const auto& d_fn = d_opt ? d_opt->d : spec.design;
    for (const auto& r : c.regimes) {
        Eigen::MatrixXd g(data.n(), spec.p), dd(data.n(), spec.p);
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const Eigen::VectorXd vi = v_row(data, i);
            g.row(i) = msmm_design(spec, r, vi).transpose();
            Eigen::VectorXd di = d_fn(r, vi);
            if (di.size() != spec.p) throw ValidationError("index function d has wrong dimension");
            dd.row(i) = di.transpose();
        }
        c.design.push_back(std::move(g));
        c.index.push_back(std::move(dd));
    }
    return c;
}

// Solves sum_r Pn[d_r design_r'] beta = Pn[rhs] for the affine estimating equations.
Eigen::VectorXd solve_msmm(const DesignCache& c, const Eigen::MatrixXd& weighted_rhs_sum,
                           Eigen::Index n) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(c.p, c.p);
    for (std::size_t r = 0; r < c.regimes.size(); ++r) G += c.index[r].transpose() * c.design[r];
    G /= static_cast<double>(n);
    return solve_cross_moment(G, weighted_rhs_sum / static_cast<double>(n),
                              "MSMM not identified by support and d");
}

void finalize(EstimateReport& report, const Eigen::MatrixXd& cov_full, int p) {
    const Eigen::Index off = cov_full.rows() - p;
    report.cov = cov_full.block(off, off, p, p);
    report.se = report.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    report.ci95.resize(p, 2);
    report.ci95.col(0) = report.beta_hat - 1.96 * report.se;
    report.ci95.col(1) = report.beta_hat + 1.96 * report.se;
}

double quantile_upper(std::vector<double> v, double q) {
    const std::size_t idx = std::min(
        v.size() - 1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
    return v[idx];
}

}  // namespace

EstimateReport estimate_por(const PanelDataset& data, const HBridgeFit& h, const MsmmSpec& spec,
                            const std::optional<IndexFunction>& d_opt) {
    const Eigen::Index n = data.n();
    const DesignCache cache = build_design_cache(data, spec, d_opt);

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(spec.p);
    for (std::size_t r = 0; r < cache.regimes.size(); ++r)
        for (Eigen::Index i = 0; i < n; ++i)
            rhs += cache.index[r].row(i).transpose() * h0_value(h, data, i, cache.regimes[r]);

    EstimateReport report;
    report.estimator = EstimatorKind::POR;
    report.n = n;
    report.beta_hat = solve_msmm(cache, rhs, n);
    report.diag.h_converged = h.converged1 && h.converged0;
    report.diag.h_resid = std::max(h.resid1, h.resid0);
    if (!report.diag.h_converged) report.diag.flags.push_back("h-bridge not converged");

    const int k1 = h1_dim(data), k0 = h0_dim(data), p = spec.p;
    Eigen::VectorXd theta(k1 + k0 + p);
    theta << h.b1, h.b0, report.beta_hat;
    auto psi = [&](const Eigen::VectorXd& th, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
        const auto b1 = th.segment(0, k1);
        const auto b0 = th.segment(k1, k0);
        const auto beta = th.segment(k1 + k0, p);
        h1_moment(b1, data, i, out.segment(0, k1));
        h0_moment(b1, b0, data, i, out.segment(k1, k0));
        out.segment(k1 + k0, p).setZero();
        for (std::size_t r = 0; r < cache.regimes.size(); ++r) {
            const double resid = h0_eval_raw(b0, data, i, cache.regimes[r]) -
                                 cache.design[r].row(i).dot(beta);
            out.segment(k1 + k0, p) += cache.index[r].row(i).transpose() * resid;
        }
    };
    finalize(report, stacked_sandwich(psi, theta, n), p);
    return report;
}

EstimateReport estimate_pipw(const PanelDataset& data, const QBridgeFit& q, const MsmmSpec& spec,
                             const std::optional<IndexFunction>& d_opt) {
    const Eigen::Index n = data.n();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!spec.support.contains(data.regime(i))) throw ValidationError("regime outside support");

    const auto& d_fn = d_opt ? d_opt->d : spec.design;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(spec.p, spec.p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(spec.p);
    Eigen::MatrixXd d_obs(n, spec.p), g_obs(n, spec.p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd vi = v_row(data, i);
        const TreatmentRegime r = data.regime(i);
        d_obs.row(i) = d_fn(r, vi).transpose();
        g_obs.row(i) = msmm_design(spec, r, vi).transpose();
        const double w = q1_value(q, data, i, r);
        G += w * d_obs.row(i).transpose() * g_obs.row(i);
        rhs += w * data.y()[i] * d_obs.row(i).transpose();
    }
    G /= static_cast<double>(n);

    EstimateReport report;
    report.estimator = EstimatorKind::PIPW;
    report.n = n;
    report.beta_hat = solve_cross_moment(G, rhs / static_cast<double>(n),
                                         "MSMM not identified by support and d");
    report.diag.q_converged = q.converged0 && q.converged1;
    report.diag.q_norm = std::max(q.norm0, q.norm1);
    report.diag.q0_iterations = q.iterations0;
    report.diag.q1_iterations = q.iterations1;
    if (!report.diag.q_converged) report.diag.flags.push_back("q-bridge not converged");

    const int kq0 = q0_dim(data), kq1 = q1_dim(data), p = spec.p;
    Eigen::VectorXd theta(kq0 + kq1 + p);
    theta << q.t0, q.t1, report.beta_hat;
    auto psi = [&](const Eigen::VectorXd& th, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
        const auto t0 = th.segment(0, kq0);
        const auto t1 = th.segment(kq0, kq1);
        const auto beta = th.segment(kq0 + kq1, p);
        q0_moment(t0, data, i, out.segment(0, kq0));
        q1_moment(t0, t1, data, i, out.segment(kq0, kq1));
        const double w = q1_eval_raw(t0, t1, data, i, data.regime(i));
        out.segment(kq0 + kq1, p) =
            d_obs.row(i).transpose() * (w * (data.y()[i] - g_obs.row(i).dot(beta)));
    };
    finalize(report, stacked_sandwich(psi, theta, n), p);
    return report;
}

EstimateReport estimate_pdr(const PanelDataset& h_data, const HBridgeFit& h,
                            const PanelDataset& q_data, const QBridgeFit& q,
                            const MsmmSpec& spec, const std::optional<IndexFunction>& d_opt) {
    if (h_data.n() != q_data.n()) throw ValidationError("h and q views must be record-aligned");
    const Eigen::Index n = h_data.n();
    const DesignCache cache = build_design_cache(h_data, spec, d_opt);

    // Xi(beta)_r = 1(A=r) Q1(r) [Y - H1(r)] + 1(a0=r.a0) Q0(r.a0) [H1(r) - H0(r)]
    //            + H0(r) - design.beta
    auto xi_no_g = [&](const Eigen::VectorXd& b1, const Eigen::VectorXd& b0,
                       const Eigen::VectorXd& t0, const Eigen::VectorXd& t1, Eigen::Index i,
                       const TreatmentRegime& r) {
        const double h0v = h0_eval_raw(b0, h_data, i, r);
        double xi = h0v;
        if (h_data.a0()[i] == r.a0) {
            const double h1v = h1_eval_raw(b1, h_data, i, r);
            xi += q0_eval_raw(t0, q_data, i, r.a0) * (h1v - h0v);
            if (h_data.a1()[i] == r.a1)
                xi += q1_eval_raw(t0, t1, q_data, i, r) * (h_data.y()[i] - h1v);
        }
        return xi;
    };

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(spec.p);
    for (std::size_t r = 0; r < cache.regimes.size(); ++r)
        for (Eigen::Index i = 0; i < n; ++i)
            rhs += cache.index[r].row(i).transpose() *
                   xi_no_g(h.b1, h.b0, q.t0, q.t1, i, cache.regimes[r]);

    EstimateReport report;
    report.estimator = EstimatorKind::PDR;
    report.n = n;
    report.beta_hat = solve_msmm(cache, rhs, n);
    report.diag.h_converged = h.converged1 && h.converged0;
    report.diag.q_converged = q.converged0 && q.converged1;
    report.diag.h_resid = std::max(h.resid1, h.resid0);
    report.diag.q_norm = std::max(q.norm0, q.norm1);
    report.diag.q0_iterations = q.iterations0;
    report.diag.q1_iterations = q.iterations1;
    if (!report.diag.h_converged) report.diag.flags.push_back("h-bridge not converged");
    if (!report.diag.q_converged) report.diag.flags.push_back("q-bridge not converged");

    const int k1 = h1_dim(h_data), k0 = h0_dim(h_data);
    const int kq0 = q0_dim(q_data), kq1 = q1_dim(q_data), p = spec.p;
    Eigen::VectorXd theta(k1 + k0 + kq0 + kq1 + p);
    theta << h.b1, h.b0, q.t0, q.t1, report.beta_hat;
    auto psi = [&](const Eigen::VectorXd& th, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
        const auto b1 = th.segment(0, k1);
        const auto b0 = th.segment(k1, k0);
        const auto t0 = th.segment(k1 + k0, kq0);
        const auto t1 = th.segment(k1 + k0 + kq0, kq1);
        const auto beta = th.segment(k1 + k0 + kq0 + kq1, p);
        h1_moment(b1, h_data, i, out.segment(0, k1));
        h0_moment(b1, b0, h_data, i, out.segment(k1, k0));
        q0_moment(t0, q_data, i, out.segment(k1 + k0, kq0));
        q1_moment(t0, t1, q_data, i, out.segment(k1 + k0 + kq0, kq1));
        auto mb = out.segment(k1 + k0 + kq0 + kq1, p);
        mb.setZero();
        for (std::size_t r = 0; r < cache.regimes.size(); ++r) {
            const double xi = xi_no_g(b1, b0, t0, t1, i, cache.regimes[r]) -
                              cache.design[r].row(i).dot(beta);
            mb += cache.index[r].row(i).transpose() * xi;
        }
    };
    finalize(report, stacked_sandwich(psi, theta, n), p);
    return report;
}

namespace {

// Feature rows for the sequential-randomization comparator.
struct SraFeatures {
    Eigen::MatrixXd phi0;   // (1, x0v, z0, w0)
    int c0 = 0;
    int c1 = 0;             // phi1(a0) = (1, a0, x0v, x1, z0, z1, w0, w1)
    int cy = 0;             // phiy(a0, a1) = (1, a0, a1, <same covariates>)
    Eigen::MatrixXd covs1;  // (x0v, x1, z0, z1, w0, w1)
};

SraFeatures build_sra_features(const PanelDataset& d) {
    SraFeatures f;
    const Eigen::MatrixXd& x0v = d.x0v();
    const Eigen::Index n = d.n();
    f.phi0.resize(n, 1 + x0v.cols() + d.z0().cols() + d.w0().cols());
    f.phi0 << Eigen::VectorXd::Ones(n), x0v, d.z0(), d.w0();
    f.covs1.resize(n, x0v.cols() + d.x1().cols() + d.z0().cols() + d.z1().cols() +
                          d.w0().cols() + d.w1().cols());
    f.covs1 << x0v, d.x1(), d.z0(), d.z1(), d.w0(), d.w1();
    f.c0 = static_cast<int>(f.phi0.cols());
    f.c1 = static_cast<int>(2 + f.covs1.cols());
    f.cy = static_cast<int>(3 + f.covs1.cols());
    return f;
}

void phi1_at(const SraFeatures& f, Eigen::Index i, double a0, Eigen::Ref<Eigen::VectorXd> out) {
    out[0] = 1.0;
    out[1] = a0;
    out.tail(f.covs1.cols()) = f.covs1.row(i);
}

void phiy_at(const SraFeatures& f, Eigen::Index i, double a0, double a1,
             Eigen::Ref<Eigen::VectorXd> out) {
    out[0] = 1.0;
    out[1] = a0;
    out[2] = a1;
    out.tail(f.covs1.cols()) = f.covs1.row(i);
}

Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                             const SolverConfig& config) {
    MomentSystem sys;
    sys.dim = static_cast<int>(X.cols());
    sys.n = X.rows();
    sys.moment = [&](const Eigen::VectorXd& a, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
        out = X.row(i).transpose() * (y[i] - sigmoid(X.row(i).dot(a)));
    };
    sys.mean_jacobian = [&](const Eigen::VectorXd& a, Eigen::Ref<Eigen::MatrixXd> J) {
        J.setZero();
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double p = sigmoid(X.row(i).dot(a));
            J -= p * (1 - p) * X.row(i).transpose() * X.row(i);
        }
        J /= static_cast<double>(X.rows());
    };
    const NewtonResult res = solve_newton(sys, config);
    if (!res.converged) throw NumericalError("propensity fit non-convergence");
    return res.theta;
}

Eigen::VectorXd fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const std::string& context) {
    return linear_moment_solve(X, X, y, context);
}

}  // namespace

EstimateReport estimate_dr_sra(const PanelDataset& data, const MsmmSpec& spec,
                               const std::optional<IndexFunction>& d_opt,
                               const DrSraConfig& config) {
    const Eigen::Index n = data.n();
    const SraFeatures f = build_sra_features(data);
    const DesignCache cache = build_design_cache(data, spec, d_opt);
    const std::size_t R = cache.regimes.size();

    // Nuisances: propensities at both occasions, outcome regression, and one
    // sequential regression per regime on the matching first-occasion arm.
    const Eigen::VectorXd alpha0 = fit_logistic(f.phi0, data.a0(), config.logistic);

    Eigen::MatrixXd X1(n, f.c1);
    Eigen::VectorXd rowbuf(f.cy);
    for (Eigen::Index i = 0; i < n; ++i) {
        phi1_at(f, i, data.a0()[i], rowbuf.head(f.c1));
        X1.row(i) = rowbuf.head(f.c1).transpose();
    }
    const Eigen::VectorXd alpha1 = fit_logistic(X1, data.a1(), config.logistic);

    Eigen::MatrixXd Xy(n, f.cy);
    for (Eigen::Index i = 0; i < n; ++i) {
        phiy_at(f, i, data.a0()[i], data.a1()[i], rowbuf);
        Xy.row(i) = rowbuf.transpose();
    }
    const Eigen::VectorXd gamma1 = fit_ols(Xy, data.y(), "DR-SRA outcome regression singular");

    Eigen::VectorXd gamma0(static_cast<Eigen::Index>(R) * f.c0);  // per-regime blocks
    Eigen::VectorXd phiy_buf(f.cy);
    for (std::size_t r = 0; r < R; ++r) {
        const TreatmentRegime reg = cache.regimes[r];
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(f.c0, f.c0);
        Eigen::VectorXd rhs0 = Eigen::VectorXd::Zero(f.c0);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (data.a0()[i] != reg.a0) continue;
            phiy_at(f, i, reg.a0, reg.a1, phiy_buf);
            G += f.phi0.row(i).transpose() * f.phi0.row(i);
            rhs0 += f.phi0.row(i).transpose() * gamma1.dot(phiy_buf);
        }
        gamma0.segment(static_cast<Eigen::Index>(r) * f.c0, f.c0) =
            solve_cross_moment(G / static_cast<double>(n), rhs0 / static_cast<double>(n),
                               "DR-SRA sequential regression singular");
    }

    // Truncation caps from the weights at the observed treatments.
    std::vector<double> w1obs(n), w0obs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p0 = sigmoid(f.phi0.row(i).dot(alpha0));
        const double pi0 = data.a0()[i] == 1 ? p0 : 1 - p0;
        const double p1 = sigmoid(X1.row(i).dot(alpha1));
        const double pi1 = data.a1()[i] == 1 ? p1 : 1 - p1;
        w0obs[i] = 1.0 / pi0;
        w1obs[i] = 1.0 / (pi0 * pi1);
    }
    const double cap0 = quantile_upper(w0obs, config.weight_truncation_quantile);
    const double cap1 = quantile_upper(w1obs, config.weight_truncation_quantile);
    int truncated = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        truncated += (w0obs[i] > cap0 ? 1 : 0) + (w1obs[i] > cap1 ? 1 : 0);

    // AIPW residual with the SRA bridges; caps stay frozen inside the sandwich.
    Eigen::VectorXd ybuf(f.cy), x1buf(f.c1);
    auto xi_no_g = [&](const auto& a0c, const auto& a1c, const auto& g1, const auto& g0flat,
                       Eigen::Index i, std::size_t r) {
        const TreatmentRegime reg = cache.regimes[r];
        phiy_at(f, i, reg.a0, reg.a1, ybuf);
        const double q1bar = g1.dot(ybuf);
        const double q0bar =
            g0flat.segment(static_cast<Eigen::Index>(r) * f.c0, f.c0).dot(f.phi0.row(i));
        double xi = q0bar;
        if (data.a0()[i] == reg.a0) {
            const double p0 = sigmoid(f.phi0.row(i).dot(a0c));
            const double pi0 = reg.a0 == 1 ? p0 : 1 - p0;
            xi += std::min(1.0 / pi0, cap0) * (q1bar - q0bar);
            if (data.a1()[i] == reg.a1) {
                phi1_at(f, i, reg.a0, x1buf);
                const double p1 = sigmoid(x1buf.dot(a1c));
                const double pi1 = reg.a1 == 1 ? p1 : 1 - p1;
                xi += std::min(1.0 / (pi0 * pi1), cap1) * (data.y()[i] - q1bar);
            }
        }
        return xi;
    };

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(spec.p);
    for (std::size_t r = 0; r < R; ++r)
        for (Eigen::Index i = 0; i < n; ++i)
            rhs += cache.index[r].row(i).transpose() * xi_no_g(alpha0, alpha1, gamma1, gamma0, i, r);

    EstimateReport report;
    report.estimator = EstimatorKind::DRSRA;
    report.n = n;
    report.beta_hat = solve_msmm(cache, rhs, n);
    report.diag.truncated_weights = truncated;

    const int p = spec.p;
    const Eigen::Index g0len = static_cast<Eigen::Index>(R) * f.c0;
    Eigen::VectorXd theta(f.c0 + f.c1 + f.cy + g0len + p);
    theta << alpha0, alpha1, gamma1, gamma0, report.beta_hat;

    auto psi = [&](const Eigen::VectorXd& th, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
        Eigen::Index off = 0;
        const auto a0c = th.segment(off, f.c0);
        off += f.c0;
        const auto a1c = th.segment(off, f.c1);
        off += f.c1;
        const auto g1 = th.segment(off, f.cy);
        off += f.cy;
        const auto g0flat = th.segment(off, g0len);
        off += g0len;
        const auto beta = th.segment(off, p);

        Eigen::Index o = 0;
        out.segment(o, f.c0) =
            f.phi0.row(i).transpose() * (data.a0()[i] - sigmoid(f.phi0.row(i).dot(a0c)));
        o += f.c0;
        out.segment(o, f.c1) =
            X1.row(i).transpose() * (data.a1()[i] - sigmoid(X1.row(i).dot(a1c)));
        o += f.c1;
        out.segment(o, f.cy) = Xy.row(i).transpose() * (data.y()[i] - Xy.row(i).dot(g1));
        o += f.cy;
        for (std::size_t r = 0; r < R; ++r) {
            const TreatmentRegime reg = cache.regimes[r];
            if (data.a0()[i] == reg.a0) {
                phiy_at(f, i, reg.a0, reg.a1, ybuf);
                out.segment(o, f.c0) =
                    f.phi0.row(i).transpose() *
                    (g1.dot(ybuf) -
                     f.phi0.row(i).dot(g0flat.segment(static_cast<Eigen::Index>(r) * f.c0, f.c0)));
            } else {
                out.segment(o, f.c0).setZero();
            }
            o += f.c0;
        }
        auto mb = out.segment(o, p);
        mb.setZero();
        for (std::size_t r = 0; r < R; ++r) {
            const double xi =
                xi_no_g(a0c, a1c, g1, g0flat, i, r) - cache.design[r].row(i).dot(beta);
            mb += cache.index[r].row(i).transpose() * xi;
        }
    };
    finalize(report, stacked_sandwich(psi, theta, n), p);
    return report;
}

}  // namespace proxmsm
