#include "proxmsm/bridges.hpp"

#include <cmath>

#include "proxmsm/errors.hpp"

namespace proxmsm {

namespace {

void check_proxy_dims(const PanelDataset& d) {
    if (d.z0().cols() != d.w0().cols() || d.z1().cols() != d.w1().cols())
        throw ValidationError(
            "just-identified bridge systems require dim z0 == dim w0 and dim z1 == dim w1");
}

inline double sign_of(int a) { return a == 1 ? 1.0 : -1.0; }  // (-1)^(1-a)

// Row builders. All x-slots use x0 with v appended.
void m1_row(const PanelDataset& d, Eigen::Index i, const Eigen::MatrixXd& x0v,
            Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index k = 0;
    out[k++] = 1.0;
    out[k++] = d.a0()[i];
    out[k++] = d.a1()[i];
    out.segment(k, d.z0().cols()) = d.z0().row(i);
    k += d.z0().cols();
    out.segment(k, d.z1().cols()) = d.z1().row(i);
    k += d.z1().cols();
    out.segment(k, x0v.cols()) = x0v.row(i);
    k += x0v.cols();
    out.segment(k, d.x1().cols()) = d.x1().row(i);
}

void phi1_row(const PanelDataset& d, Eigen::Index i, const Eigen::MatrixXd& x0v, int a0, int a1,
              Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index k = 0;
    out[k++] = 1.0;
    out[k++] = a0;
    out[k++] = a1;
    out.segment(k, d.w0().cols()) = d.w0().row(i);
    k += d.w0().cols();
    out.segment(k, d.w1().cols()) = d.w1().row(i);
    k += d.w1().cols();
    out.segment(k, x0v.cols()) = x0v.row(i);
    k += x0v.cols();
    out.segment(k, d.x1().cols()) = d.x1().row(i);
}

void m0_row(const PanelDataset& d, Eigen::Index i, const Eigen::MatrixXd& x0v,
            Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index k = 0;
    out[k++] = 1.0;
    out[k++] = d.a0()[i];
    out.segment(k, d.z0().cols()) = d.z0().row(i);
    k += d.z0().cols();
    out.segment(k, x0v.cols()) = x0v.row(i);
}

void phi0_row(const PanelDataset& d, Eigen::Index i, const Eigen::MatrixXd& x0v, double a0,
              double a1, Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index k = 0;
    out[k++] = 1.0;
    out[k++] = a0;
    out[k++] = a1;
    out.segment(k, d.w0().cols()) = d.w0().row(i);
    k += d.w0().cols();
    out.segment(k, x0v.cols()) = x0v.row(i);
}

double dot_xi0(const Eigen::VectorXd& t0, const PanelDataset& d, Eigen::Index i,
               const Eigen::MatrixXd& x0v, int a0) {
    Eigen::Index k = 0;
    double s = t0[k++];
    s += t0[k++] * a0;
    for (Eigen::Index j = 0; j < d.z0().cols(); ++j) s += t0[k++] * d.z0()(i, j);
    for (Eigen::Index j = 0; j < x0v.cols(); ++j) s += t0[k++] * x0v(i, j);
    return s;
}

double dot_xi1(const Eigen::VectorXd& t1, const PanelDataset& d, Eigen::Index i,
               const Eigen::MatrixXd& x0v, int a0, int a1) {
    Eigen::Index k = 0;
    double s = t1[k++];
    s += t1[k++] * a0;
    s += t1[k++] * a1;
    for (Eigen::Index j = 0; j < d.z0().cols(); ++j) s += t1[k++] * d.z0()(i, j);
    for (Eigen::Index j = 0; j < d.z1().cols(); ++j) s += t1[k++] * d.z1()(i, j);
    for (Eigen::Index j = 0; j < x0v.cols(); ++j) s += t1[k++] * x0v(i, j);
    for (Eigen::Index j = 0; j < d.x1().cols(); ++j) s += t1[k++] * d.x1()(i, j);
    return s;
}

void n0raw_row(const PanelDataset& d, Eigen::Index i, const Eigen::MatrixXd& x0v,
               Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index k = 0;
    out[k++] = 1.0;
    out[k++] = d.a0()[i];
    out.segment(k, d.w0().cols()) = d.w0().row(i);
    k += d.w0().cols();
    out.segment(k, x0v.cols()) = x0v.row(i);
}

void n1raw_row(const PanelDataset& d, Eigen::Index i, const Eigen::MatrixXd& x0v,
               Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index k = 0;
    out[k++] = 1.0;
    out[k++] = d.a0()[i];
    out[k++] = d.a1()[i];
    out.segment(k, d.w0().cols()) = d.w0().row(i);
    k += d.w0().cols();
    out.segment(k, d.w1().cols()) = d.w1().row(i);
    k += d.w1().cols();
    out.segment(k, x0v.cols()) = x0v.row(i);
    k += x0v.cols();
    out.segment(k, d.x1().cols()) = d.x1().row(i);
}

constexpr double kPredictorGuard = 30.0;

double guarded_exp(double s) {
    if (std::abs(s) > kPredictorGuard) throw PredictorOverflow{};
    return std::exp(s);
}

double h_eval(const Eigen::VectorXd& b, const PanelDataset& d, Eigen::Index i,
              const TreatmentRegime& r, bool occasion1, const Eigen::MatrixXd& x0v) {
    Eigen::Index k = 0;
    double s = b[k++];
    s += b[k++] * r.a0;
    s += b[k++] * r.a1;
    for (Eigen::Index j = 0; j < d.w0().cols(); ++j) s += b[k++] * d.w0()(i, j);
    if (occasion1)
        for (Eigen::Index j = 0; j < d.w1().cols(); ++j) s += b[k++] * d.w1()(i, j);
    for (Eigen::Index j = 0; j < x0v.cols(); ++j) s += b[k++] * x0v(i, j);
    if (occasion1)
        for (Eigen::Index j = 0; j < d.x1().cols(); ++j) s += b[k++] * d.x1()(i, j);
    return s;
}

}  // namespace

int h1_dim(const PanelDataset& d) {
    return static_cast<int>(3 + d.w0().cols() + d.w1().cols() + d.x0().cols() + d.v().cols() +
                            d.x1().cols());
}
int h0_dim(const PanelDataset& d) {
    return static_cast<int>(3 + d.w0().cols() + d.x0().cols() + d.v().cols());
}
int q0_dim(const PanelDataset& d) {
    return static_cast<int>(2 + d.z0().cols() + d.x0().cols() + d.v().cols());
}
int q1_dim(const PanelDataset& d) {
    return static_cast<int>(3 + d.z0().cols() + d.z1().cols() + d.x0().cols() + d.v().cols() +
                            d.x1().cols());
}

double h1_value(const HBridgeFit& fit, const PanelDataset& d, Eigen::Index i,
                const TreatmentRegime& r) {
    return h_eval(fit.b1, d, i, r, true, d.x0v());
}

double h0_value(const HBridgeFit& fit, const PanelDataset& d, Eigen::Index i,
                const TreatmentRegime& r) {
    return h_eval(fit.b0, d, i, r, false, d.x0v());
}

double q0_value(const QBridgeFit& fit, const PanelDataset& d, Eigen::Index i, int a0) {
    return 1.0 + std::exp(sign_of(a0) * dot_xi0(fit.t0, d, i, d.x0v(), a0));
}

double q1_value(const QBridgeFit& fit, const PanelDataset& d, Eigen::Index i,
                const TreatmentRegime& r) {
    const Eigen::MatrixXd& x0v = d.x0v();
    return (1.0 + std::exp(sign_of(r.a0) * dot_xi0(fit.t0, d, i, x0v, r.a0))) *
           (1.0 + std::exp(sign_of(r.a1) * dot_xi1(fit.t1, d, i, x0v, r.a0, r.a1)));
}

HBridgeFit fit_h1(const PanelDataset& data, double cond_limit) {
    check_proxy_dims(data);
    const Eigen::Index n = data.n();
    const Eigen::MatrixXd& x0v = data.x0v();
    const int k = h1_dim(data);

    Eigen::MatrixXd M(n, k), Phi(n, k);
    Eigen::VectorXd mbuf(k), pbuf(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        m1_row(data, i, x0v, mbuf);
        phi1_row(data, i, x0v, data.a0()[i], data.a1()[i], pbuf);
        M.row(i) = mbuf.transpose();
        Phi.row(i) = pbuf.transpose();
    }

    HBridgeFit fit;
    fit.pw0 = static_cast<int>(data.w0().cols());
    fit.pw1 = static_cast<int>(data.w1().cols());
    fit.px0v = static_cast<int>(x0v.cols());
    fit.px1 = static_cast<int>(data.x1().cols());
    fit.b1 = linear_moment_solve(M, Phi, data.y(), "h1 not identified by chosen instruments",
                                 cond_limit);
    fit.resid1 = (M.transpose() * (data.y() - Phi * fit.b1) / static_cast<double>(n))
                     .lpNorm<Eigen::Infinity>();
    fit.converged1 = true;
    return fit;
}

HBridgeFit fit_h0(const PanelDataset& data, HBridgeFit fit, double cond_limit) {
    check_proxy_dims(data);
    const Eigen::Index n = data.n();
    const Eigen::MatrixXd& x0v = data.x0v();
    const int k0 = h0_dim(data);
    const int m0dim = k0 - 1;  // M0 moments; the a(1) slope supplies the last equation

    // Average of H1(a0_i, a1) over a1 in {0,1}; the stacked pair of M0 moments is
    // equivalent to this average plus exact matching of the a(1) slope.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(k0, k0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k0);
    Eigen::VectorXd m0(m0dim), phibar(k0);
    for (Eigen::Index i = 0; i < n; ++i) {
        m0_row(data, i, x0v, m0);
        phi0_row(data, i, x0v, data.a0()[i], 0.5, phibar);
        const double h1bar = 0.5 * (h_eval(fit.b1, data, i, {data.a0()[i], 0}, true, x0v) +
                                    h_eval(fit.b1, data, i, {data.a0()[i], 1}, true, x0v));
        G.topRows(m0dim) += m0 * phibar.transpose();
        rhs.head(m0dim) += m0 * h1bar;
    }
    G.topRows(m0dim) /= static_cast<double>(n);
    rhs.head(m0dim) /= static_cast<double>(n);
    G(k0 - 1, 2) = 1.0;       // b0's a1 coefficient
    rhs[k0 - 1] = fit.b1[2];  // matches b1's a1 coefficient

    fit.b0 = solve_cross_moment(G, rhs, "h0 not identified by chosen instruments", cond_limit);

    // Residual of the stacked moments at both a(1) values.
    Eigen::VectorXd stack = Eigen::VectorXd::Zero(2 * m0dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        m0_row(data, i, x0v, m0);
        for (int a1 = 0; a1 <= 1; ++a1) {
            const TreatmentRegime r{data.a0()[i], a1};
            const double diff =
                h_eval(fit.b1, data, i, r, true, x0v) - h_eval(fit.b0, data, i, r, false, x0v);
            stack.segment(a1 * m0dim, m0dim) += m0 * diff;
        }
    }
    fit.resid0 = (stack / static_cast<double>(n)).lpNorm<Eigen::Infinity>();
    fit.converged0 = true;
    return fit;
}

HBridgeFit fit_h_bridges(const PanelDataset& data, double cond_limit) {
    return fit_h0(data, fit_h1(data, cond_limit), cond_limit);
}

void h1_moment(const Eigen::VectorXd& b1, const PanelDataset& d, Eigen::Index i,
               Eigen::Ref<Eigen::VectorXd> out) {
    const Eigen::MatrixXd& x0v = d.x0v();
    m1_row(d, i, x0v, out);
    out *= d.y()[i] - h_eval(b1, d, i, {d.a0()[i], d.a1()[i]}, true, x0v);
}

void h0_moment(const Eigen::VectorXd& b1, const Eigen::VectorXd& b0, const PanelDataset& d,
               Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
    const Eigen::MatrixXd& x0v = d.x0v();
    const int m0dim = h0_dim(d) - 1;
    m0_row(d, i, x0v, out.head(m0dim));
    const double h1bar = 0.5 * (h_eval(b1, d, i, {d.a0()[i], 0}, true, x0v) +
                                h_eval(b1, d, i, {d.a0()[i], 1}, true, x0v));
    const double h0bar = 0.5 * (h_eval(b0, d, i, {d.a0()[i], 0}, false, x0v) +
                                h_eval(b0, d, i, {d.a0()[i], 1}, false, x0v));
    out.head(m0dim) *= h1bar - h0bar;
    out[m0dim] = b1[2] - b0[2];
}

void q0_moment(const Eigen::VectorXd& t0, const PanelDataset& d, Eigen::Index i,
               Eigen::Ref<Eigen::VectorXd> out) {
    const Eigen::MatrixXd& x0v = d.x0v();
    n0raw_row(d, i, x0v, out);
    const double sgn = sign_of(d.a0()[i]);
    const double q = 1.0 + guarded_exp(sgn * dot_xi0(t0, d, i, x0v, d.a0()[i]));
    out *= sgn * q;
    out[1] -= 1.0;  // N0_plus = e_{a0 slot}
}

void q1_moment(const Eigen::VectorXd& t0, const Eigen::VectorXd& t1, const PanelDataset& d,
               Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
    const Eigen::MatrixXd& x0v = d.x0v();
    n1raw_row(d, i, x0v, out);
    const double q0 = 1.0 + guarded_exp(sign_of(d.a0()[i]) * dot_xi0(t0, d, i, x0v, d.a0()[i]));
    const double sgn1 = sign_of(d.a1()[i]);
    const double q1 =
        q0 * (1.0 + guarded_exp(sgn1 * dot_xi1(t1, d, i, x0v, d.a0()[i], d.a1()[i])));
    out *= sgn1 * q1;
    out[2] -= q0;  // N1_plus picks the a1 slot, scaled by Q0
}

double h1_eval_raw(const Eigen::VectorXd& b1, const PanelDataset& d, Eigen::Index i,
                   const TreatmentRegime& r) {
    return h_eval(b1, d, i, r, true, d.x0v());
}

double h0_eval_raw(const Eigen::VectorXd& b0, const PanelDataset& d, Eigen::Index i,
                   const TreatmentRegime& r) {
    return h_eval(b0, d, i, r, false, d.x0v());
}

double q0_eval_raw(const Eigen::VectorXd& t0, const PanelDataset& d, Eigen::Index i, int a0) {
    return 1.0 + std::exp(sign_of(a0) * dot_xi0(t0, d, i, d.x0v(), a0));
}

double q1_eval_raw(const Eigen::VectorXd& t0, const Eigen::VectorXd& t1, const PanelDataset& d,
                   Eigen::Index i, const TreatmentRegime& r) {
    const Eigen::MatrixXd& x0v = d.x0v();
    return (1.0 + std::exp(sign_of(r.a0) * dot_xi0(t0, d, i, x0v, r.a0))) *
           (1.0 + std::exp(sign_of(r.a1) * dot_xi1(t1, d, i, x0v, r.a0, r.a1)));
}

QBridgeFit fit_q0(const PanelDataset& data, const SolverConfig& config) {
    check_proxy_dims(data);
    const Eigen::Index n = data.n();
    const int ones = data.a0().sum();
    if (ones == 0 || ones == n)
        throw ValidationError("q0 requires both treatment arms present at occasion 0");

    const Eigen::MatrixXd& x0v = data.x0v();
    const int k = q0_dim(data);

    MomentSystem sys;
    sys.dim = k;
    sys.n = n;
    sys.moment = [&](const Eigen::VectorXd& t, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
        q0_moment(t, data, i, out);
    };
    sys.mean_jacobian = [&](const Eigen::VectorXd& t, Eigen::Ref<Eigen::MatrixXd> J) {
        J.setZero();
        Eigen::VectorXd nraw(k), xi(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            n0raw_row(data, i, x0v, nraw);
            const double e = guarded_exp(sign_of(data.a0()[i]) *
                                         dot_xi0(t, data, i, x0v, data.a0()[i]));
            Eigen::Index c = 0;
            xi[c++] = 1.0;
            xi[c++] = data.a0()[i];
            for (Eigen::Index j = 0; j < data.z0().cols(); ++j) xi[c++] = data.z0()(i, j);
            for (Eigen::Index j = 0; j < x0v.cols(); ++j) xi[c++] = x0v(i, j);
            J += e * nraw * xi.transpose();
        }
        J /= static_cast<double>(n);
    };

    const NewtonResult res = solve_newton(sys, config);

    QBridgeFit fit;
    fit.pz0 = static_cast<int>(data.z0().cols());
    fit.pz1 = static_cast<int>(data.z1().cols());
    fit.px0v = static_cast<int>(x0v.cols());
    fit.px1 = static_cast<int>(data.x1().cols());
    fit.t0 = res.theta;
    fit.converged0 = res.converged;
    fit.norm0 = res.final_norm;
    fit.iterations0 = res.iterations;
    fit.restarts0 = res.restarts_used;
    return fit;
}

QBridgeFit fit_q1(const PanelDataset& data, QBridgeFit fit, const SolverConfig& config) {
    check_proxy_dims(data);
    const Eigen::Index n = data.n();
    const int ones = data.a1().sum();
    if (ones == 0 || ones == n)
        throw ValidationError("q1 requires both treatment arms present at occasion 1");

    const Eigen::MatrixXd& x0v = data.x0v();
    const int k = q1_dim(data);
    const Eigen::VectorXd t0 = fit.t0;

    MomentSystem sys;
    sys.dim = k;
    sys.n = n;
    sys.moment = [&](const Eigen::VectorXd& t, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
        q1_moment(t0, t, data, i, out);
    };
    sys.mean_jacobian = [&](const Eigen::VectorXd& t, Eigen::Ref<Eigen::MatrixXd> J) {
        J.setZero();
        Eigen::VectorXd nraw(k), xi(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            n1raw_row(data, i, x0v, nraw);
            const double q0 = 1.0 + guarded_exp(sign_of(data.a0()[i]) *
                                                dot_xi0(t0, data, i, x0v, data.a0()[i]));
            const double e = guarded_exp(sign_of(data.a1()[i]) *
                                         dot_xi1(t, data, i, x0v, data.a0()[i], data.a1()[i]));
            Eigen::Index c = 0;
            xi[c++] = 1.0;
            xi[c++] = data.a0()[i];
            xi[c++] = data.a1()[i];
            for (Eigen::Index j = 0; j < data.z0().cols(); ++j) xi[c++] = data.z0()(i, j);
            for (Eigen::Index j = 0; j < data.z1().cols(); ++j) xi[c++] = data.z1()(i, j);
            for (Eigen::Index j = 0; j < x0v.cols(); ++j) xi[c++] = x0v(i, j);
            for (Eigen::Index j = 0; j < data.x1().cols(); ++j) xi[c++] = data.x1()(i, j);
            J += q0 * e * nraw * xi.transpose();
        }
        J /= static_cast<double>(n);
    };

    const NewtonResult res = solve_newton(sys, config);
    fit.t1 = res.theta;
    fit.converged1 = res.converged;
    fit.norm1 = res.final_norm;
    fit.iterations1 = res.iterations;
    fit.restarts1 = res.restarts_used;
    return fit;
}

QBridgeFit fit_q_bridges(const PanelDataset& data, const SolverConfig& config) {
    return fit_q1(data, fit_q0(data, config), config);
}

}  // namespace proxmsm
