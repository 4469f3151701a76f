#include "proxmsm/oracle.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>
#include <sstream>

namespace proxmsm {

namespace {

constexpr double kResidGate = 1e-10;
constexpr double kRankRelTol = 1e-8;

void check_pmf_slice(const char* name, double sum) {
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "table " << name << " has a slice summing to " << sum << ", expected 1";
        throw ValidationError(os.str());
    }
}

void check_prob(const char* name, double p, bool strict_interior) {
    const bool ok = strict_interior ? (p > 0 && p < 1) : (p >= 0 && p <= 1);
    if (!ok) {
        std::ostringstream os;
        os << "table " << name << " has entry " << p
           << (strict_interior ? " outside (0,1)" : " outside [0,1]");
        throw ValidationError(os.str());
    }
}

// z leak used to deliberately violate the Z-Y independence; centered so the
// break has zero mean over a uniform z.
double z_center(int z, int d) { return d > 1 ? static_cast<double>(z) / (d - 1) - 0.5 : 0.0; }

}  // namespace

void DiscreteWorld::validate() const {
    const auto& d = dims;
    if (d.x0 < 1 || d.u0 < 1 || d.z0 < 1 || d.w0 < 1 || d.x1 < 1 || d.u1 < 1 || d.z1 < 1 ||
        d.w1 < 1)
        throw ValidationError("world dimensions must be positive");

    double s = 0;
    for (int x0 = 0; x0 < d.x0; ++x0) {
        check_prob("px0", px0(x0), false);
        s += px0(x0);
    }
    check_pmf_slice("px0", s);

    for (int x0 = 0; x0 < d.x0; ++x0) {
        s = 0;
        for (int u0 = 0; u0 < d.u0; ++u0) s += pu0(x0, u0), check_prob("pu0", pu0(x0, u0), false);
        check_pmf_slice("pu0", s);
        for (int u0 = 0; u0 < d.u0; ++u0) {
            check_prob("pa0", pa0(x0, u0), true);
            s = 0;
            for (int w0 = 0; w0 < d.w0; ++w0)
                s += pw0(x0, u0, w0), check_prob("pw0", pw0(x0, u0, w0), false);
            check_pmf_slice("pw0", s);
            for (int a0 = 0; a0 < 2; ++a0) {
                s = 0;
                for (int z0 = 0; z0 < d.z0; ++z0)
                    s += pz0(a0, x0, u0, z0), check_prob("pz0", pz0(a0, x0, u0, z0), false);
                check_pmf_slice("pz0", s);
                s = 0;
                for (int x1 = 0; x1 < d.x1; ++x1)
                    s += px1(a0, x0, u0, x1), check_prob("px1", px1(a0, x0, u0, x1), false);
                check_pmf_slice("px1", s);
                s = 0;
                for (int u1 = 0; u1 < d.u1; ++u1)
                    s += pu1(a0, x0, u0, u1), check_prob("pu1", pu1(a0, x0, u0, u1), false);
                check_pmf_slice("pu1", s);
            }
        }
    }
    for (int a0 = 0; a0 < 2; ++a0)
        for (int x0 = 0; x0 < d.x0; ++x0)
            for (int x1 = 0; x1 < d.x1; ++x1)
                for (int u0 = 0; u0 < d.u0; ++u0)
                    for (int u1 = 0; u1 < d.u1; ++u1) {
                        check_prob("pa1", pa1(a0, x0, x1, u0, u1), true);
                        s = 0;
                        for (int w1 = 0; w1 < d.w1; ++w1)
                            s += pw1(a0, x0, x1, u0, u1, w1),
                                check_prob("pw1", pw1(a0, x0, x1, u0, u1, w1), false);
                        check_pmf_slice("pw1", s);
                        for (int a1 = 0; a1 < 2; ++a1) {
                            s = 0;
                            for (int z1 = 0; z1 < d.z1; ++z1)
                                s += pz1(a0, a1, x0, x1, u0, u1, z1),
                                    check_prob("pz1", pz1(a0, a1, x0, x1, u0, u1, z1), false);
                            check_pmf_slice("pz1", s);
                        }
                    }
}

double DiscreteWorld::outcome_mean(int a0, int a1, int x0, int x1, int u0, int u1, int z0,
                                   int z1) const {
    double y = ymean(a0, a1, x0, x1, u0, u1);
    if (y_z_shift != 0)
        y += y_z_shift * (z_center(z0, dims.z0) + z_center(z1, dims.z1));
    return y;
}

namespace {

// Observed-data marginals P(a0,a1,x0,x1,z0,z1,w0,w1) and the same weighted by E[Y|state].
struct ObservedJoint {
    DTable p;
    DTable py;
};

ObservedJoint observed_joint(const DiscreteWorld& w) {
    const auto& d = w.dims;
    ObservedJoint J;
    J.p = DTable({2, 2, d.x0, d.x1, d.z0, d.z1, d.w0, d.w1});
    J.py = DTable({2, 2, d.x0, d.x1, d.z0, d.z1, d.w0, d.w1});
    for (int x0 = 0; x0 < d.x0; ++x0)
        for (int u0 = 0; u0 < d.u0; ++u0) {
            const double p0 = w.px0(x0) * w.pu0(x0, u0);
            for (int a0 = 0; a0 < 2; ++a0) {
                const double pa = a0 == 1 ? w.pa0(x0, u0) : 1 - w.pa0(x0, u0);
                for (int x1 = 0; x1 < d.x1; ++x1)
                    for (int u1 = 0; u1 < d.u1; ++u1) {
                        const double p1 =
                            p0 * pa * w.px1(a0, x0, u0, x1) * w.pu1(a0, x0, u0, u1);
                        for (int a1 = 0; a1 < 2; ++a1) {
                            const double pa1v = a1 == 1 ? w.pa1(a0, x0, x1, u0, u1)
                                                        : 1 - w.pa1(a0, x0, x1, u0, u1);
                            for (int z0 = 0; z0 < d.z0; ++z0)
                                for (int z1 = 0; z1 < d.z1; ++z1) {
                                    const double pz = w.pz0(a0, x0, u0, z0) *
                                                      w.pz1(a0, a1, x0, x1, u0, u1, z1);
                                    const double ymean =
                                        w.outcome_mean(a0, a1, x0, x1, u0, u1, z0, z1);
                                    for (int w0 = 0; w0 < d.w0; ++w0)
                                        for (int w1 = 0; w1 < d.w1; ++w1) {
                                            const double pr =
                                                p1 * pa1v * pz * w.pw0(x0, u0, w0) *
                                                w.pw1(a0, x0, x1, u0, u1, w1);
                                            J.p(a0, a1, x0, x1, z0, z1, w0, w1) += pr;
                                            J.py(a0, a1, x0, x1, z0, z1, w0, w1) += pr * ymean;
                                        }
                                }
                        }
                    }
            }
        }
    return J;
}

// Probability-weighted minimum-norm least squares: among minimizers of ||K h - c||
// picks the one minimizing sum_j rho_j h_j^2. Unique exact solution when K has full
// column rank; the L2(P) projection otherwise.
Eigen::VectorXd weighted_minnorm_solve(const Eigen::MatrixXd& K, const Eigen::VectorXd& c,
                                       const Eigen::VectorXd& rho, double& max_resid) {
    const Eigen::Index m = K.cols();
    Eigen::VectorXd scale(m);
    for (Eigen::Index j = 0; j < m; ++j) scale[j] = rho[j] > 1e-300 ? std::sqrt(rho[j]) : -1.0;

    Eigen::MatrixXd Ks = K;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (scale[j] > 0)
            Ks.col(j) /= scale[j];
        else
            Ks.col(j).setZero();  // zero-probability category: unconstrained, pinned to 0
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ks, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd g = svd.solve(c);
    Eigen::VectorXd h(m);
    for (Eigen::Index j = 0; j < m; ++j) h[j] = scale[j] > 0 ? g[j] / scale[j] : 0.0;
    max_resid = std::max(max_resid, (K * h - c).lpNorm<Eigen::Infinity>());
    return h;
}

Eigen::MatrixXd z_matrix_occ1(const DiscreteWorld& w, int a0, int a1, int x0, int x1) {
    const auto& d = w.dims;
    Eigen::MatrixXd M(d.z0 * d.z1, d.u0 * d.u1);
    for (int z0 = 0; z0 < d.z0; ++z0)
        for (int z1 = 0; z1 < d.z1; ++z1)
            for (int u0 = 0; u0 < d.u0; ++u0)
                for (int u1 = 0; u1 < d.u1; ++u1)
                    M(z0 * d.z1 + z1, u0 * d.u1 + u1) =
                        w.pz0(a0, x0, u0, z0) * w.pz1(a0, a1, x0, x1, u0, u1, z1);
    return M;
}

Eigen::MatrixXd w_matrix_occ1(const DiscreteWorld& w, int a0, int x0, int x1) {
    const auto& d = w.dims;
    Eigen::MatrixXd M(d.w0 * d.w1, d.u0 * d.u1);
    for (int w0 = 0; w0 < d.w0; ++w0)
        for (int w1 = 0; w1 < d.w1; ++w1)
            for (int u0 = 0; u0 < d.u0; ++u0)
                for (int u1 = 0; u1 < d.u1; ++u1)
                    M(w0 * d.w1 + w1, u0 * d.u1 + u1) =
                        w.pw0(x0, u0, w0) * w.pw1(a0, x0, x1, u0, u1, w1);
    return M;
}

RankCheck rank_check(std::string label, const Eigen::MatrixXd& M, int required) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > kRankRelTol * sv[0]) ++rank;
    RankCheck rc;
    rc.label = std::move(label);
    rc.rank = rank;
    rc.required = required;
    rc.sigma_min = required <= sv.size() ? sv[required - 1] : 0.0;
    return rc;
}

}  // namespace

CompletenessReport completeness_rank(const DiscreteWorld& w) {
    w.validate();
    const auto& d = w.dims;
    CompletenessReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();

    auto add = [&](RankCheck rc) {
        rep.min_margin = std::min(rep.min_margin, rc.sigma_min);
        rep.checks.push_back(std::move(rc));
    };

    for (int a0 = 0; a0 < 2; ++a0)
        for (int x0 = 0; x0 < d.x0; ++x0) {
            Eigen::MatrixXd M(d.z0, d.u0);
            for (int z0 = 0; z0 < d.z0; ++z0)
                for (int u0 = 0; u0 < d.u0; ++u0) M(z0, u0) = w.pz0(a0, x0, u0, z0);
            std::ostringstream os;
            os << "P(z0|u0) a0=" << a0 << " x0=" << x0;
            add(rank_check(os.str(), M, d.u0));
        }
    for (int x0 = 0; x0 < d.x0; ++x0) {
        Eigen::MatrixXd M(d.w0, d.u0);
        for (int w0 = 0; w0 < d.w0; ++w0)
            for (int u0 = 0; u0 < d.u0; ++u0) M(w0, u0) = w.pw0(x0, u0, w0);
        std::ostringstream os;
        os << "P(w0|u0) x0=" << x0;
        add(rank_check(os.str(), M, d.u0));
    }
    for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1)
            for (int x0 = 0; x0 < d.x0; ++x0)
                for (int x1 = 0; x1 < d.x1; ++x1) {
                    std::ostringstream os;
                    os << "P(zbar|ubar) a=(" << a0 << "," << a1 << ") x=(" << x0 << "," << x1
                       << ")";
                    add(rank_check(os.str(), z_matrix_occ1(w, a0, a1, x0, x1), d.u0 * d.u1));
                }
    for (int a0 = 0; a0 < 2; ++a0)
        for (int x0 = 0; x0 < d.x0; ++x0)
            for (int x1 = 0; x1 < d.x1; ++x1) {
                std::ostringstream os;
                os << "P(wbar|ubar) a0=" << a0 << " x=(" << x0 << "," << x1 << ")";
                add(rank_check(os.str(), w_matrix_occ1(w, a0, x0, x1), d.u0 * d.u1));
            }

    rep.complete = true;
    for (const auto& rc : rep.checks)
        if (rc.rank < rc.required) rep.complete = false;
    return rep;
}

BridgeTables solve_bridges_exact(const DiscreteWorld& w, bool strict) {
    const CompletenessReport comp = completeness_rank(w);
    if (strict && !comp.complete)
        throw ValidationError("world incomplete: proxy rank below confounder cardinality");

    const auto& d = w.dims;
    const ObservedJoint J = observed_joint(w);

    BridgeTables out;
    out.h1 = DTable({2, 2, d.x0, d.x1, d.w0, d.w1});
    out.h0 = DTable({2, 2, d.x0, d.w0});
    out.q0 = DTable({2, d.x0, d.z0});
    out.q1 = DTable({2, 2, d.x0, d.x1, d.z0, d.z1});

    // h1: per (regime, xbar) stratum, E[Y|a,zbar,xbar] = sum_wbar h1 P(wbar|a,zbar,xbar)
    for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1)
            for (int x0 = 0; x0 < d.x0; ++x0)
                for (int x1 = 0; x1 < d.x1; ++x1) {
                    const int nz = d.z0 * d.z1, nw = d.w0 * d.w1;
                    Eigen::MatrixXd K(nz, nw);
                    Eigen::VectorXd rhs(nz), rho = Eigen::VectorXd::Zero(nw);
                    double stratum_mass = 0;
                    for (int z0 = 0; z0 < d.z0; ++z0)
                        for (int z1 = 0; z1 < d.z1; ++z1) {
                            const int zi = z0 * d.z1 + z1;
                            double pz = 0, py = 0;
                            for (int w0 = 0; w0 < d.w0; ++w0)
                                for (int w1 = 0; w1 < d.w1; ++w1) {
                                    const double pr = J.p(a0, a1, x0, x1, z0, z1, w0, w1);
                                    K(zi, w0 * d.w1 + w1) = pr;
                                    pz += pr;
                                    py += J.py(a0, a1, x0, x1, z0, z1, w0, w1);
                                    rho[w0 * d.w1 + w1] += pr;
                                }
                            stratum_mass += pz;
                            if (pz > 1e-300) {
                                K.row(zi) /= pz;
                                rhs[zi] = py / pz;
                            } else {
                                K.row(zi).setZero();
                                rhs[zi] = 0;
                            }
                        }
                    rho /= std::max(stratum_mass, 1e-300);
                    const Eigen::VectorXd h =
                        weighted_minnorm_solve(K, rhs, rho, out.max_residual);
                    for (int w0 = 0; w0 < d.w0; ++w0)
                        for (int w1 = 0; w1 < d.w1; ++w1)
                            out.h1(a0, a1, x0, x1, w0, w1) = h[w0 * d.w1 + w1];
                }

    // h0: per (regime, x0), conditioning on A0 = regime.a0 and z0:
    //   E[H1(regime)|a0,z0,x0] = sum_w0 h0 P(w0|a0,z0,x0)
    for (int ra0 = 0; ra0 < 2; ++ra0)
        for (int ra1 = 0; ra1 < 2; ++ra1)
            for (int x0 = 0; x0 < d.x0; ++x0) {
                Eigen::MatrixXd K(d.z0, d.w0);
                Eigen::VectorXd rhs(d.z0), rho = Eigen::VectorXd::Zero(d.w0);
                double stratum_mass = 0;
                for (int z0 = 0; z0 < d.z0; ++z0) {
                    double pz = 0, lhs = 0;
                    Eigen::VectorXd pw = Eigen::VectorXd::Zero(d.w0);
                    for (int x1 = 0; x1 < d.x1; ++x1)
                        for (int z1 = 0; z1 < d.z1; ++z1)
                            for (int w0 = 0; w0 < d.w0; ++w0)
                                for (int w1 = 0; w1 < d.w1; ++w1)
                                    for (int a1o = 0; a1o < 2; ++a1o) {
                                        const double pr = J.p(ra0, a1o, x0, x1, z0, z1, w0, w1);
                                        pz += pr;
                                        pw[w0] += pr;
                                        lhs += pr * out.h1(ra0, ra1, x0, x1, w0, w1);
                                    }
                    stratum_mass += pz;
                    rho += pw;
                    if (pz > 1e-300) {
                        K.row(z0) = pw.transpose() / pz;
                        rhs[z0] = lhs / pz;
                    } else {
                        K.row(z0).setZero();
                        rhs[z0] = 0;
                    }
                }
                rho /= std::max(stratum_mass, 1e-300);
                const Eigen::VectorXd h = weighted_minnorm_solve(K, rhs, rho, out.max_residual);
                for (int w0 = 0; w0 < d.w0; ++w0) out.h0(ra0, ra1, x0, w0) = h[w0];
            }

    // q0: per (a0, x0), 1/f(a0|w0,x0) = sum_z0 q0 P(z0|a0,w0,x0)
    for (int a0 = 0; a0 < 2; ++a0)
        for (int x0 = 0; x0 < d.x0; ++x0) {
            Eigen::MatrixXd K(d.w0, d.z0);
            Eigen::VectorXd rhs(d.w0), rho = Eigen::VectorXd::Zero(d.z0);
            double stratum_mass = 0;
            for (int w0 = 0; w0 < d.w0; ++w0) {
                double p_a_w = 0, p_w = 0;
                Eigen::VectorXd pzv = Eigen::VectorXd::Zero(d.z0);
                for (int x1 = 0; x1 < d.x1; ++x1)
                    for (int z0 = 0; z0 < d.z0; ++z0)
                        for (int z1 = 0; z1 < d.z1; ++z1)
                            for (int w1 = 0; w1 < d.w1; ++w1)
                                for (int a1o = 0; a1o < 2; ++a1o) {
                                    const double pr = J.p(a0, a1o, x0, x1, z0, z1, w0, w1);
                                    p_a_w += pr;
                                    pzv[z0] += pr;
                                    const double pr_other =
                                        J.p(1 - a0, a1o, x0, x1, z0, z1, w0, w1);
                                    p_w += pr + pr_other;
                                }
                stratum_mass += p_a_w;
                rho += pzv;
                if (p_a_w > 1e-300) {
                    K.row(w0) = pzv.transpose() / p_a_w;
                    rhs[w0] = p_w / p_a_w;  // 1/f(a0|w0,x0)
                } else {
                    K.row(w0).setZero();
                    rhs[w0] = 0;
                }
            }
            rho /= std::max(stratum_mass, 1e-300);
            const Eigen::VectorXd q = weighted_minnorm_solve(K, rhs, rho, out.max_residual);
            for (int z0 = 0; z0 < d.z0; ++z0) out.q0(a0, x0, z0) = q[z0];
        }

    // q1: per (regime, xbar),
    //   E[Q0(a0)|a0,wbar,xbar] / f(a1|a0,wbar,xbar) = sum_zbar q1 P(zbar|regime,wbar,xbar)
    for (int ra0 = 0; ra0 < 2; ++ra0)
        for (int ra1 = 0; ra1 < 2; ++ra1)
            for (int x0 = 0; x0 < d.x0; ++x0)
                for (int x1 = 0; x1 < d.x1; ++x1) {
                    const int nz = d.z0 * d.z1, nw = d.w0 * d.w1;
                    Eigen::MatrixXd K(nw, nz);
                    Eigen::VectorXd rhs(nw), rho = Eigen::VectorXd::Zero(nz);
                    double stratum_mass = 0;
                    for (int w0 = 0; w0 < d.w0; ++w0)
                        for (int w1 = 0; w1 < d.w1; ++w1) {
                            const int wi = w0 * d.w1 + w1;
                            // joint over zbar given regime; marginals over a1 given a0
                            double p_regime_w = 0, p_a0_w = 0, q0num = 0;
                            Eigen::VectorXd pzv = Eigen::VectorXd::Zero(nz);
                            for (int z0 = 0; z0 < d.z0; ++z0)
                                for (int z1 = 0; z1 < d.z1; ++z1) {
                                    const double pr = J.p(ra0, ra1, x0, x1, z0, z1, w0, w1);
                                    pzv[z0 * d.z1 + z1] = pr;
                                    p_regime_w += pr;
                                    for (int a1o = 0; a1o < 2; ++a1o) {
                                        const double pa = J.p(ra0, a1o, x0, x1, z0, z1, w0, w1);
                                        p_a0_w += pa;
                                        q0num += pa * out.q0(ra0, x0, z0);
                                    }
                                }
                            stratum_mass += p_regime_w;
                            rho += pzv;
                            if (p_regime_w > 1e-300 && p_a0_w > 1e-300) {
                                K.row(wi) = pzv.transpose() / p_regime_w;
                                // E[Q0|a0,wbar,xbar] / f(a1|a0,wbar,xbar)
                                rhs[wi] = (q0num / p_a0_w) / (p_regime_w / p_a0_w);
                            } else {
                                K.row(wi).setZero();
                                rhs[wi] = 0;
                            }
                        }
                    rho /= std::max(stratum_mass, 1e-300);
                    const Eigen::VectorXd q =
                        weighted_minnorm_solve(K, rhs, rho, out.max_residual);
                    for (int z0 = 0; z0 < d.z0; ++z0)
                        for (int z1 = 0; z1 < d.z1; ++z1)
                            out.q1(ra0, ra1, x0, x1, z0, z1) = q[z0 * d.z1 + z1];
                }

    if (strict && out.max_residual > kResidGate)
        throw NumericalError("bridge equations inconsistent");
    return out;
}

namespace {

double intervened_truth(const DiscreteWorld& w, const TreatmentRegime& r) {
    const auto& d = w.dims;
    double total = 0;
    for (int x0 = 0; x0 < d.x0; ++x0)
        for (int u0 = 0; u0 < d.u0; ++u0) {
            const double p0 = w.px0(x0) * w.pu0(x0, u0);
            for (int x1 = 0; x1 < d.x1; ++x1)
                for (int u1 = 0; u1 < d.u1; ++u1) {
                    const double p1 =
                        p0 * w.px1(r.a0, x0, u0, x1) * w.pu1(r.a0, x0, u0, u1);
                    if (w.y_z_shift == 0) {
                        total += p1 * w.ymean(r.a0, r.a1, x0, x1, u0, u1);
                    } else {
                        for (int z0 = 0; z0 < d.z0; ++z0)
                            for (int z1 = 0; z1 < d.z1; ++z1)
                                total += p1 * w.pz0(r.a0, x0, u0, z0) *
                                         w.pz1(r.a0, r.a1, x0, x1, u0, u1, z1) *
                                         w.outcome_mean(r.a0, r.a1, x0, x1, u0, u1, z0, z1);
                    }
                }
        }
    return total;
}

}  // namespace

IdentificationReport verify_identification(const DiscreteWorld& w) {
    const auto& d = w.dims;
    const CompletenessReport comp = completeness_rank(w);
    const BridgeTables b = solve_bridges_exact(w, /*strict=*/false);
    const ObservedJoint J = observed_joint(w);

    IdentificationReport rep;
    rep.complete = comp.complete;
    rep.max_bridge_residual = b.max_residual;

    const TreatmentSupport all_regimes = TreatmentSupport::all();
    for (const auto& r : all_regimes.regimes()) {
        IdentificationReport::Row row;
        row.regime = r;
        row.truth = intervened_truth(w, r);

        // proximal g-formula: sum h0 against P(w0, x0)
        for (int x0 = 0; x0 < d.x0; ++x0)
            for (int u0 = 0; u0 < d.u0; ++u0)
                for (int w0 = 0; w0 < d.w0; ++w0)
                    row.g_formula += w.px0(x0) * w.pu0(x0, u0) * w.pw0(x0, u0, w0) *
                                     b.h0(r.a0, r.a1, x0, w0);

        // proximal IPW: sum y 1(A=regime) q1 against the observed joint
        for (int x0 = 0; x0 < d.x0; ++x0)
            for (int x1 = 0; x1 < d.x1; ++x1)
                for (int z0 = 0; z0 < d.z0; ++z0)
                    for (int z1 = 0; z1 < d.z1; ++z1) {
                        const double q1v = b.q1(r.a0, r.a1, x0, x1, z0, z1);
                        for (int w0 = 0; w0 < d.w0; ++w0)
                            for (int w1 = 0; w1 < d.w1; ++w1)
                                row.ipw +=
                                    J.py(r.a0, r.a1, x0, x1, z0, z1, w0, w1) * q1v;
                    }

        rep.max_discrepancy =
            std::max({rep.max_discrepancy, std::abs(row.g_formula - row.truth),
                      std::abs(row.ipw - row.truth)});
        rep.rows.push_back(row);
    }
    return rep;
}

DiscreteWorld random_complete_world(std::uint64_t seed, const WorldDims& dims, double margin) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mass(0.15, 1.0);
    std::uniform_real_distribution<double> prob(0.2, 0.8);
    std::uniform_real_distribution<double> outcome(-1.0, 1.0);

    auto fill_pmf = [&](DTable& t, int value_dim) {
        auto& v = t.raw();
        const std::size_t slices = v.size() / static_cast<std::size_t>(value_dim);
        for (std::size_t s = 0; s < slices; ++s) {
            double sum = 0;
            for (int k = 0; k < value_dim; ++k) sum += (v[s * value_dim + k] = mass(rng));
            for (int k = 0; k < value_dim; ++k) v[s * value_dim + k] /= sum;
        }
    };
    auto fill_prob = [&](DTable& t) {
        for (auto& p : t.raw()) p = prob(rng);
    };

    for (int attempt = 0; attempt < 500; ++attempt) {
        DiscreteWorld w;
        w.dims = dims;
        const auto& d = dims;
        w.px0 = DTable({d.x0});
        w.pu0 = DTable({d.x0, d.u0});
        w.pa0 = DTable({d.x0, d.u0});
        w.pz0 = DTable({2, d.x0, d.u0, d.z0});
        w.pw0 = DTable({d.x0, d.u0, d.w0});
        w.px1 = DTable({2, d.x0, d.u0, d.x1});
        w.pu1 = DTable({2, d.x0, d.u0, d.u1});
        w.pa1 = DTable({2, d.x0, d.x1, d.u0, d.u1});
        w.pz1 = DTable({2, 2, d.x0, d.x1, d.u0, d.u1, d.z1});
        w.pw1 = DTable({2, d.x0, d.x1, d.u0, d.u1, d.w1});
        w.ymean = DTable({2, 2, d.x0, d.x1, d.u0, d.u1});

        fill_pmf(w.px0, d.x0);
        fill_pmf(w.pu0, d.u0);
        fill_prob(w.pa0);
        fill_pmf(w.pz0, d.z0);
        fill_pmf(w.pw0, d.w0);
        fill_pmf(w.px1, d.x1);
        fill_pmf(w.pu1, d.u1);
        fill_prob(w.pa1);
        fill_pmf(w.pz1, d.z1);
        fill_pmf(w.pw1, d.w1);
        for (auto& y : w.ymean.raw()) y = outcome(rng);

        const CompletenessReport rep = completeness_rank(w);
        if (rep.complete && rep.min_margin >= margin) return w;
    }
    throw NumericalError("could not sample a complete world with the requested margin");
}

}  // namespace proxmsm
