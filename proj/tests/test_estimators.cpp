#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>

#include <proxmsm/dgm.hpp>
#include <proxmsm/errors.hpp>
#include <proxmsm/estimators.hpp>
#include <proxmsm/sandwich.hpp>

using namespace proxmsm;

namespace {

PanelDataset keep_monotone(const PanelDataset& d) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < d.n(); ++i)
        if (!(d.a0()[i] == 1 && d.a1()[i] == 0)) idx.push_back(i);
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Eigen::VectorXd y(m);
    Eigen::VectorXi a0(m), a1(m);
    Eigen::MatrixXd z0(m, 1), z1(m, 1), w0(m, 1), w1(m, 1), x0(m, 1), x1(m, 1), v(m, 0);
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = idx[k];
        y[k] = d.y()[i];
        a0[k] = d.a0()[i];
        a1[k] = d.a1()[i];
        z0(k, 0) = d.z0()(i, 0);
        z1(k, 0) = d.z1()(i, 0);
        w0(k, 0) = d.w0()(i, 0);
        w1(k, 0) = d.w1()(i, 0);
        x0(k, 0) = d.x0()(i, 0);
        x1(k, 0) = d.x1()(i, 0);
    }
    return PanelDataset(y, a0, a1, z0, z1, w0, w1, x0, x1, v, TreatmentSupport::monotone());
}

PanelDataset shift_outcome(const PanelDataset& d, double c) {
    return PanelDataset(d.y().array() + c, d.a0(), d.a1(), d.z0(), d.z1(), d.w0(), d.w1(),
                        d.x0(), d.x1(), d.v(), d.support());
}

PanelDataset permute(const PanelDataset& d, std::uint64_t seed) {
    std::vector<Eigen::Index> idx(d.n());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), std::mt19937_64(seed));
    Eigen::VectorXd y(d.n());
    Eigen::VectorXi a0(d.n()), a1(d.n());
    Eigen::MatrixXd z0(d.n(), 1), z1(d.n(), 1), w0(d.n(), 1), w1(d.n(), 1), x0(d.n(), 1),
        x1(d.n(), 1), v(d.n(), 0);
    for (Eigen::Index k = 0; k < d.n(); ++k) {
        const Eigen::Index i = idx[k];
        y[k] = d.y()[i];
        a0[k] = d.a0()[i];
        a1[k] = d.a1()[i];
        z0(k, 0) = d.z0()(i, 0);
        z1(k, 0) = d.z1()(i, 0);
        w0(k, 0) = d.w0()(i, 0);
        w1(k, 0) = d.w1()(i, 0);
        x0(k, 0) = d.x0()(i, 0);
        x1(k, 0) = d.x1()(i, 0);
    }
    return PanelDataset(y, a0, a1, z0, z1, w0, w1, x0, x1, v, d.support());
}

}  // namespace

TEST_CASE("saturated POR matches per-regime means of the fitted bridge") {
    const PanelDataset d = keep_monotone(simulate(DgmParams{}, 4000, 55));
    const HBridgeFit h = fit_h_bridges(d);
    const MsmmSpec spec = MsmmSpec::saturated_monotone();
    const EstimateReport rep = estimate_por(d, h, spec);

    auto regime_mean = [&](const TreatmentRegime& r) {
        double s = 0;
        for (Eigen::Index i = 0; i < d.n(); ++i) s += h0_value(h, d, i, r);
        return s / static_cast<double>(d.n());
    };
    const double m00 = regime_mean({0, 0}), m01 = regime_mean({0, 1}), m11 = regime_mean({1, 1});
    CHECK(rep.beta_hat[0] == doctest::Approx(m00).epsilon(1e-10));
    CHECK(rep.beta_hat[1] == doctest::Approx(m01 - m00).epsilon(1e-9));
    CHECK(rep.beta_hat[2] == doctest::Approx(m11 - m00).epsilon(1e-9));
}

TEST_CASE("any full-rank index function gives the same saturated POR estimate") {
    const PanelDataset d = keep_monotone(simulate(DgmParams{}, 3000, 56));
    const HBridgeFit h = fit_h_bridges(d);
    const MsmmSpec spec = MsmmSpec::saturated_monotone();

    Eigen::Matrix3d T;
    T << 2, 1, 0, -1, 3, 0.5, 0.2, 0, 1;  // nonsingular mix of the design coordinates
    IndexFunction d_mixed{[&, T](const TreatmentRegime& r, const Eigen::VectorXd& v) {
        return Eigen::VectorXd(T * spec.design(r, v));
    }};
    const EstimateReport a = estimate_por(d, h, spec);
    const EstimateReport b = estimate_por(d, h, spec, d_mixed);
    CHECK((a.beta_hat - b.beta_hat).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("PIPW with constant weights and randomized treatment is weighted OLS") {
    const PanelDataset d = simulate(DgmParams{}, 2000, 57);
    QBridgeFit q;  // t = 0 makes q0 = 2 and q1 = 4 at every record
    q.t0 = Eigen::VectorXd::Zero(4);
    q.t1 = Eigen::VectorXd::Zero(7);
    q.converged0 = q.converged1 = true;
    q.pz0 = q.pz1 = q.px1 = 1;
    q.px0v = 1;
    const MsmmSpec spec = MsmmSpec::cumulative();
    const EstimateReport rep = estimate_pipw(d, q, spec);

    Eigen::MatrixXd X(d.n(), 2);
    for (Eigen::Index i = 0; i < d.n(); ++i) X.row(i) << 1, d.a0()[i] + d.a1()[i];
    const Eigen::VectorXd ols = (X.transpose() * X).ldlt().solve(X.transpose() * d.y());
    CHECK((rep.beta_hat - ols).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("adding a constant to Y shifts the intercept only") {
    const DgmParams p;
    const PanelDataset d = simulate(p, 3000, 58);
    const PanelDataset ds = shift_outcome(d, 3.0);
    const MsmmSpec spec = MsmmSpec::cumulative();

    const HBridgeFit h = fit_h_bridges(d), hs = fit_h_bridges(ds);
    const QBridgeFit q = fit_q_bridges(d), qs = fit_q_bridges(ds);

    auto check_shift = [&](const EstimateReport& a, const EstimateReport& b) {
        CHECK(b.beta_hat[0] - a.beta_hat[0] == doctest::Approx(3.0).epsilon(1e-8));
        CHECK(b.beta_hat[1] == doctest::Approx(a.beta_hat[1]).epsilon(1e-8));
    };
    check_shift(estimate_por(d, h, spec), estimate_por(ds, hs, spec));
    check_shift(estimate_pipw(d, q, spec), estimate_pipw(ds, qs, spec));
    check_shift(estimate_pdr(d, h, d, q, spec), estimate_pdr(ds, hs, ds, qs, spec));
    check_shift(estimate_dr_sra(d, spec), estimate_dr_sra(ds, spec));
}

TEST_CASE("record order does not change estimates or covariance") {
    const PanelDataset d = simulate(DgmParams{}, 1500, 59);
    const PanelDataset dp = permute(d, 2);
    const MsmmSpec spec = MsmmSpec::cumulative();
    const EstimateReport a = estimate_pdr(d, fit_h_bridges(d), d, fit_q_bridges(d), spec);
    const EstimateReport b = estimate_pdr(dp, fit_h_bridges(dp), dp, fit_q_bridges(dp), spec);
    CHECK((a.beta_hat - b.beta_hat).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((a.cov - b.cov).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("sandwich for a sample mean reduces to Var(Y)/n") {
    const PanelDataset d = simulate(DgmParams{}, 500, 60);
    const double mean = d.y().mean();
    Eigen::VectorXd theta(1);
    theta << mean;
    auto psi = [&](const Eigen::VectorXd& th, Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out) {
        out[0] = d.y()[i] - th[0];
    };
    const Eigen::MatrixXd cov = stacked_sandwich(psi, theta, d.n());
    const double var = (d.y().array() - mean).square().sum() / static_cast<double>(d.n());
    CHECK(cov(0, 0) == doctest::Approx(var / static_cast<double>(d.n())).epsilon(1e-9));
}

TEST_CASE("population double robustness at n=1e5") {
    const DgmParams p;
    const MsmmSpec spec = MsmmSpec::cumulative();
    const PanelDataset d = simulate(p, 100000, 61);

    auto beta1 = [&](MisspecKind kind, EstimatorKind which) {
        const MisspecViews v = apply_misspec(kind, d);
        switch (which) {
            case EstimatorKind::POR:
                return estimate_por(v.h_view, fit_h_bridges(v.h_view), spec).beta_hat[1];
            case EstimatorKind::PIPW:
                return estimate_pipw(v.q_view, fit_q_bridges(v.q_view), spec).beta_hat[1];
            default:
                return estimate_pdr(v.h_view, fit_h_bridges(v.h_view), v.q_view,
                                    fit_q_bridges(v.q_view), spec)
                    .beta_hat[1];
        }
    };

    CHECK(std::abs(beta1(MisspecKind::None, EstimatorKind::POR) - 1.0) < 0.03);
    CHECK(std::abs(beta1(MisspecKind::None, EstimatorKind::PIPW) - 1.0) < 0.03);
    CHECK(std::abs(beta1(MisspecKind::None, EstimatorKind::PDR) - 1.0) < 0.03);
    CHECK(std::abs(beta1(MisspecKind::WOR, EstimatorKind::PDR) - 1.0) < 0.03);
    CHECK(std::abs(beta1(MisspecKind::WIPW, EstimatorKind::PDR) - 1.0) < 0.03);
}

TEST_CASE("DR-SRA is unbiased once the unmeasured paths are severed") {
    DgmParams p;
    p.a0_u0 = 0;
    p.a1_u = 0;
    p.y_u0 = 0;
    p.y_u1 = 0;
    const MsmmSpec spec = MsmmSpec::cumulative();
    const Eigen::VectorXd truth = true_beta(p, spec);
    const PanelDataset d = simulate(p, 100000, 62);
    const EstimateReport rep = estimate_dr_sra(d, spec);
    CHECK(std::abs(rep.beta_hat[1] - truth[1]) < 0.02);
}

TEST_CASE("DR-SRA is biased under the default confounded mechanism") {
    const DgmParams p;
    const MsmmSpec spec = MsmmSpec::cumulative();
    const PanelDataset d = simulate(p, 100000, 63);
    const EstimateReport rep = estimate_dr_sra(d, spec);
    // residual confounding net of the proxies; many standard errors away from the truth
    CHECK(rep.beta_hat[1] < 0.985);
    CHECK(rep.beta_hat[1] > 0.9);
}

TEST_CASE("degenerate MSMM support is reported as not identified") {
    const PanelDataset d = simulate(DgmParams{}, 500, 64);
    const HBridgeFit h = fit_h_bridges(d);
    MsmmSpec spec = MsmmSpec::cumulative(TreatmentSupport({{0, 0}}));
    CHECK_THROWS_WITH_AS(estimate_por(d, h, spec), "MSMM not identified by support and d",
                         NumericalError);
}

TEST_CASE("report invariants: se, ci95, symmetry, PSD") {
    const PanelDataset d = simulate(DgmParams{}, 2000, 65);
    const MsmmSpec spec = MsmmSpec::cumulative();
    const EstimateReport rep = estimate_pdr(d, fit_h_bridges(d), d, fit_q_bridges(d), spec);
    CHECK((rep.cov - rep.cov.transpose()).lpNorm<Eigen::Infinity>() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rep.cov, Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
    for (int j = 0; j < spec.p; ++j) {
        CHECK(rep.se[j] == doctest::Approx(std::sqrt(rep.cov(j, j))).epsilon(1e-12));
        CHECK(rep.ci95(j, 0) == doctest::Approx(rep.beta_hat[j] - 1.96 * rep.se[j]));
        CHECK(rep.ci95(j, 1) == doctest::Approx(rep.beta_hat[j] + 1.96 * rep.se[j]));
    }
}
