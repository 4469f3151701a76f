#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include <proxmsm/bridges.hpp>
#include <proxmsm/dgm.hpp>
#include <proxmsm/errors.hpp>
#include <proxmsm/moments.hpp>

using namespace proxmsm;

namespace {

// Exact population bridge coefficients for the default data generating mechanism,
// derived by matching conditional-moment equations through the gaussian structural
// equations. The large-sample fits below must approach these.
const Eigen::VectorXd kB1Star = [] {
    Eigen::VectorXd b(7);  // (1, a0, a1, w0, w1, x0, x1)
    b << -1.65, 1.14, 1.0, 0.0, 1.0, -0.25, 0.05;
    return b;
}();
const Eigen::VectorXd kB0Star = [] {
    Eigen::VectorXd b(5);  // (1, a0, a1, w0, x0)
    b << -1.34 - 0.2 * (1.19 / 0.75), 1.0, 1.0, 1.19 / 0.75, 0.55 - 0.7 * (1.19 / 0.75);
    return b;
}();
const Eigen::VectorXd kT0Star = [] {
    Eigen::VectorXd t(4);  // (1, a0, z0, x0)
    t << 0.925, 0.45, -1.0, 0.2;
    return t;
}();
const Eigen::VectorXd kT1Star = [] {
    Eigen::VectorXd t(7);  // (1, a0, a1, z0, z1, x0, x1)
    t << 28.0 / 45.0, -203.0 / 150.0, -196.0 / 225.0, 0.0, 14.0 / 15.0, -49.0 / 60.0,
        -49.0 / 60.0;
    return t;
}();

PanelDataset treatments_only(const std::vector<int>& a0, const std::vector<int>& a1) {
    const Eigen::Index n = static_cast<Eigen::Index>(a0.size());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    Eigen::VectorXi va0(n), va1(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        va0[i] = a0[i];
        va1[i] = a1[i];
    }
    const Eigen::MatrixXd empty(n, 0);
    return PanelDataset(y, va0, va1, empty, empty, empty, empty, empty, empty, empty,
                        TreatmentSupport::all());
}

}  // namespace

TEST_CASE("just-identified linear GMM interpolates two points exactly") {
    Eigen::MatrixXd instruments(2, 2), regressors(2, 2);
    Eigen::VectorXd y(2);
    // records (y, a0, z0) = (1,0,0), (3,1,1); model b0 + b1 a0; instrument (1, z0)
    instruments << 1, 0, 1, 1;
    regressors << 1, 0, 1, 1;
    y << 1, 3;
    const Eigen::VectorXd b = linear_moment_solve(instruments, regressors, y, "not identified");
    CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("degenerate instruments raise the identification error") {
    SUBCASE("z columns identically zero") {
        PanelDataset d = simulate(DgmParams{}, 200, 1);
        PanelDataset broken(d.y(), d.a0(), d.a1(), Eigen::MatrixXd::Zero(d.n(), 1),
                            Eigen::MatrixXd::Zero(d.n(), 1), d.w0(), d.w1(), d.x0(), d.x1(),
                            d.v(), d.support());
        CHECK_THROWS_WITH_AS(fit_h1(broken), "h1 not identified by chosen instruments",
                             NumericalError);
    }
    SUBCASE("rank collapse from identical records") {
        const PanelDataset one = simulate(DgmParams{}, 1, 2);
        Eigen::VectorXd y = Eigen::VectorXd::Constant(8, one.y()[0]);
        Eigen::VectorXi a0 = Eigen::VectorXi::Constant(8, one.a0()[0]);
        Eigen::VectorXi a1 = Eigen::VectorXi::Constant(8, one.a1()[0]);
        auto rep = [&](const Eigen::MatrixXd& m) {
            return Eigen::MatrixXd(m.replicate(8, 1));
        };
        PanelDataset clones(y, a0, a1, rep(one.z0()), rep(one.z1()), rep(one.w0()),
                            rep(one.w1()), rep(one.x0()), rep(one.x1()), rep(one.v()),
                            one.support());
        CHECK_THROWS_AS(fit_h_bridges(clones), NumericalError);
    }
}

TEST_CASE("h0 reduces to h1's restriction when h1 ignores occasion-1 proxies") {
    const PanelDataset d = simulate(DgmParams{}, 5000, 17);
    HBridgeFit fit = fit_h1(d);
    fit.b1 << -0.4, 0.8, 1.3, 0.6, 0.0, -0.2, 0.0;  // w1 and x1 coefficients zero
    fit = fit_h0(d, fit);
    CHECK(fit.b0[0] == doctest::Approx(fit.b1[0]).epsilon(1e-10));
    CHECK(fit.b0[1] == doctest::Approx(fit.b1[1]).epsilon(1e-10));
    CHECK(fit.b0[2] == doctest::Approx(fit.b1[2]).epsilon(1e-10));
    CHECK(fit.b0[3] == doctest::Approx(fit.b1[3]).epsilon(1e-10));
    CHECK(fit.b0[4] == doctest::Approx(fit.b1[5]).epsilon(1e-10));
}

TEST_CASE("large-sample h fits approach the population coefficients") {
    // Reference 1: streamed population solve on 1e7 simulated records.
    const DgmParams p;
    const int k = 7;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (int chunk = 0; chunk < 10; ++chunk) {
        const PanelDataset d = simulate(p, 1000000, 9000 + chunk);
        Eigen::MatrixXd M(d.n(), k), Phi(d.n(), k);
        for (Eigen::Index i = 0; i < d.n(); ++i) {
            M.row(i) << 1, d.a0()[i], d.a1()[i], d.z0()(i, 0), d.z1()(i, 0), d.x0()(i, 0),
                d.x1()(i, 0);
            Phi.row(i) << 1, d.a0()[i], d.a1()[i], d.w0()(i, 0), d.w1()(i, 0), d.x0()(i, 0),
                d.x1()(i, 0);
        }
        G += M.transpose() * Phi;
        rhs += M.transpose() * d.y();
    }
    const Eigen::VectorXd b1_pop = solve_cross_moment(G / 1e7, rhs / 1e7, "population h1");
    CHECK((b1_pop - kB1Star).lpNorm<Eigen::Infinity>() < 0.005);

    // Reference 2: fit at n=1e5 stays within sampling error of both references.
    const PanelDataset d = simulate(p, 100000, 1234);
    const HBridgeFit fit = fit_h_bridges(d);
    CHECK(std::abs(fit.b1[1] - kB1Star[1]) < 0.02);  // a0 coefficient
    CHECK(std::abs(fit.b1[2] - kB1Star[2]) < 0.02);  // a1 coefficient
    CHECK((fit.b1 - kB1Star).lpNorm<Eigen::Infinity>() < 0.05);
    CHECK((fit.b0 - kB0Star).lpNorm<Eigen::Infinity>() < 0.05);
}

TEST_CASE("proximal g-formula mean matches the counterfactual oracle") {
    const DgmParams p;
    const PanelDataset d = simulate(p, 100000, 5150);
    const HBridgeFit fit = fit_h_bridges(d);
    double mean11 = 0;
    for (Eigen::Index i = 0; i < d.n(); ++i) mean11 += h0_value(fit, d, i, {1, 1});
    mean11 /= static_cast<double>(d.n());
    CHECK(std::abs(mean11 - true_counterfactual_mean(p, {1, 1})) < 0.02);
}

TEST_CASE("intercept-only q0 under randomized treatment solves to the inverse density") {
    const PanelDataset d = treatments_only({0, 1, 0, 1}, {0, 0, 1, 1});
    const QBridgeFit fit = fit_q0(d);
    CHECK(fit.converged0);
    CHECK(fit.t0.lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(q0_value(fit, d, 0, 0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(q0_value(fit, d, 0, 1) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("q0 under Bernoulli(0.8) treatment") {
    std::vector<int> a0(10, 1);
    a0[0] = a0[1] = 0;  // empirical P(A0=1) = 0.8 exactly
    const PanelDataset d = treatments_only(a0, std::vector<int>(10, 0) /*unused*/);
    const QBridgeFit fit = fit_q0(d);
    CHECK(fit.converged0);
    CHECK(q0_value(fit, d, 0, 1) == doctest::Approx(1.25).epsilon(1e-9));
    CHECK(q0_value(fit, d, 0, 0) == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("q1 under doubly randomized treatment is the inverse product 4") {
    const PanelDataset d = treatments_only({0, 1, 0, 1}, {0, 0, 1, 1});
    const QBridgeFit fit = fit_q_bridges(d);
    CHECK(fit.converged1);
    CHECK(fit.t1.lpNorm<Eigen::Infinity>() < 1e-8);
    const TreatmentSupport all = TreatmentSupport::all();
    for (const auto& r : all.regimes())
        CHECK(q1_value(fit, d, 0, r) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("large-sample q fits approach the population coefficients") {
    const DgmParams p;
    const PanelDataset pop = simulate(p, 2000000, 31);
    const QBridgeFit popfit = fit_q_bridges(pop);
    CHECK(popfit.converged0);
    CHECK(popfit.converged1);
    CHECK((popfit.t0 - kT0Star).lpNorm<Eigen::Infinity>() < 0.02);
    CHECK((popfit.t1 - kT1Star).lpNorm<Eigen::Infinity>() < 0.05);

    const PanelDataset d = simulate(p, 200000, 4325);
    const QBridgeFit fit = fit_q_bridges(d);
    CHECK((fit.t0 - kT0Star).lpNorm<Eigen::Infinity>() < 0.05);
    CHECK((fit.t0 - popfit.t0).lpNorm<Eigen::Infinity>() < 0.05);
}

TEST_CASE("fitted q1 satisfies the weighting identities") {
    const DgmParams p;
    const PanelDataset d = simulate(p, 100000, 88);
    const QBridgeFit fit = fit_q_bridges(d);
    REQUIRE(fit.converged1);

    const TreatmentSupport all = TreatmentSupport::all();
    for (const auto& r : all.regimes()) {
        double norm = 0, weighted_y = 0;
        for (Eigen::Index i = 0; i < d.n(); ++i) {
            if (d.a0()[i] != r.a0 || d.a1()[i] != r.a1) continue;
            const double q1 = q1_value(fit, d, i, r);
            norm += q1;
            weighted_y += q1 * d.y()[i];
        }
        norm /= static_cast<double>(d.n());
        weighted_y /= static_cast<double>(d.n());
        CHECK(std::abs(norm - 1.0) < 0.02);
        CHECK(std::abs(weighted_y - true_counterfactual_mean(p, r)) < 0.03);
    }
}

TEST_CASE("solver contracts on simulated data") {
    const DgmParams p;
    for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
        const PanelDataset d = simulate(p, 4000, seed);

        const HBridgeFit h = fit_h_bridges(d);
        CHECK(h.resid1 <= 1e-10);
        CHECK(h.resid0 <= 1e-10);

        const QBridgeFit q = fit_q_bridges(d);
        CHECK(q.converged0);
        CHECK(q.converged1);
        for (Eigen::Index i = 0; i < d.n(); ++i) {
            CHECK(q0_value(q, d, i, d.a0()[i]) > 1.0);
            CHECK(q1_value(q, d, i, d.regime(i)) > 1.0);
        }
    }
}

TEST_CASE("Newton fitting is deterministic") {
    const PanelDataset d = simulate(DgmParams{}, 4000, 314);
    const QBridgeFit a = fit_q_bridges(d);
    const QBridgeFit b = fit_q_bridges(d);
    CHECK(a.t0 == b.t0);
    CHECK(a.t1 == b.t1);
}

TEST_CASE("fitting a dataset concatenated with itself changes nothing") {
    const PanelDataset d = simulate(DgmParams{}, 2000, 271);
    const Eigen::Index n = d.n();
    Eigen::VectorXd y(2 * n);
    y << d.y(), d.y();
    Eigen::VectorXi a0(2 * n), a1(2 * n);
    a0 << d.a0(), d.a0();
    a1 << d.a1(), d.a1();
    auto dup = [&](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out(2 * n, m.cols());
        out << m, m;
        return out;
    };
    const PanelDataset dd(y, a0, a1, dup(d.z0()), dup(d.z1()), dup(d.w0()), dup(d.w1()),
                          dup(d.x0()), dup(d.x1()), dup(d.v()), d.support());

    const HBridgeFit h1f = fit_h_bridges(d), h2f = fit_h_bridges(dd);
    CHECK((h1f.b1 - h2f.b1).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((h1f.b0 - h2f.b0).lpNorm<Eigen::Infinity>() < 1e-12);
    const QBridgeFit q1f = fit_q_bridges(d), q2f = fit_q_bridges(dd);
    CHECK((q1f.t0 - q2f.t0).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((q1f.t1 - q2f.t1).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("single-arm data is rejected by the q fitters") {
    const PanelDataset d = treatments_only({1, 1, 1, 1}, {0, 1, 0, 1});
    CHECK_THROWS_AS(fit_q0(d), ValidationError);
}
