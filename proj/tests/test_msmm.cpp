#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include <proxmsm/errors.hpp>
#include <proxmsm/msmm.hpp>

using namespace proxmsm;

TEST_CASE("cumulative design vectors") {
    const MsmmSpec spec = MsmmSpec::cumulative();
    const Eigen::VectorXd v(0);
    CHECK(msmm_design(spec, {1, 1}, v).isApprox(Eigen::Vector2d(1, 2)));
    CHECK(msmm_design(spec, {0, 0}, v).isApprox(Eigen::Vector2d(1, 0)));
    CHECK(msmm_design(spec, {0, 1}, v).isApprox(Eigen::Vector2d(1, 1)));
}

TEST_CASE("saturated monotone design vectors") {
    const MsmmSpec spec = MsmmSpec::saturated_monotone();
    const Eigen::VectorXd v(0);
    CHECK(msmm_design(spec, {0, 1}, v).isApprox(Eigen::Vector3d(1, 1, 0)));
    CHECK(msmm_design(spec, {0, 0}, v).isApprox(Eigen::Vector3d(1, 0, 0)));
    CHECK(msmm_design(spec, {1, 1}, v).isApprox(Eigen::Vector3d(1, 0, 1)));
    CHECK_THROWS_WITH_AS(msmm_design(spec, {1, 0}, v), "regime outside support",
                         ValidationError);
}

TEST_CASE("saturated design matrix has full rank over its support") {
    const MsmmSpec spec = MsmmSpec::saturated_monotone();
    const Eigen::VectorXd v(0);
    Eigen::MatrixXd D(spec.p, spec.support.size());
    for (std::size_t j = 0; j < spec.support.size(); ++j)
        D.col(static_cast<Eigen::Index>(j)) = msmm_design(spec, spec.support.regimes()[j], v);
    CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(D).rank() == spec.p);
}

TEST_CASE("the model is exactly linear in beta") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2, 2);
    for (const auto& spec : {MsmmSpec::cumulative(), MsmmSpec::saturated_monotone()}) {
        const Eigen::VectorXd v(0);
        for (int rep = 0; rep < 50; ++rep) {
            Eigen::VectorXd beta(spec.p), delta(spec.p);
            for (int j = 0; j < spec.p; ++j) beta[j] = u(rng), delta[j] = u(rng);
            for (const auto& r : spec.support.regimes()) {
                const Eigen::VectorXd d = msmm_design(spec, r, v);
                const double g0 = beta.dot(d);
                const double g1 = (beta + delta).dot(d);
                CHECK(g1 - g0 == doctest::Approx(delta.dot(d)).epsilon(1e-12));
            }
        }
    }
}
