#include <doctest.h>

#include <cmath>
#include <random>

#include <proxmsm/errors.hpp>
#include <proxmsm/oracle.hpp>

#include "sra_reference.hpp"

using namespace proxmsm;


TEST_CASE("random binary worlds are complete; uninformative proxies are flagged") {
    const DiscreteWorld w = random_complete_world(1);
    CHECK(completeness_rank(w).complete);

    DiscreteWorld broken = w;
    for (int a0 = 0; a0 < 2; ++a0)
        for (int x0 = 0; x0 < broken.dims.x0; ++x0)
            for (int z0 = 0; z0 < broken.dims.z0; ++z0) {
                const double p = broken.pz0(a0, x0, 0, z0);
                for (int u0 = 0; u0 < broken.dims.u0; ++u0) broken.pz0(a0, x0, u0, z0) = p;
            }
    const CompletenessReport rep = completeness_rank(broken);
    CHECK_FALSE(rep.complete);  // z0 carries no information about u0
    CHECK_THROWS_AS(solve_bridges_exact(broken), ValidationError);
}

TEST_CASE("cardinality shortfall is incomplete regardless of loadings") {
    // Build directly: du0=3 with dz=dw=2 can never reach rank 3.
    std::mt19937_64 rng(9);
    WorldDims dims;
    dims.u0 = 3;
    std::uniform_real_distribution<double> mass(0.15, 1.0);
    DiscreteWorld w;
    w.dims = dims;
    const auto& d = dims;
    auto fill = [&](DTable& t, int vd) {
        auto& v = t.raw();
        for (std::size_t s = 0; s < v.size() / vd; ++s) {
            double sum = 0;
            for (int k = 0; k < vd; ++k) sum += (v[s * vd + k] = mass(rng));
            for (int k = 0; k < vd; ++k) v[s * vd + k] /= sum;
        }
    };
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
    fill(w.px0, d.x0);
    fill(w.pu0, d.u0);
    for (auto& p : w.pa0.raw()) p = 0.5;
    fill(w.pz0, d.z0);
    fill(w.pw0, d.w0);
    fill(w.px1, d.x1);
    fill(w.pu1, d.u1);
    for (auto& p : w.pa1.raw()) p = 0.4;
    fill(w.pz1, d.z1);
    fill(w.pw1, d.w1);
    CHECK_FALSE(completeness_rank(w).complete);
}

TEST_CASE("complete worlds verify both identification routes to 1e-10") {
    for (std::uint64_t seed = 10; seed < 18; ++seed) {
        const DiscreteWorld w = random_complete_world(seed);
        const BridgeTables b = solve_bridges_exact(w);
        CHECK(b.max_residual <= 1e-10);
        const IdentificationReport rep = verify_identification(w);
        CHECK(rep.complete);
        CHECK(rep.max_discrepancy <= 1e-10);
        CHECK(rep.rows.size() == 4);
    }
}

TEST_CASE("null-effect worlds identify the factual mean for every regime") {
    DiscreteWorld w = random_complete_world(21);
    // outcome depends on (x0, u0) only
    for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1)
            for (int x0 = 0; x0 < w.dims.x0; ++x0)
                for (int x1 = 0; x1 < w.dims.x1; ++x1)
                    for (int u0 = 0; u0 < w.dims.u0; ++u0)
                        for (int u1 = 0; u1 < w.dims.u1; ++u1)
                            w.ymean(a0, a1, x0, x1, u0, u1) =
                                0.3 + 0.7 * u0 - 0.2 * x0;

    double ey = 0;  // factual mean, directly from the pre-treatment marginal
    for (int x0 = 0; x0 < w.dims.x0; ++x0)
        for (int u0 = 0; u0 < w.dims.u0; ++u0)
            ey += w.px0(x0) * w.pu0(x0, u0) * (0.3 + 0.7 * u0 - 0.2 * x0);

    const IdentificationReport rep = verify_identification(w);
    CHECK(rep.max_discrepancy <= 1e-10);
    for (const auto& row : rep.rows) {
        CHECK(row.truth == doctest::Approx(ey).epsilon(1e-10));
        CHECK(row.g_formula == doctest::Approx(ey).epsilon(1e-10));
        CHECK(row.ipw == doctest::Approx(ey).epsilon(1e-10));
    }
}

TEST_CASE("breaking the Z-Y independence breaks identification") {
    int detected = 0;
    for (std::uint64_t seed = 30; seed < 36; ++seed) {
        DiscreteWorld w = random_complete_world(seed);
        w.y_z_shift = 0.5;
        const IdentificationReport rep = verify_identification(w);
        if (rep.max_discrepancy > 1e-4) ++detected;
    }
    CHECK(detected >= 5);
}

TEST_CASE("degenerate-U worlds reduce to the SRA formulas") {
    WorldDims dims;
    dims.u0 = dims.u1 = 1;
    dims.x0 = dims.x1 = 2;  // nontrivial covariates so the iterated regression matters
    for (std::uint64_t seed = 40; seed < 45; ++seed) {
        const DiscreteWorld w = random_complete_world(seed, dims);
        const BridgeTables b = solve_bridges_exact(w);
        const sra_ref::SraReference ref = sra_ref::compute(w);
        CHECK(sra_ref::table_gap(b.h1, ref.h1) <= 1e-12);
        CHECK(sra_ref::table_gap(b.h0, ref.h0) <= 1e-12);
        CHECK(sra_ref::table_gap(b.q0, ref.q0) <= 1e-12);
        CHECK(sra_ref::table_gap(b.q1, ref.q1) <= 1e-12);

        const IdentificationReport rep = verify_identification(w);
        CHECK(rep.max_discrepancy <= 1e-10);
    }
}

TEST_CASE("identification functionals are linear in the outcome scale") {
    DiscreteWorld w = random_complete_world(50);
    const IdentificationReport base = verify_identification(w);
    for (auto& y : w.ymean.raw()) y *= 3.0;
    const IdentificationReport scaled = verify_identification(w);
    for (std::size_t r = 0; r < base.rows.size(); ++r) {
        CHECK(scaled.rows[r].truth == doctest::Approx(3 * base.rows[r].truth).epsilon(1e-10));
        CHECK(scaled.rows[r].g_formula ==
              doctest::Approx(3 * base.rows[r].g_formula).epsilon(1e-10));
        CHECK(scaled.rows[r].ipw == doctest::Approx(3 * base.rows[r].ipw).epsilon(1e-10));
    }
}

TEST_CASE("world validation rejects broken tables") {
    DiscreteWorld w = random_complete_world(60);
    w.pa0(0, 0) = 0.0;  // violates positivity
    CHECK_THROWS_AS(w.validate(), ValidationError);

    DiscreteWorld w2 = random_complete_world(61);
    w2.pu0(0, 0) += 0.2;  // slice no longer sums to one
    CHECK_THROWS_AS(w2.validate(), ValidationError);
}
