#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "proxmsm/dataset.hpp"
#include "proxmsm/errors.hpp"

namespace proxmsm {

// Dense row-major table over small categorical axes; the value axis is last.
class DTable {
public:
    DTable() = default;
    explicit DTable(std::vector<int> dims)
        : dims_(std::move(dims)),
          v_(static_cast<std::size_t>(std::accumulate(dims_.begin(), dims_.end(), 1,
                                                      std::multiplies<int>())),
             0.0) {}

    template <class... I>
    double& operator()(I... idx) {
        return v_[flat(idx...)];
    }
    template <class... I>
    double operator()(I... idx) const {
        return v_[flat(idx...)];
    }

    const std::vector<int>& dims() const { return dims_; }
    std::vector<double>& raw() { return v_; }
    const std::vector<double>& raw() const { return v_; }

private:
    template <class... I>
    std::size_t flat(I... idx) const {
        const int ix[] = {static_cast<int>(idx)...};
        std::size_t f = 0;
        for (std::size_t k = 0; k < dims_.size(); ++k) f = f * dims_[k] + ix[k];
        return f;
    }

    std::vector<int> dims_;
    std::vector<double> v_;
};

struct WorldDims {
    int x0 = 1, u0 = 2, z0 = 2, w0 = 2;
    int x1 = 1, u1 = 2, z1 = 2, w1 = 2;
};

// Finite-state world factorized in causal order X0, U0, A0, Z0, W0, X1, U1, A1, Z1, W1
// with treatments binary. The proximal independences hold structurally: forbidden
// parents are absent from the table signatures (W tables never see Z or the same-time
// treatment; the Y mean omits Z and W). y_z_shift injects a direct Z -> Y dependence to
// deliberately break identification.
struct DiscreteWorld {
    WorldDims dims;
    DTable px0;     // P(x0)                      [dx0]
    DTable pu0;     // P(u0 | x0)                 [dx0, du0]
    DTable pa0;     // P(a0 = 1 | x0, u0)         [dx0, du0]
    DTable pz0;     // P(z0 | a0, x0, u0)         [2, dx0, du0, dz0]
    DTable pw0;     // P(w0 | x0, u0)             [dx0, du0, dw0]
    DTable px1;     // P(x1 | a0, x0, u0)         [2, dx0, du0, dx1]
    DTable pu1;     // P(u1 | a0, x0, u0)         [2, dx0, du0, du1]
    DTable pa1;     // P(a1 = 1 | a0, x0, x1, u0, u1)      [2, dx0, dx1, du0, du1]
    DTable pz1;     // P(z1 | a0, a1, x0, x1, u0, u1)      [2, 2, dx0, dx1, du0, du1, dz1]
    DTable pw1;     // P(w1 | a0, x0, x1, u0, u1)          [2, dx0, dx1, du0, du1, dw1]
    DTable ymean;   // E[Y | a0, a1, x0, x1, u0, u1]       [2, 2, dx0, dx1, du0, du1]
    double y_z_shift = 0;

    // Throws ValidationError on non-normalized pmf slices or degenerate treatment
    // assignment probabilities.
    void validate() const;

    // Outcome mean including the optional direct z leak.
    double outcome_mean(int a0, int a1, int x0, int x1, int u0, int u1, int z0, int z1) const;
};

struct RankCheck {
    std::string label;
    int rank = 0;
    int required = 0;
    double sigma_min = 0;  // smallest of the `required` leading singular values
};

struct CompletenessReport {
    bool complete = false;
    std::vector<RankCheck> checks;
    double min_margin = 0;  // min over checks of sigma_min
};

// Rank diagnostics of the proxy-vs-confounder conditional probability matrices,
// per stratum and occasion (jointly over both occasions at time 1).
CompletenessReport completeness_rank(const DiscreteWorld& world);

struct BridgeTables {
    DTable h1;  // [2, 2, dx0, dx1, dw0, dw1]  (regime, xbar, wbar)
    DTable h0;  // [2, 2, dx0, dw0]
    DTable q0;  // [2, dx0, dz0]
    DTable q1;  // [2, 2, dx0, dx1, dz0, dz1]
    double max_residual = 0;
};

// Exact solutions of the four defining equations, one probability-weighted
// minimum-norm least-squares solve per stratum. With strict=true throws
// ValidationError when the world is incomplete and NumericalError
// "bridge equations inconsistent" when any residual exceeds 1e-10.
BridgeTables solve_bridges_exact(const DiscreteWorld& world, bool strict = true);

struct IdentificationReport {
    struct Row {
        TreatmentRegime regime;
        double truth = 0;      // direct summation over the intervened world
        double g_formula = 0;  // sum of h0 against P(w0, x0)
        double ipw = 0;        // sum of y 1(A=regime) q1 against the joint
    };
    std::vector<Row> rows;
    double max_discrepancy = 0;
    double max_bridge_residual = 0;
    bool complete = false;
};

// Solves bridges leniently and compares the proximal g-formula and proximal IPW
// functionals against the intervened truth for every regime.
IdentificationReport verify_identification(const DiscreteWorld& world);

// Seeded random world with strictly positive tables and a margin-from-singularity
// check on the completeness matrices. Resamples internally until the margin holds.
DiscreteWorld random_complete_world(std::uint64_t seed, const WorldDims& dims = {},
                                    double margin = 1e-3);

}  // namespace proxmsm
