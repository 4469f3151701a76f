#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "proxmsm/dataset.hpp"
#include "proxmsm/msmm.hpp"

namespace proxmsm {

// Structural coefficients of the simulation's data generating mechanism. Variables are
// generated in causal order X0, U0, A0, Z0, W0, X1, U1, A1, Z1, W1, Y; U0/U1 are the
// unmeasured confounders. Treatment assignment probabilities follow the threshold form
//   P(A=a | .) = 1 / (1 + exp((-1)^(1-a) * eta)).
struct DgmParams {
    double x0_mean = -0.35, x0_sd = 0.5;
    double u0_mean = 0.35, u0_sd = 0.5;

    // eta_a0 = a0_c + a0_x0*x0 + a0_u0*u0
    double a0_c = 0.5, a0_x0 = -0.2, a0_u0 = -0.7;

    double z0_c = 0.3, z0_a0 = 0.7, z0_x0 = 0.4, z0_u0 = 0.7, z0_sd = 0.5;
    double w0_c = 0.2, w0_x0 = 0.7, w0_u0 = -0.75, w0_sd = 0.5;

    double x1_c = 0.2, x1_a0 = 0.7, x1_x0 = 0.7, x1_sd = 0.5;
    double u1_c = 0.2, u1_a0 = 0.7, u1_u0 = 0.7, u1_sd = 0.5;

    // eta_a1 = a1_c + a1_a0*a0 + a1_x*(x0+x1) + a1_u*(u0+u1)
    double a1_c = 0.7, a1_a0 = -0.7, a1_x = -0.35, a1_u = -0.7;

    // z1 mean = z1_c + z1_a*(a0+a1) + z1_x*(x0+x1) + z1_u*(u0+u1)
    double z1_c = 0.2, z1_a = 0.7, z1_x = 0.5, z1_u = -0.75, z1_sd = 0.5;
    double w1_c = 0.35, w1_x = 0.45, w1_u = -0.7, w1_sd = 0.5;

    double y_c = -1.3, y_a1 = 1.0, y_a0 = 1.14, y_x1 = 0.5, y_u1 = -0.7,
           y_x0 = 0.2, y_u0 = -0.7, y_sd = 0.5;

    // Throws ValidationError on nonpositive noise SDs.
    void validate() const;
};

// n i.i.d. draws; deterministic given (params, n, seed). The unmeasured U columns are
// generated but not exported.
PanelDataset simulate(const DgmParams& params, Eigen::Index n, std::uint64_t seed);

// Debug export of the latent confounders, for oracle-style tests only.
struct SimulatedWithLatents {
    PanelDataset data;
    Eigen::VectorXd u0;
    Eigen::VectorXd u1;
};
SimulatedWithLatents simulate_with_latents(const DgmParams& params, Eigen::Index n,
                                           std::uint64_t seed);

// Monte Carlo counterfactual mean E[Y_regime] by intervened simulation (both treatment
// draws overridden). Shares the random stream layout with simulate() at equal seeds.
double counterfactual_mean(const DgmParams& params, const TreatmentRegime& regime,
                           Eigen::Index n, std::uint64_t seed);

// Exact counterfactual mean by propagating means through the linear structural
// equations. Cross-checks the Monte Carlo oracle and supplies the truth for the
// simulation harness.
double true_counterfactual_mean(const DgmParams& params, const TreatmentRegime& regime);

// Population MSMM coefficients: least-squares projection of the exact counterfactual
// means onto the design over the model's support (an exact fit when the model is correct).
Eigen::VectorXd true_beta(const DgmParams& params, const MsmmSpec& spec);

// Working-model misspecification transforms. WOR replaces (w0, w1) by sqrt(|w|)+1 in
// the h-bridge inputs only; WIPW replaces (z0, z1) by |z| in the q-bridge inputs only.
enum class MisspecKind { None, WOR, WIPW, Both };

struct MisspecViews {
    PanelDataset h_view;  // feeds the outcome-bridge fitter and its evaluations
    PanelDataset q_view;  // feeds the treatment-bridge fitter and its evaluations
};

MisspecViews apply_misspec(MisspecKind kind, const PanelDataset& data);

}  // namespace proxmsm
