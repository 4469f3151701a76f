#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "proxmsm/bridges.hpp"
#include "proxmsm/dataset.hpp"
#include "proxmsm/moments.hpp"
#include "proxmsm/msmm.hpp"

namespace proxmsm {

enum class EstimatorKind { POR, PIPW, PDR, DRSRA };

std::string estimator_name(EstimatorKind kind);

struct EstimatorDiagnostics {
    bool h_converged = true;
    bool q_converged = true;
    double h_resid = 0;
    double q_norm = 0;
    int q0_iterations = 0;
    int q1_iterations = 0;
    int truncated_weights = 0;  // DR-SRA only
    std::vector<std::string> flags;
};

struct EstimateReport {
    EstimatorKind estimator = EstimatorKind::POR;
    Eigen::VectorXd beta_hat;
    Eigen::MatrixXd cov;   // stacked-nuisance sandwich, symmetric PSD
    Eigen::VectorXd se;    // sqrt(diag(cov))
    Eigen::MatrixXd ci95;  // p x 2, beta_hat -/+ 1.96*se
    EstimatorDiagnostics diag;
    Eigen::Index n = 0;
};

// Proximal outcome regression: solves
//   Pn{ sum_regimes d(regime,V) [H0(regime) - design(regime,V).beta] } = 0.
// `data` is the view the h bridges were fitted on.
EstimateReport estimate_por(const PanelDataset& data, const HBridgeFit& h,
                            const MsmmSpec& spec,
                            const std::optional<IndexFunction>& d = std::nullopt);

// Proximal inverse probability weighting: solves
//   Pn{ d(A,V) Q1(A) [Y - design(A,V).beta] } = 0.
// `data` is the view the q bridges were fitted on.
EstimateReport estimate_pipw(const PanelDataset& data, const QBridgeFit& q,
                             const MsmmSpec& spec,
                             const std::optional<IndexFunction>& d = std::nullopt);

// Proximal doubly robust: solves Pn[ sum_regimes d(regime,V) Xi(beta)_regime ] = 0 where
//   Xi(beta)_r = 1(A=r) Q1(r) [Y - H1(r)] + 1(a0=r.a0) Q0(r.a0) [H1(r) - H0(r)]
//              + H0(r) - design(r,V).beta.
// Diverged bridge fits are still evaluated; convergence is reported, not required.
EstimateReport estimate_pdr(const PanelDataset& h_data, const HBridgeFit& h,
                            const PanelDataset& q_data, const QBridgeFit& q,
                            const MsmmSpec& spec,
                            const std::optional<IndexFunction>& d = std::nullopt);

// Classical longitudinal doubly robust comparator assuming sequential randomization
// given L(1) = (X,Z,W): logistic propensities, linear sequential outcome regressions,
// AIPW moment, inverse-probability weights truncated at their in-sample 99.5th
// percentile (count reported).
struct DrSraConfig {
    double weight_truncation_quantile = 0.995;
    SolverConfig logistic;
};
EstimateReport estimate_dr_sra(const PanelDataset& data, const MsmmSpec& spec,
                               const std::optional<IndexFunction>& d = std::nullopt,
                               const DrSraConfig& config = {});

}  // namespace proxmsm
