#pragma once

#include <Eigen/Dense>

#include "proxmsm/dataset.hpp"
#include "proxmsm/moments.hpp"

namespace proxmsm {

// Outcome confounding bridge working models, affine in their continuous arguments:
//   h1(w0, w1, a0, a1, x0v, x1; b1), coefficient layout [1, a0, a1, w0.., w1.., x0v.., x1..]
//   h0(w0, a0, a1, x0v; b0),         coefficient layout [1, a0, a1, w0.., x0v..]
struct HBridgeFit {
    Eigen::VectorXd b1;
    Eigen::VectorXd b0;
    bool converged1 = false;
    bool converged0 = false;
    double resid1 = 0;  // ||Pn[residual x instrument]||_inf after the h1 solve
    double resid0 = 0;  // same for the stacked h0 moments
    int pw0 = 0, pw1 = 0, px0v = 0, px1 = 0;
};

// Treatment confounding bridge working models:
//   q0 = 1 + exp((-1)^(1-a0) * t0.(1, a0, z0.., x0v..))              > 1
//   q1 = q0 * (1 + exp((-1)^(1-a1) * t1.(1, a0, a1, z0.., z1.., x0v.., x1..)))  > 1
struct QBridgeFit {
    Eigen::VectorXd t0;
    Eigen::VectorXd t1;
    bool converged0 = false;
    bool converged1 = false;
    double norm0 = 0;  // final ||Pn[moment]||_inf of the q0 system
    double norm1 = 0;
    int iterations0 = 0;
    int iterations1 = 0;
    int restarts0 = 0;  // random restarts consumed; 0 means the zero start succeeded
    int restarts1 = 0;
    int pz0 = 0, pz1 = 0, px0v = 0, px1 = 0;
};

// Point evaluations against a dataset row. Bridges must be evaluated on the same view
// they were fitted on (misspecification transforms live in the data, not the fit).
double h1_value(const HBridgeFit& fit, const PanelDataset& data, Eigen::Index i,
                const TreatmentRegime& regime);
double h0_value(const HBridgeFit& fit, const PanelDataset& data, Eigen::Index i,
                const TreatmentRegime& regime);
double q0_value(const QBridgeFit& fit, const PanelDataset& data, Eigen::Index i, int a0);
double q1_value(const QBridgeFit& fit, const PanelDataset& data, Eigen::Index i,
                const TreatmentRegime& regime);

// Closed-form just-identified GMM for h1 with instruments M1 = (1, a0, a1, z0, z1, x0v, x1).
// Requires matching proxy widths (dim z == dim w per occasion). Throws NumericalError
// "h1 not identified by chosen instruments" on singular cross-moments.
HBridgeFit fit_h1(const PanelDataset& data, double cond_limit = 1e12);

// Completes b0 from a fitted b1: stacks the bracketed difference at both a(1) values
// against M0 = (1, a0, z0, x0v); equivalently matches the a(1) slope exactly and solves
// the averaged system. Mutates and returns `fit`.
HBridgeFit fit_h0(const PanelDataset& data, HBridgeFit fit, double cond_limit = 1e12);

// Both h stages in sequence.
HBridgeFit fit_h_bridges(const PanelDataset& data, double cond_limit = 1e12);

// Damped-Newton fits of the q systems with instruments
//   N0 = (-1)^(1-a0)(1, a0, w0, x0v),  N1 = (-1)^(1-a1)(1, a0, a1, w0, w1, x0v, x1).
// Never throw on plain non-convergence (flags carry it); throw NumericalError
// "q-bridge numerically unstable" when the predictor guard cannot be satisfied and
// ValidationError when an arm is absent.
QBridgeFit fit_q0(const PanelDataset& data, const SolverConfig& config = {});
QBridgeFit fit_q1(const PanelDataset& data, QBridgeFit fit, const SolverConfig& config = {});
QBridgeFit fit_q_bridges(const PanelDataset& data, const SolverConfig& config = {});

// Per-record nuisance moment vectors, exposed for the stacked sandwich. Layouts match
// the fitters: h1 block dim = dim b1, h0 block dim = dim b0 (averaged + slope form),
// q0 block dim = dim t0, q1 block dim = dim t1.
void h1_moment(const Eigen::VectorXd& b1, const PanelDataset& data, Eigen::Index i,
               Eigen::Ref<Eigen::VectorXd> out);
void h0_moment(const Eigen::VectorXd& b1, const Eigen::VectorXd& b0, const PanelDataset& data,
               Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out);
void q0_moment(const Eigen::VectorXd& t0, const PanelDataset& data, Eigen::Index i,
               Eigen::Ref<Eigen::VectorXd> out);
void q1_moment(const Eigen::VectorXd& t0, const Eigen::VectorXd& t1, const PanelDataset& data,
               Eigen::Index i, Eigen::Ref<Eigen::VectorXd> out);

int h1_dim(const PanelDataset& data);
int h0_dim(const PanelDataset& data);
int q0_dim(const PanelDataset& data);
int q1_dim(const PanelDataset& data);

// Evaluations from raw coefficient vectors, for stacked-moment perturbations.
double h1_eval_raw(const Eigen::VectorXd& b1, const PanelDataset& data, Eigen::Index i,
                   const TreatmentRegime& regime);
double h0_eval_raw(const Eigen::VectorXd& b0, const PanelDataset& data, Eigen::Index i,
                   const TreatmentRegime& regime);
double q0_eval_raw(const Eigen::VectorXd& t0, const PanelDataset& data, Eigen::Index i, int a0);
double q1_eval_raw(const Eigen::VectorXd& t0, const Eigen::VectorXd& t1,
                   const PanelDataset& data, Eigen::Index i, const TreatmentRegime& regime);

}  // namespace proxmsm
