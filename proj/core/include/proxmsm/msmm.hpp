#pragma once

#include <Eigen/Dense>

#include <functional>

#include "proxmsm/dataset.hpp"

namespace proxmsm {

enum class MsmmKind { Cumulative, Saturated, Custom };

// Marginal structural mean model with identity link:
//   E[Y_regime | V] = beta . design(regime, V).
// Cumulative: design = (1, a0+a1), p = 2, any support.
// Saturated (monotone support): design = (1, (1-a0)*a1, a0), p = 3.
struct MsmmSpec {
    MsmmKind kind = MsmmKind::Cumulative;
    int p = 2;
    TreatmentSupport support = TreatmentSupport::all();
    std::function<Eigen::VectorXd(const TreatmentRegime&, const Eigen::VectorXd& v)> design;

    static MsmmSpec cumulative(TreatmentSupport support = TreatmentSupport::all());
    static MsmmSpec saturated_monotone();
    static MsmmSpec custom(int p, TreatmentSupport support,
                           std::function<Eigen::VectorXd(const TreatmentRegime&, const Eigen::VectorXd&)> design);
};

// design(regime, v), with the support membership check. Throws ValidationError
// "regime outside support" otherwise.
Eigen::VectorXd msmm_design(const MsmmSpec& spec, const TreatmentRegime& regime,
                            const Eigen::VectorXd& v);

// Index function d(regime, v) weighting the MSMM moment; defaults to the model gradient.
struct IndexFunction {
    std::function<Eigen::VectorXd(const TreatmentRegime&, const Eigen::VectorXd& v)> d;

    static IndexFunction default_for(const MsmmSpec& spec);
};

}  // namespace proxmsm
