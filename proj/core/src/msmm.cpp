#include "proxmsm/msmm.hpp"

#include "proxmsm/errors.hpp"

namespace proxmsm {

MsmmSpec MsmmSpec::cumulative(TreatmentSupport support) {
    MsmmSpec spec;
    spec.kind = MsmmKind::Cumulative;
    spec.p = 2;
    spec.support = std::move(support);
    spec.design = [](const TreatmentRegime& r, const Eigen::VectorXd&) {
        Eigen::VectorXd d(2);
        d << 1.0, static_cast<double>(r.a0 + r.a1);
        return d;
    };
    return spec;
}

MsmmSpec MsmmSpec::saturated_monotone() {
    MsmmSpec spec;
    spec.kind = MsmmKind::Saturated;
    spec.p = 3;
    spec.support = TreatmentSupport::monotone();
    spec.design = [](const TreatmentRegime& r, const Eigen::VectorXd&) {
        Eigen::VectorXd d(3);
        d << 1.0, static_cast<double>((1 - r.a0) * r.a1), static_cast<double>(r.a0);
        return d;
    };
    return spec;
}

MsmmSpec MsmmSpec::custom(
    int p, TreatmentSupport support,
    std::function<Eigen::VectorXd(const TreatmentRegime&, const Eigen::VectorXd&)> design) {
    if (p < 1) throw ValidationError("MSMM parameter dimension must be positive");
    MsmmSpec spec;
    spec.kind = MsmmKind::Custom;
    spec.p = p;
    spec.support = std::move(support);
    spec.design = std::move(design);
    return spec;
}

Eigen::VectorXd msmm_design(const MsmmSpec& spec, const TreatmentRegime& regime,
                            const Eigen::VectorXd& v) {
    if (!spec.support.contains(regime)) throw ValidationError("regime outside support");
    Eigen::VectorXd d = spec.design(regime, v);
    if (d.size() != spec.p) throw ValidationError("design function returned wrong dimension");
    return d;
}

IndexFunction IndexFunction::default_for(const MsmmSpec& spec) {
    return IndexFunction{spec.design};
}

}  // namespace proxmsm
