#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace proxmsm {

// One joint treatment assignment (a0, a1), each in {0,1}.
struct TreatmentRegime {
    int a0 = 0;
    int a1 = 0;

    friend bool operator==(const TreatmentRegime&, const TreatmentRegime&) = default;
};

// Ordered set of admissible regimes. Defaults to all four; the monotone preset
// {(0,0),(0,1),(1,1)} models settings where treatment, once started, is never stopped.
class TreatmentSupport {
public:
    static TreatmentSupport all();
    static TreatmentSupport monotone();
    explicit TreatmentSupport(std::vector<TreatmentRegime> regimes);

    const std::vector<TreatmentRegime>& regimes() const { return regimes_; }
    std::size_t size() const { return regimes_.size(); }
    bool contains(const TreatmentRegime& r) const;

    friend bool operator==(const TreatmentSupport&, const TreatmentSupport&) = default;

private:
    std::vector<TreatmentRegime> regimes_;
};

// Two-occasion panel: outcome Y, binary treatments (A0, A1), treatment-inducing
// proxies (Z0, Z1), outcome-inducing proxies (W0, W1), covariates (X0, X1) and
// optional baseline model covariates V. Column-aligned, complete cases, immutable
// after construction. Proxy/covariate blocks may have zero width.
class PanelDataset {
public:
    PanelDataset(Eigen::VectorXd y, Eigen::VectorXi a0, Eigen::VectorXi a1,
                 Eigen::MatrixXd z0, Eigen::MatrixXd z1,
                 Eigen::MatrixXd w0, Eigen::MatrixXd w1,
                 Eigen::MatrixXd x0, Eigen::MatrixXd x1,
                 Eigen::MatrixXd v, TreatmentSupport support);

    Eigen::Index n() const { return y_.size(); }
    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXi& a0() const { return a0_; }
    const Eigen::VectorXi& a1() const { return a1_; }
    const Eigen::MatrixXd& z0() const { return z0_; }
    const Eigen::MatrixXd& z1() const { return z1_; }
    const Eigen::MatrixXd& w0() const { return w0_; }
    const Eigen::MatrixXd& w1() const { return w1_; }
    const Eigen::MatrixXd& x0() const { return x0_; }
    const Eigen::MatrixXd& x1() const { return x1_; }
    const Eigen::MatrixXd& v() const { return v_; }
    const TreatmentSupport& support() const { return support_; }

    TreatmentRegime regime(Eigen::Index i) const { return {a0_[i], a1_[i]}; }

    // x0 with v appended; v is treated as part of X(0) wherever bridges need covariates.
    const Eigen::MatrixXd& x0v() const { return x0v_; }

    bool operator==(const PanelDataset& other) const;

private:
    Eigen::VectorXd y_;
    Eigen::VectorXi a0_, a1_;
    Eigen::MatrixXd z0_, z1_, w0_, w1_, x0_, x1_, v_, x0v_;
    TreatmentSupport support_;
};

// Column-name to role assignment used by CSV ingestion. Multi-column roles are
// ordered lists; v may be empty.
struct RoleMap {
    std::string y, a0, a1;
    std::vector<std::string> z0, z1, w0, w1, x0, x1, v;
};

// Assembles and validates a dataset from named columns. Throws ValidationError on
// length mismatch, non-binary treatments, records outside the support, empty data,
// or unfilled role slots.
PanelDataset dataset_from_columns(const std::map<std::string, std::vector<double>>& columns,
                                  const RoleMap& roles, const TreatmentSupport& support);

}  // namespace proxmsm
