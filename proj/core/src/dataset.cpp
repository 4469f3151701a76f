#include "proxmsm/dataset.hpp"

#include <algorithm>
#include <sstream>

#include "proxmsm/errors.hpp"

namespace proxmsm {

TreatmentSupport TreatmentSupport::all() {
    return TreatmentSupport({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
}

TreatmentSupport TreatmentSupport::monotone() {
    return TreatmentSupport({{0, 0}, {0, 1}, {1, 1}});
}

TreatmentSupport::TreatmentSupport(std::vector<TreatmentRegime> regimes)
    : regimes_(std::move(regimes)) {
    if (regimes_.empty()) throw ValidationError("treatment support must be nonempty");
    for (const auto& r : regimes_) {
        if ((r.a0 != 0 && r.a0 != 1) || (r.a1 != 0 && r.a1 != 1))
            throw ValidationError("treatment regimes must be binary");
    }
    for (std::size_t i = 0; i < regimes_.size(); ++i)
        for (std::size_t j = i + 1; j < regimes_.size(); ++j)
            if (regimes_[i] == regimes_[j])
                throw ValidationError("duplicate regime in treatment support");
}

bool TreatmentSupport::contains(const TreatmentRegime& r) const {
    return std::find(regimes_.begin(), regimes_.end(), r) != regimes_.end();
}

namespace {

void check_rows(const char* name, Eigen::Index expected, Eigen::Index got) {
    if (got != expected) {
        std::ostringstream os;
        os << "column length mismatch: " << name << " has " << got << " rows, expected "
           << expected;
        throw ValidationError(os.str());
    }
}

}  // namespace

PanelDataset::PanelDataset(Eigen::VectorXd y, Eigen::VectorXi a0, Eigen::VectorXi a1,
                           Eigen::MatrixXd z0, Eigen::MatrixXd z1, Eigen::MatrixXd w0,
                           Eigen::MatrixXd w1, Eigen::MatrixXd x0, Eigen::MatrixXd x1,
                           Eigen::MatrixXd v, TreatmentSupport support)
    : y_(std::move(y)), a0_(std::move(a0)), a1_(std::move(a1)), z0_(std::move(z0)),
      z1_(std::move(z1)), w0_(std::move(w0)), w1_(std::move(w1)), x0_(std::move(x0)),
      x1_(std::move(x1)), v_(std::move(v)), support_(std::move(support)) {
    const Eigen::Index n = y_.size();
    if (n < 1) throw ValidationError("empty dataset");
    check_rows("a0", n, a0_.size());
    check_rows("a1", n, a1_.size());
    check_rows("z0", n, z0_.rows());
    check_rows("z1", n, z1_.rows());
    check_rows("w0", n, w0_.rows());
    check_rows("w1", n, w1_.rows());
    check_rows("x0", n, x0_.rows());
    check_rows("x1", n, x1_.rows());
    check_rows("v", n, v_.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
        if ((a0_[i] != 0 && a0_[i] != 1) || (a1_[i] != 0 && a1_[i] != 1))
            throw ValidationError("non-binary treatment column");
        if (!support_.contains({a0_[i], a1_[i]})) throw ValidationError("regime outside support");
    }
    if (!y_.allFinite() || !z0_.allFinite() || !z1_.allFinite() || !w0_.allFinite() ||
        !w1_.allFinite() || !x0_.allFinite() || !x1_.allFinite() || !v_.allFinite())
        throw ValidationError("dataset contains non-finite values");
    x0v_.resize(n, x0_.cols() + v_.cols());
    x0v_ << x0_, v_;
}

bool PanelDataset::operator==(const PanelDataset& other) const {
    return y_ == other.y_ && a0_ == other.a0_ && a1_ == other.a1_ && z0_ == other.z0_ &&
           z1_ == other.z1_ && w0_ == other.w0_ && w1_ == other.w1_ && x0_ == other.x0_ &&
           x1_ == other.x1_ && v_ == other.v_ && support_ == other.support_;
}

namespace {

const std::vector<double>& named_column(const std::map<std::string, std::vector<double>>& columns,
                                        const std::string& name, const char* role) {
    auto it = columns.find(name);
    if (it == columns.end()) {
        std::ostringstream os;
        os << "role " << role << " references unknown column '" << name << "'";
        throw ValidationError(os.str());
    }
    return it->second;
}

Eigen::MatrixXd gather(const std::map<std::string, std::vector<double>>& columns,
                       const std::vector<std::string>& names, const char* role,
                       Eigen::Index n) {
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto& col = named_column(columns, names[j], role);
        check_rows(role, n, static_cast<Eigen::Index>(col.size()));
        for (Eigen::Index i = 0; i < n; ++i) out(i, static_cast<Eigen::Index>(j)) = col[i];
    }
    return out;
}

Eigen::VectorXi to_binary(const std::vector<double>& col, const char* role) {
    Eigen::VectorXi out(static_cast<Eigen::Index>(col.size()));
    for (std::size_t i = 0; i < col.size(); ++i) {
        if (col[i] == 0.0)
            out[static_cast<Eigen::Index>(i)] = 0;
        else if (col[i] == 1.0)
            out[static_cast<Eigen::Index>(i)] = 1;
        else {
            std::ostringstream os;
            os << "non-binary treatment column (role " << role << ")";
            throw ValidationError(os.str());
        }
    }
    return out;
}

}  // namespace

PanelDataset dataset_from_columns(const std::map<std::string, std::vector<double>>& columns,
                                  const RoleMap& roles, const TreatmentSupport& support) {
    if (roles.y.empty() || roles.a0.empty() || roles.a1.empty() || roles.z0.empty() ||
        roles.z1.empty() || roles.w0.empty() || roles.w1.empty() || roles.x0.empty() ||
        roles.x1.empty())
        throw ValidationError("role map must fill y, a0, a1, z0, z1, w0, w1, x0, x1");

    const auto& ycol = named_column(columns, roles.y, "y");
    const Eigen::Index n = static_cast<Eigen::Index>(ycol.size());
    if (n < 1) throw ValidationError("empty dataset");

    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = ycol[i];

    const auto& a0col = named_column(columns, roles.a0, "a0");
    const auto& a1col = named_column(columns, roles.a1, "a1");
    check_rows("a0", n, static_cast<Eigen::Index>(a0col.size()));
    check_rows("a1", n, static_cast<Eigen::Index>(a1col.size()));

    return PanelDataset(std::move(y), to_binary(a0col, "a0"), to_binary(a1col, "a1"),
                        gather(columns, roles.z0, "z0", n), gather(columns, roles.z1, "z1", n),
                        gather(columns, roles.w0, "w0", n), gather(columns, roles.w1, "w1", n),
                        gather(columns, roles.x0, "x0", n), gather(columns, roles.x1, "x1", n),
                        gather(columns, roles.v, "v", n), support);
}

}  // namespace proxmsm
