#include "proxmsm/dgm.hpp"

#include <cmath>
#include <random>

#include "proxmsm/errors.hpp"
#include "proxmsm/moments.hpp"

namespace proxmsm {

void DgmParams::validate() const {
    const double sds[] = {x0_sd, u0_sd, z0_sd, w0_sd, x1_sd, u1_sd, z1_sd, w1_sd, y_sd};
    for (double s : sds)
        if (!(s > 0)) throw ValidationError("invalid params: noise SDs must be positive");
}

namespace {

// P(A = 1) under the threshold parameterization 1/(1 + exp((-1)^(1-a) eta)).
inline double treat_prob(double eta) { return 1.0 / (1.0 + std::exp(eta)); }

struct Record {
    double x0, u0, z0, w0, x1, u1, z1, w1, y;
    int a0, a1;
};

// One pass in causal order. The treatment uniforms are always drawn so that factual
// and intervened runs share the rest of the stream at equal seeds.
template <class Rng, class Normal>
Record draw_record(const DgmParams& p, Rng& rng, Normal& normal,
                   std::uniform_real_distribution<double>& unif,
                   const TreatmentRegime* forced) {
    Record r;
    r.x0 = p.x0_mean + p.x0_sd * normal(rng);
    r.u0 = p.u0_mean + p.u0_sd * normal(rng);

    const double ua0 = unif(rng);
    r.a0 = ua0 < treat_prob(p.a0_c + p.a0_x0 * r.x0 + p.a0_u0 * r.u0) ? 1 : 0;
    if (forced) r.a0 = forced->a0;

    r.z0 = p.z0_c + p.z0_a0 * r.a0 + p.z0_x0 * r.x0 + p.z0_u0 * r.u0 + p.z0_sd * normal(rng);
    r.w0 = p.w0_c + p.w0_x0 * r.x0 + p.w0_u0 * r.u0 + p.w0_sd * normal(rng);
    r.x1 = p.x1_c + p.x1_a0 * r.a0 + p.x1_x0 * r.x0 + p.x1_sd * normal(rng);
    r.u1 = p.u1_c + p.u1_a0 * r.a0 + p.u1_u0 * r.u0 + p.u1_sd * normal(rng);

    const double ua1 = unif(rng);
    r.a1 = ua1 < treat_prob(p.a1_c + p.a1_a0 * r.a0 + p.a1_x * (r.x0 + r.x1) +
                            p.a1_u * (r.u0 + r.u1))
               ? 1
               : 0;
    if (forced) r.a1 = forced->a1;

    r.z1 = p.z1_c + p.z1_a * (r.a0 + r.a1) + p.z1_x * (r.x0 + r.x1) + p.z1_u * (r.u0 + r.u1) +
           p.z1_sd * normal(rng);
    r.w1 = p.w1_c + p.w1_x * (r.x0 + r.x1) + p.w1_u * (r.u0 + r.u1) + p.w1_sd * normal(rng);
    r.y = p.y_c + p.y_a1 * r.a1 + p.y_a0 * r.a0 + p.y_x1 * r.x1 + p.y_u1 * r.u1 +
          p.y_x0 * r.x0 + p.y_u0 * r.u0 + p.y_sd * normal(rng);
    return r;
}

}  // namespace

SimulatedWithLatents simulate_with_latents(const DgmParams& params, Eigen::Index n,
                                           std::uint64_t seed) {
    params.validate();
    if (n < 1) throw ValidationError("simulate requires n >= 1");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Eigen::VectorXd y(n), u0(n), u1(n);
    Eigen::VectorXi a0(n), a1(n);
    Eigen::MatrixXd z0(n, 1), z1(n, 1), w0(n, 1), w1(n, 1), x0(n, 1), x1(n, 1), v(n, 0);

    for (Eigen::Index i = 0; i < n; ++i) {
        const Record r = draw_record(params, rng, normal, unif, nullptr);
        y[i] = r.y;
        a0[i] = r.a0;
        a1[i] = r.a1;
        z0(i, 0) = r.z0;
        z1(i, 0) = r.z1;
        w0(i, 0) = r.w0;
        w1(i, 0) = r.w1;
        x0(i, 0) = r.x0;
        x1(i, 0) = r.x1;
        u0[i] = r.u0;
        u1[i] = r.u1;
    }

    PanelDataset data(std::move(y), std::move(a0), std::move(a1), std::move(z0), std::move(z1),
                      std::move(w0), std::move(w1), std::move(x0), std::move(x1), std::move(v),
                      TreatmentSupport::all());
    return {std::move(data), std::move(u0), std::move(u1)};
}

PanelDataset simulate(const DgmParams& params, Eigen::Index n, std::uint64_t seed) {
    return simulate_with_latents(params, n, seed).data;
}

double counterfactual_mean(const DgmParams& params, const TreatmentRegime& regime,
                           Eigen::Index n, std::uint64_t seed) {
    params.validate();
    if (n < 1) throw ValidationError("counterfactual_mean requires n >= 1");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    double sum = 0;
    for (Eigen::Index i = 0; i < n; ++i) sum += draw_record(params, rng, normal, unif, &regime).y;
    return sum / static_cast<double>(n);
}

double true_counterfactual_mean(const DgmParams& p, const TreatmentRegime& regime) {
    const double a0 = regime.a0, a1 = regime.a1;
    const double ex1 = p.x1_c + p.x1_a0 * a0 + p.x1_x0 * p.x0_mean;
    const double eu1 = p.u1_c + p.u1_a0 * a0 + p.u1_u0 * p.u0_mean;
    return p.y_c + p.y_a1 * a1 + p.y_a0 * a0 + p.y_x1 * ex1 + p.y_u1 * eu1 +
           p.y_x0 * p.x0_mean + p.y_u0 * p.u0_mean;
}

Eigen::VectorXd true_beta(const DgmParams& params, const MsmmSpec& spec) {
    params.validate();
    const Eigen::VectorXd empty_v(0);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(spec.p, spec.p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(spec.p);
    for (const auto& r : spec.support.regimes()) {
        const Eigen::VectorXd d = msmm_design(spec, r, empty_v);
        G += d * d.transpose();
        rhs += d * true_counterfactual_mean(params, r);
    }
    return solve_cross_moment(G, rhs, "MSMM not identified by support and d");
}

namespace {

Eigen::MatrixXd sqrt_abs_plus_one(const Eigen::MatrixXd& m) {
    return (m.array().abs().sqrt() + 1.0).matrix();
}

PanelDataset with_proxies(const PanelDataset& d, Eigen::MatrixXd z0, Eigen::MatrixXd z1,
                          Eigen::MatrixXd w0, Eigen::MatrixXd w1) {
    return PanelDataset(d.y(), d.a0(), d.a1(), std::move(z0), std::move(z1), std::move(w0),
                        std::move(w1), d.x0(), d.x1(), d.v(), d.support());
}

}  // namespace

MisspecViews apply_misspec(MisspecKind kind, const PanelDataset& data) {
    const bool wor = kind == MisspecKind::WOR || kind == MisspecKind::Both;
    const bool wipw = kind == MisspecKind::WIPW || kind == MisspecKind::Both;

    PanelDataset h_view =
        wor ? with_proxies(data, data.z0(), data.z1(), sqrt_abs_plus_one(data.w0()),
                           sqrt_abs_plus_one(data.w1()))
            : data;
    PanelDataset q_view =
        wipw ? with_proxies(data, data.z0().cwiseAbs(), data.z1().cwiseAbs(), data.w0(),
                            data.w1())
             : data;
    return {std::move(h_view), std::move(q_view)};
}

}  // namespace proxmsm
