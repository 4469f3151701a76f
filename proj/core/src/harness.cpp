#include "proxmsm/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include "proxmsm/errors.hpp"

namespace proxmsm {

std::string scenario_name(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::POR: return "POR";
        case ScenarioKind::POR_WOR: return "POR-WOR";
        case ScenarioKind::PIPW: return "PIPW";
        case ScenarioKind::PIPW_WIPW: return "PIPW-WIPW";
        case ScenarioKind::PDR: return "PDR";
        case ScenarioKind::PDR_WOR: return "PDR-WOR";
        case ScenarioKind::PDR_WIPW: return "PDR-WIPW";
        case ScenarioKind::PDR_BW: return "PDR-BW";
        case ScenarioKind::DR_SRA: return "DR-SRA";
    }
    return "?";
}

std::vector<ScenarioKind> all_scenarios() {
    return {ScenarioKind::POR,      ScenarioKind::POR_WOR,  ScenarioKind::PIPW,
            ScenarioKind::PIPW_WIPW, ScenarioKind::PDR,      ScenarioKind::PDR_WOR,
            ScenarioKind::PDR_WIPW,  ScenarioKind::PDR_BW,   ScenarioKind::DR_SRA};
}

namespace {

MisspecKind misspec_for(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::POR_WOR:
        case ScenarioKind::PDR_WOR: return MisspecKind::WOR;
        case ScenarioKind::PIPW_WIPW:
        case ScenarioKind::PDR_WIPW: return MisspecKind::WIPW;
        case ScenarioKind::PDR_BW: return MisspecKind::Both;
        default: return MisspecKind::None;
    }
}

bool uses_h(ScenarioKind k) {
    return k == ScenarioKind::POR || k == ScenarioKind::POR_WOR || k == ScenarioKind::PDR ||
           k == ScenarioKind::PDR_WOR || k == ScenarioKind::PDR_WIPW ||
           k == ScenarioKind::PDR_BW;
}

bool uses_q(ScenarioKind k) {
    return k == ScenarioKind::PIPW || k == ScenarioKind::PIPW_WIPW || k == ScenarioKind::PDR ||
           k == ScenarioKind::PDR_WOR || k == ScenarioKind::PDR_WIPW ||
           k == ScenarioKind::PDR_BW;
}

ReplicateRecord run_replicate(const Scenario& s, int r) {
    ReplicateRecord rec;
    try {
        const PanelDataset data = simulate(s.params, s.n, s.base_seed + static_cast<std::uint64_t>(r));
        const MisspecViews views = apply_misspec(misspec_for(s.kind), data);

        HBridgeFit h;
        QBridgeFit q;
        if (uses_h(s.kind)) {
            h = fit_h_bridges(views.h_view);
            rec.h_resid = std::max(h.resid1, h.resid0);
        }
        if (uses_q(s.kind)) {
            q = fit_q_bridges(views.q_view);
            rec.q_norm = std::max(q.norm0, q.norm1);
            rec.q_zero_start =
                q.converged0 && q.converged1 && q.restarts0 == 0 && q.restarts1 == 0;
            rec.converged = rec.converged && q.converged0 && q.converged1;
            rec.q_min_value = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < views.q_view.n(); ++i) {
                rec.q_min_value = std::min(
                    rec.q_min_value, q0_value(q, views.q_view, i, views.q_view.a0()[i]));
                rec.q_min_value = std::min(
                    rec.q_min_value, q1_value(q, views.q_view, i, views.q_view.regime(i)));
            }
        }

        EstimateReport rep;
        switch (s.kind) {
            case ScenarioKind::POR:
            case ScenarioKind::POR_WOR: rep = estimate_por(views.h_view, h, s.spec); break;
            case ScenarioKind::PIPW:
            case ScenarioKind::PIPW_WIPW: rep = estimate_pipw(views.q_view, q, s.spec); break;
            case ScenarioKind::DR_SRA: rep = estimate_dr_sra(data, s.spec); break;
            default: rep = estimate_pdr(views.h_view, h, views.q_view, q, s.spec); break;
        }

        rec.beta_hat = rep.beta_hat;
        rec.se = rep.se;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rep.cov, Eigen::EigenvaluesOnly);
        rec.cov_psd = eig.eigenvalues().minCoeff() >=
                      -1e-8 * std::max(1.0, eig.eigenvalues().maxCoeff());
        rec.included = true;
    } catch (const std::exception& e) {
        rec.included = false;
        rec.exclude_reason = e.what();
    }
    return rec;
}

}  // namespace

ScenarioResult run_scenario(const Scenario& scenario, int threads) {
    if (scenario.B < 1) throw ValidationError("scenario requires B >= 1");
    if (scenario.n < 1) throw ValidationError("scenario requires n >= 1");
    if (scenario.beta_truth.size() != scenario.spec.p)
        throw ValidationError("scenario truth has wrong dimension");

    ScenarioResult result;
    result.scenario = scenario;
    result.replicates.resize(scenario.B);

    if (threads <= 1) {
        for (int r = 0; r < scenario.B; ++r) result.replicates[r] = run_replicate(scenario, r);
    } else {
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (int r = next.fetch_add(1); r < scenario.B; r = next.fetch_add(1))
                result.replicates[r] = run_replicate(scenario, r);
        };
        std::vector<std::thread> pool;
        const int nt = std::min(threads, scenario.B);
        pool.reserve(nt);
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Aggregation in replicate order, independent of execution order.
    const int p = scenario.spec.p;
    result.bias = Eigen::VectorXd::Zero(p);
    result.sd = Eigen::VectorXd::Zero(p);
    result.cp = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    for (const auto& rec : result.replicates) {
        if (!rec.included) {
            ++result.n_excluded;
            continue;
        }
        if (!rec.converged) {
            ++result.n_nonconverged;
            continue;
        }
        ++result.n_included;
        mean += rec.beta_hat;
        result.sd += rec.se;
        for (int j = 0; j < p; ++j) {
            const double lo = rec.beta_hat[j] - 1.96 * rec.se[j];
            const double hi = rec.beta_hat[j] + 1.96 * rec.se[j];
            if (scenario.beta_truth[j] >= lo && scenario.beta_truth[j] <= hi)
                result.cp[j] += 1.0;
        }
    }
    if (result.n_excluded > 0.2 * scenario.B) {
        std::ostringstream os;
        os << "scenario " << scenario_name(scenario.kind) << ": " << result.n_excluded << " of "
           << scenario.B << " replicates failed";
        throw NumericalError(os.str());
    }

    const double m = static_cast<double>(result.n_included);
    mean /= m;
    result.sd /= m;
    result.cp /= m;
    result.bias = mean - scenario.beta_truth;

    result.see = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    if (result.n_included >= 2) {
        Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
        for (const auto& rec : result.replicates)
            if (rec.included && rec.converged) ss += (rec.beta_hat - mean).cwiseAbs2();
        result.see = (ss / (m - 1)).cwiseSqrt();
    }
    return result;
}

Table1 table1_suite(Eigen::Index n, int B, std::uint64_t seed, const DgmParams& params,
                    int threads, const std::vector<ScenarioKind>& subset) {
    Table1 table;
    table.n = n;
    table.B = B;
    table.seed = seed;

    const MsmmSpec spec = MsmmSpec::cumulative();
    const Eigen::VectorXd truth = true_beta(params, spec);
    for (ScenarioKind kind : subset) {
        Scenario s;
        s.kind = kind;
        s.n = n;
        s.B = B;
        s.base_seed = seed;
        s.params = params;
        s.spec = spec;
        s.beta_truth = truth;
        table.results.push_back(run_scenario(s, threads));
    }
    return table;
}

namespace {

constexpr int kReportCoord = 1;  // beta_1

std::string fmt1(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

struct RowCells {
    std::string name, bias, see, sd, cp;
};

std::vector<RowCells> table_cells(const Table1& table) {
    std::vector<RowCells> rows;
    for (const auto& res : table.results) {
        RowCells c;
        c.name = scenario_name(res.scenario.kind);
        c.bias = fmt1(res.bias[kReportCoord] * 1e3);
        c.see = fmt1(res.see[kReportCoord] * 1e3);
        c.sd = fmt1(res.sd[kReportCoord] * 1e3);
        c.cp = fmt1(res.cp[kReportCoord] * 1e2);
        rows.push_back(std::move(c));
    }
    return rows;
}

}  // namespace

std::string render_text(const Table1& table) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "n=%lld B=%d seed=%llu (beta_1; bias/SEE/SD x 1e-3, CP %%)\n",
                  static_cast<long long>(table.n), table.B,
                  static_cast<unsigned long long>(table.seed));
    os << buf;
    std::snprintf(buf, sizeof(buf), "%-10s %8s %8s %8s %8s\n", "Estimator", "Bias", "SEE", "SD",
                  "95% CP");
    os << buf;
    for (const auto& c : table_cells(table)) {
        std::snprintf(buf, sizeof(buf), "%-10s %8s %8s %8s %8s\n", c.name.c_str(), c.bias.c_str(),
                      c.see.c_str(), c.sd.c_str(), c.cp.c_str());
        os << buf;
    }
    return os.str();
}

std::string render_csv(const Table1& table) {
    std::ostringstream os;
    os << "estimator,bias_x1e3,see_x1e3,sd_x1e3,cp_pct\n";
    for (const auto& c : table_cells(table))
        os << c.name << ',' << c.bias << ',' << c.see << ',' << c.sd << ',' << c.cp << '\n';
    return os.str();
}

std::string render_markdown(const Table1& table) {
    std::ostringstream os;
    os << "| Estimator | Bias | SEE | SD | 95% CP |\n";
    os << "|---|---|---|---|---|\n";
    for (const auto& c : table_cells(table))
        os << "| " << c.name << " | " << c.bias << " | " << c.see << " | " << c.sd << " | "
           << c.cp << " |\n";
    return os.str();
}

}  // namespace proxmsm
