#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "proxmsm/dgm.hpp"
#include "proxmsm/estimators.hpp"
#include "proxmsm/msmm.hpp"

namespace proxmsm {

// The nine estimator variants of the simulation study, in table order.
enum class ScenarioKind {
    POR, POR_WOR, PIPW, PIPW_WIPW, PDR, PDR_WOR, PDR_WIPW, PDR_BW, DR_SRA
};

std::string scenario_name(ScenarioKind kind);
std::vector<ScenarioKind> all_scenarios();

struct Scenario {
    ScenarioKind kind = ScenarioKind::PDR;
    Eigen::Index n = 4000;
    int B = 200;
    std::uint64_t base_seed = 1;
    DgmParams params;
    MsmmSpec spec = MsmmSpec::cumulative();
    Eigen::VectorXd beta_truth;  // cached from the exact counterfactual oracle
};

struct ReplicateRecord {
    bool included = false;
    bool converged = true;  // all nuisances the estimator uses reached tolerance
    std::string exclude_reason;
    Eigen::VectorXd beta_hat;
    Eigen::VectorXd se;
    double h_resid = 0;            // max linear-GMM moment residual of the h fits
    double q_norm = 0;             // final q moment norm
    bool q_zero_start = true;      // Newton converged without random restarts
    double q_min_value = 0;        // min fitted q0/q1 over records (should exceed 1)
    bool cov_psd = true;
};

struct ScenarioResult {
    Scenario scenario;
    std::vector<ReplicateRecord> replicates;
    // Aggregates over included replicates, per beta coordinate. SEE is NaN when
    // fewer than two replicates are included.
    Eigen::VectorXd bias, see, sd, cp;
    int n_included = 0;      // replicates entering the aggregates
    int n_excluded = 0;      // hard failures: no estimate could be produced
    int n_nonconverged = 0;  // estimate produced but a required nuisance missed tolerance;
                             // reported and left out of the aggregates
};

// Runs B replicates (replicate r seeds the simulator with base_seed + r) and
// aggregates in replicate order regardless of thread count. Aggregates cover converged
// replicates only; non-convergence (the misspecified q systems may genuinely lack
// in-sample roots) and hard failures are counted separately. Throws NumericalError
// if more than 20% of replicates fail outright.
ScenarioResult run_scenario(const Scenario& scenario, int threads = 1);

struct Table1 {
    Eigen::Index n = 0;
    int B = 0;
    std::uint64_t seed = 0;
    std::vector<ScenarioResult> results;
};

// All (or a subset of) the nine scenarios at one sample size, sharing replicate seeds
// so every estimator sees the same simulated datasets.
Table1 table1_suite(Eigen::Index n, int B, std::uint64_t seed,
                    const DgmParams& params = {}, int threads = 1,
                    const std::vector<ScenarioKind>& subset = all_scenarios());

// Renderings with bias/SEE/SD scaled by 1e3 and coverage in percent. The reported
// coordinate is beta_1.
std::string render_text(const Table1& table);
std::string render_csv(const Table1& table);
std::string render_markdown(const Table1& table);

}  // namespace proxmsm
