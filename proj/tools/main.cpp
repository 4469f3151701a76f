#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <proxmsm/dgm.hpp>
#include <proxmsm/errors.hpp>
#include <proxmsm/estimators.hpp>
#include <proxmsm/harness.hpp>
#include <proxmsm/io.hpp>
#include <proxmsm/oracle.hpp>

namespace fs = std::filesystem;
using namespace proxmsm;

namespace {

// Exit codes: 0 success, 1 input/config error, 2 numerical non-convergence.
constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNumericalError = 2;

void require_exists(const fs::path& p) {
    if (!fs::exists(p)) throw ValidationError("file does not exist: " + p.string());
}

DgmParams load_params(const std::string& path) {
    if (path.empty()) return DgmParams{};
    require_exists(path);
    return dgm_params_from_json_file(path);
}

struct SimulateArgs {
    long long n = 4000;
    std::uint64_t seed = 1;
    std::string params_path;
    std::string out = "data.csv";
    std::string rolemap_out;
    bool with_latents = false;
};

int cmd_simulate(SimulateArgs a) {
    const DgmParams params = load_params(a.params_path);
    if (a.rolemap_out.empty())
        a.rolemap_out = fs::path(a.out).replace_extension(".roles.json").string();
    if (a.with_latents) {
        const SimulatedWithLatents wl = simulate_with_latents(params, a.n, a.seed);
        write_dataset_csv(wl.data, a.out, &wl.u0, &wl.u1);
        write_role_map(canonical_role_map(wl.data), a.rolemap_out);
    } else {
        const PanelDataset data = simulate(params, a.n, a.seed);
        write_dataset_csv(data, a.out);
        write_role_map(canonical_role_map(data), a.rolemap_out);
    }
    std::cout << "wrote " << a.n << " records to " << a.out << " (roles: " << a.rolemap_out
              << ")\n";
    return kOk;
}

struct FitArgs {
    std::string data_path;
    std::string roles_path;
    std::string estimator = "pdr";
    std::string msmm = "cumulative";
    std::string misspec = "none";
    std::string out;
};

MisspecKind parse_misspec(const std::string& s) {
    if (s == "none") return MisspecKind::None;
    if (s == "wor") return MisspecKind::WOR;
    if (s == "wipw") return MisspecKind::WIPW;
    if (s == "both") return MisspecKind::Both;
    throw ValidationError("unknown misspec transform '" + s + "'");
}

int cmd_fit(const FitArgs& a) {
    require_exists(a.data_path);
    require_exists(a.roles_path);
    const PanelDataset data = load_dataset(a.data_path, a.roles_path);

    MsmmSpec spec;
    if (a.msmm == "cumulative") {
        spec = MsmmSpec::cumulative(data.support());
    } else if (a.msmm == "saturated") {
        spec = MsmmSpec::saturated_monotone();
        for (Eigen::Index i = 0; i < data.n(); ++i)
            if (!spec.support.contains(data.regime(i)))
                throw ValidationError("regime outside support");
    } else {
        throw ValidationError("unknown MSMM kind '" + a.msmm + "'");
    }

    const MisspecViews views = apply_misspec(parse_misspec(a.misspec), data);

    EstimateReport report;
    if (a.estimator == "por") {
        report = estimate_por(views.h_view, fit_h_bridges(views.h_view), spec);
    } else if (a.estimator == "pipw") {
        report = estimate_pipw(views.q_view, fit_q_bridges(views.q_view), spec);
    } else if (a.estimator == "pdr") {
        report = estimate_pdr(views.h_view, fit_h_bridges(views.h_view), views.q_view,
                              fit_q_bridges(views.q_view), spec);
    } else if (a.estimator == "dr-sra") {
        report = estimate_dr_sra(data, spec);
    } else {
        throw ValidationError("unknown estimator '" + a.estimator + "'");
    }

    const std::string json = estimate_report_to_json(report, a.msmm);
    if (!a.out.empty())
        atomic_write_file(a.out, json);
    else
        std::cout << json;

    std::ostringstream line;
    line << estimator_name(report.estimator) << " " << a.msmm << " n=" << report.n << ": beta = (";
    for (Eigen::Index j = 0; j < report.beta_hat.size(); ++j)
        line << (j ? ", " : "") << format_double(report.beta_hat[j]);
    line << "), se = (";
    for (Eigen::Index j = 0; j < report.se.size(); ++j)
        line << (j ? ", " : "") << format_double(report.se[j]);
    line << ")";
    std::cout << line.str() << "\n";

    if (!report.diag.h_converged || !report.diag.q_converged) {
        std::cerr << "warning: nuisance fit did not converge\n";
        return kNumericalError;
    }
    return kOk;
}

struct McArgs {
    long long n = 4000;
    int B = 200;
    std::uint64_t seed = 1;
    std::string params_path;
    std::string estimators;
    std::string format = "text";
    std::string out;
    int threads = 1;
};

int cmd_mc(const McArgs& a) {
    const DgmParams params = load_params(a.params_path);

    std::vector<ScenarioKind> subset = all_scenarios();
    if (!a.estimators.empty()) {
        subset.clear();
        std::stringstream ss(a.estimators);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            bool found = false;
            for (ScenarioKind k : all_scenarios())
                if (scenario_name(k) == tok) {
                    subset.push_back(k);
                    found = true;
                }
            if (!found) throw ValidationError("unknown estimator '" + tok + "'");
        }
    }

    const Table1 table = table1_suite(a.n, a.B, a.seed, params, a.threads, subset);
    std::string rendered;
    if (a.format == "text")
        rendered = render_text(table);
    else if (a.format == "csv")
        rendered = render_csv(table);
    else if (a.format == "md")
        rendered = render_markdown(table);
    else
        throw ValidationError("unknown format '" + a.format + "'");

    if (!a.out.empty()) {
        atomic_write_file(a.out, rendered);
        std::cout << "wrote " << a.out << "\n";
    } else {
        std::cout << rendered;
    }
    return kOk;
}

struct OracleArgs {
    std::uint64_t seed = 1;
    std::string world_path;
    std::string emit_world;
};

int cmd_oracle(const OracleArgs& a) {
    DiscreteWorld world;
    if (!a.world_path.empty()) {
        require_exists(a.world_path);
        world = world_from_json_file(a.world_path);
    } else {
        world = random_complete_world(a.seed);
    }
    if (!a.emit_world.empty()) atomic_write_file(a.emit_world, world_to_json(world));

    const IdentificationReport rep = verify_identification(world);
    std::cout << "complete: " << (rep.complete ? "yes" : "no") << "\n";
    std::cout << "max bridge residual: " << format_double(rep.max_bridge_residual) << "\n";
    std::printf("%-8s %14s %14s %14s\n", "regime", "truth", "g-formula", "ipw");
    for (const auto& row : rep.rows)
        std::printf("(%d,%d)    %14.10f %14.10f %14.10f\n", row.regime.a0, row.regime.a1,
                    row.truth, row.g_formula, row.ipw);
    std::cout << "max discrepancy: " << format_double(rep.max_discrepancy) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"proximal causal inference for two-occasion marginal structural mean models"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "simulate a dataset and write CSV");
    simulate_cmd->add_option("--n", sim.n, "records to simulate")->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--seed", sim.seed, "random seed");
    simulate_cmd->add_option("--params", sim.params_path, "JSON overrides for the mechanism");
    simulate_cmd->add_option("--out", sim.out, "output CSV path");
    simulate_cmd->add_option("--rolemap-out", sim.rolemap_out,
                             "role-map sidecar path (default: <out>.roles.json)");
    simulate_cmd->add_flag("--with-latents", sim.with_latents,
                           "append the unmeasured u0,u1 columns (debug only)");

    FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit bridges and estimate the MSMM");
    fit_cmd->add_option("--data", fit.data_path, "dataset CSV")->required();
    fit_cmd->add_option("--roles", fit.roles_path, "role-map JSON sidecar")->required();
    fit_cmd->add_option("--estimator", fit.estimator, "por|pipw|pdr|dr-sra");
    fit_cmd->add_option("--msmm", fit.msmm, "cumulative|saturated");
    fit_cmd->add_option("--misspec", fit.misspec, "none|wor|wipw|both");
    fit_cmd->add_option("--out", fit.out, "write the JSON report here (default: stdout)");

    McArgs mc;
    CLI::App* mc_cmd = app.add_subcommand("mc", "Monte Carlo estimator comparison table");
    mc_cmd->add_option("--n", mc.n, "records per replicate")->check(CLI::PositiveNumber);
    mc_cmd->add_option("--B", mc.B, "number of replicates")->check(CLI::PositiveNumber);
    mc_cmd->add_option("--seed", mc.seed, "base seed; replicate r uses seed+r");
    mc_cmd->add_option("--params", mc.params_path, "JSON overrides for the mechanism");
    mc_cmd->add_option("--estimators", mc.estimators, "comma list (default: all nine)");
    mc_cmd->add_option("--format", mc.format, "text|csv|md");
    mc_cmd->add_option("--out", mc.out, "output path (default: stdout)");
    mc_cmd->add_option("--threads", mc.threads, "parallel replicate workers");

    OracleArgs oracle;
    CLI::App* oracle_cmd =
        app.add_subcommand("oracle", "exact identification check in a finite world");
    oracle_cmd->add_option("--seed", oracle.seed, "seed for a random complete world");
    oracle_cmd->add_option("--world", oracle.world_path, "load a world from JSON instead");
    oracle_cmd->add_option("--emit-world", oracle.emit_world, "write the world JSON here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate_cmd->parsed()) return cmd_simulate(sim);
        if (fit_cmd->parsed()) return cmd_fit(fit);
        if (mc_cmd->parsed()) return cmd_mc(mc);
        if (oracle_cmd->parsed()) return cmd_oracle(oracle);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
