// mimocap: capacity-achieving input covariance for Kronecker-correlated
// multipath MIMO channels.
//
// Exit codes: 0 success, 1 usage/config error, 2 numerical non-convergence.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "mimocap/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoConvergence = 2;

struct CommonArgs {
    std::string config;
    std::optional<double> snr_db;
};

int cmd_solve(const CommonArgs& args, const std::string& q_source) {
    const mimocap::ScenarioConfig cfg = mimocap::load_config(args.config);
    const double sigma2 = cfg.single_sigma2(args.snr_db);
    const mimocap::ChannelStats stats = cfg.stats(sigma2);
    const mimocap::CovarianceMatrix q =
        q_source == "identity" ? mimocap::CovarianceMatrix::identity(cfg.t)
                               : mimocap::CovarianceMatrix(mimocap::matrix_from_json(mimocap::read_json_file(q_source)));
    const mimocap::CanonicalSolution sol = mimocap::solve_canonical(stats, q, cfg.solver_options());
    const double rho = mimocap::contraction_diagnostic(sol, stats, q);
    std::cout << mimocap::solution_to_json(sol, rho, sigma2).dump(2) << '\n';
    return kExitOk;
}

int cmd_optimize(const CommonArgs& args, const std::string& out_path) {
    const mimocap::ScenarioConfig cfg = mimocap::load_config(args.config);
    const double sigma2 = cfg.single_sigma2(args.snr_db);
    const mimocap::ChannelStats stats = cfg.stats(sigma2);
    const mimocap::OptimizeReport report = mimocap::optimize_with_restarts(stats, cfg.optimizer_options());
    mimocap::write_text_file(out_path, mimocap::matrix_to_json(report.q_star.matrix()).dump() + "\n");

    const nlohmann::json summary{
        {"sigma2", sigma2},
        {"units", mimocap::units_name(cfg.units)},
        {"emi_approx", mimocap::to_units(report.emi_approx_value, cfg.units)},
        {"outer_iterations", report.outer_iterations},
        {"converged", report.converged},
        {"restarts", report.restarts},
        {"monotone", report.monotone},
        {"delta_history_residuals", report.delta_history_residuals},
        {"q_file", out_path},
    };
    std::cout << summary.dump(2) << '\n';
    return kExitOk;
}

int cmd_sweep(const CommonArgs& args, const std::string& out_path, int threads, bool timing) {
    const mimocap::ScenarioConfig cfg = mimocap::load_config(args.config);
    const std::vector<mimocap::SweepRow> rows = mimocap::run_sweep(cfg, threads, timing);
    const std::string csv = mimocap::format_sweep_csv(rows, cfg.units);
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        mimocap::write_text_file(out_path, csv);
    }
    return kExitOk;
}

int cmd_bench(const CommonArgs& args, int repeats) {
    const mimocap::ScenarioConfig cfg = mimocap::load_config(args.config);
    const std::vector<mimocap::BenchRow> rows = mimocap::run_bench(cfg, repeats, args.snr_db);
    std::printf("r=%ld t=%ld sigma2=%.6g repeats=%d\n", static_cast<long>(cfg.r), static_cast<long>(cfg.t),
                cfg.single_sigma2(args.snr_db), repeats);
    std::printf("%6s %14s %14s %14s\n", "paths", "median_s", "min_s", "reference_s");
    for (const mimocap::BenchRow& row : rows) {
        const double fastest = *std::min_element(row.samples_s.begin(), row.samples_s.end());
        if (row.reference_s) {
            std::printf("%6ld %14.4e %14.4e %14.1e\n", static_cast<long>(row.paths), row.median_s, fastest,
                        *row.reference_s);
        } else {
            std::printf("%6ld %14.4e %14.4e %14s\n", static_cast<long>(row.paths), row.median_s, fastest, "-");
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Capacity-achieving input covariance for correlated multipath MIMO channels"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&common](CLI::App* sub) {
        sub->add_option("-c,--config", common.config, "Scenario JSON file")->required();
        sub->add_option("--snr-db", common.snr_db, "Override the noise level (sigma2 = 10^(-snr/10))");
    };

    std::string q_source = "identity";
    CLI::App* solve = app.add_subcommand("solve", "Solve the canonical equations for a given Q");
    add_common(solve);
    solve->add_option("--Q", q_source, "'identity' or a matrix JSON file");

    std::string q_out = "q_star.json";
    CLI::App* optimize = app.add_subcommand("optimize", "Maximize the large-system EMI approximation");
    add_common(optimize);
    optimize->add_option("-o,--out", q_out, "Where to write Q_star (matrix JSON)");

    std::string csv_out;
    int threads = -1;
    bool timing = false;
    CLI::App* sweep = app.add_subcommand("sweep", "SNR sweep with Monte-Carlo validation, CSV output");
    add_common(sweep);
    sweep->add_option("-o,--out", csv_out, "CSV output path ('-' or empty for stdout)");
    sweep->add_option("--threads", threads, "Worker threads (default: $MIMO_CAPACITY_THREADS, 0 = auto)")
        ->check(CLI::NonNegativeNumber);
    sweep->add_flag("--timing", timing, "Record optimizer wall time (output is no longer byte-stable)");

    int repeats = 5;
    CLI::App* bench = app.add_subcommand("bench", "Median optimizer wall time per path count");
    add_common(bench);
    bench->add_option("--repeats", repeats, "Timed runs per path count (>= 3)")->check(CLI::Range(3, 1000000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*solve) {
            return cmd_solve(common, q_source);
        }
        if (*optimize) {
            return cmd_optimize(common, q_out);
        }
        if (*sweep) {
            return cmd_sweep(common, csv_out, threads, timing);
        }
        return cmd_bench(common, repeats);
    } catch (const mimocap::NonConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}
