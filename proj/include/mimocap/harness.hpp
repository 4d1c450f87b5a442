#pragma once

// Scenario configuration, matrix files, SNR sweeps and timing runs behind
// the mimocap command-line tool.
//
// SNR convention: SNR_dB = -10 log10(sigma2), i.e. unit total path power.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mimocap/canonical_solver.hpp"
#include "mimocap/channel_model.hpp"
#include "mimocap/covariance.hpp"
#include "mimocap/emi_approx.hpp"
#include "mimocap/errors.hpp"
#include "mimocap/matrix_core.hpp"
#include "mimocap/monte_carlo.hpp"
#include "mimocap/optimizer.hpp"

namespace mimocap {

enum class Units { nats, bits };

inline double to_units(double nats, Units units) {
    return units == Units::bits ? nats / std::numbers::ln2 : nats;
}

inline const char* units_name(Units units) { return units == Units::bits ? "bits" : "nats"; }

struct ScenarioConfig {
    Index r = 0;
    Index t = 0;
    std::vector<PathCluster> clusters;
    std::optional<double> sigma2;
    std::vector<double> snr_db_list;
    std::int64_t trials = 100000;
    std::uint64_t seed = 1;
    Units units = Units::nats;
    double fixed_point_tol = 1e-10;
    double outer_tol = 1e-8;
    std::vector<Index> bench_paths{3, 4, 5};

    SolverOptions solver_options() const {
        SolverOptions opts;
        opts.tol = fixed_point_tol;
        return opts;
    }

    OptimizerOptions optimizer_options() const {
        OptimizerOptions opts;
        opts.outer_tol = outer_tol;
        opts.solver = solver_options();
        return opts;
    }

    /// Noise power for single-point commands: explicit SNR override, then
    /// `sigma2`, then the first entry of `snr_db_list`.
    double single_sigma2(std::optional<double> snr_db_override = std::nullopt) const {
        if (snr_db_override) {
            return snr_db_to_sigma2(*snr_db_override);
        }
        if (sigma2) {
            return *sigma2;
        }
        return snr_db_to_sigma2(snr_db_list.front());
    }

    ChannelStats stats(double noise) const { return build_stats(clusters, r, t, noise); }

    static double snr_db_to_sigma2(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }
};

namespace detail {

template <typename T>
T required(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) {
        throw InvalidArgument(std::string("config: missing field '") + key + "'");
    }
    return j.at(key).get<T>();
}

}  // namespace detail

/// Parses and validates a scenario:
/// {r, t, sigma2 | snr_db_list, clusters: [{mean_aod, aod_spread, mean_aoa,
///  aoa_spread, power}], trials, seed, units, tol: {fixed_point, outer}}.
inline ScenarioConfig parse_config(const nlohmann::json& j) {
    try {
        if (!j.is_object()) {
            throw InvalidArgument("config: top level must be an object");
        }
        ScenarioConfig cfg;
        const auto r = detail::required<std::int64_t>(j, "r");
        const auto t = detail::required<std::int64_t>(j, "t");
        if (r < 1 || t < 1) {
            throw InvalidArgument("config: r and t must be >= 1");
        }
        cfg.r = static_cast<Index>(r);
        cfg.t = static_cast<Index>(t);

        const nlohmann::json& clusters = j.at("clusters");
        if (!clusters.is_array() || clusters.empty()) {
            throw InvalidArgument("config: 'clusters' must be a non-empty array");
        }
        for (const nlohmann::json& c : clusters) {
            PathCluster pc;
            pc.mean_aod = detail::required<double>(c, "mean_aod");
            pc.aod_spread = detail::required<double>(c, "aod_spread");
            pc.mean_aoa = detail::required<double>(c, "mean_aoa");
            pc.aoa_spread = detail::required<double>(c, "aoa_spread");
            pc.power = c.value("power", 1.0);
            if (!(pc.aod_spread > 0.0) || !(pc.aoa_spread > 0.0) || !(pc.power >= 0.0)) {
                throw InvalidArgument("config: cluster spreads must be > 0 and power >= 0");
            }
            cfg.clusters.push_back(pc);
        }

        if (j.contains("sigma2")) {
            cfg.sigma2 = j.at("sigma2").get<double>();
            if (!(*cfg.sigma2 > 0.0) || !std::isfinite(*cfg.sigma2)) {
                throw InvalidArgument("config: sigma2 must be finite and > 0");
            }
        }
        if (j.contains("snr_db_list")) {
            cfg.snr_db_list = j.at("snr_db_list").get<std::vector<double>>();
            for (double s : cfg.snr_db_list) {
                if (!std::isfinite(s)) {
                    throw InvalidArgument("config: snr_db_list entries must be finite");
                }
            }
        }
        if (!cfg.sigma2 && cfg.snr_db_list.empty()) {
            throw InvalidArgument("config: need 'sigma2' or a non-empty 'snr_db_list'");
        }

        cfg.trials = j.value("trials", cfg.trials);
        if (cfg.trials < 2) {
            throw InvalidArgument("config: trials must be >= 2");
        }
        cfg.seed = j.value("seed", cfg.seed);

        const std::string units = j.value("units", std::string("nats"));
        if (units == "nats") {
            cfg.units = Units::nats;
        } else if (units == "bits") {
            cfg.units = Units::bits;
        } else {
            throw InvalidArgument("config: units must be \"nats\" or \"bits\"");
        }

        if (j.contains("tol")) {
            const nlohmann::json& tol = j.at("tol");
            cfg.fixed_point_tol = tol.value("fixed_point", cfg.fixed_point_tol);
            cfg.outer_tol = tol.value("outer", cfg.outer_tol);
            if (!(cfg.fixed_point_tol > 0.0) || !(cfg.outer_tol > 0.0)) {
                throw InvalidArgument("config: tolerances must be > 0");
            }
        }
        if (j.contains("bench_paths")) {
            cfg.bench_paths = j.at("bench_paths").get<std::vector<Index>>();
        }
        for (Index l : cfg.bench_paths) {
            if (l < 1) {
                throw InvalidArgument("config: bench_paths entries must be >= 1");
            }
        }

        // fail early on unusable correlation parameters
        (void)cfg.stats(cfg.single_sigma2());
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("malformed JSON in '" + path + "': " + e.what());
    }
}

inline ScenarioConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

/// {dim, entries: [[re, im], ...]} in row-major order.
inline nlohmann::json matrix_to_json(const HermitianMatrix& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (Index i = 0; i < m.dim(); ++i) {
        for (Index j = 0; j < m.dim(); ++j) {
            entries.push_back({m(i, j).real(), m(i, j).imag()});
        }
    }
    return {{"dim", m.dim()}, {"entries", std::move(entries)}};
}

inline HermitianMatrix matrix_from_json(const nlohmann::json& j) {
    try {
        const auto dim = detail::required<std::int64_t>(j, "dim");
        const nlohmann::json& entries = j.at("entries");
        if (dim < 1 || !entries.is_array() || entries.size() != static_cast<std::size_t>(dim * dim)) {
            throw InvalidArgument("matrix JSON: expected dim >= 1 and dim*dim entries");
        }
        ComplexMatrix m(dim, dim);
        std::size_t k = 0;
        for (Index i = 0; i < dim; ++i) {
            for (Index jj = 0; jj < dim; ++jj, ++k) {
                const nlohmann::json& e = entries[k];
                if (!e.is_array() || e.size() != 2) {
                    throw InvalidArgument("matrix JSON: entries must be [re, im] pairs");
                }
                m(i, jj) = Complex(e[0].get<double>(), e[1].get<double>());
            }
        }
        const HermitianMatrix h(m);
        if ((h.matrix() - m).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + h.max_abs())) {
            throw InvalidArgument("matrix JSON: matrix is not Hermitian");
        }
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("matrix JSON: ") + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot write '" + path + "'");
    }
    out << text;
    if (!out.flush()) {
        throw InvalidArgument("write failed for '" + path + "'");
    }
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// solve

inline nlohmann::json solution_to_json(const CanonicalSolution& sol, double rho, double sigma2) {
    return {{"sigma2", sigma2},
            {"delta", std::vector<double>(sol.delta.data(), sol.delta.data() + sol.delta.size())},
            {"delta_tilde",
             std::vector<double>(sol.delta_tilde.data(), sol.delta_tilde.data() + sol.delta_tilde.size())},
            {"iterations", sol.iterations},
            {"residual", sol.residual},
            {"contraction_rho", rho}};
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
    double snr_db = 0.0;
    double emi_uniform_mc = 0.0;
    double emi_uniform_se = 0.0;
    double emi_opt_mc = 0.0;
    double emi_opt_se = 0.0;
    double emi_opt_approx = 0.0;
    int outer_iters = 0;
    double wall_time_s = 0.0;
};

inline constexpr const char* kSweepHeader =
    "snr_db,emi_uniform_mc,emi_uniform_se,emi_opt_mc,emi_opt_se,emi_opt_approx,outer_iters,wall_time_s";

/// One row per SNR point in config order; values in nats. I(I) and
/// I(Q_star) share the seed, so both use the same channel draws.
/// wall_time_s is the optimizer time when `timing` is set, else 0 (keeps
/// output byte-stable).
inline std::vector<SweepRow> run_sweep(const ScenarioConfig& cfg, int threads = -1, bool timing = false) {
    if (cfg.snr_db_list.empty()) {
        throw InvalidArgument("sweep: config has no snr_db_list");
    }
    std::vector<SweepRow> rows;
    for (double snr : cfg.snr_db_list) {
        const ChannelStats stats = cfg.stats(ScenarioConfig::snr_db_to_sigma2(snr));
        SweepRow row;
        row.snr_db = snr;
        const EmiEstimate uniform = emi_mc(stats, CovarianceMatrix::identity(cfg.t), cfg.trials, cfg.seed, threads);
        const auto start = std::chrono::steady_clock::now();
        const OptimizeReport report = optimize_with_restarts(stats, cfg.optimizer_options());
        const auto stop = std::chrono::steady_clock::now();
        const EmiEstimate optimized = emi_mc(stats, report.q_star, cfg.trials, cfg.seed, threads);
        row.emi_uniform_mc = uniform.mean;
        row.emi_uniform_se = uniform.std_err;
        row.emi_opt_mc = optimized.mean;
        row.emi_opt_se = optimized.std_err;
        row.emi_opt_approx = report.emi_approx_value;
        row.outer_iters = report.outer_iterations;
        row.wall_time_s = timing ? std::chrono::duration<double>(stop - start).count() : 0.0;
        rows.push_back(row);
    }
    return rows;
}

inline std::string format_sweep_csv(const std::vector<SweepRow>& rows, Units units) {
    std::ostringstream out;
    out << kSweepHeader << '\n';
    for (const SweepRow& row : rows) {
        out << format_number(row.snr_db) << ',' << format_number(to_units(row.emi_uniform_mc, units)) << ','
            << format_number(to_units(row.emi_uniform_se, units)) << ','
            << format_number(to_units(row.emi_opt_mc, units)) << ','
            << format_number(to_units(row.emi_opt_se, units)) << ','
            << format_number(to_units(row.emi_opt_approx, units)) << ',' << row.outer_iters << ','
            << format_number(row.wall_time_s) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// bench

/// Average optimizer time reported for r = t = 4, keyed by path count (seconds).
inline const std::map<Index, double>& reference_optimizer_times() {
    static const std::map<Index, double> times{{3, 7.0e-3}, {4, 7.4e-3}, {5, 8.3e-3}};
    return times;
}

struct BenchRow {
    Index paths = 0;
    std::vector<double> samples_s;
    double median_s = 0.0;
    std::optional<double> reference_s;
};

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Wall time of optimize_covariance alone (no Monte-Carlo) for each
/// requested path count, using the first L clusters of the config
/// (powers renormalized over that subset).
inline std::vector<BenchRow> run_bench(const ScenarioConfig& cfg, int repeats,
                                       std::optional<double> snr_db_override = std::nullopt) {
    if (repeats < 3) {
        throw InvalidArgument("bench: repeats must be >= 3");
    }
    const double sigma2 = cfg.single_sigma2(snr_db_override);
    std::vector<BenchRow> rows;
    for (Index paths : cfg.bench_paths) {
        if (paths > static_cast<Index>(cfg.clusters.size())) {
            continue;
        }
        const std::vector<PathCluster> subset(cfg.clusters.begin(), cfg.clusters.begin() + paths);
        const ChannelStats stats = build_stats(subset, cfg.r, cfg.t, sigma2);
        BenchRow row;
        row.paths = paths;
        for (int i = 0; i < repeats; ++i) {
            const auto start = std::chrono::steady_clock::now();
            const OptimizeReport report = optimize_with_restarts(stats, cfg.optimizer_options());
            const auto stop = std::chrono::steady_clock::now();
            (void)report;
            row.samples_s.push_back(std::chrono::duration<double>(stop - start).count());
        }
        row.median_s = median(row.samples_s);
        if (cfg.r == 4 && cfg.t == 4) {
            if (auto it = reference_optimizer_times().find(paths); it != reference_optimizer_times().end()) {
                row.reference_s = it->second;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace mimocap
