#pragma once

// Maximization of Ibar(Q) over C_1.
//
// optimize_covariance runs the iterative waterfilling scheme: solve the
// canonical system at Q_{k-1}, then set Q_k to the waterfilling solution for
// C~(delta^(k)). It stops once successive (delta, delta~) stop moving.
// reference_maximizer is an unrelated projected-gradient ascent on Ibar used
// to cross-check the result.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mimocap/canonical_solver.hpp"
#include "mimocap/channel_model.hpp"
#include "mimocap/covariance.hpp"
#include "mimocap/emi_approx.hpp"
#include "mimocap/errors.hpp"
#include "mimocap/matrix_core.hpp"
#include "mimocap/random.hpp"

namespace mimocap {

/// Eigenvalues at or below this get no power.
inline constexpr double kNullEigenvalue = 1e-14;

struct WaterfillResult {
    CovarianceMatrix q;
    double water_level = 0.0;  ///< mu
    Index active_count = 0;
    RealVector eigenvalues;    ///< of the input, ascending
    RealVector powers;         ///< q_i paired with `eigenvalues`
};

/// Maximizes log|I + Q C~| over C_1: with C~ = U diag(lambda) U^H,
/// Q = U diag(max(mu - 1/lambda_i, 0)) U^H and sum_i q_i = t.
///
/// mu comes from the sorted active-set closed form: with lambda sorted
/// descending, the active set is the largest k with
/// mu_k = (t + sum_{i<=k} 1/lambda_i) / k > 1/lambda_k.
inline WaterfillResult waterfill(const HermitianMatrix& c_tilde) {
    const EigDecomposition e = hermitian_eig(c_tilde);
    const Index t = c_tilde.dim();
    const RealVector& lambda = e.eigenvalues;

    Index positive = 0;
    while (positive < t && lambda(t - 1 - positive) > kNullEigenvalue) {
        ++positive;
    }
    if (positive == 0) {
        throw DegenerateDirection("waterfill: no eigenvalue above 1e-14; every Q in C_1 is optimal");
    }

    double inverse_sum = 0.0;
    double mu = 0.0;
    Index active = 0;
    for (Index k = 1; k <= positive; ++k) {
        const double inv = 1.0 / lambda(t - k);
        inverse_sum += inv;
        const double candidate = (static_cast<double>(t) + inverse_sum) / static_cast<double>(k);
        if (candidate > inv) {
            mu = candidate;
            active = k;
        } else {
            break;
        }
    }

    RealVector powers = RealVector::Zero(t);
    for (Index k = 1; k <= active; ++k) {
        const Index i = t - k;
        powers(i) = std::max(mu - 1.0 / lambda(i), 0.0);
    }
    CovarianceMatrix q(HermitianMatrix::from_spectrum(e.eigenvectors, powers));
    return {std::move(q), mu, active, lambda, std::move(powers)};
}

/// Euclidean projection of v onto {x >= 0, sum x = total}.
inline RealVector project_simplex(const RealVector& v, double total) {
    if (v.size() < 1 || !(total > 0.0)) {
        throw InvalidArgument("project_simplex: need a non-empty vector and total > 0");
    }
    std::vector<double> sorted(v.data(), v.data() + v.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double running = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        running += sorted[j];
        const double candidate = (running - total) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) {
            theta = candidate;
        }
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Frobenius-nearest point of C_1.
inline CovarianceMatrix project_onto_c1(const HermitianMatrix& x) {
    const EigDecomposition e = hermitian_eig(x);
    const RealVector q = project_simplex(e.eigenvalues, static_cast<double>(x.dim()));
    return CovarianceMatrix(HermitianMatrix::from_spectrum(e.eigenvectors, q));
}

struct OptimizerOptions {
    double outer_tol = 1e-8;  ///< sup-norm on successive delta, delta~
    int max_outer = 100;
    SolverOptions solver{};
    std::optional<CovarianceMatrix> initial;  ///< Q_0; identity when empty
};

struct OptimizeReport {
    CovarianceMatrix q_star;
    double emi_approx_value = 0.0;  ///< Ibar(q_star), nats
    int outer_iterations = 0;
    std::vector<double> delta_history_residuals;
    bool converged = false;
    int restarts = 0;
    /// Ibar(Q_0), Ibar(Q_1), ... (reference_maximizer: Ibar per accepted step)
    std::vector<double> emi_history;
    /// False when emi_history decreased by more than 1e-9 somewhere; informational.
    bool monotone = true;
    CanonicalSolution solution;  ///< canonical solution at q_star
};

namespace detail {

inline bool nondecreasing(const std::vector<double>& values, double slack) {
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[i - 1] - slack) {
            return false;
        }
    }
    return true;
}

inline double sup_distance(const CanonicalSolution& a, const CanonicalSolution& b) {
    return std::max((a.delta - b.delta).cwiseAbs().maxCoeff(),
                    (a.delta_tilde - b.delta_tilde).cwiseAbs().maxCoeff());
}

}  // namespace detail

/// Iterative waterfilling. Raises NonConvergence (with history, last delta
/// and the waterfilling point for it) when max_outer iterations do not meet
/// the stopping rule.
inline OptimizeReport optimize_covariance(const ChannelStats& stats, const OptimizerOptions& opts = {}) {
    if (!(opts.outer_tol > 0.0) || opts.max_outer < 1) {
        throw InvalidArgument("optimize_covariance: require outer_tol > 0 and max_outer >= 1");
    }
    CovarianceMatrix q = opts.initial.value_or(CovarianceMatrix::identity(stats.t()));
    detail::check_covariance(stats, q, "optimize_covariance");

    CanonicalSolution sol = solve_canonical(stats, q, opts.solver);
    std::vector<double> history;
    std::vector<double> emi_history;
    for (int k = 1; k <= opts.max_outer; ++k) {
        emi_history.push_back(v_function(stats, q, sol.delta, sol.delta_tilde));
        CovarianceMatrix next = waterfill(transmit_combination(stats, sol.delta)).q;
        CanonicalSolution next_sol =
            solve_canonical(stats, next, opts.solver, WarmStart{sol.delta, sol.delta_tilde});
        const double residual = detail::sup_distance(next_sol, sol);
        history.push_back(residual);
        q = std::move(next);
        sol = std::move(next_sol);
        if (residual <= opts.outer_tol) {
            const double value = v_function(stats, q, sol.delta, sol.delta_tilde);
            emi_history.push_back(value);
            const bool monotone = detail::nondecreasing(emi_history, 1e-9);
            return OptimizeReport{std::move(q), value,       k,        std::move(history), true, 0,
                                  std::move(emi_history), monotone, std::move(sol)};
        }
    }
    NonConvergence err("optimize_covariance: outer loop did not converge in " + std::to_string(opts.max_outer) +
                           " iterations",
                       opts.max_outer, history.empty() ? 0.0 : history.back());
    err.history = std::move(history);
    err.delta = sol.delta;
    err.delta_tilde = sol.delta_tilde;
    // waterfilling point of the last delta; restart attempt 1 starts from it
    err.last_q = waterfill(transmit_combination(stats, sol.delta)).q.matrix().matrix();
    throw err;
}

/// Seed of the pseudo-random restart points (attempt n uses stream (seed, n, 0)).
inline constexpr std::uint64_t kRestartSeed = 0x5eed0f0e5717a7e5ULL;

/// New Q_0 after a failed run. Attempt 1 averages the waterfilling point of
/// the last delta (failure.last_q) with I;
/// attempt n >= 2 draws a Wishart-like point of C_1 from a fixed stream.
inline CovarianceMatrix restart_policy(const NonConvergence& failure, int attempt, Index t) {
    if (attempt < 1 || t < 1) {
        throw InvalidArgument("restart_policy: attempt and t must be >= 1");
    }
    if (attempt == 1) {
        if (failure.last_q.rows() != t || failure.last_q.cols() != t) {
            return CovarianceMatrix::identity(t);
        }
        const HermitianMatrix last(failure.last_q);
        return CovarianceMatrix::normalized((last + HermitianMatrix::identity(t)) * 0.5);
    }
    CounterStream stream({kRestartSeed, static_cast<std::uint64_t>(attempt), 0});
    ComplexMatrix g(t, t);
    for (Index j = 0; j < t; ++j) {
        for (Index i = 0; i < t; ++i) {
            g(i, j) = stream.complex_gaussian();
        }
    }
    return CovarianceMatrix::normalized(HermitianMatrix(g * g.adjoint()));
}

/// optimize_covariance, retried from restart_policy points on NonConvergence.
inline OptimizeReport optimize_with_restarts(const ChannelStats& stats, OptimizerOptions opts = {},
                                             int max_restarts = 5) {
    for (int attempt = 0;; ++attempt) {
        try {
            OptimizeReport report = optimize_covariance(stats, opts);
            report.restarts = attempt;
            return report;
        } catch (const NonConvergence& failure) {
            if (attempt >= max_restarts) {
                throw;
            }
            opts.initial = restart_policy(failure, attempt + 1, stats.t());
        }
    }
}

struct ReferenceOptions {
    int max_iter = 5000;
    double armijo = 1e-4;
    SolverOptions solver{};
};

/// Projected gradient ascent on Ibar over C_1 with Barzilai-Borwein trial
/// steps and Armijo backtracking. Stops when
/// ||P_C1(Q + grad) - Q||_F <= tol.
inline OptimizeReport reference_maximizer(const ChannelStats& stats, double tol = 1e-7,
                                          const ReferenceOptions& opts = {}) {
    if (!(tol > 0.0)) {
        throw InvalidArgument("reference_maximizer: tol must be > 0");
    }
    CovarianceMatrix q = CovarianceMatrix::identity(stats.t());
    CanonicalSolution sol = solve_canonical(stats, q, opts.solver);
    double value = v_function(stats, q, sol.delta, sol.delta_tilde);
    HermitianMatrix grad = frozen_gradient(stats, q, sol);

    std::vector<double> history;
    std::vector<double> emi_history{value};
    double step = 1.0;
    for (int it = 1; it <= opts.max_iter; ++it) {
        const CovarianceMatrix unit_step = project_onto_c1(q.matrix() + grad);
        const double pg_norm = (unit_step.matrix().matrix() - q.matrix().matrix()).norm();
        history.push_back(pg_norm);
        if (pg_norm <= tol) {
            const bool monotone = detail::nondecreasing(emi_history, 1e-9);
            return OptimizeReport{std::move(q), value, it - 1, std::move(history), true, 0,
                                  std::move(emi_history), monotone, std::move(sol)};
        }

        bool accepted = false;
        for (double s = step; s >= 1e-14; s *= 0.5) {
            CovarianceMatrix trial = project_onto_c1(q.matrix() + grad * s);
            const HermitianMatrix move = trial.matrix() - q.matrix();
            CanonicalSolution trial_sol =
                solve_canonical(stats, trial, opts.solver, WarmStart{sol.delta, sol.delta_tilde});
            const double trial_value = v_function(stats, trial, trial_sol.delta, trial_sol.delta_tilde);
            if (trial_value >= value + opts.armijo * trace_product(grad, move)) {
                HermitianMatrix trial_grad = frozen_gradient(stats, trial, trial_sol);
                const double ss = move.matrix().squaredNorm();
                const double sy = trace_product(move, trial_grad - grad);
                step = sy < 0.0 ? std::clamp(ss / -sy, 1e-8, 1e8) : 1e8;
                q = std::move(trial);
                sol = std::move(trial_sol);
                value = trial_value;
                grad = std::move(trial_grad);
                emi_history.push_back(value);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Line search exhausted: no ascent is measurable at this resolution.
            NonConvergence err("reference_maximizer: line search failed (projected gradient norm " +
                                   std::to_string(pg_norm) + ")",
                               it, pg_norm);
            err.history = std::move(history);
            err.last_q = q.matrix().matrix();
            throw err;
        }
    }
    NonConvergence err("reference_maximizer: iteration cap reached", opts.max_iter,
                       history.empty() ? 0.0 : history.back());
    err.history = std::move(history);
    err.last_q = q.matrix().matrix();
    throw err;
}

}  // namespace mimocap
