#pragma once

// Monte-Carlo estimate of the ergodic mutual information
//   I(Q) = E[log|I_r + H Q H^H / s2|].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mimocap/channel_model.hpp"
#include "mimocap/covariance.hpp"
#include "mimocap/emi_approx.hpp"
#include "mimocap/errors.hpp"
#include "mimocap/matrix_core.hpp"

namespace mimocap {

inline constexpr const char* kThreadsEnvVar = "MIMO_CAPACITY_THREADS";

/// Worker count: `requested` > 0 wins; otherwise MIMO_CAPACITY_THREADS
/// (0 or unset = hardware concurrency).
inline unsigned resolve_threads(int requested = -1) {
    long n = requested;
    if (requested < 0) {
        n = 0;
        if (const char* env = std::getenv(kThreadsEnvVar); env != nullptr && *env != '\0') {
            char* end = nullptr;
            n = std::strtol(env, &end, 10);
            if (end == env || *end != '\0' || n < 0) {
                throw InvalidArgument(std::string(kThreadsEnvVar) + " must be a nonnegative integer");
            }
        }
    }
    if (n == 0) {
        n = std::max(1u, std::thread::hardware_concurrency());
    }
    return static_cast<unsigned>(n);
}

/// Pairwise sum; the result depends only on the order of `values`.
inline double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 16) {
        double s = 0.0;
        for (double v : values) {
            s += v;
        }
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

struct EmiEstimate {
    double mean = 0.0;     ///< nats
    double std_err = 0.0;  ///< nats
    std::int64_t trials = 0;
    std::uint64_t seed = 0;
};

/// log|I + H Q H^H / s2| for one realization.
inline double mutual_information_sample(const ComplexMatrix& h, const CovarianceMatrix& q, double sigma2) {
    const ComplexMatrix b = h * q.sqrt().matrix();
    return log_det_i_plus(HermitianMatrix(b * b.adjoint() / sigma2));
}

/// Trial n uses the channel drawn from streams (seed, n, l); per-trial values
/// are reduced in trial order, so the result is bit-identical for any thread
/// count.
inline EmiEstimate emi_mc(const ChannelStats& stats, const CovarianceMatrix& q, std::int64_t trials,
                          std::uint64_t seed, int threads = -1) {
    if (trials < 2) {
        throw InvalidArgument("emi_mc: need at least 2 trials");
    }
    detail::check_covariance(stats, q, "emi_mc");
    const auto n = static_cast<std::size_t>(trials);
    std::vector<double> values(n);

    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const ChannelRealization ch = sample_channel(stats, seed, i);
            values[i] = mutual_information_sample(ch.h, q, stats.sigma2());
        }
    };

    const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), n);
    if (workers <= 1) {
        run(0, n);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = n * w / workers;
            const std::size_t end = n * (w + 1) / workers;
            pool.emplace_back([&, begin, end] {
                try {
                    run(begin, end);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    failure = std::current_exception();
                }
            });
        }
        pool.clear();
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    const double mean = pairwise_sum(values) / static_cast<double>(n);
    for (double& v : values) {
        v = (v - mean) * (v - mean);
    }
    const double variance = pairwise_sum(values) / static_cast<double>(n - 1);
    return {mean, std::sqrt(variance / static_cast<double>(n)), trials, seed};
}

struct EmiGap {
    double approx = 0.0;  ///< Ibar(Q), nats
    EmiEstimate mc;
    double gap = 0.0;     ///< |mc.mean - approx|
};

inline EmiGap emi_gap(const ChannelStats& stats, const CovarianceMatrix& q, std::int64_t trials, std::uint64_t seed,
                      const SolverOptions& opts = {}, int threads = -1) {
    EmiGap out;
    out.approx = emi_approx(stats, q, opts).value;
    out.mc = emi_mc(stats, q, trials, seed, threads);
    out.gap = std::abs(out.mc.mean - out.approx);
    return out;
}

}  // namespace mimocap
