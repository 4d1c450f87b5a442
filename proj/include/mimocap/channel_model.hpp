#pragma once

// Kronecker-correlated multipath Rayleigh channel:
//   H = sum_l (1/sqrt(t)) Cr_l^{1/2} W_l Ct_l^{1/2},  W_l i.i.d. CN(0, 1).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mimocap/errors.hpp"
#include "mimocap/matrix_core.hpp"
#include "mimocap/random.hpp"

namespace mimocap {

/// Angular description of one scatterer cluster (radians).
struct PathCluster {
    double mean_aod = 0.0;
    double aod_spread = 0.0;
    double mean_aoa = 0.0;
    double aoa_spread = 0.0;
    double power = 1.0;
};

/// Correlation matrix of a half-wavelength uniform linear array seen through
/// a cluster with Gaussian power azimuth spectrum (small-spread closed form):
///   C(p, q) = exp(i pi (p-q) sin theta) * exp(-0.5 (pi (p-q) cos theta * spread)^2).
///
/// The result is checked to be PSD within kPsdTolerance; for large arrays and
/// narrow spreads the trailing eigenvalues sit at roundoff level.
inline HermitianMatrix correlation_from_cluster(Index n, double mean_angle, double spread) {
    if (n < 1) {
        throw InvalidArgument("correlation_from_cluster: antenna count must be >= 1");
    }
    if (!(spread > 0.0) || !std::isfinite(spread) || !std::isfinite(mean_angle)) {
        throw InvalidArgument("correlation_from_cluster: spread must be finite and > 0");
    }
    const double s = std::sin(mean_angle);
    const double c = std::cos(mean_angle);
    ComplexMatrix m(n, n);
    for (Index p = 0; p < n; ++p) {
        for (Index q = 0; q < n; ++q) {
            const double d = static_cast<double>(p - q);
            const double decay = std::numbers::pi * d * c * spread;
            m(p, q) = std::polar(std::exp(-0.5 * decay * decay), std::numbers::pi * d * s);
        }
    }
    HermitianMatrix out(m);
    const RealVector ev = hermitian_eigenvalues(out);
    if (ev(0) < -kPsdTolerance * ev(ev.size() - 1)) {
        throw NotPsd("correlation_from_cluster: synthesized matrix is not positive semi-definite", ev(0));
    }
    return out;
}

/// Second-order statistics of the channel: per-path (Cr_l, Ct_l) and noise power.
///
/// Immutable after construction. Square roots of the correlation matrices are
/// computed once here for channel sampling.
class ChannelStats {
public:
    ChannelStats(std::vector<HermitianMatrix> receive, std::vector<HermitianMatrix> transmit, double sigma2)
        : receive_(std::move(receive)), transmit_(std::move(transmit)), sigma2_(sigma2) {
        if (receive_.empty() || receive_.size() != transmit_.size()) {
            throw InvalidArgument("ChannelStats: need L >= 1 matching (Cr, Ct) pairs");
        }
        if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
            throw InvalidArgument("ChannelStats: sigma2 must be finite and > 0");
        }
        r_ = receive_.front().dim();
        t_ = transmit_.front().dim();
        for (std::size_t l = 0; l < receive_.size(); ++l) {
            if (receive_[l].dim() != r_ || transmit_[l].dim() != t_) {
                throw InvalidArgument("ChannelStats: inconsistent dimensions on path " + std::to_string(l));
            }
            // psd_sqrt raises NotPsd for matrices outside tolerance
            receive_sqrt_.push_back(psd_sqrt(receive_[l]));
            transmit_sqrt_.push_back(psd_sqrt(transmit_[l]));
            if (receive_[l].trace() <= 0.0 || transmit_[l].trace() <= 0.0) {
                throw NotPsd("ChannelStats: correlation matrix on path " + std::to_string(l) + " is zero", 0.0);
            }
        }
    }

    Index r() const noexcept { return r_; }
    Index t() const noexcept { return t_; }
    Index paths() const noexcept { return static_cast<Index>(receive_.size()); }
    double sigma2() const noexcept { return sigma2_; }

    const HermitianMatrix& receive(Index l) const { return receive_[static_cast<std::size_t>(l)]; }
    const HermitianMatrix& transmit(Index l) const { return transmit_[static_cast<std::size_t>(l)]; }
    const HermitianMatrix& receive_sqrt(Index l) const { return receive_sqrt_[static_cast<std::size_t>(l)]; }
    const HermitianMatrix& transmit_sqrt(Index l) const { return transmit_sqrt_[static_cast<std::size_t>(l)]; }

    /// Same correlation structure at a different noise power.
    ChannelStats with_sigma2(double sigma2) const {
        ChannelStats copy = *this;
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
            throw InvalidArgument("ChannelStats: sigma2 must be finite and > 0");
        }
        copy.sigma2_ = sigma2;
        return copy;
    }

private:
    std::vector<HermitianMatrix> receive_;
    std::vector<HermitianMatrix> transmit_;
    std::vector<HermitianMatrix> receive_sqrt_;
    std::vector<HermitianMatrix> transmit_sqrt_;
    double sigma2_;
    Index r_ = 0;
    Index t_ = 0;
};

/// Builds per-path correlation pairs from cluster angles.
///
/// Powers are normalized to sum to one and applied on the transmit side as
/// Ct_l = power_l * L * C(aod), so equal powers give unit-diagonal matrices.
inline ChannelStats build_stats(const std::vector<PathCluster>& clusters, Index r, Index t, double sigma2) {
    if (clusters.empty()) {
        throw InvalidArgument("build_stats: at least one cluster is required");
    }
    double total = 0.0;
    for (const PathCluster& c : clusters) {
        if (!(c.power >= 0.0) || !std::isfinite(c.power)) {
            throw InvalidArgument("build_stats: cluster power must be finite and >= 0");
        }
        total += c.power;
    }
    if (!(total > 0.0)) {
        throw InvalidArgument("build_stats: total cluster power must be > 0");
    }
    const double paths = static_cast<double>(clusters.size());
    std::vector<HermitianMatrix> receive;
    std::vector<HermitianMatrix> transmit;
    for (const PathCluster& c : clusters) {
        receive.push_back(correlation_from_cluster(r, c.mean_aoa, c.aoa_spread));
        transmit.push_back(correlation_from_cluster(t, c.mean_aod, c.aod_spread) * (c.power / total * paths));
    }
    return ChannelStats(std::move(receive), std::move(transmit), sigma2);
}

struct ChannelRealization {
    ComplexMatrix h;  ///< r x t
};

/// Per-path components H^(l) = (1/sqrt(t)) Cr_l^{1/2} W_l Ct_l^{1/2} for trial
/// `trial`; W_l comes from the stream (seed, trial, l).
inline std::vector<ComplexMatrix> sample_path_components(const ChannelStats& stats, std::uint64_t seed,
                                                         std::uint64_t trial) {
    const Index r = stats.r();
    const Index t = stats.t();
    const double scale = 1.0 / std::sqrt(static_cast<double>(t));
    std::vector<ComplexMatrix> out;
    ComplexMatrix w(r, t);
    for (Index l = 0; l < stats.paths(); ++l) {
        CounterStream stream({seed, trial, static_cast<std::uint32_t>(l)});
        for (Index j = 0; j < t; ++j) {
            for (Index i = 0; i < r; ++i) {
                w(i, j) = stream.complex_gaussian();
            }
        }
        out.push_back(scale * (stats.receive_sqrt(l).matrix() * w * stats.transmit_sqrt(l).matrix()));
    }
    return out;
}

/// H = sum_l H^(l) for Monte-Carlo trial `trial`. Draws depend only on
/// (seed, trial), never on evaluation order.
inline ChannelRealization sample_channel(const ChannelStats& stats, std::uint64_t seed, std::uint64_t trial) {
    std::vector<ComplexMatrix> parts = sample_path_components(stats, seed, trial);
    ComplexMatrix h = std::move(parts.front());
    for (std::size_t l = 1; l < parts.size(); ++l) {
        h += parts[l];
    }
    return {std::move(h)};
}

inline ChannelRealization sample_channel(const ChannelStats& stats, std::uint64_t seed) {
    return sample_channel(stats, seed, 0);
}

}  // namespace mimocap
