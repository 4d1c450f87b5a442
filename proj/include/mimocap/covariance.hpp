#pragma once

#include <cmath>
#include <string>

#include "mimocap/errors.hpp"
#include "mimocap/matrix_core.hpp"

namespace mimocap {

/// Input covariance in C_1: Hermitian PSD t x t with (1/t) Tr Q = 1.
///
/// Eigenvalues within kPsdTolerance below zero are clamped (and the trace
/// renormalized). The PSD square root is cached because the canonical
/// equations conjugate every transmit matrix by it.
class CovarianceMatrix {
public:
    static constexpr double kTraceTolerance = 1e-12;

    explicit CovarianceMatrix(const HermitianMatrix& q) {
        EigDecomposition e = hermitian_eig(q);
        const Index t = q.dim();
        const double scale = std::max(std::abs(e.eigenvalues(0)), std::abs(e.eigenvalues(t - 1)));
        if (e.eigenvalues(0) < -kPsdTolerance * scale) {
            throw NotPsd("CovarianceMatrix: Q is not positive semi-definite", e.eigenvalues(0));
        }
        const double normalized_trace = q.trace() / static_cast<double>(t);
        if (std::abs(normalized_trace - 1.0) > kTraceTolerance) {
            throw InvalidArgument("CovarianceMatrix: (1/t) Tr Q = " + std::to_string(normalized_trace) +
                                  ", expected 1");
        }
        if (e.eigenvalues(0) < 0.0) {
            RealVector clamped = e.eigenvalues.cwiseMax(0.0);
            clamped *= static_cast<double>(t) / clamped.sum();
            q_ = HermitianMatrix::from_spectrum(e.eigenvectors, clamped);
            e.eigenvalues = clamped;
        } else {
            q_ = q;
        }
        eigenvalues_ = e.eigenvalues;
        sqrt_ = HermitianMatrix::from_spectrum(e.eigenvectors, e.eigenvalues.cwiseSqrt());
    }

    static CovarianceMatrix identity(Index t) { return CovarianceMatrix(HermitianMatrix::identity(t)); }

    /// Scales a nonzero PSD matrix onto the trace constraint.
    static CovarianceMatrix normalized(const HermitianMatrix& q) {
        const double tr = q.trace();
        if (!(tr > 0.0)) {
            throw InvalidArgument("CovarianceMatrix::normalized: trace must be > 0");
        }
        return CovarianceMatrix(q * (static_cast<double>(q.dim()) / tr));
    }

    Index dim() const noexcept { return q_.dim(); }
    const HermitianMatrix& matrix() const noexcept { return q_; }
    const HermitianMatrix& sqrt() const noexcept { return sqrt_; }
    /// Ascending eigenvalues after clamping.
    const RealVector& eigenvalues() const noexcept { return eigenvalues_; }

    /// Smallest eigenvalue at or below 1e-12 relative to the largest.
    bool singular() const { return eigenvalues_(0) <= 1e-12 * eigenvalues_(eigenvalues_.size() - 1); }

    /// (1 - lambda) * this + lambda * other; stays in C_1.
    CovarianceMatrix blend(const CovarianceMatrix& other, double lambda) const {
        return CovarianceMatrix::normalized(q_ * (1.0 - lambda) + other.q_ * lambda);
    }

private:
    HermitianMatrix q_;
    HermitianMatrix sqrt_;
    RealVector eigenvalues_;
};

}  // namespace mimocap
