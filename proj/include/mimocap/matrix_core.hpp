#pragma once

// Dense complex Hermitian linear algebra shared by the numeric modules.
// Backed by Eigen; every HermitianMatrix is stored exactly Hermitian.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "mimocap/errors.hpp"

namespace mimocap {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Relative tolerance below which negative eigenvalues are treated as roundoff.
inline constexpr double kPsdTolerance = 1e-10;

/// Square complex matrix with exact Hermitian symmetry.
///
/// The constructor stores (M + M^H)/2, so entry(i,j) == conj(entry(j,i))
/// holds bit-for-bit afterwards. A default-constructed value is empty
/// (dim 0) and only meant as a placeholder before assignment.
class HermitianMatrix {
public:
    HermitianMatrix() = default;

    explicit HermitianMatrix(const ComplexMatrix& m) : m_(symmetrize(m)) {}

    static HermitianMatrix identity(Index n) {
        return HermitianMatrix(ComplexMatrix::Identity(n, n));
    }

    static HermitianMatrix diagonal(const RealVector& d) {
        return HermitianMatrix(d.cast<Complex>().asDiagonal().toDenseMatrix());
    }

    /// U diag(values) U^H.
    static HermitianMatrix from_spectrum(const ComplexMatrix& vectors, const RealVector& values) {
        return HermitianMatrix(vectors * values.cast<Complex>().asDiagonal() * vectors.adjoint());
    }

    Index dim() const noexcept { return m_.rows(); }
    bool empty() const noexcept { return m_.size() == 0; }
    const ComplexMatrix& matrix() const noexcept { return m_; }
    Complex operator()(Index i, Index j) const { return m_(i, j); }

    double trace() const { return m_.trace().real(); }
    double max_abs() const { return m_.size() == 0 ? 0.0 : m_.cwiseAbs().maxCoeff(); }

    HermitianMatrix operator+(const HermitianMatrix& o) const { return HermitianMatrix(m_ + o.m_); }
    HermitianMatrix operator-(const HermitianMatrix& o) const { return HermitianMatrix(m_ - o.m_); }
    HermitianMatrix operator*(double s) const { return HermitianMatrix(m_ * s); }

private:
    static ComplexMatrix symmetrize(const ComplexMatrix& m) {
        if (m.rows() != m.cols() || m.rows() < 1) {
            throw InvalidArgument("HermitianMatrix: expected a non-empty square matrix, got " +
                                  std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        }
        if (!m.allFinite()) {
            throw InvalidArgument("HermitianMatrix: non-finite entry");
        }
        ComplexMatrix s = 0.5 * (m + m.adjoint());
        // Averaging a and conj(a) is not guaranteed to give bit-exact conjugate
        // pairs; mirror the upper triangle instead.
        for (Index j = 0; j < s.cols(); ++j) {
            s(j, j) = Complex(s(j, j).real(), 0.0);
            for (Index i = j + 1; i < s.rows(); ++i) {
                s(i, j) = std::conj(s(j, i));
            }
        }
        return s;
    }

    ComplexMatrix m_;
};

inline HermitianMatrix operator*(double s, const HermitianMatrix& m) { return m * s; }

/// S M S^H for Hermitian M.
inline HermitianMatrix congruence(const ComplexMatrix& s, const HermitianMatrix& m) {
    return HermitianMatrix(s * m.matrix() * s.adjoint());
}

/// Re Tr(A B) for Hermitian A and B, without forming the product.
inline double trace_product(const HermitianMatrix& a, const HermitianMatrix& b) {
    return (a.matrix().array() * b.matrix().transpose().array()).sum().real();
}

struct EigDecomposition {
    RealVector eigenvalues;     ///< ascending
    ComplexMatrix eigenvectors; ///< unitary, one eigenvector per column
};

/// Hermitian eigendecomposition, eigenvalues ascending.
///
/// Each eigenvector is rephased so that its first non-negligible component is
/// real and positive, which makes the output deterministic.
inline EigDecomposition hermitian_eig(const HermitianMatrix& m) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m.matrix());
    if (solver.info() != Eigen::Success) {
        double residual = std::numeric_limits<double>::infinity();
        if (solver.eigenvectors().allFinite() && solver.eigenvalues().allFinite()) {
            const ComplexMatrix& u = solver.eigenvectors();
            residual = (u * solver.eigenvalues().cast<Complex>().asDiagonal() * u.adjoint() - m.matrix())
                           .cwiseAbs()
                           .maxCoeff();
        }
        throw EigenFailure("hermitian_eig: eigensolver did not converge", residual);
    }
    EigDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
    for (Index k = 0; k < out.eigenvectors.cols(); ++k) {
        auto col = out.eigenvectors.col(k);
        for (Index i = 0; i < col.size(); ++i) {
            const double mag = std::abs(col(i));
            if (mag > 1e-10) {
                col *= std::conj(col(i)) / mag;
                col(i) = Complex(col(i).real(), 0.0);
                break;
            }
        }
    }
    return out;
}

inline RealVector hermitian_eigenvalues(const HermitianMatrix& m) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m.matrix(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw EigenFailure("hermitian_eigenvalues: eigensolver did not converge",
                           std::numeric_limits<double>::infinity());
    }
    return solver.eigenvalues();
}

namespace detail {

inline double spectral_scale(const RealVector& ascending) {
    return std::max(std::abs(ascending(0)), std::abs(ascending(ascending.size() - 1)));
}

}  // namespace detail

/// True when min eigenvalue >= -kPsdTolerance * ||m||.
inline bool is_psd(const HermitianMatrix& m) {
    const RealVector ev = hermitian_eigenvalues(m);
    return ev(0) >= -kPsdTolerance * detail::spectral_scale(ev);
}

/// PSD square root. Eigenvalues in [-1e-10 ||m||, 0) are clamped to zero.
inline HermitianMatrix psd_sqrt(const HermitianMatrix& m) {
    EigDecomposition e = hermitian_eig(m);
    const double scale = detail::spectral_scale(e.eigenvalues);
    if (e.eigenvalues(0) < -kPsdTolerance * scale) {
        throw NotPsd("psd_sqrt: matrix is not positive semi-definite (min eigenvalue " +
                         std::to_string(e.eigenvalues(0)) + ")",
                     e.eigenvalues(0));
    }
    RealVector root = e.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    return HermitianMatrix::from_spectrum(e.eigenvectors, root);
}

/// log det(I + m) in nats, summed over eigenvalues.
inline double log_det_i_plus(const HermitianMatrix& m) {
    const RealVector ev = hermitian_eigenvalues(m);
    if (ev(0) <= -1.0) {
        throw NotPosDef("log_det_i_plus: I + m is not positive definite (eigenvalue " +
                        std::to_string(ev(0)) + ")");
    }
    double sum = 0.0;
    for (Index i = 0; i < ev.size(); ++i) {
        sum += std::log1p(ev(i));
    }
    return sum;
}

/// Inverse of a Hermitian positive definite matrix via Cholesky.
inline HermitianMatrix hpd_inverse(const HermitianMatrix& m) {
    Eigen::LLT<ComplexMatrix> llt(m.matrix());
    if (llt.info() != Eigen::Success) {
        throw NotPosDef("hpd_inverse: matrix is not positive definite");
    }
    return HermitianMatrix(llt.solve(ComplexMatrix::Identity(m.dim(), m.dim())));
}

/// Spectral radius of an entrywise nonnegative square matrix.
///
/// Power iteration from the all-ones vector (relative tolerance 1e-12, at
/// most 1e5 steps); falls back to a dense eigensolver when the estimate
/// stops improving or the cap is hit.
inline double spectral_radius_nonneg(const RealMatrix& m) {
    if (m.rows() != m.cols() || m.rows() < 1) {
        throw InvalidArgument("spectral_radius_nonneg: expected a non-empty square matrix");
    }
    if (!m.allFinite() || (m.array() < 0.0).any()) {
        throw InvalidArgument("spectral_radius_nonneg: entries must be finite and nonnegative");
    }

    constexpr int kMaxIter = 100000;
    constexpr int kPatience = 200;
    constexpr double kTol = 1e-12;

    RealVector x = RealVector::Ones(m.rows()).normalized();
    double estimate = 0.0;
    double best_change = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int it = 0; it < kMaxIter; ++it) {
        RealVector y = m * x;
        const double norm = y.norm();
        if (norm == 0.0) {
            break;
        }
        const double change = std::abs(norm - estimate);
        estimate = norm;
        x = y / norm;
        if (it > 0 && change <= kTol * estimate) {
            return estimate;
        }
        if (change < best_change) {
            best_change = change;
            since_best = 0;
        } else if (++since_best > kPatience) {
            break;
        }
    }
    Eigen::EigenSolver<RealMatrix> dense(m, false);
    return dense.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace mimocap
