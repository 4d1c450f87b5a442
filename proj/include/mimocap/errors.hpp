#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mimocap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A matrix expected to be positive semi-definite has an eigenvalue below
/// the relative tolerance.
class NotPsd : public Error {
public:
    NotPsd(const std::string& what, double min_eigenvalue)
        : Error(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

/// A matrix expected to be positive definite (or I + M positive definite) is not.
class NotPosDef : public Error {
public:
    using Error::Error;
};

/// Dense eigensolver failure; carries the reconstruction residual.
class EigenFailure : public Error {
public:
    EigenFailure(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Waterfilling called on a matrix with no positive eigenvalue.
class DegenerateDirection : public Error {
public:
    using Error::Error;
};

/// Invalid input (dimension mismatch, out-of-range option, bad config).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An iterative method hit its iteration cap.
///
/// Carries the last iterate so callers can restart or report. Fields that do
/// not apply to the raising routine are left empty.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, int iterations, double residual)
        : Error(what), iterations(iterations), residual(residual) {}

    int iterations;
    double residual;
    Eigen::VectorXd delta;
    Eigen::VectorXd delta_tilde;
    /// Outer-loop residual history (optimizer only).
    std::vector<double> history;
    /// Last covariance iterate (optimizer only); empty otherwise.
    Eigen::MatrixXcd last_q;
};

}  // namespace mimocap
