#pragma once

// Canonical equations of the large-system EMI approximation:
//   delta_l       = f_l(delta~)    = (1/t) Tr[Cr_l T(delta~)]
//   delta~_l      = f~_l(delta, Q) = (1/t) Tr[Q^{1/2} Ct_l Q^{1/2} T~(delta, Q)]
// with T = [s2 (I + sum_j delta~_j Cr_j)]^{-1} and
//      T~ = [s2 (I + sum_j delta_j Q^{1/2} Ct_j Q^{1/2})]^{-1},
// solved by the fixed-point iteration
//   delta^{n+1} = f(delta~^n),  delta~^{n+1} = f~(delta^n, Q).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mimocap/channel_model.hpp"
#include "mimocap/covariance.hpp"
#include "mimocap/errors.hpp"
#include "mimocap/matrix_core.hpp"

namespace mimocap {

struct SolverOptions {
    double tol = 1e-10;       ///< relative sup-norm of the equation mismatch
    int max_iter = 10000;
    double init_delta = 1.0;  ///< shared starting value for every delta_l, delta~_l

    void validate() const {
        if (!(tol > 0.0) || max_iter < 1 || !(init_delta > 0.0)) {
            throw InvalidArgument("SolverOptions: require tol > 0, max_iter >= 1, init_delta > 0");
        }
    }
};

struct CanonicalSolution {
    RealVector delta;
    RealVector delta_tilde;
    HermitianMatrix t_receive;   ///< T, r x r
    HermitianMatrix t_transmit;  ///< T~, t x t
    int iterations = 0;
    double residual = 0.0;
};

/// Algebraic route used for f~.
enum class TransmitForm {
    automatic,     ///< conjugated unless Q is singular
    conjugated,    ///< (1/t) Tr[Q^{1/2} Ct_l Q^{1/2} T~]
    push_through,  ///< (1/(t s2)) Tr[Ct_l Q (I + C~(delta) Q)^{-1}]
};

/// C(kappa~) = sum_l kappa~_l Cr_l
inline HermitianMatrix receive_combination(const ChannelStats& stats, const RealVector& kappa_tilde) {
    ComplexMatrix acc = ComplexMatrix::Zero(stats.r(), stats.r());
    for (Index l = 0; l < stats.paths(); ++l) {
        acc += kappa_tilde(l) * stats.receive(l).matrix();
    }
    return HermitianMatrix(acc);
}

/// C~(kappa) = sum_l kappa_l Ct_l
inline HermitianMatrix transmit_combination(const ChannelStats& stats, const RealVector& kappa) {
    ComplexMatrix acc = ComplexMatrix::Zero(stats.t(), stats.t());
    for (Index l = 0; l < stats.paths(); ++l) {
        acc += kappa(l) * stats.transmit(l).matrix();
    }
    return HermitianMatrix(acc);
}

namespace detail {

inline void check_weights(const ChannelStats& stats, const RealVector& v, const char* who) {
    if (v.size() != stats.paths()) {
        throw InvalidArgument(std::string(who) + ": vector length must equal the path count");
    }
    if (!v.allFinite() || (v.array() < 0.0).any()) {
        throw InvalidArgument(std::string(who) + ": entries must be finite and >= 0");
    }
}

inline void check_covariance(const ChannelStats& stats, const CovarianceMatrix& q, const char* who) {
    if (q.dim() != stats.t()) {
        throw InvalidArgument(std::string(who) + ": Q must be t x t");
    }
}

/// Everything about the canonical maps that depends only on (stats, Q).
class CanonicalMaps {
public:
    CanonicalMaps(const ChannelStats& stats, const CovarianceMatrix& q, TransmitForm form)
        : stats_(stats), q_(q) {
        form_ = form == TransmitForm::automatic
                    ? (q.singular() ? TransmitForm::push_through : TransmitForm::conjugated)
                    : form;
        conjugated_.reserve(static_cast<std::size_t>(stats.paths()));
        for (Index l = 0; l < stats.paths(); ++l) {
            conjugated_.push_back(congruence(q.sqrt().matrix(), stats.transmit(l)));
        }
    }

    /// T(kappa~)
    HermitianMatrix receive_resolvent(const RealVector& kappa_tilde) const {
        ComplexMatrix m = ComplexMatrix::Identity(stats_.r(), stats_.r());
        for (Index l = 0; l < stats_.paths(); ++l) {
            m += kappa_tilde(l) * stats_.receive(l).matrix();
        }
        return hpd_inverse(HermitianMatrix(stats_.sigma2() * m));
    }

    /// T~(kappa, Q), always via the conjugated matrices (defined for singular Q too).
    HermitianMatrix transmit_resolvent(const RealVector& kappa) const {
        ComplexMatrix m = ComplexMatrix::Identity(stats_.t(), stats_.t());
        for (Index l = 0; l < stats_.paths(); ++l) {
            m += kappa(l) * conjugated_[static_cast<std::size_t>(l)].matrix();
        }
        return hpd_inverse(HermitianMatrix(stats_.sigma2() * m));
    }

    RealVector f(const RealVector& kappa_tilde, HermitianMatrix* t_out = nullptr) const {
        HermitianMatrix t = receive_resolvent(kappa_tilde);
        RealVector out(stats_.paths());
        const double inv_t = 1.0 / static_cast<double>(stats_.t());
        for (Index l = 0; l < stats_.paths(); ++l) {
            out(l) = trace_product(stats_.receive(l), t) * inv_t;
        }
        if (t_out != nullptr) {
            *t_out = std::move(t);
        }
        return out;
    }

    RealVector f_tilde(const RealVector& kappa) const {
        const double inv_t = 1.0 / static_cast<double>(stats_.t());
        RealVector out(stats_.paths());
        if (form_ == TransmitForm::conjugated) {
            const HermitianMatrix tt = transmit_resolvent(kappa);
            for (Index l = 0; l < stats_.paths(); ++l) {
                out(l) = trace_product(conjugated_[static_cast<std::size_t>(l)], tt) * inv_t;
            }
            return out;
        }
        const Index t = stats_.t();
        const ComplexMatrix& qm = q_.matrix().matrix();
        const ComplexMatrix lhs =
            ComplexMatrix::Identity(t, t) + transmit_combination(stats_, kappa).matrix() * qm;
        // Q (I + C~ Q)^{-1}
        const ComplexMatrix qx = qm * lhs.partialPivLu().inverse();
        for (Index l = 0; l < stats_.paths(); ++l) {
            out(l) = (stats_.transmit(l).matrix() * qx).trace().real() * inv_t / stats_.sigma2();
        }
        return out;
    }

    const std::vector<HermitianMatrix>& conjugated_transmit() const noexcept { return conjugated_; }

private:
    const ChannelStats& stats_;
    const CovarianceMatrix& q_;
    TransmitForm form_;
    std::vector<HermitianMatrix> conjugated_;
};

inline double residual_scale(const RealVector& delta, const RealVector& delta_tilde) {
    return std::max({1.0, delta.cwiseAbs().maxCoeff(), delta_tilde.cwiseAbs().maxCoeff()});
}

}  // namespace detail

/// (f_l(delta~))_l
inline RealVector eval_f(const RealVector& delta_tilde, const ChannelStats& stats) {
    detail::check_weights(stats, delta_tilde, "eval_f");
    const CovarianceMatrix q = CovarianceMatrix::identity(stats.t());
    return detail::CanonicalMaps(stats, q, TransmitForm::conjugated).f(delta_tilde);
}

/// (f~_l(delta, Q))_l
inline RealVector eval_f_tilde(const RealVector& delta, const CovarianceMatrix& q, const ChannelStats& stats,
                               TransmitForm form = TransmitForm::automatic) {
    detail::check_weights(stats, delta, "eval_f_tilde");
    detail::check_covariance(stats, q, "eval_f_tilde");
    return detail::CanonicalMaps(stats, q, form).f_tilde(delta);
}

/// Starting point for the fixed-point iteration.
struct WarmStart {
    RealVector delta;
    RealVector delta_tilde;
};

/// Solves the canonical system for Q. The returned pair satisfies
///   max_l max(|delta_l - f_l|, |delta~_l - f~_l|) / max(1, |delta|_inf, |delta~|_inf) <= tol,
/// tightened by the observed contraction rate so that the distance to the
/// exact solution is also of order tol.
inline CanonicalSolution solve_canonical(const ChannelStats& stats, const CovarianceMatrix& q,
                                         const SolverOptions& opts = {},
                                         const std::optional<WarmStart>& warm = std::nullopt) {
    opts.validate();
    detail::check_covariance(stats, q, "solve_canonical");
    const detail::CanonicalMaps maps(stats, q, TransmitForm::automatic);

    RealVector delta = RealVector::Constant(stats.paths(), opts.init_delta);
    RealVector delta_tilde = delta;
    if (warm) {
        if (warm->delta.size() != stats.paths() || warm->delta_tilde.size() != stats.paths() ||
            (warm->delta.array() <= 0.0).any() || (warm->delta_tilde.array() <= 0.0).any()) {
            throw InvalidArgument("solve_canonical: warm start must be positive with one entry per path");
        }
        delta = warm->delta;
        delta_tilde = warm->delta_tilde;
    }

    double residual = 0.0;
    double previous = 0.0;
    double rate = 0.0;
    for (int it = 0; it <= opts.max_iter; ++it) {
        HermitianMatrix t_receive;
        RealVector next_delta = maps.f(delta_tilde, &t_receive);
        RealVector next_delta_tilde = maps.f_tilde(delta);
        residual = std::max((delta - next_delta).cwiseAbs().maxCoeff(),
                            (delta_tilde - next_delta_tilde).cwiseAbs().maxCoeff()) /
                   detail::residual_scale(delta, delta_tilde);
        // contraction estimate; stop once the implied distance to the fixed point is below tol
        if (it > 0 && previous > 0.0) {
            rate = std::max(0.5 * rate, std::min(residual / previous, 0.999));
        }
        previous = residual;
        if (residual <= opts.tol && residual <= opts.tol * (1.0 - rate)) {
            CanonicalSolution sol;
            sol.t_transmit = maps.transmit_resolvent(delta);
            sol.t_receive = std::move(t_receive);
            sol.delta = std::move(delta);
            sol.delta_tilde = std::move(delta_tilde);
            sol.iterations = it;
            sol.residual = residual;
            return sol;
        }
        delta = std::move(next_delta);
        delta_tilde = std::move(next_delta_tilde);
    }
    NonConvergence err("solve_canonical: no convergence after " + std::to_string(opts.max_iter) +
                           " iterations (residual " + std::to_string(residual) + ")",
                       opts.max_iter, residual);
    err.delta = delta;
    err.delta_tilde = delta_tilde;
    throw err;
}

/// rho(s2^2 A~ A) with A_kl = (1/t) Tr(Cr_k T Cr_l T) and
/// A~_kl = (1/t) Tr(Q^{1/2}Ct_k Q^{1/2} T~ Q^{1/2}Ct_l Q^{1/2} T~).
/// Strictly below 1 at a genuine solution of the canonical system.
inline double contraction_diagnostic(const CanonicalSolution& sol, const ChannelStats& stats,
                                const CovarianceMatrix& q) {
    detail::check_covariance(stats, q, "contraction_diagnostic");
    const Index paths = stats.paths();
    const double inv_t = 1.0 / static_cast<double>(stats.t());
    const detail::CanonicalMaps maps(stats, q, TransmitForm::conjugated);

    std::vector<ComplexMatrix> rx;
    std::vector<ComplexMatrix> tx;
    for (Index l = 0; l < paths; ++l) {
        rx.push_back(stats.receive(l).matrix() * sol.t_receive.matrix());
        tx.push_back(maps.conjugated_transmit()[static_cast<std::size_t>(l)].matrix() * sol.t_transmit.matrix());
    }
    RealMatrix a(paths, paths);
    RealMatrix a_tilde(paths, paths);
    for (Index k = 0; k < paths; ++k) {
        for (Index l = 0; l < paths; ++l) {
            const auto ku = static_cast<std::size_t>(k);
            const auto lu = static_cast<std::size_t>(l);
            a(k, l) = std::max(0.0, (rx[ku] * rx[lu]).trace().real() * inv_t);
            a_tilde(k, l) = std::max(0.0, (tx[ku] * tx[lu]).trace().real() * inv_t);
        }
    }
    const double s4 = stats.sigma2() * stats.sigma2();
    return spectral_radius_nonneg(s4 * a_tilde * a);
}

}  // namespace mimocap
