#pragma once

// Large-system approximation of the ergodic mutual information:
//   Ibar(Q) = log|I + C(delta~)| + log|I + Q C~(delta)| - s2 t sum_l delta_l delta~_l
// and the function V(Q, kappa, kappa~) obtained by freeing (delta, delta~).
// All values are in nats.

#include "mimocap/canonical_solver.hpp"
#include "mimocap/channel_model.hpp"
#include "mimocap/covariance.hpp"
#include "mimocap/matrix_core.hpp"

namespace mimocap {

struct EmiValue {
    double value = 0.0;  ///< nats
    CanonicalSolution solution;
};

/// V(Q, kappa, kappa~). The second log-det is taken on Q^{1/2} C~ Q^{1/2},
/// which has the same determinant as I + Q C~ but stays Hermitian.
inline double v_function(const ChannelStats& stats, const CovarianceMatrix& q, const RealVector& kappa,
                         const RealVector& kappa_tilde) {
    detail::check_weights(stats, kappa, "v_function");
    detail::check_weights(stats, kappa_tilde, "v_function");
    detail::check_covariance(stats, q, "v_function");
    const double receive_term = log_det_i_plus(receive_combination(stats, kappa_tilde));
    const double transmit_term = log_det_i_plus(congruence(q.sqrt().matrix(), transmit_combination(stats, kappa)));
    return receive_term + transmit_term -
           stats.sigma2() * static_cast<double>(stats.t()) * kappa.dot(kappa_tilde);
}

inline EmiValue emi_approx(const ChannelStats& stats, const CovarianceMatrix& q, const SolverOptions& opts = {}) {
    CanonicalSolution sol = solve_canonical(stats, q, opts);
    const double value = v_function(stats, q, sol.delta, sol.delta_tilde);
    return {value, std::move(sol)};
}

/// Gradient of Q -> V(Q, delta, delta~) with (delta, delta~) frozen:
///   G = C~ (I + Q C~)^{-1}, Hermitian, so <G, D> = Re Tr(G D).
/// At the canonical solution for Q this is also the gradient of Ibar.
inline HermitianMatrix frozen_gradient(const ChannelStats& stats, const CovarianceMatrix& q,
                                       const CanonicalSolution& sol) {
    detail::check_covariance(stats, q, "frozen_gradient");
    const Index t = stats.t();
    const ComplexMatrix c = transmit_combination(stats, sol.delta).matrix();
    const ComplexMatrix lhs = ComplexMatrix::Identity(t, t) + q.matrix().matrix() * c;
    // G^T = (I + Q C~)^{-T} C~^T, solved without forming the inverse
    const ComplexMatrix g = lhs.transpose().partialPivLu().solve(c.transpose()).transpose();
    return HermitianMatrix(g);
}

/// Gateaux derivative of Ibar at Q in direction P - Q, given the canonical
/// solution at Q: Tr[(I + Q C~(delta))^{-1} (P - Q) C~(delta)].
inline double directional_derivative(const ChannelStats& stats, const CovarianceMatrix& q,
                                     const CanonicalSolution& sol, const CovarianceMatrix& p) {
    detail::check_covariance(stats, p, "directional_derivative");
    return trace_product(frozen_gradient(stats, q, sol), p.matrix() - q.matrix());
}

inline double directional_derivative(const ChannelStats& stats, const CovarianceMatrix& q,
                                     const CovarianceMatrix& p, const SolverOptions& opts = {}) {
    return directional_derivative(stats, q, solve_canonical(stats, q, opts), p);
}

}  // namespace mimocap
