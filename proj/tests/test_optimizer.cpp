#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "mimocap/optimizer.hpp"
#include "test_support.hpp"

namespace mimocap {
namespace {

using testing::five_cluster_stats;
using testing::isotropic_stats;
using testing::random_covariance;

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

/// Brute-force Euclidean projection onto {x >= 0, sum x = total}: enumerate
/// supports, solve the equality-constrained problem on each, keep the best
/// feasible one.
RealVector brute_force_simplex(const RealVector& v, double total) {
    const Index n = v.size();
    RealVector best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double sum = 0.0;
        int k = 0;
        for (Index i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                sum += v(i);
                ++k;
            }
        }
        const double shift = (total - sum) / k;
        RealVector x = RealVector::Zero(n);
        bool feasible = true;
        for (Index i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                x(i) = v(i) + shift;
                feasible = feasible && x(i) >= 0.0;
            }
        }
        if (feasible && (x - v).squaredNorm() < best_dist) {
            best_dist = (x - v).squaredNorm();
            best = x;
        }
    }
    return best;
}

/// Diagonal waterfilling by enumerating active sets of the k largest modes.
RealVector enumerate_waterfill(const RealVector& lambda_desc, double total) {
    for (Index k = lambda_desc.size(); k >= 1; --k) {
        double inv = 0.0;
        for (Index i = 0; i < k; ++i) inv += 1.0 / lambda_desc(i);
        const double mu = (total + inv) / k;
        if (mu - 1.0 / lambda_desc(k - 1) >= 0.0) {
            RealVector q = RealVector::Zero(lambda_desc.size());
            for (Index i = 0; i < k; ++i) q(i) = mu - 1.0 / lambda_desc(i);
            return q;
        }
    }
    return {};
}

TEST(Waterfill, ScaledIdentityGivesIdentity) {
    for (double c : {1e-3, 0.5, 1.0, 70.0}) {
        const WaterfillResult w = waterfill(HermitianMatrix::identity(5) * c);
        EXPECT_LE(max_abs(w.q.matrix().matrix() - ComplexMatrix::Identity(5, 5)), 1e-12);
        EXPECT_EQ(w.active_count, 5);
        EXPECT_NEAR(w.water_level, 1.0 + 1.0 / c, 1e-12 * (1.0 + 1.0 / c));
    }
}

TEST(Waterfill, TwoActiveModes) {
    const WaterfillResult w = waterfill(HermitianMatrix::diagonal(RealVector{{1.0, 4.0}}));
    EXPECT_NEAR(w.water_level, 1.625, 1e-15);
    EXPECT_EQ(w.active_count, 2);
    EXPECT_NEAR(w.q.matrix()(0, 0).real(), 0.625, 1e-15);
    EXPECT_NEAR(w.q.matrix()(1, 1).real(), 1.375, 1e-15);
    EXPECT_NEAR(std::abs(w.q.matrix()(0, 1)), 0.0, 1e-15);
}

TEST(Waterfill, WeakModeSwitchedOff) {
    const WaterfillResult w = waterfill(HermitianMatrix::diagonal(RealVector{{0.01, 4.0}}));
    const RealVector oracle = enumerate_waterfill(RealVector{{4.0, 0.01}}, 2.0);
    EXPECT_EQ(w.active_count, 1);
    EXPECT_NEAR(w.water_level, 2.25, 1e-15);
    EXPECT_LE(w.water_level, 1.0 / 0.01);
    EXPECT_EQ(w.q.matrix()(0, 0).real(), 0.0);
    EXPECT_NEAR(w.q.matrix()(1, 1).real(), oracle(0), 1e-15);
    EXPECT_NEAR(oracle(0), 2.0, 1e-15);
}

TEST(Waterfill, NullModesGetNoPower) {
    const WaterfillResult w = waterfill(HermitianMatrix::diagonal(RealVector{{0.0, 1e-15, 2.0, 3.0}}));
    EXPECT_EQ(w.q.matrix()(0, 0).real(), 0.0);
    EXPECT_EQ(w.q.matrix()(1, 1).real(), 0.0);
    EXPECT_NEAR(w.q.matrix().trace(), 4.0, 1e-12);
}

TEST(Waterfill, DegenerateDirection) {
    EXPECT_THROW(waterfill(HermitianMatrix(ComplexMatrix::Zero(3, 3))), DegenerateDirection);
    EXPECT_THROW(waterfill(HermitianMatrix::identity(3) * 1e-15), DegenerateDirection);
}

TEST(Waterfill, MatchesEnumerationAndKkt) {
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<Index> dim(1, 8);
    for (int trial = 0; trial < 200; ++trial) {
        const Index t = dim(rng);
        const HermitianMatrix c = testing::random_psd(t, rng, std::max<Index>(1, t - trial % 3)) * 0.3;
        const WaterfillResult w = waterfill(c);
        RealVector desc = w.eigenvalues.reverse();
        RealVector positive = desc.head((desc.array() > kNullEigenvalue).count());
        const RealVector oracle = enumerate_waterfill(positive, static_cast<double>(t));
        for (Index i = 0; i < positive.size(); ++i) {
            ASSERT_NEAR(w.powers(t - 1 - i), oracle(i), 1e-10);
        }
        // KKT: active modes sit at the water level, inactive ones are below it
        for (Index i = 0; i < t; ++i) {
            const double lambda = w.eigenvalues(i);
            if (w.powers(i) > 0.0) {
                ASSERT_NEAR(w.powers(i) + 1.0 / lambda, w.water_level, 1e-9 * w.water_level);
            } else if (lambda > kNullEigenvalue) {
                ASSERT_LE(w.water_level, 1.0 / lambda * (1.0 + 1e-12));
            }
        }
        ASSERT_NEAR(w.q.matrix().trace(), static_cast<double>(t), 1e-10);
    }
}

TEST(Waterfill, BeatsRandomCovariances) {
    std::mt19937_64 rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        const HermitianMatrix c = testing::random_psd(4, rng);
        const WaterfillResult w = waterfill(c);
        const double best = log_det_i_plus(congruence(w.q.sqrt().matrix(), c));
        for (int k = 0; k < 100; ++k) {
            const CovarianceMatrix q = random_covariance(4, rng);
            EXPECT_LE(log_det_i_plus(congruence(q.sqrt().matrix(), c)), best + 1e-12);
        }
    }
}

TEST(ProjectSimplex, KnownExample) {
    const RealVector p = project_simplex(RealVector{{-1.0, 1.0, 2.0, 6.0}}, 4.0);
    const RealVector expected{{0.0, 0.0, 0.0, 4.0}};
    EXPECT_LE((p - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((brute_force_simplex(RealVector{{-1.0, 1.0, 2.0, 6.0}}, 4.0) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ProjectSimplex, MatchesBruteForce) {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> normal(0.0, 2.0);
    std::uniform_int_distribution<Index> dim(1, 7);
    for (int trial = 0; trial < 500; ++trial) {
        RealVector v(dim(rng));
        for (Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
        const double total = static_cast<double>(v.size());
        const RealVector p = project_simplex(v, total);
        ASSERT_LE((p - brute_force_simplex(v, total)).cwiseAbs().maxCoeff(), 1e-12);
        ASSERT_NEAR(p.sum(), total, 1e-12);
        ASSERT_GE(p.minCoeff(), 0.0);
    }
}

TEST(ProjectOntoC1, FixesPointsOfC1) {
    std::mt19937_64 rng(54);
    const CovarianceMatrix q = random_covariance(5, rng);
    EXPECT_LE(max_abs(project_onto_c1(q.matrix()).matrix().matrix() - q.matrix().matrix()), 1e-12);
}

TEST(OptimizeCovariance, IsotropicIsFixedAtIdentity) {
    const OptimizeReport rep = optimize_covariance(isotropic_stats(4, 4, 3, 0.5));
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.outer_iterations, 1);
    EXPECT_LE(max_abs(rep.q_star.matrix().matrix() - ComplexMatrix::Identity(4, 4)), 1e-10);
}

TEST(OptimizeCovariance, SinglePathAlignsWithTransmitEigenvectors) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 5; ++trial) {
        const HermitianMatrix ct = testing::random_pd(4, rng);
        const ChannelStats s({testing::random_pd(4, rng)}, {ct}, 0.3);
        const OptimizeReport rep = optimize_covariance(s);
        ASSERT_TRUE(rep.converged);
        EXPECT_LE(testing::eigenvector_misalignment(ct, rep.q_star.matrix()), 1e-8);
    }
}

TEST(OptimizeCovariance, FiveClusterImprovesAndMatchesReference) {
    const ChannelStats s = five_cluster_stats(4, 0.1);
    const OptimizeReport rep = optimize_covariance(s);
    ASSERT_TRUE(rep.converged);
    const double uniform = emi_approx(s, CovarianceMatrix::identity(4)).value;
    EXPECT_GE(rep.emi_approx_value, uniform);
    EXPECT_NEAR(rep.emi_history.front(), uniform, 1e-12);
    EXPECT_TRUE(rep.monotone);

    const OptimizeReport ref = reference_maximizer(s);
    EXPECT_NEAR(rep.emi_approx_value, ref.emi_approx_value, 1e-4);
    EXPECT_LE(ref.emi_approx_value, rep.emi_approx_value + 1e-9);
}

TEST(OptimizeCovariance, RandomTwoPathAgreesWithReference) {
    std::mt19937_64 rng(56);
    for (int trial = 0; trial < 5; ++trial) {
        const ChannelStats s({testing::random_pd(4, rng), testing::random_pd(4, rng)},
                             {testing::random_pd(4, rng), testing::random_pd(4, rng)}, 0.2);
        const OptimizeReport rep = optimize_with_restarts(s);
        const OptimizeReport ref = reference_maximizer(s);
        EXPECT_NEAR(rep.emi_approx_value, ref.emi_approx_value, 1e-4);
    }
}

TEST(OptimizeCovariance, SelfConsistentAndFirstOrderOptimal) {
    std::mt19937_64 rng(57);
    for (int trial = 0; trial < 10; ++trial) {
        const ChannelStats s = testing::random_stats(rng, 6, 4);
        const OptimizeReport rep = optimize_with_restarts(s);
        ASSERT_TRUE(rep.converged);
        EXPECT_LE(rep.delta_history_residuals.back(), 1e-8);
        const CovarianceMatrix again = waterfill(transmit_combination(s, rep.solution.delta)).q;
        EXPECT_LE(max_abs(again.matrix().matrix() - rep.q_star.matrix().matrix()), 1e-8);
        EXPECT_LE(directional_derivative(s, rep.q_star, rep.solution, CovarianceMatrix::identity(s.t())), 1e-6);
        for (int k = 0; k < 100; ++k) {
            EXPECT_LE(directional_derivative(s, rep.q_star, rep.solution, random_covariance(s.t(), rng)), 1e-6);
        }
    }
}

TEST(OptimizeCovariance, ReportsNonConvergence) {
    OptimizerOptions opts;
    opts.max_outer = 1;
    opts.outer_tol = 1e-300;
    try {
        optimize_covariance(five_cluster_stats(4, 0.1), opts);
        FAIL() << "expected NonConvergence";
    } catch (const NonConvergence& e) {
        EXPECT_EQ(e.history.size(), 1u);
        EXPECT_EQ(e.last_q.rows(), 4);
        EXPECT_EQ(e.delta.size(), 5);
    }
}

TEST(RestartPolicy, FirstAttemptAveragesWithIdentity) {
    NonConvergence stuck("stuck", 1, 1.0);
    stuck.last_q = ComplexMatrix::Identity(3, 3);
    EXPECT_LE(max_abs(restart_policy(stuck, 1, 3).matrix().matrix() - ComplexMatrix::Identity(3, 3)), 1e-15);

    NonConvergence other("other", 1, 1.0);
    other.last_q = ComplexMatrix::Zero(2, 2);
    other.last_q(0, 0) = 2.0;
    const ComplexMatrix expected = RealVector{{1.5, 0.5}}.cast<Complex>().asDiagonal();
    EXPECT_LE(max_abs(restart_policy(other, 1, 2).matrix().matrix() - expected), 1e-15);
}

TEST(RestartPolicy, LaterAttemptsAreDeterministicPointsOfC1) {
    const NonConvergence failure("x", 1, 1.0);
    for (int attempt = 2; attempt <= 5; ++attempt) {
        const CovarianceMatrix a = restart_policy(failure, attempt, 4);
        const CovarianceMatrix b = restart_policy(failure, attempt, 4);
        EXPECT_EQ(a.matrix().matrix(), b.matrix().matrix());
        EXPECT_NEAR(a.matrix().trace() / 4.0, 1.0, 1e-12);
        EXPECT_GE(a.eigenvalues().minCoeff(), 0.0);
    }
    EXPECT_NE(restart_policy(failure, 2, 4).matrix().matrix(), restart_policy(failure, 3, 4).matrix().matrix());
    EXPECT_THROW(restart_policy(failure, 0, 4), InvalidArgument);
}

TEST(ReferenceMaximizer, IsotropicStaysAtIdentity) {
    const OptimizeReport ref = reference_maximizer(isotropic_stats(3, 3, 2, 1.0));
    EXPECT_LE(max_abs(ref.q_star.matrix().matrix() - ComplexMatrix::Identity(3, 3)), 1e-8);
}

}  // namespace
}  // namespace mimocap
