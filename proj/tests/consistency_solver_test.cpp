#include <gtest/gtest.h>

#include <cmath>

#include "fundrank/consistency_solver.hpp"
#include "fundrank/location_recovery.hpp"
#include "test_util.hpp"

namespace fundrank {
namespace {

using testing::RandomMatrix;
using testing::RandomPoses;

// Measurement on a random mask with random symmetric scales and data.
struct Instance {
  MultiviewBlockMatrix measured;
  ScaleMatrix scales;
  MatX weights;
};

Instance RandomInstance(Rng& rng, int n, double keep = 0.7) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  PairwiseEstimateSet set;
  ScaleMatrix scales(n);
  MatX weights = MatX::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (uniform(rng) > keep) continue;
      set.push_back({i, j, RandomMatrix(rng, 3, 3)});
      scales.Set(i, j, 0.2 + 2.0 * uniform(rng));
      weights(i, j) = weights(j, i) = 0.5 + uniform(rng);
    }
  }
  return {Assemble(set, n), scales, weights};
}

double AlignedBlockError(const Mat3& a, const Mat3& b) { return EssentialError(a, b) / 100.0; }

TEST(SolverConfigTest, ValidationNamesField) {
  SolverConfig config;
  config.delta = 0.0;
  try {
    config.Validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("delta"), std::string::npos);
  }
  config = {};
  config.max_admm = 0;
  EXPECT_THROW(config.Validate(), Error);
  config = {};
  config.admm_tol = -1.0;
  EXPECT_THROW(config.Validate(), Error);
}

TEST(ScaleMatrixTest, SymmetricWithZeroDiagonal) {
  ScaleMatrix s(3);
  s.Set(0, 2, 1.5);
  s.Set(1, 1, 7.0);
  EXPECT_EQ(s(2, 0), 1.5);
  EXPECT_EQ(s(1, 1), 0.0);
  EXPECT_EQ(Mat3(s.Expanded().block<3, 3>(0, 6)), Mat3::Constant(1.5));
}

TEST(CostTest, ExactMeasurementIsZero) {
  Rng rng(1);
  const auto poses = RandomPoses(rng, 4);
  const MatX A = BuildFactors(poses).Product();
  ScaleMatrix ones(4);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) ones.Set(i, j, 1.0);
  EXPECT_LT(Cost(MultiviewFromPoses(poses), A, ones), 1e-12);
}

TEST(CostTest, SinglePairCountsBothOrientations) {
  Rng rng(2);
  const MatX A = RandomMatrix(rng, 6, 6);
  const Mat3 sym = A.block<3, 3>(0, 3) + A.block<3, 3>(3, 0).transpose();
  ScaleMatrix s(2);
  s.Set(0, 1, 1.0);
  const MultiviewBlockMatrix m = Assemble({{0, 1, 2.0 * sym}}, 2);
  EXPECT_NEAR(Cost(m, A, s), 0.5 * 2.0 * sym.norm(), 1e-12);
}

TEST(CostTest, MatchesScalarLoop) {
  Rng rng(3);
  const Instance in = RandomInstance(rng, 5);
  const MatX A = RandomMatrix(rng, 15, 15);
  double oracle = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      if (!in.measured.InOmega(i, j)) continue;
      double sq = 0.0;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          const double model = A(3 * i + r, 3 * j + c) + A(3 * j + c, 3 * i + r);
          const double diff = in.measured.data()(3 * i + r, 3 * j + c) - in.scales(i, j) * model;
          sq += diff * diff;
        }
      }
      oracle += std::sqrt(sq);
    }
  }
  EXPECT_NEAR(Cost(in.measured, A, in.scales), 0.5 * oracle, 1e-12);
}

TEST(UpdateWeightsTest, Cases) {
  // Residual 0 on (0,1), residual 2 on (0,2), (1,2) missing.
  Mat3 two = Mat3::Zero();
  two(0, 0) = 2.0;
  const MultiviewBlockMatrix m = Assemble({{0, 1, Mat3::Zero()}, {0, 2, two}}, 3);
  const MatX w = UpdateWeights(m, MatX::Zero(9, 9), ScaleMatrix(3), 1e-3);
  EXPECT_DOUBLE_EQ(w(0, 1), 1000.0);
  EXPECT_DOUBLE_EQ(w(2, 0), 0.5);
  EXPECT_DOUBLE_EQ(w(1, 2), 0.0);
  EXPECT_THROW(UpdateWeights(m, MatX::Zero(9, 9), ScaleMatrix(3), 0.0), Error);
}

TEST(UpdateATest, EmptyMaskIsPenaltyMinimizer) {
  Rng rng(4);
  const MultiviewBlockMatrix m(3);
  const MatX G = RandomMatrix(rng, 9, 9);
  const MatX A = UpdateA(m, ScaleMatrix(3), G, MatX::Zero(3, 3), 2.0);
  MatX G_s = G + G.transpose();
  for (int i = 0; i < 3; ++i) G_s.block<3, 3>(3 * i, 3 * i).setZero();
  EXPECT_LT((A + A.transpose() - G_s).norm(), 1e-12);
  EXPECT_LT((A - A.transpose() - (G - G.transpose())).norm(), 1e-12);
}

TEST(UpdateATest, LargePenaltyWithZeroG) {
  Rng rng(5);
  const Instance in = RandomInstance(rng, 4, 1.0);
  const MatX A = UpdateA(in.measured, in.scales, MatX::Zero(12, 12), in.weights, 1e12);
  EXPECT_LT(A.norm(), 1e-9);
}

TEST(UpdateATest, RejectsNonPositiveTau) {
  EXPECT_THROW(UpdateA(MultiviewBlockMatrix(2), ScaleMatrix(2), MatX::Zero(6, 6), MatX::Zero(2, 2), 0.0),
               Error);
}

// Per entry of the symmetric part, the subproblem is the scalar quadratic
// q(a) = w (f - l a)^2 + (tau / 4) (g_s - a)^2, whose vertex is found here
// from three samples.
TEST(UpdateATest, MatchesPerEntryQuadraticOracle) {
  Rng rng(6);
  for (int rep = 0; rep < 5; ++rep) {
    const Instance in = RandomInstance(rng, 5);
    const MatX G = RandomMatrix(rng, 15, 15);
    const double tau = 0.3 + rep;
    const MatX A = UpdateA(in.measured, in.scales, G, in.weights, tau);

    const MatX G_s = G + G.transpose();
    MatX A_s(15, 15);
    for (int r = 0; r < 15; ++r) {
      for (int c = 0; c < 15; ++c) {
        if (r / 3 == c / 3) {
          A_s(r, c) = 0.0;
          continue;
        }
        const double w = in.weights(r / 3, c / 3), l = in.scales(r / 3, c / 3);
        const double f = in.measured.data()(r, c), g = G_s(r, c);
        const auto q = [&](double a) { return w * (f - l * a) * (f - l * a) + 0.25 * tau * (g - a) * (g - a); };
        const double q0 = q(-1.0), q1 = q(0.0), q2 = q(1.0);
        A_s(r, c) = 0.5 * (q0 - q2) / (q0 - 2.0 * q1 + q2);
      }
    }
    const MatX oracle = 0.5 * (A_s + G - G.transpose());
    EXPECT_LT((A - oracle).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(UpdateATest, DoesNotIncreaseAugmentedLagrangian) {
  Rng rng(7);
  const Instance in = RandomInstance(rng, 4);
  const MatX B = RandomMatrix(rng, 12, 12), Gamma = RandomMatrix(rng, 12, 12);
  const double tau = 2.5;
  const MatX A = UpdateA(in.measured, in.scales, B + Gamma, in.weights, tau);
  const double best = AugmentedLagrangian(in.measured, A, in.scales, B, Gamma, in.weights, tau);
  for (int k = 0; k < 50; ++k) {
    MatX D = RandomMatrix(rng, 12, 12);
    // Stay feasible: symmetric part keeps zero diagonal blocks.
    for (int i = 0; i < 4; ++i) {
      Mat3 d = D.block<3, 3>(3 * i, 3 * i);
      D.block<3, 3>(3 * i, 3 * i) = 0.5 * (d - d.transpose());
    }
    const double perturbed =
        AugmentedLagrangian(in.measured, A + 1e-3 * D, in.scales, B, Gamma, in.weights, tau);
    EXPECT_GE(perturbed, best - 1e-12);
  }
}

TEST(UpdateLambdaTest, MatchesGridSearch) {
  Rng rng(8);
  const Instance in = RandomInstance(rng, 5, 1.0);
  // A_s close to the measurement up to per-pair scales, so the optimum is interior.
  MatX A_s = in.measured.data();
  for (const auto& [i, j] : in.measured.Pairs()) {
    const Mat3 block = in.measured.Block(i, j) / in.scales(i, j) + 0.1 * RandomMatrix(rng, 3, 3);
    A_s.block<3, 3>(3 * i, 3 * j) = block;
    A_s.block<3, 3>(3 * j, 3 * i) = block.transpose();
  }
  const ScaleUpdate update = UpdateLambda(in.measured, A_s, ScaleMatrix(5));
  const double step = 1e-4;
  for (const auto& [i, j] : in.measured.Pairs()) {
    const Mat3 f = in.measured.Block(i, j);
    const Mat3 a = A_s.block<3, 3>(3 * i, 3 * j);
    double best = 0.0, best_value = std::numeric_limits<double>::infinity();
    for (double l = -5.0; l <= 5.0; l += step) {
      const double value = (f - l * a).squaredNorm();
      if (value < best_value) best_value = value, best = l;
    }
    EXPECT_NEAR(update.scales(i, j), best, step);
  }
  EXPECT_EQ(update.degenerate_blocks, 0);
}

TEST(UpdateLambdaTest, VanishedBlockKeepsPreviousScale) {
  Rng rng(9);
  const MultiviewBlockMatrix m = Assemble({{0, 1, RandomMatrix(rng, 3, 3)}}, 2);
  ScaleMatrix previous(2);
  previous.Set(0, 1, 0.7);
  const ScaleUpdate update = UpdateLambda(m, MatX::Zero(6, 6), previous);
  EXPECT_EQ(update.scales(0, 1), 0.7);
  EXPECT_EQ(update.degenerate_blocks, 1);
}

TEST(UpdateLambdaTest, DoesNotIncreaseAugmentedLagrangian) {
  Rng rng(10);
  const Instance in = RandomInstance(rng, 4, 1.0);
  const MatX A = RandomMatrix(rng, 12, 12), B = RandomMatrix(rng, 12, 12), Gamma = RandomMatrix(rng, 12, 12);
  const ScaleMatrix fitted = UpdateLambda(in.measured, A + A.transpose(), in.scales).scales;
  EXPECT_LE(AugmentedLagrangian(in.measured, A, fitted, B, Gamma, in.weights, 1.0),
            AugmentedLagrangian(in.measured, A, in.scales, B, Gamma, in.weights, 1.0) + 1e-12);
}

TEST(UpdateBTest, RankAndOptimality) {
  Rng rng(11);
  const Instance in = RandomInstance(rng, 4);
  const MatX A = RandomMatrix(rng, 12, 12), Gamma = RandomMatrix(rng, 12, 12);
  const MatX B = UpdateB(A, Gamma);
  EXPECT_LE(ComputeRankProfile(B, 1e-10).rank, 3);
  const double best = AugmentedLagrangian(in.measured, A, in.scales, B, Gamma, in.weights, 1.0);
  for (int k = 0; k < 20; ++k) {
    const MatX other = Svp(B + 1e-2 * RandomMatrix(rng, 12, 12), 3);
    EXPECT_GE(AugmentedLagrangian(in.measured, A, in.scales, other, Gamma, in.weights, 1.0), best - 1e-12);
  }
}

TEST(UpdateGammaTest, AccumulatesGap) {
  const MatX Gamma = MatX::Constant(3, 3, 1.0), A = MatX::Constant(3, 3, 2.0), B = MatX::Constant(3, 3, 5.0);
  EXPECT_EQ(UpdateGamma(Gamma, A, B), MatX::Constant(3, 3, 4.0));
}

TEST(SpectralInitializationTest, ExactMultiviewRecovered) {
  Rng rng(12);
  const MultiviewBlockMatrix F = MultiviewFromPoses(RandomPoses(rng, 6));
  const InitialGuess guess = SpectralInitialization(F);
  EXPECT_LE(ComputeRankProfile(guess.A, 1e-10).rank, 3);
  EXPECT_LT((guess.A + guess.A.transpose() - F.data()).norm(), 1e-10 * F.data().norm());
}

TEST(SolveTest, ExactInputHasZeroCost) {
  Rng rng(13);
  const MultiviewBlockMatrix F = MultiviewFromPoses(RandomPoses(rng, 6, true));
  const SolverResult result = Solve(F);
  EXPECT_LT(result.state.cost_history.back(), 1e-10);
  EXPECT_EQ(result.state.cost_history.size(), static_cast<size_t>(result.state.irls_iterations));
}

TEST(SolveTest, CompletesMissingScaledBlocks) {
  Rng rng(14);
  const int n = 8;
  const auto poses = RandomPoses(rng, n);
  const MultiviewBlockMatrix truth = MultiviewFromPoses(poses, EpipolarKind::kEssential);
  std::uniform_real_distribution<double> scale(0.2, 5.0);
  PairwiseEstimateSet set;
  for (const auto& [i, j] : truth.Pairs()) {
    if ((i + 2 * j) % 5 == 0) continue;  // roughly 20% missing
    set.push_back({i, j, scale(rng) * truth.Block(i, j)});
  }
  const MultiviewBlockMatrix measured = Assemble(set, n);
  ASSERT_LT(measured.PairCount(), truth.PairCount());
  const SolverResult result = Solve(measured);
  EXPECT_EQ(result.F.PairCount(), truth.PairCount());
  for (const auto& [i, j] : truth.Pairs()) {
    EXPECT_LT(AlignedBlockError(result.F.Block(i, j), truth.Block(i, j)), 1e-6) << i << "," << j;
  }
  for (size_t k = 1; k < result.state.cost_history.size(); ++k) {
    EXPECT_LE(result.state.cost_history[k], result.state.cost_history[k - 1] + 1e-10);
  }
}

TEST(SolveTest, WarmStartFromTruthStaysExact) {
  Rng rng(15);
  const auto poses = RandomPoses(rng, 5);
  const MultiviewBlockMatrix F = MultiviewFromPoses(poses);
  const InitialGuess guess = WarmStart(F, poses);
  EXPECT_LT(Cost(F, guess.A, guess.scales), 1e-12);
  SolverConfig config;
  config.max_irls = 2;
  const SolverResult result = Solve(F, config, guess);
  for (const auto& [i, j] : F.Pairs()) EXPECT_LT(AlignedBlockError(result.F.Block(i, j), F.Block(i, j)), 1e-9);
}

TEST(SolveTest, WarmStartNeedsOnePosePerCamera) {
  Rng rng(16);
  const auto poses = RandomPoses(rng, 4);
  EXPECT_THROW(WarmStart(MultiviewFromPoses(poses), {poses[0], poses[1]}), Error);
}

TEST(SolveTest, InitDimensionMismatch) {
  Rng rng(17);
  const MultiviewBlockMatrix F = MultiviewFromPoses(RandomPoses(rng, 4));
  EXPECT_THROW(Solve(F, {}, InitialGuess{MatX::Zero(9, 9), ScaleMatrix(3)}), Error);
}

TEST(SolveTest, EmptyMaskTerminates) {
  const SolverResult result = Solve(MultiviewBlockMatrix(4));
  EXPECT_EQ(result.status, SolverStatus::kConverged);
  EXPECT_EQ(result.F.PairCount(), 6);
}

TEST(SolveTest, StatusStrings) {
  EXPECT_STREQ(ToString(SolverStatus::kConverged), "converged");
  EXPECT_STREQ(ToString(SolverStatus::kMaxIterations), "max_iter");
}

}  // namespace
}  // namespace fundrank
