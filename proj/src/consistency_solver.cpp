#include "fundrank/consistency_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fundrank {

namespace {

constexpr double kDegenerateBlockNorm = 1e-14;
constexpr double kMonotoneSlack = 1e-10;

void RequireSameSize(const MultiviewBlockMatrix& measured, const MatX& m, const char* name) {
  if (m.rows() != measured.data().rows() || m.cols() != measured.data().cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(name) + " must be " + std::to_string(measured.data().rows()) +
                    " x " + std::to_string(measured.data().cols()));
  }
}

void ZeroDiagonalBlocks(MatX& m) {
  for (Eigen::Index i = 0; i < m.rows() / 3; ++i) m.block<3, 3>(3 * i, 3 * i).setZero();
}

// Rescales (A, scales) within their gauge class so that ||A||_F = ||F||_F / 2.
void Canonicalize(const MultiviewBlockMatrix& measured, MatX& A, ScaleMatrix& scales) {
  const double target = 0.5 * measured.data().norm();
  const double current = A.norm();
  if (target == 0.0 || current == 0.0) return;
  const double s = target / current;
  A *= s;
  scales.Scale(1.0 / s);
}

ScaleMatrix UnitScales(const MultiviewBlockMatrix& measured) {
  ScaleMatrix scales(measured.n());
  for (const auto& [i, j] : measured.Pairs()) scales.Set(i, j, 1.0);
  return scales;
}

}  // namespace

void SolverConfig::Validate() const {
  auto fail = [](const char* field, const char* why) {
    throw Error(ErrorCode::kInvalidArgument, std::string(field) + " " + why);
  };
  if (!(delta > 0.0)) fail("delta", "must be > 0");
  if (max_irls < 1) fail("max_irls", "must be >= 1");
  if (max_admm < 1) fail("max_admm", "must be >= 1");
  if (!(irls_tol > 0.0)) fail("irls_tol", "must be > 0");
  if (!(admm_tol > 0.0)) fail("admm_tol", "must be > 0");
  if (rank < 1) fail("rank", "must be >= 1");
}

void ScaleMatrix::Set(int i, int j, double value) {
  if (i == j) return;
  lambda_(i, j) = value;
  lambda_(j, i) = value;
}

MatX ExpandBlocks(const MatX& per_pair) {
  MatX out(3 * per_pair.rows(), 3 * per_pair.cols());
  for (Eigen::Index i = 0; i < per_pair.rows(); ++i) {
    for (Eigen::Index j = 0; j < per_pair.cols(); ++j) {
      out.block<3, 3>(3 * i, 3 * j).setConstant(per_pair(i, j));
    }
  }
  return out;
}

MatX ScaleMatrix::Expanded() const { return ExpandBlocks(lambda_); }

const char* ToString(SolverStatus status) {
  return status == SolverStatus::kConverged ? "converged" : "max_iter";
}

double Cost(const MultiviewBlockMatrix& measured, const MatX& A, const ScaleMatrix& scales) {
  RequireSameSize(measured, A, "A");
  const int n = measured.n();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!measured.InOmega(i, j)) continue;
      const Mat3 sym = A.block<3, 3>(3 * i, 3 * j) + A.block<3, 3>(3 * j, 3 * i).transpose();
      total += (measured.Block(i, j) - scales(i, j) * sym).norm();
    }
  }
  return 0.5 * total;
}

MatX UpdateWeights(const MultiviewBlockMatrix& measured, const MatX& A,
                   const ScaleMatrix& scales, double delta) {
  RequireSameSize(measured, A, "A");
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "delta must be > 0");
  const int n = measured.n();
  MatX w = MatX::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!measured.InOmega(i, j)) continue;
      const Mat3 sym = A.block<3, 3>(3 * i, 3 * j) + A.block<3, 3>(3 * j, 3 * i).transpose();
      w(i, j) = 1.0 / std::max(delta, (measured.Block(i, j) - scales(i, j) * sym).norm());
    }
  }
  return w;
}

MatX UpdateA(const MultiviewBlockMatrix& measured, const ScaleMatrix& scales, const MatX& G,
             const MatX& weights, double tau) {
  RequireSameSize(measured, G, "G");
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be > 0");
  const MatX W = ExpandBlocks(weights);
  const MatX L = scales.Expanded();
  const MatX G_s = G + G.transpose();
  const MatX G_n = G - G.transpose();
  const double quarter_tau = 0.25 * tau;

  const MatX WL = W.cwiseProduct(L);
  MatX A_s = (WL.cwiseProduct(measured.data()) + quarter_tau * G_s).array() /
             (WL.cwiseProduct(L).array() + quarter_tau);
  ZeroDiagonalBlocks(A_s);
  return 0.5 * (A_s + G_n);
}

ScaleUpdate UpdateLambda(const MultiviewBlockMatrix& measured, const MatX& A_s,
                         const ScaleMatrix& previous) {
  RequireSameSize(measured, A_s, "A_s");
  ScaleUpdate update{ScaleMatrix(measured.n()), 0};
  for (const auto& [i, j] : measured.Pairs()) {
    const auto block = A_s.block<3, 3>(3 * i, 3 * j);
    const double norm2 = block.squaredNorm();
    if (std::sqrt(norm2) < kDegenerateBlockNorm) {
      update.scales.Set(i, j, previous(i, j));
      ++update.degenerate_blocks;
      continue;
    }
    update.scales.Set(i, j, (measured.Block(i, j).cwiseProduct(block)).sum() / norm2);
  }
  return update;
}

MatX UpdateB(const MatX& A, const MatX& Gamma, int rank) { return Svp(A - Gamma, rank); }

MatX UpdateGamma(const MatX& Gamma, const MatX& A, const MatX& B) { return Gamma + (B - A); }

double AugmentedLagrangian(const MultiviewBlockMatrix& measured, const MatX& A,
                           const ScaleMatrix& scales, const MatX& B, const MatX& Gamma,
                           const MatX& weights, double tau) {
  const MatX residual = measured.data() - scales.Expanded().cwiseProduct(A + A.transpose());
  const double data_term = 0.5 * ExpandBlocks(weights).cwiseProduct(residual.cwiseAbs2()).sum();
  return data_term + 0.5 * tau * (B - A + Gamma).squaredNorm();
}

InitialGuess SpectralInitialization(const MultiviewBlockMatrix& measured) {
  const int dim = static_cast<int>(measured.data().rows());
  InitialGuess guess{MatX::Zero(dim, dim), UnitScales(measured)};
  if (dim < 6) return guess;

  const MatX sym = 0.5 * (measured.data() + measured.data().transpose());
  Eigen::SelfAdjointEigenSolver<MatX> eig(sym);
  const VecX& values = eig.eigenvalues();  // ascending
  const MatX& vectors = eig.eigenvectors();
  for (int k = 0; k < 3; ++k) {
    const double positive = std::max(values(dim - 1 - k), 0.0);
    const double negative = std::max(-values(k), 0.0);
    // x y^T + y x^T = positive * p p^T - negative * q q^T.
    const VecX p = std::sqrt(0.5 * positive) * vectors.col(dim - 1 - k);
    const VecX q = std::sqrt(0.5 * negative) * vectors.col(k);
    guess.A += (p - q) * (p + q).transpose();
  }
  return guess;
}

InitialGuess WarmStart(const MultiviewBlockMatrix& measured,
                       const std::vector<CameraPose>& poses) {
  if (static_cast<int>(poses.size()) != measured.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "warm start needs one pose per camera");
  }
  InitialGuess guess{BuildFactors(poses).Product(), UnitScales(measured)};
  guess.scales = UpdateLambda(measured, guess.A + guess.A.transpose(), guess.scales).scales;
  return guess;
}

SolverResult Solve(const MultiviewBlockMatrix& measured, const SolverConfig& config,
                   const std::optional<InitialGuess>& init) {
  config.Validate();
  const int n = measured.n();
  SolverState state;
  if (init) {
    RequireSameSize(measured, init->A, "initial A");
    if (init->scales.n() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "initial scales must be n x n");
    }
    state.A = init->A;
    state.scales = init->scales;
  } else {
    InitialGuess guess = SpectralInitialization(measured);
    state.A = std::move(guess.A);
    state.scales = std::move(guess.scales);
  }
  state.weights = MatX::Zero(n, n);
  for (const auto& [i, j] : measured.Pairs()) state.weights(i, j) = state.weights(j, i) = 1.0;

  SolverResult result;
  double previous_cost = std::numeric_limits<double>::infinity();

  for (int t = 0; t < config.max_irls; ++t) {
    Canonicalize(measured, state.A, state.scales);
    state.tau = state.weights.sum();
    state.Gamma = MatX::Zero(state.A.rows(), state.A.cols());
    state.B = state.A;

    int k = 0;
    if (state.tau > 0.0) {
      for (; k < config.max_admm; ++k) {
        state.A = UpdateA(measured, state.scales, state.B + state.Gamma, state.weights,
                          state.tau);
        ScaleUpdate scale_update =
            UpdateLambda(measured, state.A + state.A.transpose(), state.scales);
        state.scales = std::move(scale_update.scales);
        state.degenerate_blocks += scale_update.degenerate_blocks;
        MatX B_next = UpdateB(state.A, state.Gamma, config.rank);
        const double movement = (B_next - state.B).norm();
        state.B = std::move(B_next);
        state.Gamma = UpdateGamma(state.Gamma, state.A, state.B);
        const double scale = std::max(state.A.norm(), 1.0);
        const double gap = (state.B - state.A).norm() / scale;
        if (gap < config.admm_tol && movement / scale < config.admm_tol) {
          ++k;
          break;
        }
      }
    }
    state.admm_iterations.push_back(k);
    ++state.irls_iterations;

    const double cost = Cost(measured, state.A, state.scales);
    state.cost_history.push_back(cost);
    if (cost > previous_cost + kMonotoneSlack) {
      result.cost_increases.push_back({t, previous_cost, cost});
    }

    const double change = std::abs(previous_cost - cost);
    const bool settled =
        std::isfinite(previous_cost) && change <= config.irls_tol * std::max(previous_cost, 0.0);
    const bool exact = cost <= std::numeric_limits<double>::epsilon() * measured.data().norm();
    if (settled || exact || state.tau == 0.0) {
      result.status = SolverStatus::kConverged;
      break;
    }
    previous_cost = cost;
    state.weights = UpdateWeights(measured, state.A, state.scales, config.delta);
  }

  Canonicalize(measured, state.A, state.scales);
  MatX F = state.A + state.A.transpose();
  ZeroDiagonalBlocks(F);
  result.F = MultiviewBlockMatrix(std::move(F), FullMask(n));
  result.A = state.A;
  result.scales = state.scales;
  result.state = std::move(state);
  return result;
}

}  // namespace fundrank
