#pragma once

#include "fundrank/multiview_block.hpp"
#include "fundrank/types.hpp"

#include <optional>
#include <vector>

namespace fundrank {

struct SolverConfig {
  double delta = 1e-3;      // IRLS floor on per-block residual norms
  int max_irls = 30;
  int max_admm = 1000;      // inner cap per IRLS pass
  double irls_tol = 1e-8;   // relative cost change
  double admm_tol = 1e-14;  // ||B - A||_F / max(||A||_F, 1)
  int rank = 3;

  // Throws kInvalidArgument naming the offending field.
  void Validate() const;
};

// Symmetric per-pair scales lambda_ij with a zero diagonal.
class ScaleMatrix {
 public:
  ScaleMatrix() = default;
  explicit ScaleMatrix(int n) : lambda_(MatX::Zero(n, n)) {}

  int n() const { return static_cast<int>(lambda_.rows()); }
  double operator()(int i, int j) const { return lambda_(i, j); }
  // Sets both (i, j) and (j, i); the diagonal is left untouched.
  void Set(int i, int j, double value);
  void Scale(double factor) { lambda_ *= factor; }

  const MatX& values() const { return lambda_; }
  // 3n x 3n matrix with every block filled by lambda_ij.
  MatX Expanded() const;

 private:
  MatX lambda_;
};

// Replicates an n x n matrix into constant 3 x 3 blocks.
MatX ExpandBlocks(const MatX& per_pair);

enum class SolverStatus { kConverged, kMaxIterations };

const char* ToString(SolverStatus status);

struct CostIncrease {
  int irls_iteration = 0;
  double previous = 0.0;
  double current = 0.0;
};

struct SolverState {
  MatX A;
  MatX B;
  MatX Gamma;
  ScaleMatrix scales;
  MatX weights;  // n x n pair weights; block replication via ExpandBlocks
  double tau = 0.0;
  int irls_iterations = 0;
  std::vector<int> admm_iterations;  // inner iterations used per IRLS pass
  std::vector<double> cost_history;  // mixed L1-L2 cost after each IRLS pass
  int degenerate_blocks = 0;         // lambda updates skipped for vanished blocks
};

struct SolverResult {
  MultiviewBlockMatrix F;  // A + A^T with a full mask
  MatX A;
  ScaleMatrix scales;
  SolverState state;
  SolverStatus status = SolverStatus::kMaxIterations;
  std::vector<CostIncrease> cost_increases;
};

struct InitialGuess {
  MatX A;
  ScaleMatrix scales;
};

// 1/2 sum over ordered pairs in the mask of ||F_ij - lambda_ij (A_ij + A_ji^T)||_F.
double Cost(const MultiviewBlockMatrix& measured, const MatX& A, const ScaleMatrix& scales);

// w_ij = 1 / max(delta, residual_ij) on the mask, 0 elsewhere (n x n).
MatX UpdateWeights(const MultiviewBlockMatrix& measured, const MatX& A,
                   const ScaleMatrix& scales, double delta);

// Closed-form minimizer over A of the augmented Lagrangian at fixed scales,
// with G = B + Gamma. The symmetric part has zero diagonal blocks.
MatX UpdateA(const MultiviewBlockMatrix& measured, const ScaleMatrix& scales, const MatX& G,
             const MatX& weights, double tau);

struct ScaleUpdate {
  ScaleMatrix scales;
  int degenerate_blocks = 0;
};

// Per-pair least-squares scale of the measured block against A_s = A + A^T.
// Blocks of A_s with norm below 1e-14 keep the previous scale.
ScaleUpdate UpdateLambda(const MultiviewBlockMatrix& measured, const MatX& A_s,
                         const ScaleMatrix& previous);

MatX UpdateB(const MatX& A, const MatX& Gamma, int rank = 3);
MatX UpdateGamma(const MatX& Gamma, const MatX& A, const MatX& B);

// Augmented Lagrangian value of one ADMM subproblem (used by tests and
// diagnostics).
double AugmentedLagrangian(const MultiviewBlockMatrix& measured, const MatX& A,
                           const ScaleMatrix& scales, const MatX& B, const MatX& Gamma,
                           const MatX& weights, double tau);

// Data-driven start: pairs the three leading positive and negative eigenpairs
// of the symmetric measurement so that A + A^T approximates it with rank(A) = 3.
InitialGuess SpectralInitialization(const MultiviewBlockMatrix& measured);

// Start from camera poses (e.g. the output of an upstream pipeline):
// A = U V^T from BuildFactors, scales fitted blockwise to the measurement.
InitialGuess WarmStart(const MultiviewBlockMatrix& measured,
                       const std::vector<CameraPose>& poses);

// Outer IRLS around the inner ADMM. Non-convergence is reported via status.
SolverResult Solve(const MultiviewBlockMatrix& measured, const SolverConfig& config = {},
                   const std::optional<InitialGuess>& init = std::nullopt);

}  // namespace fundrank
