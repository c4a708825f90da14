#pragma once

#include "fundrank/geometry.hpp"
#include "fundrank/types.hpp"

#include <vector>

namespace fundrank {

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// One estimated 3x3 block F_ij relating image i to image j.
struct PairwiseEstimate {
  int i = 0;
  int j = 0;
  Mat3 F = Mat3::Zero();
};

using PairwiseEstimateSet = std::vector<PairwiseEstimate>;

// Dense 3n x 3n matrix of stacked pairwise blocks with the symmetric pair mask.
//
// The same container carries measurements, the recovered multiview matrix and
// solver iterates; only measurement-like roles are required to have zero
// diagonal blocks, which the constructors below guarantee.
class MultiviewBlockMatrix {
 public:
  MultiviewBlockMatrix() = default;
  explicit MultiviewBlockMatrix(int n);
  // Throws kDimensionMismatch on size errors and kInvalidArgument on an
  // asymmetric mask or a mask with diagonal entries.
  MultiviewBlockMatrix(MatX data, Mask mask);

  int n() const { return n_; }
  const MatX& data() const { return data_; }
  const Mask& mask() const { return mask_; }

  Mat3 Block(int i, int j) const { return data_.block<3, 3>(3 * i, 3 * j); }
  bool InOmega(int i, int j) const { return mask_(i, j); }
  // Unordered pairs (i < j) present in the mask.
  int PairCount() const;
  std::vector<std::pair<int, int>> Pairs() const;

 private:
  int n_ = 0;
  MatX data_;
  Mask mask_;
};

// Full-mask mask for n cameras (every off-diagonal pair).
Mask FullMask(int n);

// Builds the measurement matrix. A pair given in one orientation is mirrored
// with its transpose; both orientations must agree to 1e-6 relative.
MultiviewBlockMatrix Assemble(const PairwiseEstimateSet& estimates, int n);

enum class EpipolarKind { kEssential, kFundamental };

// Exact multiview matrix of essentials or fundamentals with a full mask.
MultiviewBlockMatrix MultiviewFromPoses(const std::vector<CameraPose>& poses,
                                        EpipolarKind kind = EpipolarKind::kFundamental);

// Factors with blocks U_i = K_i^{-T} R_i^T [t_i - mean]_x and V_i = K_i^{-T} R_i^T,
// so that A = U V^T has rank <= 3 and A + A^T is the multiview fundamental.
struct FactorPair {
  MatX U;
  MatX V;

  MatX Product() const { return U * V.transpose(); }
};

FactorPair BuildFactors(const std::vector<CameraPose>& poses);

// Thin SVD with deterministic column signs: the largest-magnitude entry of
// every left singular vector is positive.
struct Svd {
  MatX U;
  VecX singular_values;
  MatX V;
};

Svd ComputeSvd(const MatX& m);

struct RankProfile {
  int rank = 0;
  VecX singular_values;  // descending
};

inline constexpr double kDefaultRankTolerance = 1e-8;

// rank = #{k : sigma_k >= tol * sigma_1}; tol must lie in (0, 1).
RankProfile ComputeRankProfile(const MatX& m, double tol = kDefaultRankTolerance);
RankProfile ComputeRankProfile(const MultiviewBlockMatrix& m,
                               double tol = kDefaultRankTolerance);

// Best rank-r approximation (truncated SVD).
MatX Svp(const MatX& m, int rank);

struct Rank2Stats {
  std::vector<double> ratios;  // sigma_3 / sigma_2 per unordered pair in the mask
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};

Rank2Stats BlockRank2Ratio(const MultiviewBlockMatrix& m);

// True when the centers lie on a common line: sigma_2 / sigma_1 of the centered
// 3 x n center matrix is below rel_tol (two or fewer centers are always collinear).
bool IsCollinear(const std::vector<Vec3>& centers, double rel_tol = 1e-9);
bool IsCollinear(const std::vector<CameraPose>& poses, double rel_tol = 1e-9);

double Median(std::vector<double> values);

}  // namespace fundrank
