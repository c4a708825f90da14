#include "fundrank/multiview_block.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fundrank {

namespace {

constexpr double kPairAgreementTolerance = 1e-6;

std::string PairName(int i, int j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

}  // namespace

MultiviewBlockMatrix::MultiviewBlockMatrix(int n)
    : n_(n), data_(MatX::Zero(3 * n, 3 * n)), mask_(Mask::Constant(n, n, false)) {
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "negative camera count");
}

MultiviewBlockMatrix::MultiviewBlockMatrix(MatX data, Mask mask)
    : n_(static_cast<int>(mask.rows())), data_(std::move(data)), mask_(std::move(mask)) {
  if (mask_.rows() != mask_.cols() || data_.rows() != 3 * n_ || data_.cols() != 3 * n_) {
    throw Error(ErrorCode::kDimensionMismatch, "data must be 3n x 3n for an n x n mask");
  }
  for (int i = 0; i < n_; ++i) {
    if (mask_(i, i)) throw Error(ErrorCode::kInvalidArgument, "mask diagonal must be false");
    for (int j = i + 1; j < n_; ++j) {
      if (mask_(i, j) != mask_(j, i)) {
        throw Error(ErrorCode::kInvalidArgument, "mask is not symmetric at " + PairName(i, j));
      }
    }
  }
}

int MultiviewBlockMatrix::PairCount() const {
  return static_cast<int>(mask_.count()) / 2;
}

std::vector<std::pair<int, int>> MultiviewBlockMatrix::Pairs() const {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) {
      if (mask_(i, j)) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

Mask FullMask(int n) {
  Mask mask = Mask::Constant(n, n, true);
  for (int i = 0; i < n; ++i) mask(i, i) = false;
  return mask;
}

MultiviewBlockMatrix Assemble(const PairwiseEstimateSet& estimates, int n) {
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "negative camera count");
  MatX data = MatX::Zero(3 * n, 3 * n);
  Mask supplied = Mask::Constant(n, n, false);

  for (const auto& e : estimates) {
    if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "pair " + PairName(e.i, e.j) + " outside n=" + std::to_string(n));
    }
    if (e.i == e.j) {
      throw Error(ErrorCode::kInvalidArgument, "diagonal pair " + PairName(e.i, e.j));
    }
    if (supplied(e.i, e.j)) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate pair " + PairName(e.i, e.j));
    }
    supplied(e.i, e.j) = true;
    data.block<3, 3>(3 * e.i, 3 * e.j) = e.F;
  }

  Mask mask = Mask::Constant(n, n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool forward = supplied(i, j);
      const bool backward = supplied(j, i);
      if (!forward && !backward) continue;
      mask(i, j) = mask(j, i) = true;
      auto fij = data.block<3, 3>(3 * i, 3 * j);
      auto fji = data.block<3, 3>(3 * j, 3 * i);
      if (forward && backward) {
        const double scale = std::max(fij.norm(), fji.norm());
        if ((fji - fij.transpose()).norm() > kPairAgreementTolerance * scale) {
          throw Error(ErrorCode::kAsymmetricPair,
                      "blocks " + PairName(i, j) + " and " + PairName(j, i) +
                          " are not transposes");
        }
      } else if (forward) {
        fji = fij.transpose();
      } else {
        fij = fji.transpose();
      }
    }
  }
  return MultiviewBlockMatrix(std::move(data), std::move(mask));
}

MultiviewBlockMatrix MultiviewFromPoses(const std::vector<CameraPose>& poses,
                                        EpipolarKind kind) {
  const int n = static_cast<int>(poses.size());
  MatX data = MatX::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      data.block<3, 3>(3 * i, 3 * j) = kind == EpipolarKind::kEssential
                                           ? EssentialGlobal(poses[i], poses[j])
                                           : FundamentalGlobal(poses[i], poses[j]);
    }
  }
  return MultiviewBlockMatrix(std::move(data), FullMask(n));
}

FactorPair BuildFactors(const std::vector<CameraPose>& poses) {
  if (poses.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two poses");
  const int n = static_cast<int>(poses.size());
  // F only sees center differences; the centered gauge puts a collinear
  // configuration's line through the origin.
  Vec3 mean = Vec3::Zero();
  for (const auto& pose : poses) mean += pose.t() / n;
  FactorPair factors{MatX(3 * n, 3), MatX(3 * n, 3)};
  for (int i = 0; i < n; ++i) {
    const Mat3 v = poses[i].KInverse().transpose() * poses[i].R().transpose();
    factors.V.block<3, 3>(3 * i, 0) = v;
    factors.U.block<3, 3>(3 * i, 0) = v * Skew(poses[i].t() - mean);
  }
  return factors;
}

Svd ComputeSvd(const MatX& m) {
  Eigen::BDCSVD<MatX> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Svd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  for (Eigen::Index k = 0; k < out.U.cols(); ++k) {
    Eigen::Index arg = 0;
    out.U.col(k).cwiseAbs().maxCoeff(&arg);
    if (out.U(arg, k) < 0.0) {
      out.U.col(k) *= -1.0;
      out.V.col(k) *= -1.0;
    }
  }
  return out;
}

RankProfile ComputeRankProfile(const MatX& m, double tol) {
  if (!(tol > 0.0 && tol < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "rank tolerance must lie in (0, 1)");
  }
  RankProfile profile;
  profile.singular_values = Eigen::BDCSVD<MatX>(m).singularValues();
  if (profile.singular_values.size() == 0 || profile.singular_values(0) == 0.0) {
    return profile;
  }
  const double threshold = tol * profile.singular_values(0);
  profile.rank = static_cast<int>((profile.singular_values.array() >= threshold).count());
  return profile;
}

RankProfile ComputeRankProfile(const MultiviewBlockMatrix& m, double tol) {
  return ComputeRankProfile(m.data(), tol);
}

MatX Svp(const MatX& m, int rank) {
  if (rank < 1) throw Error(ErrorCode::kInvalidArgument, "SVP rank must be >= 1");
  const Eigen::Index small = std::min(m.rows(), m.cols());
  if (rank >= small) return m;
  // The leading right (or left) singular subspace from the smaller Gram matrix;
  // projecting onto it equals the truncated SVD.
  if (m.rows() >= m.cols()) {
    Eigen::SelfAdjointEigenSolver<MatX> eig(m.transpose() * m);
    const MatX basis = eig.eigenvectors().rightCols(rank);
    return (m * basis) * basis.transpose();
  }
  Eigen::SelfAdjointEigenSolver<MatX> eig(m * m.transpose());
  const MatX basis = eig.eigenvectors().rightCols(rank);
  return basis * (basis.transpose() * m);
}

double Median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

Rank2Stats BlockRank2Ratio(const MultiviewBlockMatrix& m) {
  Rank2Stats stats;
  for (const auto& [i, j] : m.Pairs()) {
    const Eigen::Vector3d s = Eigen::JacobiSVD<Mat3>(m.Block(i, j)).singularValues();
    stats.ratios.push_back(s(1) > 0.0 ? s(2) / s(1) : 0.0);
  }
  if (stats.ratios.empty()) return stats;
  stats.mean = std::accumulate(stats.ratios.begin(), stats.ratios.end(), 0.0) /
               static_cast<double>(stats.ratios.size());
  stats.max = *std::max_element(stats.ratios.begin(), stats.ratios.end());
  stats.median = Median(stats.ratios);
  return stats;
}

bool IsCollinear(const std::vector<Vec3>& centers, double rel_tol) {
  if (centers.size() <= 2) return true;
  Eigen::Matrix3Xd c(3, centers.size());
  for (size_t k = 0; k < centers.size(); ++k) c.col(k) = centers[k];
  c.colwise() -= c.rowwise().mean();
  const Eigen::Vector3d s = Eigen::JacobiSVD<Eigen::Matrix3Xd>(c).singularValues();
  if (s(0) == 0.0) return true;
  return s(1) < rel_tol * s(0);
}

bool IsCollinear(const std::vector<CameraPose>& poses, double rel_tol) {
  std::vector<Vec3> centers;
  centers.reserve(poses.size());
  for (const auto& p : poses) centers.push_back(p.t());
  return IsCollinear(centers, rel_tol);
}

}  // namespace fundrank
