#include "fundrank/location_recovery.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fundrank/multiview_block.hpp"

namespace fundrank {

namespace {

constexpr double kSkewTolerance = 1e-10;
constexpr double kMinSpread = 1e-12;
constexpr double kMinDistance = 1.0;

struct Edge {
  int i;
  int j;
  Vec3 gamma;
};

std::vector<Edge> CollectEdges(const DirectionSet& directions, int n) {
  std::vector<Edge> edges;
  for (const auto& [key, gamma] : directions.entries()) {
    if (key.first < 0 || key.second >= n) {
      throw Error(ErrorCode::kIndexOutOfRange, "direction pair outside camera range");
    }
    edges.push_back({key.first, key.second, gamma});
  }
  return edges;
}

void RequireConnected(const std::vector<Edge>& edges, int n) {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = n;
  for (const auto& e : edges) {
    const int a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  if (components != 1) {
    throw Error(ErrorCode::kDisconnectedGraph,
                "direction graph has " + std::to_string(components) + " components");
  }
}

MatX ToMatrix(const std::vector<Vec3>& t) {
  MatX m(3, t.size());
  for (size_t k = 0; k < t.size(); ++k) m.col(k) = t[k];
  return m;
}

// Smallest non-translational eigenvector of sum w (e_i - e_j)(e_i - e_j)^T (x)
// (I - gamma gamma^T): exact up to scale and sign for consistent directions.
std::vector<Vec3> SpectralLocations(const std::vector<Edge>& edges,
                                    const std::vector<double>& weights, int n) {
  const int dim = 3 * n;
  MatX system = MatX::Zero(dim, dim);
  for (size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    const Mat3 block = weights[k] * (Mat3::Identity() - e.gamma * e.gamma.transpose());
    system.block<3, 3>(3 * e.i, 3 * e.i) += block;
    system.block<3, 3>(3 * e.j, 3 * e.j) += block;
    system.block<3, 3>(3 * e.i, 3 * e.j) -= block;
    system.block<3, 3>(3 * e.j, 3 * e.i) -= block;
  }
  MatX translations = MatX::Zero(dim, 3);
  for (int i = 0; i < n; ++i) translations.block<3, 3>(3 * i, 0) = Mat3::Identity();
  const MatX q = Eigen::HouseholderQR<MatX>(translations).householderQ();
  const MatX complement = q.rightCols(dim - 3);
  Eigen::SelfAdjointEigenSolver<MatX> eig(complement.transpose() * system * complement);
  const VecX x = complement * eig.eigenvectors().col(0);

  std::vector<Vec3> t(n);
  for (int i = 0; i < n; ++i) t[i] = x.segment<3>(3 * i);
  double orientation = 0.0;
  for (size_t k = 0; k < edges.size(); ++k) {
    orientation += weights[k] * edges[k].gamma.dot(t[edges[k].i] - t[edges[k].j]);
  }
  if (orientation < 0.0) {
    for (auto& v : t) v = -v;
  }
  // Scale so every consistent pair satisfies the distance bound.
  std::vector<double> projections;
  for (const auto& e : edges) {
    const double p = e.gamma.dot(t[e.i] - t[e.j]);
    if (p > 0.0) projections.push_back(p);
  }
  if (!projections.empty()) {
    const double floor = 1e-3 * Median(projections);
    const double smallest = *std::min_element(projections.begin(), projections.end());
    const double s = kMinDistance / std::max(smallest, floor);
    for (auto& v : t) v *= s;
  }
  return t;
}

double ResidualNorm(const Edge& e, const std::vector<Vec3>& t, double d) {
  return (t[e.i] - t[e.j] - d * e.gamma).norm();
}

double PairDistance(const Edge& e, const std::vector<Vec3>& t) {
  return std::max(kMinDistance, e.gamma.dot(t[e.i] - t[e.j]));
}

// Block coordinate descent on the weighted quadratic: exact t-step (graph
// Laplacian solve with zero-mean gauge) alternating with clamped d-step.
void MinimizeWeighted(const std::vector<Edge>& edges, const std::vector<double>& weights,
                      int n, const LocationOptions& options, std::vector<Vec3>& t) {
  MatX laplacian = MatX::Constant(n, n, 1.0 / n);
  for (size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    laplacian(e.i, e.i) += weights[k];
    laplacian(e.j, e.j) += weights[k];
    laplacian(e.i, e.j) -= weights[k];
    laplacian(e.j, e.i) -= weights[k];
  }
  const Eigen::LDLT<MatX> solver(laplacian);

  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_inner; ++it) {
    MatX rhs = MatX::Zero(n, 3);
    double objective = 0.0;
    for (size_t k = 0; k < edges.size(); ++k) {
      const auto& e = edges[k];
      const double d = PairDistance(e, t);
      const double r = ResidualNorm(e, t, d);
      objective += weights[k] * r * r;
      const Vec3 target = weights[k] * d * e.gamma;
      rhs.row(e.i) += target.transpose();
      rhs.row(e.j) -= target.transpose();
    }
    if (objective == 0.0 ||
        (std::isfinite(previous) && previous - objective <= options.tol * previous)) {
      break;
    }
    previous = objective;
    const MatX solution = solver.solve(rhs);
    for (int i = 0; i < n; ++i) t[i] = solution.row(i).transpose();
  }
}

}  // namespace

void DirectionSet::Set(int i, int j, const Vec3& direction) {
  if (i == j) throw Error(ErrorCode::kInvalidArgument, "direction needs two cameras");
  const double norm = direction.norm();
  if (!(norm > 0.0)) throw Error(ErrorCode::kZeroMatrix, "zero direction");
  if (i < j) {
    entries_[{i, j}] = direction / norm;
  } else {
    entries_[{j, i}] = -direction / norm;
  }
}

std::optional<Vec3> DirectionSet::Get(int i, int j) const {
  const auto it = entries_.find({std::min(i, j), std::max(i, j)});
  if (it == entries_.end()) return std::nullopt;
  return i < j ? it->second : Vec3(-it->second);
}

Vec3 ExtractDirection(const Mat3& essential, const Mat3& R_i, const Mat3& R_j,
                      const std::vector<CalibratedMatch>& matches) {
  const Mat3 m = R_i * essential * R_j.transpose();
  const Mat3 skew = 0.5 * (m - m.transpose());
  if (skew.norm() < kSkewTolerance * essential.norm() || essential.norm() == 0.0) {
    throw Error(ErrorCode::kVanishingSkewPart, "essential block has no skew component");
  }
  Vec3 v(skew(2, 1), skew(0, 2), skew(1, 0));
  v.normalize();

  int votes = 0;
  for (const auto& match : matches) {
    // t_i + a R_i p_i = t_j + b R_j p_j with t_i - t_j = v.
    Eigen::Matrix<double, 3, 2> rays;
    rays.col(0) = R_i * match.first;
    rays.col(1) = -R_j * match.second;
    const Eigen::Vector2d depth = rays.colPivHouseholderQr().solve(-v);
    if (depth(0) > 0.0 && depth(1) > 0.0) ++votes;
    if (depth(0) < 0.0 && depth(1) < 0.0) --votes;
  }
  if (votes != 0) return votes > 0 ? v : Vec3(-v);

  for (int axis = 2; axis >= 0; --axis) {
    if (std::abs(v(axis)) > 1e-12) return v(axis) > 0.0 ? v : Vec3(-v);
  }
  return v;
}

LocationSolution RecoverLocations(const DirectionSet& directions, int n,
                                  const LocationOptions& options) {
  if (n < 3) throw Error(ErrorCode::kInvalidArgument, "location recovery needs n >= 3");
  const std::vector<Edge> edges = CollectEdges(directions, n);
  RequireConnected(edges, n);

  std::vector<double> weights(edges.size(), 1.0);
  std::vector<Vec3> t = SpectralLocations(edges, weights, n);

  LocationSolution solution;
  double previous = std::numeric_limits<double>::infinity();
  const int passes = options.robust ? options.max_irls : 1;
  for (int pass = 0; pass < passes; ++pass) {
    MinimizeWeighted(edges, weights, n, options, t);
    double total = 0.0;
    for (size_t k = 0; k < edges.size(); ++k) {
      const double r = ResidualNorm(edges[k], t, PairDistance(edges[k], t));
      total += r;
      weights[k] = 1.0 / std::max(options.delta, r);
    }
    solution.residual_history.push_back(total);
    if (!options.robust ||
        (std::isfinite(previous) && std::abs(previous - total) <= options.tol * std::max(previous, 1.0))) {
      solution.converged = true;
      break;
    }
    previous = total;
  }

  const Vec3 centroid = ToMatrix(t).rowwise().mean();
  for (auto& v : t) v -= centroid;
  double mean_distance = 0.0;
  int count = 0;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b, ++count) mean_distance += (t[a] - t[b]).norm();
  }
  mean_distance /= count;
  if (!(mean_distance > kMinSpread)) {
    throw Error(ErrorCode::kCollapseDetected, "recovered locations collapsed to a point");
  }
  for (auto& v : t) v /= mean_distance;
  solution.t = std::move(t);
  return solution;
}

double EssentialError(const Mat3& a, const Mat3& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroMatrix, "essential error of a zero matrix");
  const Mat3 ua = a / na, ub = b / nb;
  return 100.0 * std::min((ua - ub).norm(), (ua + ub).norm());
}

std::vector<double> LocationError(const std::vector<Vec3>& estimate,
                                  const std::vector<Vec3>& reference) {
  if (estimate.size() != reference.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "location lists differ in length");
  }
  if (estimate.size() < 3) throw Error(ErrorCode::kInvalidArgument, "alignment needs n >= 3");
  const MatX src = ToMatrix(estimate), dst = ToMatrix(reference);
  const auto spread = [](const MatX& m) {
    return (m.colwise() - m.rowwise().mean()).norm();
  };
  if (spread(src) < kMinSpread || spread(dst) < kMinSpread) {
    throw Error(ErrorCode::kDegenerateAlignment, "point set has no spread");
  }
  const Eigen::Matrix4d similarity = Eigen::umeyama(src, dst, true);
  std::vector<double> errors(estimate.size());
  for (size_t k = 0; k < estimate.size(); ++k) {
    const Vec3 mapped = similarity.topLeftCorner<3, 3>() * estimate[k] + similarity.topRightCorner<3, 1>();
    errors[k] = (mapped - reference[k]).norm();
  }
  return errors;
}

MethodComparison CompareMethods(const std::vector<double>& ours,
                                const std::vector<double>& other) {
  if (ours.size() != other.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "paired trial lists differ in length");
  }
  MethodComparison result;
  if (ours.empty()) return result;
  double ratio_sum = 0.0;
  int ratio_count = 0, improved = 0;
  for (size_t k = 0; k < ours.size(); ++k) {
    if (ours[k] < other[k]) ++improved;
    if (other[k] == 0.0) {
      if (ours[k] > 0.0) {
        ++result.zero_baseline_trials;
        continue;
      }
      ++ratio_count;  // both exact: no change
      continue;
    }
    ratio_sum += (other[k] - ours[k]) / other[k];
    ++ratio_count;
  }
  result.relative_improvement = ratio_count > 0 ? ratio_sum / ratio_count : 0.0;
  result.improved_fraction = static_cast<double>(improved) / static_cast<double>(ours.size());
  return result;
}

}  // namespace fundrank
