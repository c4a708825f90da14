#include "fundrank/scene_synth.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fundrank {

namespace {

constexpr int kMaxGeometryDraws = 100;
constexpr double kCameraDistance = 10.0;
constexpr double kPointRadius = 3.0;
constexpr double kMinPointDepth = 1.0;
constexpr double kMinCameraSeparation = 0.5;
constexpr double kDesignRankTolerance = 1e-10;

Vec3 RandomUnitVector(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(normal(rng), normal(rng), normal(rng));
  } while (v.norm() < 1e-8);
  return v.normalized();
}

Vec3 AnyPerpendicular(const Vec3& d, Rng& rng) {
  Vec3 v;
  do {
    v = RandomUnitVector(rng);
    v -= v.dot(d) * d;
  } while (v.norm() < 1e-3);
  return v.normalized();
}

// Columns are the camera axes in world coordinates; the optical axis points at
// `target` with a random roll.
Mat3 LookAt(const Vec3& center, const Vec3& target, Rng& rng) {
  const Vec3 z = (target - center).normalized();
  const Vec3 x = AnyPerpendicular(z, rng);
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

Mat3 RandomIntrinsics(Rng& rng) {
  std::uniform_real_distribution<double> focal(400.0, 800.0);
  std::uniform_real_distribution<double> aspect(0.95, 1.05);
  std::uniform_real_distribution<double> u0(300.0, 340.0);
  std::uniform_real_distribution<double> v0(220.0, 260.0);
  const double fx = focal(rng);
  Mat3 k;
  k << fx, 0.0, u0(rng),
      0.0, fx * aspect(rng), v0(rng),
      0.0, 0.0, 1.0;
  return k;
}

std::vector<Vec3> DrawCenters(const SceneConfig& config, Rng& rng) {
  std::vector<Vec3> centers(config.n_cameras);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (config.layout) {
    case Layout::kSphere:
      for (auto& c : centers) c = kCameraDistance * (0.8 + 0.4 * unit(rng)) * RandomUnitVector(rng);
      break;
    case Layout::kRing: {
      const Vec3 axis = RandomUnitVector(rng);
      const Vec3 e1 = AnyPerpendicular(axis, rng);
      const Vec3 e2 = axis.cross(e1);
      // One jittered angle per equal sector keeps neighbors apart for any n.
      const double sector = 2.0 * M_PI / config.n_cameras;
      for (int k = 0; k < config.n_cameras; ++k) {
        const double angle = sector * (k + 0.25 + 0.5 * unit(rng));
        centers[k] = kCameraDistance * (std::cos(angle) * e1 + std::sin(angle) * e2);
      }
      std::shuffle(centers.begin(), centers.end(), rng);
      break;
    }
    case Layout::kCollinear: {
      const Vec3 direction = RandomUnitVector(rng);
      const Vec3 offset = kCameraDistance * AnyPerpendicular(direction, rng);
      // Stratified positions on a segment that grows with n.
      const double half_length = std::max(5.0, 0.75 * config.n_cameras);
      const double cell = 2.0 * half_length / config.n_cameras;
      for (int k = 0; k < config.n_cameras; ++k) {
        const double s = -half_length + cell * (k + 0.25 + 0.5 * unit(rng));
        centers[k] = offset + s * direction;
      }
      std::shuffle(centers.begin(), centers.end(), rng);
      break;
    }
  }
  return centers;
}

bool WellSeparated(const std::vector<Vec3>& centers) {
  for (size_t a = 0; a < centers.size(); ++a) {
    for (size_t b = a + 1; b < centers.size(); ++b) {
      if ((centers[a] - centers[b]).norm() < kMinCameraSeparation) return false;
    }
  }
  return true;
}

bool AllVisible(const std::vector<CameraPose>& poses, const std::vector<Vec3>& points) {
  for (const auto& pose : poses) {
    for (const auto& p : points) {
      if ((pose.R().transpose() * (p - pose.t())).z() < kMinPointDepth) return false;
    }
  }
  return true;
}

Mat3 RandomRank2UnitBlock(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat3 m;
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = normal(rng);
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = svd.singularValues();
  s(2) = 0.0;
  const Mat3 rank2 = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  return rank2 / rank2.norm();
}

}  // namespace

const char* ToString(Layout layout) {
  switch (layout) {
    case Layout::kSphere: return "sphere";
    case Layout::kRing: return "ring";
    case Layout::kCollinear: return "collinear";
  }
  return "unknown";
}

Layout ParseLayout(const std::string& name) {
  if (name == "sphere") return Layout::kSphere;
  if (name == "ring") return Layout::kRing;
  if (name == "collinear") return Layout::kCollinear;
  throw Error(ErrorCode::kInvalidArgument, "layout must be sphere, ring or collinear, got '" + name + "'");
}

void SceneConfig::Validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw Error(ErrorCode::kInvalidArgument, std::string(field) + " " + why);
  };
  auto fraction = [&](const char* field, double v) {
    if (!(v >= 0.0 && v <= 1.0)) fail(field, "must lie in [0, 1], got " + std::to_string(v));
  };
  if (n_cameras < 2) fail("n_cameras", "must be >= 2");
  if (n_points < 0) fail("n_points", "must be >= 0");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma", "must be >= 0");
  fraction("outlier_fraction", outlier_fraction);
  fraction("missing_fraction", missing_fraction);
  if (outlier_fraction + missing_fraction > 1.0) {
    fail("outlier_fraction", "plus missing_fraction must not exceed 1");
  }
  if (!(scale_jitter_min > 0.0) || !(scale_jitter_max >= scale_jitter_min)) {
    fail("scale_jitter", "range must satisfy 0 < min <= max");
  }
}

Scene GenerateScene(const SceneConfig& config) {
  config.Validate();
  Rng rng = MakeRng(config.seed, SeedStream::kGeometry);
  for (int draw = 0; draw < kMaxGeometryDraws; ++draw) {
    const std::vector<Vec3> centers = DrawCenters(config, rng);
    if (!WellSeparated(centers)) continue;
    if (config.layout != Layout::kCollinear && centers.size() > 2 && IsCollinear(centers)) continue;

    Scene scene;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int p = 0; p < config.n_points; ++p) {
      scene.points.push_back(kPointRadius * std::cbrt(unit(rng)) * RandomUnitVector(rng));
    }
    for (const auto& c : centers) {
      const Vec3 target = 0.5 * RandomUnitVector(rng);
      const Mat3 k = config.intrinsics == IntrinsicsModel::kRandom ? RandomIntrinsics(rng)
                                                                   : Mat3::Identity();
      scene.poses.emplace_back(LookAt(c, target, rng), c, k);
    }
    if (AllVisible(scene.poses, scene.points)) return scene;
  }
  throw Error(ErrorCode::kGeometryRetryExhausted,
              "no valid scene after " + std::to_string(kMaxGeometryDraws) + " draws");
}

CorruptedMeasurements Corrupt(const MultiviewBlockMatrix& truth, const SceneConfig& config) {
  config.Validate();
  Rng rng = MakeRng(config.seed, SeedStream::kCorruption);
  const int n = truth.n();
  std::vector<std::pair<int, int>> pairs = truth.Pairs();
  const auto count = [&](double fraction) {
    return static_cast<size_t>(std::llround(fraction * static_cast<double>(pairs.size())));
  };
  const size_t missing = count(config.missing_fraction);
  const size_t outliers = std::min(count(config.outlier_fraction), pairs.size() - missing);

  std::vector<size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  CorruptedMeasurements out{MultiviewBlockMatrix(n), {{}, {}, ScaleMatrix(n)}};
  std::vector<int> role(pairs.size(), 0);  // 0 inlier, 1 missing, 2 outlier
  for (size_t k = 0; k < missing; ++k) role[order[k]] = 1;
  for (size_t k = missing; k < missing + outliers; ++k) role[order[k]] = 2;

  MatX data = MatX::Zero(3 * n, 3 * n);
  Mask mask = Mask::Constant(n, n, false);
  std::uniform_real_distribution<double> log_scale(std::log(config.scale_jitter_min),
                                                   std::log(config.scale_jitter_max));
  std::normal_distribution<double> normal(0.0, 1.0);

  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    Mat3 block;
    if (role[k] == 1) {
      out.report.missing_pairs.push_back(pairs[k]);
      continue;
    }
    if (role[k] == 2) {
      out.report.outlier_pairs.push_back(pairs[k]);
      block = RandomRank2UnitBlock(rng);
    } else {
      const double lambda = std::exp(log_scale(rng));
      block = lambda * truth.Block(i, j);
      const double entry_sigma = config.noise_sigma * block.norm() / 3.0;
      for (int e = 0; e < 9; ++e) block(e / 3, e % 3) += entry_sigma * normal(rng);
      const double norm = block.norm();
      if (norm == 0.0) {
        throw Error(ErrorCode::kZeroMatrix, "true block is zero; cameras coincide");
      }
      block /= norm;
      out.report.true_scales.Set(i, j, lambda / norm);
    }
    data.block<3, 3>(3 * i, 3 * j) = block;
    data.block<3, 3>(3 * j, 3 * i) = block.transpose();
    mask(i, j) = mask(j, i) = true;
  }
  out.measured = MultiviewBlockMatrix(std::move(data), std::move(mask));
  return out;
}

NormalizedFrames NormalizeImageFrames(const std::vector<std::vector<Vec3>>& images) {
  NormalizedFrames out;
  for (const auto& image : images) {
    if (image.empty()) throw Error(ErrorCode::kInvalidArgument, "image without points");
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : image) centroid += p.hnormalized();
    centroid /= static_cast<double>(image.size());
    double extent = 0.0;
    for (const auto& p : image) {
      extent = std::max(extent, (p.hnormalized() - centroid).cwiseAbs().maxCoeff());
    }
    const double s = extent > 0.0 ? 1.0 / extent : 1.0;
    Mat3 t;
    t << s, 0.0, -s * centroid.x(),
        0.0, s, -s * centroid.y(),
        0.0, 0.0, 1.0;
    std::vector<Vec3> normalized;
    normalized.reserve(image.size());
    for (const auto& p : image) normalized.push_back(t * (p / p.z()));
    out.points.push_back(std::move(normalized));
    out.transforms.push_back(t);
  }
  return out;
}

Mat3 EightPoint(const std::vector<Correspondence>& correspondences) {
  if (correspondences.size() < 8) {
    throw Error(ErrorCode::kInvalidArgument, "eight-point needs at least 8 correspondences");
  }
  std::vector<Vec3> first, second;
  for (const auto& c : correspondences) {
    first.push_back(c.first);
    second.push_back(c.second);
  }
  const NormalizedFrames frames = NormalizeImageFrames({first, second});

  Eigen::Matrix<double, Eigen::Dynamic, 9> design(correspondences.size(), 9);
  for (size_t r = 0; r < correspondences.size(); ++r) {
    const Vec3& a = frames.points[0][r];
    const Vec3& b = frames.points[1][r];
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) design(r, 3 * row + col) = a(row) * b(col);
    }
  }
  Eigen::JacobiSVD<MatX> svd(design, Eigen::ComputeFullV);
  const VecX& s = svd.singularValues();
  if (s.size() < 8 || s(7) < kDesignRankTolerance * s(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "design matrix has rank below 8");
  }
  const Eigen::Matrix<double, 9, 1> f = svd.matrixV().col(8);
  Mat3 normalized_f;
  for (int k = 0; k < 9; ++k) normalized_f(k / 3, k % 3) = f(k);
  const Mat3 rank2 = Svp(normalized_f, 2);
  const Mat3 denormalized = frames.transforms[0].transpose() * rank2 * frames.transforms[1];
  return denormalized / denormalized.norm();
}

std::vector<Correspondence> ObserveCorrespondences(const Scene& scene, int i, int j,
                                                   double noise_sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Correspondence> out;
  out.reserve(scene.points.size());
  // Noise is drawn in normalized camera coordinates and mapped through K.
  const auto jitter = [&](Vec3 p, const Mat3& k) {
    if (noise_sigma > 0.0) {
      const Eigen::Vector2d delta(noise_sigma * normal(rng), noise_sigma * normal(rng));
      p.head<2>() += k.topLeftCorner<2, 2>() * delta;
    }
    return p;
  };
  const CameraPose& a = scene.poses[i];
  const CameraPose& b = scene.poses[j];
  for (const auto& point : scene.points) {
    out.push_back({jitter(Project(a, point), a.K()), jitter(Project(b, point), b.K())});
  }
  return out;
}

}  // namespace fundrank
