#pragma once

#include "fundrank/geometry.hpp"
#include "fundrank/multiview_block.hpp"
#include "fundrank/consistency_solver.hpp"
#include "fundrank/random.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fundrank {

enum class Layout { kSphere, kRing, kCollinear };
enum class IntrinsicsModel { kIdentity, kRandom };

const char* ToString(Layout layout);
Layout ParseLayout(const std::string& name);

struct SceneConfig {
  int n_cameras = 10;
  int n_points = 50;
  Layout layout = Layout::kSphere;
  IntrinsicsModel intrinsics = IntrinsicsModel::kIdentity;
  double noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  double missing_fraction = 0.0;
  double scale_jitter_min = 0.2;  // log-uniform range of injected scales
  double scale_jitter_max = 5.0;
  std::uint64_t seed = 0;

  // Throws kInvalidArgument naming the offending field.
  void Validate() const;
};

struct Scene {
  std::vector<CameraPose> poses;
  std::vector<Vec3> points;
};

struct CorruptionReport {
  std::vector<std::pair<int, int>> outlier_pairs;
  std::vector<std::pair<int, int>> missing_pairs;
  // Noise-free surviving blocks satisfy F_hat_ij = true_scales(i, j) * F_true_ij.
  ScaleMatrix true_scales;
};

struct CorruptedMeasurements {
  MultiviewBlockMatrix measured;
  CorruptionReport report;
};

// Deterministic in config.seed. Throws kGeometryRetryExhausted when a valid
// configuration (all points in front of all cameras, layout certified) is not
// found in 100 draws.
Scene GenerateScene(const SceneConfig& config);

// Scales surviving blocks by log-uniform factors, adds relative entrywise noise,
// renormalizes to unit Frobenius norm, replaces outlier blocks with random
// unit-norm rank-2 matrices and drops missing pairs symmetrically.
CorruptedMeasurements Corrupt(const MultiviewBlockMatrix& truth, const SceneConfig& config);

struct Correspondence {
  Vec3 first;   // homogeneous point in image i
  Vec3 second;  // homogeneous point in image j
};

// Normalized 8-point estimate of F with first^T F second = 0, unit Frobenius
// norm and rank 2. Throws kDegenerateConfiguration when the design matrix has
// rank below 8.
Mat3 EightPoint(const std::vector<Correspondence>& correspondences);

struct NormalizedFrames {
  std::vector<std::vector<Vec3>> points;
  std::vector<Mat3> transforms;  // normalized = T * original
};

// Per image: centroid to the origin, then isotropic scaling so the largest
// coordinate magnitude is 1. A fundamental estimated in the normalized frames
// maps back as F = T_i^T F_norm T_j.
NormalizedFrames NormalizeImageFrames(const std::vector<std::vector<Vec3>>& images);

// Noisy projections of every scene point into camera i and j.
std::vector<Correspondence> ObserveCorrespondences(const Scene& scene, int i, int j,
                                                   double noise_sigma, Rng& rng);

}  // namespace fundrank
