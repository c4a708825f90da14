#pragma once

#include "fundrank/types.hpp"

namespace fundrank {

// A calibrated or uncalibrated pinhole camera in the global frame.
//
// R maps global directions into the camera frame via R^T, i.e. a world point
// P is seen at K R^T (P - t). Construction validates R (re-orthonormalizing
// small drift) and K (upper triangular, positive diagonal, K(2,2) == 1).
class CameraPose {
 public:
  static constexpr double kRotationTolerance = 1e-9;

  CameraPose() = default;
  CameraPose(const Mat3& rotation, const Vec3& center, const Mat3& intrinsics = Mat3::Identity());

  const Mat3& R() const { return rotation_; }
  const Vec3& t() const { return center_; }
  const Mat3& K() const { return intrinsics_; }
  const Mat3& KInverse() const { return intrinsics_inverse_; }

  // 3x4 camera matrix K R^T [I, -t].
  Eigen::Matrix<double, 3, 4> CameraMatrix() const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 center_ = Vec3::Zero();
  Mat3 intrinsics_ = Mat3::Identity();
  Mat3 intrinsics_inverse_ = Mat3::Identity();
};

struct RelativePose {
  Mat3 R_rel;
  Vec3 t_rel;
};

// [v]_x, so that Skew(v) * w == v.cross(w).
Mat3 Skew(const Vec3& v);

// Nearest rotation in Frobenius norm (polar factor with det +1).
Mat3 ProjectToRotation(const Mat3& m);

// R_ab = R_a^T R_b, t_ab = R_a^T (t_a - t_b).
RelativePose ComputeRelativePose(const CameraPose& a, const CameraPose& b);

// E_ab = R_a^T (T_a - T_b) R_b with T = [t]_x.
Mat3 EssentialGlobal(const CameraPose& a, const CameraPose& b);

// F_ab = K_a^{-T} E_ab K_b^{-1}.
Mat3 FundamentalGlobal(const CameraPose& a, const CameraPose& b);

// Homogeneous image point (third coordinate 1). Throws kZeroDepth when the
// point lies on the principal plane.
Vec3 Project(const CameraPose& pose, const Vec3& point);

}  // namespace fundrank
