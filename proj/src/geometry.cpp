#include "fundrank/geometry.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>

namespace fundrank {

namespace {

constexpr double kMinDepth = 1e-12;

void ValidateIntrinsics(const Mat3& k) {
  if (k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "intrinsics must be upper triangular");
  }
  if (!(k(0, 0) > 0.0) || !(k(1, 1) > 0.0) || k(2, 2) != 1.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "intrinsics need a positive diagonal with K(2,2) == 1");
  }
}

}  // namespace

CameraPose::CameraPose(const Mat3& rotation, const Vec3& center, const Mat3& intrinsics)
    : center_(center), intrinsics_(intrinsics) {
  if (!rotation.allFinite() || !center.allFinite() || !intrinsics.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "camera parameters must be finite");
  }
  const double drift = (rotation.transpose() * rotation - Mat3::Identity()).norm();
  if (drift > kRotationTolerance || rotation.determinant() <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "R is not a rotation matrix");
  }
  // Roundoff-level drift is kept as is so stored rotations reload bit-exactly.
  rotation_ = drift <= 1e-14 ? rotation : ProjectToRotation(rotation);
  ValidateIntrinsics(intrinsics_);
  // Upper-triangular inverse in closed form keeps the zero pattern exact.
  const double fx = intrinsics_(0, 0), s = intrinsics_(0, 1), u0 = intrinsics_(0, 2);
  const double fy = intrinsics_(1, 1), v0 = intrinsics_(1, 2);
  intrinsics_inverse_ << 1.0 / fx, -s / (fx * fy), (s * v0 - u0 * fy) / (fx * fy),
      0.0, 1.0 / fy, -v0 / fy,
      0.0, 0.0, 1.0;
}

Eigen::Matrix<double, 3, 4> CameraPose::CameraMatrix() const {
  Eigen::Matrix<double, 3, 4> extrinsic;
  extrinsic.leftCols<3>() = Mat3::Identity();
  extrinsic.col(3) = -center_;
  return intrinsics_ * rotation_.transpose() * extrinsic;
}

Mat3 Skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
      v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Mat3 ProjectToRotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

RelativePose ComputeRelativePose(const CameraPose& a, const CameraPose& b) {
  return {a.R().transpose() * b.R(), a.R().transpose() * (a.t() - b.t())};
}

Mat3 EssentialGlobal(const CameraPose& a, const CameraPose& b) {
  return a.R().transpose() * (Skew(a.t()) - Skew(b.t())) * b.R();
}

Mat3 FundamentalGlobal(const CameraPose& a, const CameraPose& b) {
  return a.KInverse().transpose() * EssentialGlobal(a, b) * b.KInverse();
}

Vec3 Project(const CameraPose& pose, const Vec3& point) {
  const Vec3 camera_point = pose.K() * pose.R().transpose() * (point - pose.t());
  if (std::abs(camera_point.z()) < kMinDepth) {
    throw Error(ErrorCode::kZeroDepth, "point lies on the principal plane");
  }
  return camera_point / camera_point.z();
}

}  // namespace fundrank
