#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>

namespace fundrank {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

enum class ErrorCode {
  kInvalidArgument,
  kZeroDepth,
  kIndexOutOfRange,
  kAsymmetricPair,
  kDimensionMismatch,
  kGeometryRetryExhausted,
  kDegenerateConfiguration,
  kVanishingSkewPart,
  kDisconnectedGraph,
  kCollapseDetected,
  kZeroMatrix,
  kDegenerateAlignment,
  kParse,
  kIo,
};

const char* ToString(ErrorCode code);

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ToString(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fundrank
