#pragma once

#include "fundrank/types.hpp"

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace fundrank {

// Unit pairwise directions gamma_ij ~ (t_i - t_j) in the global frame. Stored
// once per unordered pair; the reverse orientation reads back negated.
class DirectionSet {
 public:
  void Set(int i, int j, const Vec3& direction);
  std::optional<Vec3> Get(int i, int j) const;
  size_t size() const { return entries_.size(); }
  // Keyed by (i, j) with i < j.
  const std::map<std::pair<int, int>, Vec3>& entries() const { return entries_; }

 private:
  std::map<std::pair<int, int>, Vec3> entries_;
};

struct LocationSolution {
  std::vector<Vec3> t;  // centered, mean pairwise distance 1
  bool converged = false;
  std::vector<double> residual_history;  // sum of per-pair residual norms per IRLS pass
};

struct LocationOptions {
  bool robust = true;
  double delta = 1e-3;  // IRLS floor on residual norms
  int max_irls = 50;
  int max_inner = 2000;
  double tol = 1e-10;
};

// Homogeneous points (x, y, 1) in calibrated coordinates of images i and j.
struct CalibratedMatch {
  Vec3 first;
  Vec3 second;
};

// Direction of t_i - t_j read from the skew part of R_i E_ij R_j^T. With matches
// the sign is chosen by cheirality vote; otherwise the first nonzero of
// (z, y, x) is made positive. Throws kVanishingSkewPart when the skew part is
// below 1e-10 ||E||.
Vec3 ExtractDirection(const Mat3& essential, const Mat3& R_i, const Mat3& R_j,
                      const std::vector<CalibratedMatch>& matches = {});

// Minimizes sum w_ij ||(t_i - t_j) - d_ij gamma_ij||^2 with d_ij >= 1, using
// IRLS weights 1 / max(delta, residual) when robust. Throws kDisconnectedGraph
// and kCollapseDetected.
LocationSolution RecoverLocations(const DirectionSet& directions, int n,
                                  const LocationOptions& options = {});

// 100 * min(||A - B||, ||A + B||) for the unit-norm versions of a and b.
double EssentialError(const Mat3& a, const Mat3& b);

// Per-camera distances after the best similarity transform (rotation,
// translation, positive scale, no reflection) from estimate onto reference.
std::vector<double> LocationError(const std::vector<Vec3>& estimate,
                                  const std::vector<Vec3>& reference);

struct MethodComparison {
  double relative_improvement = 0.0;  // mean of (other - ours) / other
  double improved_fraction = 0.0;     // share of trials with ours < other
  int zero_baseline_trials = 0;       // excluded from the ratio mean
};

MethodComparison CompareMethods(const std::vector<double>& ours,
                                const std::vector<double>& other);

}  // namespace fundrank
