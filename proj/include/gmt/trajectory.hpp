#pragma once

#include <Eigen/Dense>

#include "gmt/geometry.hpp"

namespace gmt {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Fixed-length pose sequence with a validity mask. Valid frames always form
/// a prefix (padding repeats the final pose with mask false).
struct Trajectory {
  Eigen::MatrixXd poses;  // T x 9, row t = Pose9 coefficients
  BoolArray mask;         // T, true where the frame carries data

  int length() const { return static_cast<int>(poses.rows()); }

  int valid_count() const {
    int n = 0;
    for (Eigen::Index t = 0; t < mask.size(); ++t) n += mask(t) ? 1 : 0;
    return n;
  }

  int last_valid() const {
    for (Eigen::Index t = mask.size() - 1; t >= 0; --t) {
      if (mask(t)) return static_cast<int>(t);
    }
    return -1;
  }

  Pose9 pose_at(int t) const { return Pose9::from_coeffs(poses.row(t)); }
  Vec3 position_at(int t) const { return poses.row(t).head<3>().transpose(); }
};

}  // namespace gmt
