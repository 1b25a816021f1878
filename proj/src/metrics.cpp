#include "gmt/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace gmt {

namespace {

std::vector<int> mask_indices(const BoolArray& mask) {
  std::vector<int> idx;
  for (Eigen::Index t = 0; t < mask.size(); ++t) {
    if (mask(t)) idx.push_back(static_cast<int>(t));
  }
  return idx;
}

}  // namespace

double ade(const Eigen::MatrixXd& pred_positions, const Eigen::MatrixXd& gt_positions,
           const BoolArray& future_mask) {
  const std::vector<int> idx = mask_indices(future_mask);
  if (idx.empty()) throw EmptyFuture("ade: no valid future frames");
  double sum = 0.0;
  for (int t : idx) sum += (pred_positions.row(t) - gt_positions.row(t)).norm();
  return sum / static_cast<double>(idx.size());
}

double fde(const Eigen::MatrixXd& pred_positions, const Eigen::MatrixXd& gt_positions,
           int last_valid_index) {
  if (last_valid_index < 0 || last_valid_index >= pred_positions.rows()) {
    throw UsageError("fde: last_valid_index out of range");
  }
  return (pred_positions.row(last_valid_index) - gt_positions.row(last_valid_index)).norm();
}

double frechet_distance(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  const Eigen::Index n = p.rows(), m = q.rows();
  if (n == 0 || m == 0) throw EmptySequence("frechet_distance: empty sequence");
  Eigen::MatrixXd d(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double dist = (p.row(i) - q.row(j)).norm();
      if (i == 0 && j == 0) {
        d(i, j) = dist;
      } else if (i == 0) {
        d(i, j) = std::max(d(i, j - 1), dist);
      } else if (j == 0) {
        d(i, j) = std::max(d(i - 1, j), dist);
      } else {
        d(i, j) = std::max(std::min({d(i - 1, j), d(i, j - 1), d(i - 1, j - 1)}), dist);
      }
    }
  }
  return d(n - 1, m - 1);
}

double angular_consistency(const Eigen::MatrixXd& pred_positions,
                           const Eigen::MatrixXd& gt_positions,
                           const BoolArray& future_mask) {
  const std::vector<int> idx = mask_indices(future_mask);
  if (idx.size() < 2) throw EmptyFuture("angular_consistency: needs >= 2 future frames");
  double sum = 0.0;
  int count = 0;
  for (std::size_t j = 0; j + 1 < idx.size(); ++j) {
    const Eigen::RowVector3d vp =
        pred_positions.row(idx[j + 1]).head<3>() - pred_positions.row(idx[j]).head<3>();
    const Eigen::RowVector3d vg =
        gt_positions.row(idx[j + 1]).head<3>() - gt_positions.row(idx[j]).head<3>();
    const double np = vp.norm(), ng = vg.norm();
    if (np < 1e-6 || ng < 1e-6) continue;  // undefined direction for static steps
    sum += vp.dot(vg) / (np * ng);
    ++count;
  }
  if (count == 0) throw NoMotion("angular_consistency: every step is near-static");
  return sum / static_cast<double>(count);
}

bool trajectory_collides(const PredictedTrajectory& pred) {
  if (!pred.fixtures || pred.fixtures->empty()) return false;
  for (Eigen::Index t = 0; t < pred.future_mask.size(); ++t) {
    if (!pred.future_mask(t)) continue;
    OrientedBox box;
    box.center = pred.poses.row(t).head<3>().transpose();
    box.size = pred.object_size;
    try {
      box.rotation = Rot6D::from_coeffs(pred.poses.row(t).tail<6>().transpose());
      rot6d_to_matrix(box.rotation);
    } catch (const DegenerateRotation&) {
      // Untrained outputs can be degenerate; score them with an unrotated box.
      box.rotation = Rot6D::identity();
    }
    for (const Fixture& f : pred.fixtures->entries) {
      if (obb_intersect(box, f.box)) return true;
    }
  }
  return false;
}

double collision_rate(const std::vector<PredictedTrajectory>& preds) {
  if (preds.empty()) return 0.0;
  int hits = 0;
  for (const PredictedTrajectory& p : preds) hits += trajectory_collides(p) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace gmt
