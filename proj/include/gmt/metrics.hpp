#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gmt/pointscene.hpp"
#include "gmt/trajectory.hpp"

namespace gmt {

/// Aggregate evaluation results mirroring the report columns
/// (ADE, FDE, FD, AC, CR).
struct MetricReport {
  double ade = 0.0;
  double fde = 0.0;
  double frechet = 0.0;
  double angular_consistency = 0.0;
  double collision_rate = 0.0;
  int n_samples = 0;
};

/// Mean L2 position error over valid future frames.
double ade(const Eigen::MatrixXd& pred_positions, const Eigen::MatrixXd& gt_positions,
           const BoolArray& future_mask);

/// L2 position error at the last valid frame.
double fde(const Eigen::MatrixXd& pred_positions, const Eigen::MatrixXd& gt_positions,
           int last_valid_index);

/// Discrete Fréchet distance between two position sequences via the coupled
/// dynamic program d(i,j) = max(|P_i - Q_j|, min(d(i-1,j), d(i,j-1), d(i-1,j-1))).
double frechet_distance(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

/// Mean cosine similarity between per-step direction vectors of the two
/// sequences over consecutive valid future frames. Steps where either
/// direction is shorter than 1e-6 m are skipped; throws NoMotion when every
/// step is skipped.
double angular_consistency(const Eigen::MatrixXd& pred_positions,
                           const Eigen::MatrixXd& gt_positions,
                           const BoolArray& future_mask);

/// One predicted trajectory with everything the collision check needs.
struct PredictedTrajectory {
  Eigen::MatrixXd poses;  // T x 9
  BoolArray future_mask;  // frames whose boxes are checked
  Vec3 object_size;
  const FixtureSet* fixtures = nullptr;
};

/// True iff any checked frame's oriented object box intersects a fixture.
bool trajectory_collides(const PredictedTrajectory& pred);

/// Fraction of trajectories that collide with their static fixtures.
double collision_rate(const std::vector<PredictedTrajectory>& preds);

}  // namespace gmt
