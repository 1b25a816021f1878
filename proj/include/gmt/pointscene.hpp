#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmt/geometry.hpp"
#include "gmt/trajectory.hpp"

namespace gmt {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct PointCloud {
  Points points;            // N x 3, meters
  Eigen::MatrixXd features; // N x C, empty when the cloud carries none

  Eigen::Index size() const { return points.rows(); }
  bool has_features() const { return features.size() > 0; }
};

struct Fixture {
  std::string label;
  OrientedBox box;
};

/// Semantic fixture set B = {(label_k, box_k)}.
struct FixtureSet {
  std::vector<Fixture> entries;

  int size() const { return static_cast<int>(entries.size()); }
  bool empty() const { return entries.empty(); }
};

/// Scene context: point cloud plus semantic fixtures.
struct SceneContext {
  PointCloud cloud;
  FixtureSet fixtures;
};

/// Keeps exactly the scene points within `radius` of at least one valid
/// trajectory position, original order preserved. Features rows follow their
/// points. Throws EmptyRegion when nothing qualifies.
PointCloud extract_local_cloud(const PointCloud& scene, const Trajectory& trajectory,
                               double radius);

/// Greedy farthest-point sampling. The start index is seed % N; every later
/// pick maximizes the minimum distance to the chosen set, ties broken by the
/// lowest index. Throws BadCount unless 1 <= m <= N.
std::vector<int> farthest_point_sampling(const PointCloud& cloud, int m,
                                         std::uint64_t seed);

/// Per center: indices of cloud points within `radius`, ascending by distance
/// (ties by index), truncated to max_k. Groups may be empty.
std::vector<std::vector<int>> ball_query(const PointCloud& cloud,
                                         const Points& centers, double radius,
                                         int max_k);

/// Inverse-squared-distance interpolation over the k nearest neighbors:
/// sum(w_i f_i) / sum(w_i) with w_i = 1 / |query - p_i|^2. Queries within
/// 1e-8 of a point snap to that point's feature exactly. k is clamped to N.
Eigen::VectorXd propagate_features(const PointCloud& cloud, const Vec3& query,
                                   int k);

/// Retains up to K fixtures with the smallest min-distance from box center to
/// any valid trajectory position, ties broken by original index. The result
/// preserves the original relative order of the survivors.
FixtureSet nearest_fixtures(const FixtureSet& fixtures, const Trajectory& trajectory,
                            int K);

/// Fixed-budget shape normalization: seeded random subsample (original order
/// kept) when larger, resample-with-replacement appended when smaller,
/// identity at exactly `budget` points.
PointCloud resample_to_budget(const PointCloud& cloud, int budget,
                              std::uint64_t seed);

}  // namespace gmt
