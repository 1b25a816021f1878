#include "gmt/pointscene.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace gmt {

namespace {

std::vector<int> valid_frames(const Trajectory& trajectory) {
  std::vector<int> out;
  for (int t = 0; t < trajectory.length(); ++t) {
    if (trajectory.mask(t)) out.push_back(t);
  }
  return out;
}

}  // namespace

PointCloud extract_local_cloud(const PointCloud& scene, const Trajectory& trajectory,
                               double radius) {
  if (radius <= 0.0) throw BadCount("extract_local_cloud: radius must be > 0");
  const std::vector<int> frames = valid_frames(trajectory);
  if (frames.empty()) throw EmptyRegion("extract_local_cloud: no valid frames");

  const double r2 = radius * radius;
  std::vector<int> keep;
  keep.reserve(scene.size());
  for (Eigen::Index i = 0; i < scene.size(); ++i) {
    const Vec3 p = scene.points.row(i).transpose();
    for (int t : frames) {
      if ((p - trajectory.position_at(t)).squaredNorm() <= r2) {
        keep.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  if (keep.empty()) throw EmptyRegion("extract_local_cloud: no points in range");

  PointCloud out;
  out.points.resize(static_cast<Eigen::Index>(keep.size()), 3);
  if (scene.has_features()) {
    out.features.resize(static_cast<Eigen::Index>(keep.size()), scene.features.cols());
  }
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.points.row(static_cast<Eigen::Index>(j)) = scene.points.row(keep[j]);
    if (scene.has_features()) {
      out.features.row(static_cast<Eigen::Index>(j)) = scene.features.row(keep[j]);
    }
  }
  return out;
}

std::vector<int> farthest_point_sampling(const PointCloud& cloud, int m,
                                         std::uint64_t seed) {
  const int n = static_cast<int>(cloud.size());
  if (m < 1 || m > n) throw BadCount("farthest_point_sampling: m out of range");

  std::vector<int> chosen;
  chosen.reserve(m);
  const int start = static_cast<int>(seed % static_cast<std::uint64_t>(n));
  chosen.push_back(start);

  Eigen::VectorXd min_d2 =
      (cloud.points.rowwise() - cloud.points.row(start)).rowwise().squaredNorm();
  for (int k = 1; k < m; ++k) {
    int best = 0;
    double best_d2 = -1.0;
    for (int i = 0; i < n; ++i) {
      if (min_d2(i) > best_d2) {
        best_d2 = min_d2(i);
        best = i;
      }
    }
    chosen.push_back(best);
    const Eigen::VectorXd d2 =
        (cloud.points.rowwise() - cloud.points.row(best)).rowwise().squaredNorm();
    min_d2 = min_d2.cwiseMin(d2);
  }
  return chosen;
}

std::vector<std::vector<int>> ball_query(const PointCloud& cloud,
                                         const Points& centers, double radius,
                                         int max_k) {
  if (radius <= 0.0) throw BadCount("ball_query: radius must be > 0");
  if (max_k < 1) throw BadCount("ball_query: max_k must be >= 1");

  const double r2 = radius * radius;
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(centers.rows()));
  std::vector<std::pair<double, int>> near;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    near.clear();
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
      const double d2 = (cloud.points.row(i) - centers.row(c)).squaredNorm();
      if (d2 <= r2) near.emplace_back(d2, static_cast<int>(i));
    }
    std::sort(near.begin(), near.end());
    const std::size_t k = std::min<std::size_t>(near.size(), static_cast<std::size_t>(max_k));
    auto& g = groups[static_cast<std::size_t>(c)];
    g.reserve(k);
    for (std::size_t j = 0; j < k; ++j) g.push_back(near[j].second);
  }
  return groups;
}

Eigen::VectorXd propagate_features(const PointCloud& cloud, const Vec3& query, int k) {
  if (!cloud.has_features()) {
    throw MissingFeatures("propagate_features: cloud has no feature matrix");
  }
  if (k < 1) throw BadCount("propagate_features: k must be >= 1");
  const int n = static_cast<int>(cloud.size());
  const int kk = std::min(k, n);

  std::vector<std::pair<double, int>> d2(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    d2[static_cast<std::size_t>(i)] = {(cloud.points.row(i).transpose() - query).squaredNorm(), i};
  }
  std::partial_sort(d2.begin(), d2.begin() + kk, d2.end());

  // Snap rule: inverse-squared-distance weights diverge at the data points.
  if (d2[0].first < 1e-16) return cloud.features.row(d2[0].second).transpose();

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(cloud.features.cols());
  double wsum = 0.0;
  for (int j = 0; j < kk; ++j) {
    const double w = 1.0 / d2[static_cast<std::size_t>(j)].first;
    acc += w * cloud.features.row(d2[static_cast<std::size_t>(j)].second).transpose();
    wsum += w;
  }
  return acc / wsum;
}

FixtureSet nearest_fixtures(const FixtureSet& fixtures, const Trajectory& trajectory,
                            int K) {
  if (K < 1) throw BadCount("nearest_fixtures: K must be >= 1");
  const int m = fixtures.size();
  if (m <= K) return fixtures;

  const std::vector<int> frames = valid_frames(trajectory);
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int t : frames) {
      best = std::min(best,
                      (fixtures.entries[static_cast<std::size_t>(i)].box.center -
                       trajectory.position_at(t))
                          .norm());
    }
    dist[static_cast<std::size_t>(i)] = {best, i};
  }
  std::sort(dist.begin(), dist.end());
  std::vector<int> keep;
  for (int j = 0; j < K; ++j) keep.push_back(dist[static_cast<std::size_t>(j)].second);
  std::sort(keep.begin(), keep.end());

  FixtureSet out;
  for (int idx : keep) out.entries.push_back(fixtures.entries[static_cast<std::size_t>(idx)]);
  return out;
}

PointCloud resample_to_budget(const PointCloud& cloud, int budget, std::uint64_t seed) {
  if (budget < 1) throw BadCount("resample_to_budget: budget must be >= 1");
  const int n = static_cast<int>(cloud.size());
  if (n == budget) return cloud;

  std::mt19937_64 rng(seed);
  std::vector<int> idx;
  if (n > budget) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < budget; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    idx.assign(perm.begin(), perm.begin() + budget);
    std::sort(idx.begin(), idx.end());
  } else {
    idx.resize(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int i = n; i < budget; ++i) idx.push_back(pick(rng));
  }

  PointCloud out;
  out.points.resize(budget, 3);
  if (cloud.has_features()) out.features.resize(budget, cloud.features.cols());
  for (int j = 0; j < budget; ++j) {
    out.points.row(j) = cloud.points.row(idx[static_cast<std::size_t>(j)]);
    if (cloud.has_features()) out.features.row(j) = cloud.features.row(idx[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace gmt
