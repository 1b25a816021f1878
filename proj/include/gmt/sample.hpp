#pragma once

#include <string>
#include <vector>

#include "gmt/pointscene.hpp"
#include "gmt/trajectory.hpp"

namespace gmt {

/// One training record: trajectory, scene context, goal and description.
struct TrajectorySample {
  Trajectory trajectory;
  std::string category;
  Vec3 object_size{0.1, 0.1, 0.1};
  std::string description;
  SceneContext scene;
  Pose9 goal;
};

/// Frame indices of the history/future partition over valid frames:
/// the first ceil(ratio * T_valid) valid frames are observed history, the
/// rest are the prediction target.
struct HistorySplit {
  std::vector<int> history;
  std::vector<int> future;
  int last_valid = -1;
};

inline HistorySplit history_split(const Trajectory& trajectory, double ratio) {
  HistorySplit out;
  std::vector<int> valid;
  for (int t = 0; t < trajectory.length(); ++t) {
    if (trajectory.mask(t)) valid.push_back(t);
  }
  if (valid.empty()) return out;
  out.last_valid = valid.back();
  const auto h = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(valid.size())));
  out.history.assign(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(h));
  out.future.assign(valid.begin() + static_cast<std::ptrdiff_t>(h), valid.end());
  return out;
}

}  // namespace gmt
