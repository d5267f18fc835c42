#include "bevplan/scenario/types.hpp"

#include <algorithm>
#include <cmath>

namespace bevplan::scenario {

namespace {

geom::Pose2 sample_track(const std::vector<geom::Pose2>& poses, double t) {
  const double idx = t / kStepSeconds;
  const int lo = std::clamp(static_cast<int>(std::floor(idx)), 0,
                            static_cast<int>(poses.size()) - 1);
  const int hi = std::min(lo + 1, static_cast<int>(poses.size()) - 1);
  const double u = std::clamp(idx - lo, 0.0, 1.0);
  return geom::lerp_pose(poses[lo], poses[hi], u);
}

}  // namespace

geom::Pose2 AgentTrack::pose_at(double t) const {
  return sample_track(poses, t);
}

geom::OrientedBox AgentTrack::box_at(double t) const {
  return {pose_at(t), length, width};
}

bool Trajectory::finite() const {
  return std::all_of(waypoints.begin(), waypoints.end(), [](const geom::Pose2& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.theta);
  });
}

bool operator==(const EgoStatus& a, const EgoStatus& b) {
  return a.velocity == b.velocity && a.acceleration == b.acceleration &&
         a.yaw_rate == b.yaw_rate;
}

namespace {

bool pose_eq(const geom::Pose2& a, const geom::Pose2& b) {
  return a.x == b.x && a.y == b.y && a.theta == b.theta;
}

}  // namespace

bool operator==(const AgentTrack& a, const AgentTrack& b) {
  return a.agent_id == b.agent_id && a.length == b.length && a.width == b.width &&
         a.behavior == b.behavior && a.poses.size() == b.poses.size() &&
         std::equal(a.poses.begin(), a.poses.end(), b.poses.begin(), pose_eq);
}

bool operator==(const Trajectory& a, const Trajectory& b) {
  return a.waypoints.size() == b.waypoints.size() &&
         std::equal(a.waypoints.begin(), a.waypoints.end(), b.waypoints.begin(),
                    pose_eq);
}

bool operator==(const Scenario& a, const Scenario& b) {
  if (a.scenario_id != b.scenario_id || a.rng_seed != b.rng_seed ||
      !(a.ego_status == b.ego_status) || !(a.expert == b.expert) ||
      a.agents != b.agents) {
    return false;
  }
  if (a.route.points.size() != b.route.points.size() ||
      !std::equal(a.route.points.begin(), a.route.points.end(),
                  b.route.points.begin(),
                  [](const geom::Vec2& u, const geom::Vec2& v) {
                    return u.x == v.x && u.y == v.y;
                  })) {
    return false;
  }
  if (a.drivable.size() != b.drivable.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.drivable.size(); ++i) {
    const auto& pa = a.drivable[i].vertices;
    const auto& pb = b.drivable[i].vertices;
    if (pa.size() != pb.size() ||
        !std::equal(pa.begin(), pa.end(), pb.begin(),
                    [](const geom::Vec2& u, const geom::Vec2& v) {
                      return u.x == v.x && u.y == v.y;
                    })) {
      return false;
    }
  }
  return true;
}

geom::Pose2 ego_pose_at(const Trajectory& traj, double t) {
  // Implicit start pose at index -1.
  const double idx = t / kStepSeconds - 1.0;
  const int n = static_cast<int>(traj.waypoints.size());
  if (idx <= -1.0 || n == 0) {
    return {0.0, 0.0, 0.0};
  }
  const int lo = std::clamp(static_cast<int>(std::floor(idx)), -1, n - 1);
  const int hi = std::min(lo + 1, n - 1);
  const geom::Pose2 a = lo < 0 ? geom::Pose2{0.0, 0.0, 0.0} : traj.waypoints[lo];
  const geom::Pose2 b = traj.waypoints[hi];
  const double u = std::clamp(idx - lo, 0.0, 1.0);
  return geom::lerp_pose(a, b, u);
}

geom::OrientedBox ego_box_at(const Trajectory& traj, double t) {
  return {ego_pose_at(traj, t), kEgoLength, kEgoWidth};
}

}  // namespace bevplan::scenario
