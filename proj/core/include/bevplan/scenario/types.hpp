#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevplan/geometry.hpp"

namespace bevplan::scenario {

// Planning horizon: 4 s at 0.5 s steps. Agent tracks carry poses on the
// simulation grid t = 0, 0.5, ..., 4.0 (kSimSteps samples); trajectories
// carry the T future waypoints t = 0.5, ..., 4.0.
inline constexpr double kHorizonSeconds = 4.0;
inline constexpr double kStepSeconds = 0.5;
inline constexpr int kTrajectorySteps = 8;
inline constexpr int kSimSteps = kTrajectorySteps + 1;

inline constexpr double kEgoLength = 4.5;
inline constexpr double kEgoWidth = 2.0;

struct EgoStatus {
  double velocity = 0.0;      // m/s, >= 0
  double acceleration = 0.0;  // m/s^2
  double yaw_rate = 0.0;      // rad/s
};

enum class Behavior : std::uint8_t {
  kConstantVelocity = 0,
  kLaneFollow = 1,
  kYielding = 2,
  kCrossing = 3,
};

struct AgentTrack {
  int agent_id = 0;
  double length = 0.0;
  double width = 0.0;
  std::vector<geom::Pose2> poses;  // kSimSteps entries, t = i * 0.5 s
  Behavior behavior = Behavior::kConstantVelocity;

  // Pose at an arbitrary t in [0, 4], linear xy / shortest-arc heading
  // between grid samples.
  geom::Pose2 pose_at(double t) const;
  geom::OrientedBox box_at(double t) const;
};

struct Trajectory {
  // waypoints[i] is the pose at t = (i + 1) * 0.5 s, ego frame.
  std::vector<geom::Pose2> waypoints;

  bool finite() const;
};

struct Scenario {
  std::string scenario_id;
  std::vector<geom::Polygon> drivable;  // meters, ego-centric at t = 0
  geom::Polyline route;                 // centerline
  std::vector<AgentTrack> agents;
  EgoStatus ego_status;
  Trajectory expert;  // kTrajectorySteps waypoints
  std::uint64_t rng_seed = 0;
};

bool operator==(const EgoStatus& a, const EgoStatus& b);
bool operator==(const AgentTrack& a, const AgentTrack& b);
bool operator==(const Trajectory& a, const Trajectory& b);
bool operator==(const Scenario& a, const Scenario& b);

// Ego pose at t in [0, 4] along a trajectory, with the implicit start pose
// (0, 0, 0) at t = 0.
geom::Pose2 ego_pose_at(const Trajectory& traj, double t);
geom::OrientedBox ego_box_at(const Trajectory& traj, double t);

}  // namespace bevplan::scenario
