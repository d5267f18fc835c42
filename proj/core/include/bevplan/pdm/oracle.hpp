#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

#include "bevplan/scenario/types.hpp"

namespace bevplan::pdm {

struct Subscores {
  double nc = 0.0;
  double dac = 0.0;
  double ttc = 0.0;
  double comfort = 0.0;
  double ep = 0.0;
};

struct OracleConfig {
  double collision_substep = 0.1;  // s, pose interpolation step for NC/DAC
  double ttc_threshold = 0.95;     // s
  double ttc_projection_step = 0.05;
  double max_accel = 3.0;     // m/s^2
  double max_jerk = 6.0;      // m/s^3
  double max_yaw_rate = 0.6;  // rad/s
  double ego_length = scenario::kEgoLength;
  double ego_width = scenario::kEgoWidth;
};

// Closed-loop subscores for a trajectory on a scenario.
//   NC      = 1 iff the ego box, interpolated at collision_substep, never
//             overlaps any agent box.
//   DAC     = 1 iff every interpolated footprint stays inside the drivable
//             area (corners, edge midpoints, and center tested).
//   TTC     = 1 iff the constant-velocity projection of ego and agents never
//             collides within ttc_threshold seconds, at any substep.
//   Comfort = 1 iff segment accelerations, jerks, and heading rates stay
//             within bounds (computed from the waypoints with the implicit
//             origin pose; ego_status is not consulted).
//   EP      = clamp(route progress / expert route progress, 0, 1), progress
//             being the maximum projected arc length over waypoints.
Subscores rollout_check(const scenario::Scenario& scn,
                        const scenario::Trajectory& traj,
                        const OracleConfig& cfg = {});

// NC * DAC * (5 EP + 5 TTC + 2 C) / 12. Rejects out-of-range fields.
double pdms(const Subscores& s);

// pdms(rollout_check(...)) for each proposal.
std::vector<double> online_pdm_targets(
    const scenario::Scenario& scn,
    const std::vector<scenario::Trajectory>& proposals,
    const OracleConfig& cfg = {});

// Anchor trajectories with per-scenario precomputed subscores.
struct AnchorSet {
  std::vector<scenario::Trajectory> anchors;
  // metrics[scenario_id][anchor_index]
  std::unordered_map<std::string, std::vector<Subscores>> metrics;
};

// M cluster representatives of the expert pool: squared-Euclidean k-means
// on flattened waypoints, fixed seed. M == pool size returns the
// deduplicated experts themselves; M > pool size is rejected.
std::vector<scenario::Trajectory> build_anchors(
    const std::vector<scenario::Trajectory>& experts, int M,
    unsigned seed = 0);

// build_anchors over the scenarios' experts plus the full M x scenario
// metrics table.
AnchorSet build_anchor_set(const std::vector<scenario::Scenario>& scenarios,
                           int M, const OracleConfig& cfg = {},
                           unsigned seed = 0);

// Index of the L2-nearest anchor in flattened waypoint space; ties break to
// the lowest index.
std::size_t nearest_anchor(const scenario::Trajectory& traj,
                           const std::vector<scenario::Trajectory>& anchors);

}  // namespace bevplan::pdm
