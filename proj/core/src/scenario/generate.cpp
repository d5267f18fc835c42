#include "bevplan/scenario/generate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bevplan/pdm/oracle.hpp"

namespace bevplan::scenario {

namespace {

// Hand-rolled draws over mt19937_64 so generated bytes are identical across
// standard-library implementations.
double next_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * next_unit(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  if (hi <= lo) {
    return lo;
  }
  return lo + static_cast<int>(next_unit(rng) * (hi - lo + 1e-12) * 0.999999999);
}

bool bernoulli(std::mt19937_64& rng, double p) { return next_unit(rng) < p; }

int pick_weighted(std::mt19937_64& rng, const std::array<double, kNumTemplates>& w) {
  double total = 0.0;
  for (double x : w) {
    total += std::max(0.0, x);
  }
  if (total <= 0.0) {
    throw GenerationError("generate_scenario: all template weights are zero");
  }
  double r = next_unit(rng) * total;
  for (int i = 0; i < kNumTemplates; ++i) {
    r -= std::max(0.0, w[i]);
    if (r <= 0.0) {
      return i;
    }
  }
  return kNumTemplates - 1;
}

geom::Polyline sample_route(SceneTemplate tmpl, std::mt19937_64& rng,
                            double* turn_radius) {
  geom::Polyline route;
  const double step = 2.0;
  *turn_radius = 0.0;
  switch (tmpl) {
    case SceneTemplate::kTurn: {
      const double straight = uniform(rng, 8.0, 16.0);
      const double radius = uniform(rng, 18.0, 36.0);
      const double sign = bernoulli(rng, 0.5) ? 1.0 : -1.0;
      const double arc_angle = uniform(rng, 0.6, 1.2);
      *turn_radius = radius;
      for (double x = -12.0; x <= straight; x += step) {
        route.points.push_back({x, 0.0});
      }
      const geom::Vec2 center{straight, sign * radius};
      const double arc_len = radius * arc_angle;
      for (double s = step; s <= arc_len + 26.0; s += step) {
        const double phi = std::min(s, arc_len) / radius;
        const geom::Vec2 on_arc{center.x + radius * std::sin(phi),
                                center.y - sign * radius * std::cos(phi)};
        if (s <= arc_len) {
          route.points.push_back(on_arc);
        } else {
          // Tangent extension past the arc.
          const double ext = s - arc_len;
          route.points.push_back({on_arc.x + ext * std::cos(sign * arc_angle),
                                  on_arc.y + ext * std::sin(sign * arc_angle)});
        }
      }
      break;
    }
    case SceneTemplate::kMerge: {
      const double x0 = uniform(rng, 5.0, 14.0);
      const double length = uniform(rng, 22.0, 34.0);
      const double shift = (bernoulli(rng, 0.5) ? 1.0 : -1.0) * 3.5;
      for (double x = -12.0; x <= 64.0; x += step) {
        double y = 0.0;
        if (x > x0) {
          const double u = std::clamp((x - x0) / length, 0.0, 1.0);
          y = shift * u * u * (3.0 - 2.0 * u);  // smoothstep
        }
        route.points.push_back({x, y});
      }
      break;
    }
    default: {
      for (double x = -12.0; x <= 64.0; x += step) {
        route.points.push_back({x, 0.0});
      }
      break;
    }
  }
  return route;
}

// Overlapping quads along the polyline; each segment extended so joints on
// curved sections stay covered.
std::vector<geom::Polygon> buffer_polyline(const geom::Polyline& line,
                                           double halfwidth) {
  std::vector<geom::Polygon> out;
  for (std::size_t i = 1; i < line.points.size(); ++i) {
    const geom::Vec2 a = line.points[i - 1];
    const geom::Vec2 b = line.points[i];
    const geom::Vec2 d = b - a;
    const double len = d.norm();
    if (len < 1e-9) {
      continue;
    }
    const geom::Vec2 u{d.x / len, d.y / len};
    const geom::Vec2 n{-u.y, u.x};
    const geom::Vec2 a2 = a - u * 1.2;
    const geom::Vec2 b2 = b + u * 1.2;
    geom::Polygon quad;
    quad.vertices = {a2 + n * halfwidth, b2 + n * halfwidth,
                     b2 - n * halfwidth, a2 - n * halfwidth};
    out.push_back(std::move(quad));
  }
  return out;
}

// Piecewise-constant-acceleration speed profile; arc length by midpoint
// integration at fine steps.
struct SpeedProfile {
  double v0 = 0.0;
  double target = 0.0;
  double accel = 1.5;

  double speed_at(double t) const {
    const double dv = target - v0;
    const double a = dv >= 0.0 ? accel : -accel;
    const double t_reach = a != 0.0 ? dv / a : 0.0;
    if (t >= t_reach) {
      return target;
    }
    return v0 + a * t;
  }
  double distance_at(double t) const {
    double s = 0.0;
    const double dt = 0.01;
    for (double u = 0.0; u + dt <= t + 1e-12; u += dt) {
      s += speed_at(u + 0.5 * dt) * dt;
    }
    return s;
  }
};

Trajectory expert_from_profile(const geom::Polyline& route,
                               const SpeedProfile& profile,
                               double start_arclength) {
  Trajectory traj;
  traj.waypoints.resize(kTrajectorySteps);
  for (int i = 0; i < kTrajectorySteps; ++i) {
    const double t = (i + 1) * kStepSeconds;
    traj.waypoints[i] = route.pose_at(start_arclength + profile.distance_at(t));
  }
  return traj;
}

AgentTrack track_along_route(int id, const geom::Polyline& route,
                             double start_arclength, const SpeedProfile& profile,
                             Behavior behavior, double length, double width) {
  AgentTrack track;
  track.agent_id = id;
  track.length = length;
  track.width = width;
  track.behavior = behavior;
  track.poses.resize(kSimSteps);
  for (int i = 0; i < kSimSteps; ++i) {
    const double t = i * kStepSeconds;
    track.poses[i] = route.pose_at(start_arclength + profile.distance_at(t));
  }
  return track;
}

AgentTrack track_linear(int id, const geom::Pose2& start, double speed,
                        Behavior behavior, double length, double width) {
  AgentTrack track;
  track.agent_id = id;
  track.length = length;
  track.width = width;
  track.behavior = behavior;
  track.poses.resize(kSimSteps);
  const double c = std::cos(start.theta);
  const double s = std::sin(start.theta);
  for (int i = 0; i < kSimSteps; ++i) {
    const double t = i * kStepSeconds;
    track.poses[i] = {start.x + c * speed * t, start.y + s * speed * t,
                      start.theta};
  }
  return track;
}

// Decelerates to a stop after stop_time; used by yielding agents.
AgentTrack track_yielding(int id, const geom::Pose2& start, double speed,
                          double stop_time, double length, double width) {
  AgentTrack track;
  track.agent_id = id;
  track.length = length;
  track.width = width;
  track.behavior = Behavior::kYielding;
  track.poses.resize(kSimSteps);
  const double c = std::cos(start.theta);
  const double s = std::sin(start.theta);
  const double decel = stop_time > 0.0 ? speed / stop_time : speed;
  for (int i = 0; i < kSimSteps; ++i) {
    const double t = i * kStepSeconds;
    double dist;
    if (t < stop_time) {
      dist = speed * t - 0.5 * decel * t * t;
    } else {
      dist = 0.5 * speed * stop_time;
    }
    track.poses[i] = {start.x + c * dist, start.y + s * dist, start.theta};
  }
  return track;
}

struct Attempt {
  Scenario scenario;
  bool ok = false;
};

Attempt attempt_generate(std::uint64_t seed, const GeneratorConfig& cfg,
                         std::mt19937_64& rng) {
  Attempt att;
  Scenario& scn = att.scenario;
  const auto tmpl = static_cast<SceneTemplate>(pick_weighted(rng, cfg.template_weights));

  double turn_radius = 0.0;
  scn.route = sample_route(tmpl, rng, &turn_radius);
  const double corridor_half = cfg.lane_width * 0.5 + 0.6;
  scn.drivable = buffer_polyline(scn.route, corridor_half);

  // Oncoming / adjacent lane corridor keeps constant-velocity traffic on
  // drivable ground for straight-ish templates.
  geom::Polyline adjacent;
  const double adjacent_offset = cfg.lane_width * 0.5 + 1.2;
  for (std::size_t i = 0; i < scn.route.points.size(); ++i) {
    const geom::Pose2 p = scn.route.pose_at(
        scn.route.project(scn.route.points[i]));
    adjacent.points.push_back({scn.route.points[i].x - std::sin(p.theta) * adjacent_offset,
                               scn.route.points[i].y + std::cos(p.theta) * adjacent_offset});
  }
  {
    auto extra = buffer_polyline(adjacent, cfg.lane_width * 0.5 + 0.6);
    scn.drivable.insert(scn.drivable.end(), extra.begin(), extra.end());
  }

  // Crossing corridor for the crossing template.
  geom::Polyline cross_line;
  double cross_at = 0.0;
  double cross_theta = 0.0;
  if (tmpl == SceneTemplate::kCrossing) {
    cross_at = uniform(rng, 14.0, 26.0);
    cross_theta = (bernoulli(rng, 0.5) ? 1.0 : -1.0) *
                  uniform(rng, geom::kPi * 0.4, geom::kPi * 0.6);
    const geom::Vec2 center{cross_at, 0.0};
    const geom::Vec2 dir{std::cos(cross_theta), std::sin(cross_theta)};
    for (double s = -40.0; s <= 40.0; s += 4.0) {
      cross_line.points.push_back(center + dir * s);
    }
    auto extra = buffer_polyline(cross_line, cfg.lane_width * 0.5 + 0.6);
    scn.drivable.insert(scn.drivable.end(), extra.begin(), extra.end());
  }

  // Expert speed profile.
  const double start_s = scn.route.project({0.0, 0.0});
  double v0 = uniform(rng, cfg.min_speed, cfg.max_speed);
  double target = uniform(rng, cfg.min_speed, cfg.max_speed);
  if (tmpl == SceneTemplate::kTurn && turn_radius > 0.0) {
    const double vmax_turn = 0.5 * 0.6 * turn_radius;
    v0 = std::min(v0, vmax_turn);
    target = std::min(target, vmax_turn);
  }

  // Agents.
  int n_agents = uniform_int(rng, cfg.min_agents, cfg.max_agents);
  int next_id = 1;
  const double car_len = 4.5;
  const double car_wid = 2.0;

  double lead_speed = -1.0;
  double lead_gap = 0.0;
  if ((tmpl == SceneTemplate::kLeadingVehicle && n_agents > 0) ||
      (tmpl == SceneTemplate::kStraight && n_agents > 0 && bernoulli(rng, 0.5))) {
    lead_gap = uniform(rng, 12.0, 26.0);
    lead_speed = uniform(rng, 0.35, 0.85) * std::max(v0, cfg.min_speed);
    SpeedProfile lead_profile{lead_speed, lead_speed, 0.0};
    scn.agents.push_back(track_along_route(next_id++, scn.route,
                                           start_s + lead_gap, lead_profile,
                                           Behavior::kLaneFollow, car_len, car_wid));
    --n_agents;
    // Keep the expert from running into the leader: match its speed and
    // verify the worst-case gap shrink.
    target = std::min(target, lead_speed);
    if (v0 > lead_speed) {
      const double shrink = (v0 - lead_speed) * (v0 - lead_speed) / (2.0 * 1.5);
      if (shrink + car_len + 2.0 > lead_gap) {
        v0 = lead_speed;  // too close to brake comfortably; start matched
      }
    }
  }

  SpeedProfile expert_profile{v0, target, 1.5};
  scn.expert = expert_from_profile(scn.route, expert_profile, start_s);
  scn.ego_status.velocity = v0;
  scn.ego_status.acceleration =
      std::clamp(target > v0 ? 1.5 : (target < v0 ? -1.5 : 0.0), -3.0, 3.0);
  scn.ego_status.yaw_rate = 0.0;

  if (tmpl == SceneTemplate::kCrossing && n_agents > 0) {
    // Time the crossing agent to pass the conflict point offset from the
    // ego's arrival there.
    const double conflict_s = scn.route.project({cross_at, 0.0});
    double t_ego = 4.5;
    for (double t = 0.0; t <= 4.0; t += 0.05) {
      if (start_s + expert_profile.distance_at(t) >= conflict_s) {
        t_ego = t;
        break;
      }
    }
    const double agent_speed = uniform(rng, 4.0, 9.0);
    const double margin = (bernoulli(rng, 0.5) ? 1.0 : -1.0) * uniform(rng, 1.1, 2.4);
    const double t_agent = std::clamp(t_ego + margin, 0.6, 3.8);
    const geom::Vec2 dir{std::cos(cross_theta), std::sin(cross_theta)};
    const geom::Pose2 agent_start{cross_at - dir.x * agent_speed * t_agent,
                                  0.0 - dir.y * agent_speed * t_agent,
                                  cross_theta};
    scn.agents.push_back(track_linear(next_id++, agent_start, agent_speed,
                                      Behavior::kCrossing, car_len, car_wid));
    --n_agents;
    if (n_agents > 0 && bernoulli(rng, 0.5)) {
      // A yielding vehicle on the crossing road, stopping short of the
      // conflict point.
      const double yv = uniform(rng, 3.0, 6.0);
      const double approach = uniform(rng, 10.0, 16.0);
      const geom::Pose2 start_pose{cross_at - dir.x * approach,
                                   -dir.y * approach, cross_theta};
      const double stop_time = std::min(3.5, (approach - corridor_half - 3.0) * 2.0 / yv);
      if (stop_time > 0.5) {
        scn.agents.push_back(track_yielding(next_id++, start_pose, yv, stop_time,
                                            car_len, car_wid));
        --n_agents;
      }
    }
  }

  if (tmpl == SceneTemplate::kMerge && n_agents > 0) {
    // Traffic already in the target lane, offset along the route.
    const double gap = (bernoulli(rng, 0.5) ? 1.0 : -1.0) * uniform(rng, 14.0, 24.0);
    const double speed = uniform(rng, 0.5, 1.0) * std::max(target, cfg.min_speed);
    SpeedProfile p{speed, speed, 0.0};
    scn.agents.push_back(track_along_route(next_id++, scn.route, start_s + 30.0 + gap,
                                           p, Behavior::kLaneFollow, car_len, car_wid));
    --n_agents;
  }

  // Fill the remainder with adjacent-lane constant-velocity traffic.
  while (n_agents > 0) {
    const double along = uniform(rng, 6.0, 50.0);
    const double adj_s = adjacent.project(scn.route.pose_at(start_s + along).position());
    const geom::Pose2 on_adj = adjacent.pose_at(adj_s);
    const bool oncoming = bernoulli(rng, 0.6);
    const geom::Pose2 start_pose{on_adj.x, on_adj.y,
                                 oncoming ? geom::wrap_angle(on_adj.theta + geom::kPi)
                                          : on_adj.theta};
    const double speed = uniform(rng, 2.0, 9.0);
    scn.agents.push_back(track_linear(next_id++, start_pose, speed,
                                      Behavior::kConstantVelocity, car_len, car_wid));
    --n_agents;
  }

  // Reject agents idling on top of the ego at t = 0.
  const geom::OrientedBox ego0{{0.0, 0.0, 0.0}, kEgoLength, kEgoWidth};
  for (const auto& agent : scn.agents) {
    if (geom::boxes_overlap(ego0, agent.box_at(0.0))) {
      return att;
    }
  }

  scn.scenario_id = "scn-" + std::to_string(seed);
  scn.rng_seed = seed;

  // Feasibility gate: the expert must be collision-free and stay on
  // drivable ground under the oracle.
  const pdm::Subscores sub = pdm::rollout_check(scn, scn.expert);
  att.ok = sub.nc == 1.0 && sub.dac == 1.0;
  return att;
}

}  // namespace

Scenario generate_scenario(std::uint64_t seed, const GeneratorConfig& cfg) {
  std::mt19937_64 rng(seed ^ 0x6a09e667f3bcc908ull);
  for (int retry = 0; retry < cfg.max_retries; ++retry) {
    Attempt att = attempt_generate(seed, cfg, rng);
    if (att.ok) {
      return std::move(att.scenario);
    }
  }
  throw GenerationError("generate_scenario: retries exhausted for seed " +
                        std::to_string(seed));
}

}  // namespace bevplan::scenario
