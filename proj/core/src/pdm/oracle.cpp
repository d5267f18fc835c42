#include "bevplan/pdm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace bevplan::pdm {

namespace scn = bevplan::scenario;

namespace {

geom::Vec2 ego_velocity_at(const scn::Trajectory& traj, double t) {
  const double h = 0.05;
  const double lo = std::max(0.0, t - h);
  const double hi = std::min(scn::kHorizonSeconds, t + h);
  const geom::Pose2 a = scn::ego_pose_at(traj, lo);
  const geom::Pose2 b = scn::ego_pose_at(traj, hi);
  const double dt = hi - lo;
  if (dt <= 0.0) {
    return {0.0, 0.0};
  }
  return {(b.x - a.x) / dt, (b.y - a.y) / dt};
}

geom::Vec2 agent_velocity_at(const scn::AgentTrack& agent, double t) {
  const double h = 0.05;
  const double lo = std::max(0.0, t - h);
  const double hi = std::min(scn::kHorizonSeconds, t + h);
  const geom::Pose2 a = agent.pose_at(lo);
  const geom::Pose2 b = agent.pose_at(hi);
  const double dt = hi - lo;
  if (dt <= 0.0) {
    return {0.0, 0.0};
  }
  return {(b.x - a.x) / dt, (b.y - a.y) / dt};
}

bool footprint_inside(const geom::OrientedBox& box,
                      const std::vector<geom::Polygon>& area) {
  const auto corners = box.corners();
  for (const auto& c : corners) {
    if (!geom::point_in_any(c, area)) {
      return false;
    }
  }
  for (int i = 0; i < 4; ++i) {
    const geom::Vec2 mid = (corners[i] + corners[(i + 1) % 4]) * 0.5;
    if (!geom::point_in_any(mid, area)) {
      return false;
    }
  }
  return geom::point_in_any(box.pose.position(), area);
}

std::vector<double> flatten(const scn::Trajectory& t) {
  std::vector<double> out;
  out.reserve(t.waypoints.size() * 3);
  for (const auto& p : t.waypoints) {
    out.push_back(p.x);
    out.push_back(p.y);
    out.push_back(p.theta);
  }
  return out;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

Subscores rollout_check(const scn::Scenario& scn, const scn::Trajectory& traj,
                        const OracleConfig& cfg) {
  if (static_cast<int>(traj.waypoints.size()) != scn::kTrajectorySteps) {
    throw std::invalid_argument("rollout_check: trajectory must have T=8 waypoints");
  }
  if (!traj.finite()) {
    throw std::invalid_argument("rollout_check: non-finite waypoints");
  }

  Subscores s;

  // NC and DAC over interpolated substeps.
  bool collision = false;
  bool off_drivable = false;
  const int substeps =
      static_cast<int>(std::round(scn::kHorizonSeconds / cfg.collision_substep));
  for (int i = 0; i <= substeps; ++i) {
    const double t = i * cfg.collision_substep;
    const geom::OrientedBox ego{scn::ego_pose_at(traj, t), cfg.ego_length,
                                cfg.ego_width};
    for (const auto& agent : scn.agents) {
      if (geom::boxes_overlap(ego, agent.box_at(t))) {
        collision = true;
        break;
      }
    }
    if (!off_drivable && !footprint_inside(ego, scn.drivable)) {
      off_drivable = true;
    }
    if (collision && off_drivable) {
      break;
    }
  }
  s.nc = collision ? 0.0 : 1.0;
  s.dac = off_drivable ? 0.0 : 1.0;

  // TTC: constant-velocity projection of ego and agents from each substep.
  bool ttc_violation = collision;
  if (!ttc_violation && !scn.agents.empty()) {
    const int proj_steps =
        static_cast<int>(std::round(cfg.ttc_threshold / cfg.ttc_projection_step));
    for (int i = 0; i <= substeps && !ttc_violation; ++i) {
      const double t = i * cfg.collision_substep;
      const geom::Pose2 ego_pose = scn::ego_pose_at(traj, t);
      const geom::Vec2 ego_vel = ego_velocity_at(traj, t);
      for (const auto& agent : scn.agents) {
        const geom::Pose2 agent_pose = agent.pose_at(t);
        const geom::Vec2 agent_vel = agent_velocity_at(agent, t);
        for (int j = 1; j <= proj_steps; ++j) {
          const double dt = j * cfg.ttc_projection_step;
          const geom::OrientedBox ego_proj{
              {ego_pose.x + ego_vel.x * dt, ego_pose.y + ego_vel.y * dt,
               ego_pose.theta},
              cfg.ego_length,
              cfg.ego_width};
          const geom::OrientedBox agent_proj{
              {agent_pose.x + agent_vel.x * dt, agent_pose.y + agent_vel.y * dt,
               agent_pose.theta},
              agent.length,
              agent.width};
          if (geom::boxes_overlap(ego_proj, agent_proj)) {
            ttc_violation = true;
            break;
          }
        }
        if (ttc_violation) {
          break;
        }
      }
    }
  }
  s.ttc = ttc_violation ? 0.0 : 1.0;

  // Comfort from segment kinematics (implicit origin pose included).
  bool uncomfortable = false;
  {
    std::vector<geom::Pose2> poses;
    poses.push_back({0.0, 0.0, 0.0});
    poses.insert(poses.end(), traj.waypoints.begin(), traj.waypoints.end());
    const double dt = scn::kStepSeconds;
    std::vector<double> speeds;
    for (std::size_t i = 1; i < poses.size(); ++i) {
      speeds.push_back(
          (poses[i].position() - poses[i - 1].position()).norm() / dt);
      const double yaw_rate = geom::wrap_angle(poses[i].theta - poses[i - 1].theta) / dt;
      if (std::abs(yaw_rate) > cfg.max_yaw_rate) {
        uncomfortable = true;
      }
    }
    std::vector<double> accels;
    for (std::size_t i = 1; i < speeds.size(); ++i) {
      accels.push_back((speeds[i] - speeds[i - 1]) / dt);
      if (std::abs(accels.back()) > cfg.max_accel) {
        uncomfortable = true;
      }
    }
    for (std::size_t i = 1; i < accels.size(); ++i) {
      if (std::abs((accels[i] - accels[i - 1]) / dt) > cfg.max_jerk) {
        uncomfortable = true;
      }
    }
  }
  s.comfort = uncomfortable ? 0.0 : 1.0;

  // EP relative to the expert's route progress.
  {
    const double origin_s = scn.route.project({0.0, 0.0});
    auto progress = [&](const scn::Trajectory& t) {
      double best = 0.0;
      for (const auto& p : t.waypoints) {
        best = std::max(best, scn.route.project(p.position()) - origin_s);
      }
      return best;
    };
    const double expert_progress = progress(scn.expert);
    if (expert_progress <= 1e-6) {
      s.ep = 1.0;
    } else {
      s.ep = std::clamp(progress(traj) / expert_progress, 0.0, 1.0);
    }
  }
  return s;
}

double pdms(const Subscores& s) {
  for (double v : {s.nc, s.dac, s.ttc, s.comfort, s.ep}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("pdms: subscore out of [0,1]");
    }
  }
  return s.nc * s.dac * (5.0 * s.ep + 5.0 * s.ttc + 2.0 * s.comfort) / 12.0;
}

std::vector<double> online_pdm_targets(
    const scn::Scenario& scn, const std::vector<scn::Trajectory>& proposals,
    const OracleConfig& cfg) {
  std::vector<double> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) {
    out.push_back(pdms(rollout_check(scn, p, cfg)));
  }
  return out;
}

std::vector<scn::Trajectory> build_anchors(
    const std::vector<scn::Trajectory>& experts, int M, unsigned seed) {
  if (M < 1) {
    throw std::invalid_argument("build_anchors: M must be >= 1");
  }
  if (M > static_cast<int>(experts.size())) {
    throw std::invalid_argument("build_anchors: M exceeds expert pool size");
  }
  std::vector<std::vector<double>> pts;
  std::vector<const scn::Trajectory*> unique;
  for (const auto& e : experts) {
    auto f = flatten(e);
    bool dup = false;
    for (const auto& q : pts) {
      if (q == f) {
        dup = true;
        break;
      }
    }
    if (!dup) {
      pts.push_back(std::move(f));
      unique.push_back(&e);
    }
  }
  if (M >= static_cast<int>(pts.size())) {
    std::vector<scn::Trajectory> out;
    out.reserve(unique.size());
    for (const auto* t : unique) {
      out.push_back(*t);
    }
    return out;
  }

  // k-means++ seeding, then Lloyd iterations.
  std::mt19937 rng(seed);
  const std::size_t dim = pts.front().size();
  std::vector<std::vector<double>> centers;
  {
    std::uniform_int_distribution<std::size_t> first(0, pts.size() - 1);
    centers.push_back(pts[first(rng)]);
    std::vector<double> d2(pts.size());
    while (static_cast<int>(centers.size()) < M) {
      double total = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) {
          best = std::min(best, sq_dist(pts[i], c));
        }
        d2[i] = best;
        total += best;
      }
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      std::size_t pick = pts.size() - 1;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
      centers.push_back(pts[pick]);
    }
  }
  std::vector<int> assign(pts.size(), -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_j = 0;
      for (int j = 0; j < M; ++j) {
        const double d = sq_dist(pts[i], centers[j]);
        if (d < best) {
          best = d;
          best_j = j;
        }
      }
      if (assign[i] != best_j) {
        assign[i] = best_j;
        changed = true;
      }
    }
    std::vector<std::vector<double>> sums(M, std::vector<double>(dim, 0.0));
    std::vector<int> counts(M, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        sums[assign[i]][k] += pts[i][k];
      }
      counts[assign[i]]++;
    }
    for (int j = 0; j < M; ++j) {
      if (counts[j] == 0) {
        // Re-seed an empty cluster at the point farthest from its center.
        std::size_t far_i = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double d = sq_dist(pts[i], centers[assign[i]]);
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centers[j] = pts[far_i];
        changed = true;
      } else {
        for (std::size_t k = 0; k < dim; ++k) {
          centers[j][k] = sums[j][k] / counts[j];
        }
      }
    }
    if (!changed) {
      break;
    }
  }

  const int T = static_cast<int>(experts.front().waypoints.size());
  std::vector<scn::Trajectory> out(M);
  for (int j = 0; j < M; ++j) {
    out[j].waypoints.resize(T);
    for (int t = 0; t < T; ++t) {
      out[j].waypoints[t] = {centers[j][3 * t], centers[j][3 * t + 1],
                             centers[j][3 * t + 2]};
    }
  }
  return out;
}

AnchorSet build_anchor_set(const std::vector<scn::Scenario>& scenarios, int M,
                           const OracleConfig& cfg, unsigned seed) {
  std::vector<scn::Trajectory> experts;
  experts.reserve(scenarios.size());
  for (const auto& s : scenarios) {
    experts.push_back(s.expert);
  }
  AnchorSet set;
  set.anchors = build_anchors(experts, M, seed);
  for (const auto& s : scenarios) {
    std::vector<Subscores> row;
    row.reserve(set.anchors.size());
    for (const auto& a : set.anchors) {
      row.push_back(rollout_check(s, a, cfg));
    }
    set.metrics.emplace(s.scenario_id, std::move(row));
  }
  return set;
}

std::size_t nearest_anchor(const scn::Trajectory& traj,
                           const std::vector<scn::Trajectory>& anchors) {
  if (anchors.empty()) {
    throw std::invalid_argument("nearest_anchor: empty anchor set");
  }
  const auto f = flatten(traj);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_j = 0;
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    const double d = sq_dist(f, flatten(anchors[j]));
    if (d < best) {
      best = d;
      best_j = j;
    }
  }
  return best_j;
}

}  // namespace bevplan::pdm
