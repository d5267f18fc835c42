#include "bevplan/scenario/raster.hpp"

#include <cmath>
#include <stdexcept>

namespace bevplan::scenario {

namespace {

bool on_time_grid(double t) {
  if (t < -1e-9 || t > kHorizonSeconds + 1e-9) {
    return false;
  }
  const double steps = t / kStepSeconds;
  return std::abs(steps - std::round(steps)) < 1e-9;
}

void fill_box(BevRaster& r, int channel, const geom::OrientedBox& box) {
  for (int row = 0; row < r.h; ++row) {
    for (int col = 0; col < r.w; ++col) {
      if (geom::point_in_box(r.cell_center(row, col), box)) {
        r.at(channel, row, col) = 1.0;
      }
    }
  }
}

// Background excludes the ego channel so that ego placement never touches
// any other channel.
void finalize_background(BevRaster& r) {
  for (int row = 0; row < r.h; ++row) {
    for (int col = 0; col < r.w; ++col) {
      const bool any = r.at(kChDrivable, row, col) > 0.0 ||
                       r.at(kChAgent, row, col) > 0.0 ||
                       r.at(kChRoute, row, col) > 0.0;
      r.at(kChBackground, row, col) = any ? 0.0 : 1.0;
    }
  }
}

}  // namespace

bool operator==(const BevRaster& a, const BevRaster& b) {
  return a.h == b.h && a.w == b.w && a.resolution == b.resolution &&
         a.data == b.data;
}

BevRaster rasterize_bev(const Scenario& scn, double t, const RasterConfig& cfg) {
  if (!on_time_grid(t)) {
    throw std::invalid_argument("rasterize_bev: t must lie on the 0.5 s grid");
  }
  BevRaster r;
  r.h = cfg.h;
  r.w = cfg.w;
  r.resolution = cfg.resolution;
  r.data.assign(static_cast<std::size_t>(kNumChannels) * cfg.h * cfg.w, 0.0);

  for (int row = 0; row < r.h; ++row) {
    for (int col = 0; col < r.w; ++col) {
      const geom::Vec2 c = r.cell_center(row, col);
      if (geom::point_in_any(c, scn.drivable)) {
        r.at(kChDrivable, row, col) = 1.0;
      }
      if (!scn.route.points.empty()) {
        const double s = scn.route.project(c);
        const geom::Pose2 q = scn.route.pose_at(s);
        const double d = (geom::Vec2{q.x, q.y} - c).norm();
        if (d <= cfg.route_halfwidth) {
          r.at(kChRoute, row, col) = 1.0;
        }
      }
    }
  }
  for (const auto& agent : scn.agents) {
    fill_box(r, kChAgent, agent.box_at(t));
  }
  if (t == 0.0) {
    fill_box(r, kChEgo, {{0.0, 0.0, 0.0}, kEgoLength, kEgoWidth});
  }
  finalize_background(r);
  return r;
}

BevRaster render_future_target(const Scenario& scn, const Trajectory& proposal,
                               double t, const RasterConfig& cfg) {
  const int index = static_cast<int>(std::round(t / kStepSeconds)) - 1;
  if (index >= static_cast<int>(proposal.waypoints.size())) {
    throw std::invalid_argument(
        "render_future_target: proposal has no waypoint at time t");
  }
  if (!proposal.finite()) {
    throw std::invalid_argument("render_future_target: non-finite waypoint");
  }
  BevRaster r = rasterize_bev(scn, t, cfg);
  for (int row = 0; row < r.h; ++row) {
    for (int col = 0; col < r.w; ++col) {
      r.at(kChEgo, row, col) = 0.0;
    }
  }
  fill_box(r, kChEgo, ego_box_at(proposal, t));
  return r;
}

std::vector<double> swept_ego_cells(const Trajectory& traj,
                                    const RasterConfig& cfg) {
  BevRaster r;
  r.h = cfg.h;
  r.w = cfg.w;
  r.resolution = cfg.resolution;
  r.data.assign(static_cast<std::size_t>(kNumChannels) * cfg.h * cfg.w, 0.0);
  const double substep = 0.1;
  const double horizon = kStepSeconds * static_cast<double>(traj.waypoints.size());
  for (double t = 0.0; t <= horizon + 1e-9; t += substep) {
    fill_box(r, kChEgo, ego_box_at(traj, t));
  }
  std::vector<double> mask(static_cast<std::size_t>(cfg.h) * cfg.w, 0.0);
  for (int row = 0; row < r.h; ++row) {
    for (int col = 0; col < r.w; ++col) {
      mask[static_cast<std::size_t>(row) * cfg.w + col] = r.at(kChEgo, row, col);
    }
  }
  return mask;
}

}  // namespace bevplan::scenario
