#pragma once

#include <vector>

#include "bevplan/scenario/types.hpp"

namespace bevplan::scenario {

// Channel layout of a BEV semantic raster. Channels are independent binary
// masks (a cell may be drivable and route at once); background is the
// complement of {drivable, agent, route}. Ego is excluded from background
// so that ego placement only ever touches the ego channel.
enum BevChannel : int {
  kChDrivable = 0,
  kChAgent = 1,
  kChEgo = 2,
  kChRoute = 3,
  kChBackground = 4,
};
inline constexpr int kNumChannels = 5;

struct RasterConfig {
  int h = 16;
  int w = 16;
  double resolution = 4.0;  // meters per cell
  // Route channel marks cells whose center lies within this distance of
  // the route centerline.
  double route_halfwidth = 2.0;

  double extent_x() const { return w * resolution; }
  double extent_y() const { return h * resolution; }
};

struct BevRaster {
  int h = 0;
  int w = 0;
  double resolution = 0.0;
  std::vector<double> data;  // [channel][row][col], kNumChannels * h * w

  double at(int channel, int row, int col) const {
    return data[(channel * h + row) * w + col];
  }
  double& at(int channel, int row, int col) {
    return data[(channel * h + row) * w + col];
  }
  // Cell-center world coordinates; the grid is centered on the ego origin.
  geom::Vec2 cell_center(int row, int col) const {
    return {(col + 0.5) * resolution - 0.5 * w * resolution,
            (row + 0.5) * resolution - 0.5 * h * resolution};
  }
};

bool operator==(const BevRaster& a, const BevRaster& b);

// Renders the semantic raster at time t (on the 0.5 s grid). The ego
// channel is filled only at t = 0; future ego placement is
// proposal-conditioned via render_future_target.
BevRaster rasterize_bev(const Scenario& scn, double t,
                        const RasterConfig& cfg = {});

// rasterize_bev plus the ego footprint at the proposal's pose at time t.
// A footprint outside the raster extent leaves the ego channel empty.
BevRaster render_future_target(const Scenario& scn, const Trajectory& proposal,
                               double t, const RasterConfig& cfg = {});

// Cells covered by the ego footprint swept along a trajectory (0.1 s
// substeps), as an h*w binary mask.
std::vector<double> swept_ego_cells(const Trajectory& traj,
                                    const RasterConfig& cfg = {});

}  // namespace bevplan::scenario
