#pragma once

#include <torch/torch.h>

namespace bevplan::nn {

// Shared model dimensions. The input raster (in_h x in_w) is finer than the
// BEV token grid (bev_h x bev_w); encoders downsample by sem_scale and the
// semantic head decodes each BEV token back into its sem_scale^2 sub-cells.
// Both grids cover the same square extent centered on the ego.
struct ModelDims {
  int d = 64;        // token width
  int K = 8;         // candidate count
  int T = 8;         // waypoints per trajectory
  int L = 3;         // refinement stages
  int heads = 4;
  int A = 6;         // key-agent slots
  int Ta = 8;        // key-agent future steps
  int bev_h = 16;
  int bev_w = 16;
  int in_h = 32;
  int in_w = 32;
  int c_sem = 5;
  int wm_layers = 2;
  int wm_n = 4;      // world-model iterations
  int ff_mult = 4;
  double extent = 64.0;  // meters, square side
  torch::Dtype dtype = torch::kFloat32;

  int sem_scale() const { return in_h / bev_h; }
  int bev_cells() const { return bev_h * bev_w; }
  int seq_len() const { return bev_cells() + 2; }
  double input_resolution() const { return extent / in_h; }
  double bev_resolution() const { return extent / bev_h; }

  void validate() const {
    TORCH_CHECK(d % heads == 0, "d must be divisible by heads");
    TORCH_CHECK(in_h % bev_h == 0 && in_w % bev_w == 0,
                "input grid must tile the BEV grid");
    TORCH_CHECK(in_h / bev_h == in_w / bev_w, "sem_scale must be isotropic");
    TORCH_CHECK(wm_n == 0 || T % wm_n == 0, "N must divide T");
    TORCH_CHECK(K >= 1 && T >= 1 && L >= 0, "bad K/T/L");
  }
  // Trajectory timestep aligned with world-model iteration i (0-based).
  int iteration_waypoint(int i) const { return (i + 1) * T / wm_n - 1; }
};

}  // namespace bevplan::nn
