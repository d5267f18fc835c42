#pragma once

#include <torch/torch.h>

#include "bevplan/nn/dims.hpp"

namespace bevplan::testing {

// Toy dimensions for gradient and behavior tests: d=8, K=2, T=4, 4x4 BEV
// grid (8x8 input raster), in float64.
inline nn::ModelDims toy_dims() {
  nn::ModelDims dims;
  dims.d = 8;
  dims.K = 2;
  dims.T = 4;
  dims.L = 2;
  dims.heads = 2;
  dims.A = 2;
  dims.Ta = 4;
  dims.bev_h = 4;
  dims.bev_w = 4;
  dims.in_h = 8;
  dims.in_w = 8;
  dims.c_sem = 5;
  dims.wm_layers = 1;
  dims.wm_n = 2;
  dims.ff_mult = 2;
  dims.extent = 16.0;
  dims.dtype = torch::kFloat64;
  return dims;
}

inline torch::Tensor toy_raster(const nn::ModelDims& dims, int batch = 1) {
  return torch::rand({batch, dims.c_sem, dims.in_h, dims.in_w}, torch::kFloat64);
}

inline torch::Tensor toy_ego(int batch = 1) {
  return torch::rand({batch, 3}, torch::kFloat64);
}

}  // namespace bevplan::testing
