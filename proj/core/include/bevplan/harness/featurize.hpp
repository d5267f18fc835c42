#pragma once

#include <torch/torch.h>

#include <vector>

#include "bevplan/nn/dims.hpp"
#include "bevplan/pdm/oracle.hpp"
#include "bevplan/planner/losses.hpp"
#include "bevplan/scenario/raster.hpp"
#include "bevplan/scenario/types.hpp"

namespace bevplan::harness {

struct BatchInputs {
  torch::Tensor raster;  // [B, c_sem, in_h, in_w]
  torch::Tensor ego;     // [B, 3]
};

// Raster config for the model input / semantic target grid.
scenario::RasterConfig input_raster_config(const nn::ModelDims& dims);
// Raster config matching the BEV token grid (ego-area occupancy).
scenario::RasterConfig bev_raster_config(const nn::ModelDims& dims);

BatchInputs build_inputs(const std::vector<const scenario::Scenario*>& batch,
                         const nn::ModelDims& dims);

// Proposal-independent supervision for a batch.
struct StaticTargets {
  planner::ScoreTargets score;  // .pdm left undefined; filled per step
  planner::AuxTargets aux;
  torch::Tensor expert;   // [B, T, 3]
  torch::Tensor cur_sem;  // [B, c_sem, in_h, in_w] current semantic map
};

StaticTargets build_static_targets(
    const std::vector<const scenario::Scenario*>& batch,
    const nn::ModelDims& dims);

// [B, K, T, 3] tensor -> per-sample trajectory lists (detached, f64).
std::vector<std::vector<scenario::Trajectory>> proposals_to_trajectories(
    const torch::Tensor& proposals);

// Online PDM targets for the current proposals: [B, K] in [0, 1].
torch::Tensor online_pdm_targets_tensor(
    const std::vector<const scenario::Scenario*>& batch,
    const torch::Tensor& proposals, const pdm::OracleConfig& oracle,
    bool use_cache = false);

// Nearest-anchor subscore targets: [B, K, 5] in (NC, DAC, TTC, C, EP) order.
torch::Tensor anchor_sim_targets(
    const std::vector<const scenario::Scenario*>& batch,
    const torch::Tensor& proposals, const pdm::AnchorSet& anchors);

// Future semantic targets for the selected proposals at horizon time
// t = T * 0.5 s: [B, c_sem, in_h, in_w].
torch::Tensor future_semantic_targets(
    const std::vector<const scenario::Scenario*>& batch,
    const torch::Tensor& proposals, const std::vector<std::int64_t>& selected,
    const nn::ModelDims& dims);

}  // namespace bevplan::harness
