#pragma once

#include <torch/torch.h>

#include <vector>

#include "bevplan/planner/model.hpp"

namespace bevplan::planner {

struct TrajLossConfig {
  double gamma = 0.5;        // stage discount
  double lambda_div = 0.1;   // diversity weight
  double delta_div = 2.0;    // meters, endpoint separation margin
};

struct ScoreLossConfig {
  double lambda_final = 1.0;
  double lambda_valid = 1.0;
  double lambda_state = 1.0;
  double lambda_area = 1.0;
};

struct AuxLossConfig {
  double lambda_bev = 1.0;
  double lambda_cls = 1.0;
  double lambda_box = 1.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

struct ScoreTargets {
  torch::Tensor pdm;           // [B, K] online PDM targets in [0, 1]
  torch::Tensor validity;      // [B, A] binary
  torch::Tensor agent_states;  // [B, A, Ta, 2]
  torch::Tensor area;          // [B, bev_h*bev_w] binary
};

struct AuxTargets {
  torch::Tensor bev;      // [B, c_sem, in_h, in_w] binary masks
  torch::Tensor det_cls;  // [B, A] binary slot occupancy
  torch::Tensor det_box;  // [B, A, 4] center xy + length/width
};

// Winner-take-all L1 over all refinement stages, discounted by
// gamma^(L - l), plus the endpoint-separation diversity hinge. Stage list
// must cover stages 1..L (empty list rejected).
torch::Tensor loss_traj(const std::vector<torch::Tensor>& stage_trajectories,
                        const torch::Tensor& expert,  // [B, T, 3]
                        const TrajLossConfig& cfg);

// Candidate-score BCE against online PDM targets plus validity BCE, the
// valid-masked L1 on key-agent states, and ego-area occupancy BCE.
torch::Tensor loss_score(const PlannerScores& scores, const ScoreTargets& targets,
                         const ScoreLossConfig& cfg);

// Auxiliary perception: BEV semantic BCE, focal slot classification, and L1
// box regression on occupied slots.
torch::Tensor loss_aux(const PlannerScores& scores, const AuxTargets& targets,
                       const AuxLossConfig& cfg);

}  // namespace bevplan::planner
