#pragma once

#include <torch/torch.h>

#include <optional>
#include <vector>

#include "bevplan/planner/losses.hpp"
#include "bevplan/planner/model.hpp"
#include "bevplan/wm/model.hpp"

namespace bevplan::coupling {

struct CouplingConfig {
  bool inject_ego_tokens = true;
  bool proactive_gradient = true;
  bool use_world_model = true;
  std::vector<int> mlp_reward_dims{256, 1024, 1024, 6};

  double lambda_im = 1.0;
  double lambda_sim = 1.0;
  double lambda_align = 1.0;
  wm::WmLossConfig wm_loss;          // lambda_cur / lambda_fut + focal params
  wm::RewardWeights reward_weights;  // Eq. 8 weights + log clamp
  planner::TrajLossConfig traj_loss;
  planner::ScoreLossConfig score_loss;
  planner::AuxLossConfig aux_loss;

  void validate() const;
};

// Projects the refined planner token at the iteration-aligned trajectory
// timestep into the world model's per-iteration ego token.
class StateInjectorImpl : public torch::nn::Module {
 public:
  explicit StateInjectorImpl(int d);

  // [B, K*T, d] final tokens -> [B, N, K, d] given the timestep map.
  torch::Tensor forward(const torch::Tensor& final_tokens, int K, int T,
                        const std::vector<int>& iteration_waypoints);

  // Single (k, i) projection, the per-token contract.
  torch::Tensor project(const torch::Tensor& token);  // [d] -> [d]

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(StateInjector);

// Scene-blind reward predictor replacing the world model in the
// use_world_model = false variant: embeds trajectory geometry + ego
// kinematics into a trajectory token and maps it through the configured
// MLP to (imitation logit, NC, DAC, TTC, C, EP).
class MlpRewardPredictorImpl : public torch::nn::Module {
 public:
  MlpRewardPredictorImpl(int T, const std::vector<int>& dims);

  torch::Tensor embed(const torch::Tensor& proposals,
                      const torch::Tensor& ego_status);  // -> [B, K, dims0]
  torch::Tensor predict(const torch::Tensor& token);     // -> [B, K, 6]

 private:
  torch::nn::Linear embed_{nullptr};
  std::vector<torch::nn::Linear> fcs_;
};
TORCH_MODULE(MlpRewardPredictor);

// Mean squared error between the sigmoid planner score and the per-sample
// min-max normalized world-model score (targets detached; a degenerate
// min = max row normalizes to all 0.5).
torch::Tensor loss_align(const torch::Tensor& planner_logits,
                         const torch::Tensor& rewards);

struct PartialLosses {
  torch::Tensor traj;
  torch::Tensor score;
  torch::Tensor aux;
  torch::Tensor im;
  torch::Tensor sim;
  torch::Tensor align;
  torch::Tensor wm;  // undefined when use_world_model = false
};

// Weighted sum per the joint objective; NaN partials abort with the term
// name. Gradient gating happens at the forward-pass interfaces, not here.
torch::Tensor total_loss(const PartialLosses& partials,
                         const CouplingConfig& cfg);

// The full coupled architecture. Owns the planner plus either the world
// model + injector or the MLP reward predictor, and applies the
// stop-gradient boundaries implementing the proactive-gradient switch.
class CoupledModelImpl : public torch::nn::Module {
 public:
  CoupledModelImpl(const nn::ModelDims& dims, const CouplingConfig& cfg);

  struct Outputs {
    planner::PlanOutput plan;
    torch::Tensor imit_logits;  // [B, K]
    torch::Tensor sim_logits;   // [B, K, 5]
    torch::Tensor r_im;         // [B, K]
    torch::Tensor r_sim;        // [B, K, 5]
    torch::Tensor rewards;      // [B, K] aggregated R
    std::vector<std::int64_t> selected;
    wm::RolloutOutput rollout;        // empty when the world model is off
    torch::Tensor current_semantic;   // [B, c_sem, in_h, in_w]
    torch::Tensor future_semantic;    // [B, c_sem, in_h, in_w], selected
                                      // candidate's final-iteration decode
  };

  Outputs forward(const torch::Tensor& raster, const torch::Tensor& ego_status);

  // Rollout at fixed proposals/tokens, bypassing the planner (for the
  // injection-gating probes).
  wm::RolloutOutput rollout_fixed(const torch::Tensor& raster,
                                  const torch::Tensor& proposals,
                                  const torch::Tensor& ego_status,
                                  const torch::Tensor& final_tokens);

  planner::PlannerModel planner() { return planner_; }
  wm::WorldModel world_model() { return world_model_; }
  StateInjector injector() { return injector_; }
  MlpRewardPredictor mlp_predictor() { return mlp_; }
  const CouplingConfig& coupling() const { return cfg_; }
  const nn::ModelDims& dims() const { return dims_; }

  // Parameter names per optimizer group: the planner group and the
  // environment+coupling group. Every parameter is in exactly one.
  std::vector<std::string> ego_parameter_names() const;
  std::vector<std::string> env_parameter_names() const;

 private:
  std::vector<int> iteration_waypoints() const;

  nn::ModelDims dims_;
  CouplingConfig cfg_;
  planner::PlannerModel planner_{nullptr};
  wm::WorldModel world_model_{nullptr};
  StateInjector injector_{nullptr};
  MlpRewardPredictor mlp_{nullptr};
};
TORCH_MODULE(CoupledModel);

}  // namespace bevplan::coupling
