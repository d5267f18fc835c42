#pragma once

#include <torch/torch.h>

#include <vector>

#include "bevplan/nn/dims.hpp"

namespace bevplan::planner {

// Scene features from the raster encoder. The learned positional encoding
// is kept separate; consumers add it where position-aware values are
// needed (cross-attention sampling).
struct SceneFeatures {
  torch::Tensor feature_map;  // [B, d, bev_h, bev_w]
  torch::Tensor positional;   // [d, bev_h, bev_w]
};

struct EgoTokens {
  torch::Tensor tokens;  // [B, K*T, d], row (k*T + t)
  int stage = 0;
};

// Side outputs of the planner head stack.
struct PlannerScores {
  torch::Tensor logits;        // [B, K]     candidate score logits
  torch::Tensor validity;      // [B, A]     key-agent validity logits
  torch::Tensor agent_states;  // [B, A, Ta, 2] future xy regression
  torch::Tensor area;          // [B, bev_h*bev_w] ego-area occupancy logits
  torch::Tensor bev;           // [B, c_sem, in_h, in_w] aux semantic logits
  torch::Tensor det_cls;       // [B, A]     slot classification logits
  torch::Tensor det_box;       // [B, A, 4]  slot center/size regression
};

struct PlanOutput {
  std::vector<torch::Tensor> stage_trajectories;  // stages 1..L, each [B,K,T,3]
  torch::Tensor proposals;                        // [B, K, T, 3] == last stage
  EgoTokens final_tokens;                         // stage L
  PlannerScores scores;
  SceneFeatures scene;
};

// Query-centric planner: raster encoder, learnable ego tokens refined over
// L shared-parameter stages of self-attention plus trajectory-anchored
// cross-attention into the scene features, a per-token waypoint head, and
// the scoring/auxiliary heads.
class PlannerModelImpl : public torch::nn::Module {
 public:
  explicit PlannerModelImpl(const nn::ModelDims& dims);

  SceneFeatures encode_scene(const torch::Tensor& raster);   // [B,C,in_h,in_w]
  EgoTokens init_tokens(const torch::Tensor& ego_status);    // [B,3]
  torch::Tensor decode_trajectory(const EgoTokens& tokens);  // -> [B,K,T,3]
  EgoTokens refiner_step(const EgoTokens& tokens, const torch::Tensor& waypoints,
                         const SceneFeatures& scene);
  PlannerScores score_heads(const EgoTokens& tokens, const SceneFeatures& scene);

  PlanOutput plan(const torch::Tensor& raster, const torch::Tensor& ego_status);

  // Cross-attention sub-block, exposed so tests can probe the zero-feature
  // bias path and sampling equivariance.
  torch::Tensor cross_attention_delta(const torch::Tensor& tokens_normed,
                                      const torch::Tensor& waypoints,
                                      const torch::Tensor& feature_map);

  const nn::ModelDims& dims() const { return dims_; }

 private:
  nn::ModelDims dims_;

  torch::nn::Conv2d enc1_{nullptr}, enc2_{nullptr}, enc3_{nullptr};
  torch::Tensor pos_enc_;      // [d, bev_h, bev_w]
  torch::Tensor base_tokens_;  // [K*T, d]
  torch::nn::Linear ego_proj_{nullptr};
  torch::nn::Linear traj_fc1_{nullptr}, traj_fc2_{nullptr};

  // Refiner (parameters shared across all stages).
  torch::nn::LayerNorm ref_ln1_{nullptr}, ref_ln2_{nullptr}, ref_ln3_{nullptr};
  torch::nn::Linear self_qkv_{nullptr}, self_out_{nullptr};
  torch::Tensor sample_offsets_;  // [heads, 4, 2] meters
  torch::nn::Linear cross_weights_{nullptr}, cross_value_{nullptr},
      cross_out_{nullptr};
  torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};

  // Heads.
  torch::nn::Linear score_fc1_{nullptr}, score_fc2_{nullptr};
  torch::nn::Linear valid_head_{nullptr}, state_head_{nullptr}, area_head_{nullptr};
  torch::nn::Conv2d bev_head_{nullptr};
  torch::nn::Linear det_cls_head_{nullptr}, det_box_head_{nullptr};
};
TORCH_MODULE(PlannerModel);

}  // namespace bevplan::planner
