#include "bevplan/planner/model.hpp"

#include <cmath>

#include "bevplan/nn/common.hpp"

namespace bevplan::planner {

PlannerModelImpl::PlannerModelImpl(const nn::ModelDims& dims) : dims_(dims) {
  dims_.validate();
  const int d = dims_.d;
  const int half = std::max(4, d / 2);

  enc1_ = register_module(
      "enc1", torch::nn::Conv2d(
                  torch::nn::Conv2dOptions(dims_.c_sem, half, 3).padding(1)));
  enc2_ = register_module(
      "enc2", torch::nn::Conv2d(torch::nn::Conv2dOptions(half, d, 3)
                                    .stride(dims_.sem_scale())
                                    .padding(1)));
  enc3_ = register_module(
      "enc3", torch::nn::Conv2d(torch::nn::Conv2dOptions(d, d, 3).padding(1)));
  pos_enc_ = register_parameter(
      "pos_enc", torch::randn({d, dims_.bev_h, dims_.bev_w}) * 0.02);
  base_tokens_ = register_parameter(
      "base_tokens", torch::randn({dims_.K * dims_.T, d}) * 0.5);
  ego_proj_ = register_module("ego_proj", torch::nn::Linear(3, d));

  traj_fc1_ = register_module("traj_fc1", torch::nn::Linear(d, d));
  traj_fc2_ = register_module("traj_fc2", torch::nn::Linear(d, 3));

  auto ln = [&](const char* name) {
    return register_module(
        name, torch::nn::LayerNorm(
                  torch::nn::LayerNormOptions({static_cast<std::int64_t>(d)})));
  };
  ref_ln1_ = ln("ref_ln1");
  ref_ln2_ = ln("ref_ln2");
  ref_ln3_ = ln("ref_ln3");
  self_qkv_ = register_module("self_qkv", torch::nn::Linear(d, 3 * d));
  self_out_ = register_module("self_out", torch::nn::Linear(d, d));
  sample_offsets_ = register_parameter(
      "sample_offsets", torch::randn({dims_.heads, 4, 2}) * 2.0);
  cross_weights_ =
      register_module("cross_weights", torch::nn::Linear(d, dims_.heads * 4));
  cross_value_ = register_module("cross_value", torch::nn::Linear(d, d));
  cross_out_ = register_module("cross_out", torch::nn::Linear(d, d));
  ff1_ = register_module("ff1", torch::nn::Linear(d, dims_.ff_mult * d));
  ff2_ = register_module("ff2", torch::nn::Linear(dims_.ff_mult * d, d));

  score_fc1_ = register_module("score_fc1", torch::nn::Linear(d, d));
  score_fc2_ = register_module("score_fc2", torch::nn::Linear(d, 1));
  valid_head_ = register_module("valid_head", torch::nn::Linear(d, dims_.A));
  state_head_ = register_module(
      "state_head", torch::nn::Linear(d, dims_.A * dims_.Ta * 2));
  area_head_ = register_module(
      "area_head", torch::nn::Linear(d, dims_.bev_h * dims_.bev_w));
  const int s2 = dims_.sem_scale() * dims_.sem_scale();
  bev_head_ = register_module(
      "bev_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(
                      2 * d, dims_.c_sem * s2, 1)));
  det_cls_head_ = register_module("det_cls_head", torch::nn::Linear(d, dims_.A));
  det_box_head_ =
      register_module("det_box_head", torch::nn::Linear(d, dims_.A * 4));
}

SceneFeatures PlannerModelImpl::encode_scene(const torch::Tensor& raster) {
  TORCH_CHECK(raster.dim() == 4 && raster.size(1) == dims_.c_sem &&
                  raster.size(2) == dims_.in_h && raster.size(3) == dims_.in_w,
              "encode_scene: raster must be [B, c_sem, in_h, in_w]");
  auto x = torch::gelu(enc1_->forward(raster));
  x = torch::gelu(enc2_->forward(x));
  x = enc3_->forward(x);
  return {x, pos_enc_};
}

EgoTokens PlannerModelImpl::init_tokens(const torch::Tensor& ego_status) {
  TORCH_CHECK(ego_status.dim() == 2 && ego_status.size(1) == 3,
              "init_tokens: ego status must be [B, 3]");
  auto cond = ego_proj_->forward(ego_status).unsqueeze(1);  // [B, 1, d]
  auto q = base_tokens_.unsqueeze(0) + cond;                // [B, K*T, d]
  return {q, 0};
}

torch::Tensor PlannerModelImpl::decode_trajectory(const EgoTokens& tokens) {
  auto h = torch::gelu(traj_fc1_->forward(tokens.tokens));
  auto wp = traj_fc2_->forward(h);  // [B, K*T, 3]
  return wp.view({wp.size(0), dims_.K, dims_.T, 3});
}

torch::Tensor PlannerModelImpl::cross_attention_delta(
    const torch::Tensor& tokens_normed, const torch::Tensor& waypoints,
    const torch::Tensor& feature_map) {
  const auto B = tokens_normed.size(0);
  const auto P = tokens_normed.size(1);  // K*T
  const int H = dims_.heads;
  const int d = dims_.d;
  const int dh = d / H;
  const int S = 4;  // sample points per head

  // Reference points: the waypoint xy per token, plus learned per-head
  // offsets (meters).
  auto ref = waypoints.view({B, P, 3}).narrow(-1, 0, 2);       // [B, P, 2]
  auto offs = sample_offsets_.view({1, 1, H * S, 2});          // broadcast
  auto pts = ref.unsqueeze(2) + offs;                          // [B, P, H*S, 2]
  auto sampled = nn::sample_features_at(
      feature_map, pts.reshape({B, P * H * S, 2}), dims_.extent);
  sampled = sampled.view({B, P, H, S, d});

  // Per-head values from the sampled features, attention weights predicted
  // from the query token (deformable-attention style).
  auto values = cross_value_->forward(sampled);                   // [B,P,H,S,d]
  values = values.view({B, P, H, S, H, dh})
               .diagonal(/*offset=*/0, /*dim1=*/2, /*dim2=*/4)
               .permute({0, 1, 4, 2, 3});                         // [B,P,H,S,dh]
  auto weights = torch::softmax(
      cross_weights_->forward(tokens_normed).view({B, P, H, S}), -1);
  auto mixed = (values * weights.unsqueeze(-1)).sum(3);           // [B,P,H,dh]
  return cross_out_->forward(mixed.reshape({B, P, d}));
}

EgoTokens PlannerModelImpl::refiner_step(const EgoTokens& tokens,
                                         const torch::Tensor& waypoints,
                                         const SceneFeatures& scene) {
  auto x = tokens.tokens;
  x = x + nn::multihead_self_attention(ref_ln1_->forward(x), self_qkv_->weight,
                                       self_qkv_->bias, self_out_->weight,
                                       self_out_->bias, dims_.heads);
  auto positioned = scene.positional.defined()
                        ? scene.feature_map + scene.positional.unsqueeze(0)
                        : scene.feature_map;
  x = x + cross_attention_delta(ref_ln2_->forward(x), waypoints, positioned);
  x = x + ff2_->forward(torch::gelu(ff1_->forward(ref_ln3_->forward(x))));
  return {x, tokens.stage + 1};
}

PlannerScores PlannerModelImpl::score_heads(const EgoTokens& tokens,
                                            const SceneFeatures& scene) {
  const auto B = tokens.tokens.size(0);
  auto per_candidate =
      tokens.tokens.view({B, dims_.K, dims_.T, dims_.d}).mean(2);  // [B,K,d]
  auto global = tokens.tokens.mean(1);                             // [B,d]

  PlannerScores s;
  s.logits = score_fc2_->forward(torch::gelu(score_fc1_->forward(per_candidate)))
                 .squeeze(-1);
  s.validity = valid_head_->forward(global);
  s.agent_states =
      state_head_->forward(global).view({B, dims_.A, dims_.Ta, 2});
  s.area = area_head_->forward(global);
  auto gmap = global.unsqueeze(-1).unsqueeze(-1).expand(
      {B, dims_.d, dims_.bev_h, dims_.bev_w});
  auto positioned = scene.positional.defined()
                        ? scene.feature_map + scene.positional.unsqueeze(0)
                        : scene.feature_map;
  auto bev = bev_head_->forward(torch::cat({positioned, gmap}, 1));
  const int sc = dims_.sem_scale();
  // [B, c*s*s, h, w] -> [B, c, h*s, w*s]
  bev = bev.view({B, dims_.c_sem, sc, sc, dims_.bev_h, dims_.bev_w})
            .permute({0, 1, 4, 2, 5, 3})
            .reshape({B, dims_.c_sem, dims_.in_h, dims_.in_w});
  s.bev = bev;
  s.det_cls = det_cls_head_->forward(global);
  s.det_box = det_box_head_->forward(global).view({B, dims_.A, 4});
  return s;
}

PlanOutput PlannerModelImpl::plan(const torch::Tensor& raster,
                                  const torch::Tensor& ego_status) {
  PlanOutput out;
  out.scene = encode_scene(raster);
  EgoTokens q = init_tokens(ego_status);
  torch::Tensor tau = decode_trajectory(q);
  for (int l = 0; l < dims_.L; ++l) {
    q = refiner_step(q, tau, out.scene);
    tau = decode_trajectory(q);
    out.stage_trajectories.push_back(tau);
  }
  out.proposals = tau;
  out.final_tokens = q;
  out.scores = score_heads(q, out.scene);
  return out;
}

}  // namespace bevplan::planner
