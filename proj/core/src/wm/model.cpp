#include "bevplan/wm/model.hpp"

namespace bevplan::wm {

WorldModelImpl::WorldModelImpl(const nn::ModelDims& dims) : dims_(dims) {
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
  action_fc1_ = register_module(
      "action_fc1", torch::nn::Linear(dims_.T * 3 + 3, d));
  action_fc2_ = register_module("action_fc2", torch::nn::Linear(d, d));
  pos_scene_ = register_parameter(
      "pos_scene", torch::randn({dims_.seq_len(), d}) * 0.02);
  for (int i = 0; i < dims_.wm_layers; ++i) {
    layers_.push_back(nn::TransformerEncoderLayer(d, dims_.heads, dims_.ff_mult));
    register_module("layer" + std::to_string(i), layers_.back());
  }
  const int s2 = dims_.sem_scale() * dims_.sem_scale();
  sem_head_ = register_module("sem_head", torch::nn::Linear(d, dims_.c_sem * s2));
  imit_fc1_ = register_module("imit_fc1", torch::nn::Linear(3 * d, d));
  imit_fc2_ = register_module("imit_fc2", torch::nn::Linear(d, 1));
  sim_fc1_ = register_module("sim_fc1", torch::nn::Linear(3 * d, d));
  sim_fc2_ = register_module("sim_fc2", torch::nn::Linear(d, 5));
}

torch::Tensor WorldModelImpl::encode_initial_bev(const torch::Tensor& raster) {
  TORCH_CHECK(raster.dim() == 4 && raster.size(1) == dims_.c_sem &&
                  raster.size(2) == dims_.in_h && raster.size(3) == dims_.in_w,
              "encode_initial_bev: raster must be [B, c_sem, in_h, in_w]");
  auto x = torch::gelu(enc1_->forward(raster));
  x = torch::gelu(enc2_->forward(x));
  x = enc3_->forward(x);  // [B, d, h, w]
  return x.flatten(2).transpose(1, 2);  // [B, hw, d]
}

torch::Tensor WorldModelImpl::encode_action_token(const torch::Tensor& proposals,
                                                  const torch::Tensor& ego_status) {
  const auto B = proposals.size(0);
  const auto K = proposals.size(1);
  auto flat = proposals.reshape({B, K, dims_.T * 3});
  auto ego = ego_status.unsqueeze(1).expand({B, K, 3});
  auto x = torch::cat({flat, ego}, -1);
  return action_fc2_->forward(torch::gelu(action_fc1_->forward(x)));
}

torch::Tensor WorldModelImpl::wm_step(const torch::Tensor& seq) {
  TORCH_CHECK(seq.dim() == 3 && seq.size(1) == dims_.seq_len(),
              "wm_step: sequence must be [*, hw+2, d]");
  auto x = seq + pos_scene_.unsqueeze(0);
  for (auto& layer : layers_) {
    x = layer->forward(x);
  }
  return x;
}

RolloutOutput WorldModelImpl::rollout(const torch::Tensor& initial_bev,
                                      const torch::Tensor& action_tokens,
                                      const torch::Tensor& ego_tokens,
                                      int n_iterations) {
  const auto B = action_tokens.size(0);
  const auto K = action_tokens.size(1);
  const auto hw = dims_.bev_cells();
  const auto d = dims_.d;

  RolloutOutput out;
  // Candidates share B0 but evolve independent sequences.
  auto bev = initial_bev.unsqueeze(1).expand({B, K, hw, d}).reshape({B * K, hw, d});
  auto act = action_tokens.reshape({B * K, 1, d});
  out.bev_states.push_back(bev.view({B, K, hw, d}));
  out.action_tokens.push_back(act.view({B, K, d}));

  for (int i = 0; i < n_iterations; ++i) {
    auto ego_tok = ego_tokens.select(1, i).reshape({B * K, 1, d});
    auto seq = torch::cat({act, ego_tok, bev}, 1);  // [B*K, hw+2, d]
    auto next = wm_step(seq);
    act = next.narrow(1, 0, 1);
    auto enriched = next.narrow(1, 1, 1);
    bev = next.narrow(1, 2, hw);
    out.action_tokens.push_back(act.view({B, K, d}));
    out.enriched_states.push_back(enriched.view({B, K, d}));
    out.bev_states.push_back(bev.view({B, K, hw, d}));
  }
  return out;
}

RewardHeadsOutput WorldModelImpl::reward_heads(const RolloutOutput& rollout) {
  TORCH_CHECK(!rollout.action_tokens.empty(), "reward_heads: empty rollout");
  auto mean_of = [](const std::vector<torch::Tensor>& xs) {
    auto acc = xs.front();
    for (std::size_t i = 1; i < xs.size(); ++i) {
      acc = acc + xs[i];
    }
    return acc / static_cast<double>(xs.size());
  };
  auto act = mean_of(rollout.action_tokens);  // [B, K, d]
  std::vector<torch::Tensor> pooled;
  pooled.reserve(rollout.bev_states.size());
  for (const auto& b : rollout.bev_states) {
    pooled.push_back(b.mean(2));  // [B, K, d]
  }
  auto bev = mean_of(pooled);
  auto enriched = rollout.enriched_states.empty()
                      ? torch::zeros_like(act)
                      : mean_of(rollout.enriched_states);
  auto rep = torch::cat({act, bev, enriched}, -1);  // [B, K, 3d]

  RewardHeadsOutput heads;
  heads.imit_logits =
      imit_fc2_->forward(torch::gelu(imit_fc1_->forward(rep))).squeeze(-1);
  heads.sim_logits = sim_fc2_->forward(torch::gelu(sim_fc1_->forward(rep)));
  heads.r_im = torch::softmax(heads.imit_logits, -1);
  heads.r_sim = torch::sigmoid(heads.sim_logits);
  return heads;
}

torch::Tensor WorldModelImpl::decode_semantic(const torch::Tensor& bev_tokens) {
  const bool per_candidate = bev_tokens.dim() == 4;
  auto x = per_candidate
               ? bev_tokens.reshape({-1, dims_.bev_cells(), dims_.d})
               : bev_tokens;
  const auto B = x.size(0);
  const int sc = dims_.sem_scale();
  auto logits = sem_head_->forward(x);  // [B, hw, c*s*s]
  auto maps = logits.view({B, dims_.bev_h, dims_.bev_w, dims_.c_sem, sc, sc})
                  .permute({0, 3, 1, 4, 2, 5})
                  .reshape({B, dims_.c_sem, dims_.in_h, dims_.in_w});
  if (per_candidate) {
    return maps.view({bev_tokens.size(0), bev_tokens.size(1), dims_.c_sem,
                      dims_.in_h, dims_.in_w});
  }
  return maps;
}

torch::Tensor aggregate_reward(const torch::Tensor& r_im,
                               const torch::Tensor& r_sim,
                               const RewardWeights& w) {
  TORCH_CHECK(w.w0 >= 0.0 && w.w1 >= 0.0 && w.w2 >= 0.0 && w.w3 >= 0.0,
              "aggregate_reward: weights must be non-negative");
  auto clamp_log = [&](const torch::Tensor& x) {
    return torch::log(x.clamp_min(w.log_clamp));
  };
  auto nc = r_sim.select(-1, 0);
  auto dac = r_sim.select(-1, 1);
  auto ttc = r_sim.select(-1, 2);
  auto comfort = r_sim.select(-1, 3);
  auto ep = r_sim.select(-1, 4);
  auto combo = 5.0 * ttc + 2.0 * comfort + 5.0 * ep;
  return w.w0 * clamp_log(r_im) + w.w1 * clamp_log(nc) + w.w2 * clamp_log(dac) +
         w.w3 * clamp_log(combo);
}

std::vector<std::int64_t> select_candidate(const torch::Tensor& rewards) {
  return nn::argmax_lowest_index(rewards);
}

torch::Tensor loss_im(const torch::Tensor& imit_logits,
                      const torch::Tensor& proposals,
                      const torch::Tensor& expert) {
  const auto B = proposals.size(0);
  const auto K = proposals.size(1);
  auto diff = (proposals.detach() - expert.unsqueeze(1))
                  .reshape({B, K, -1});
  auto dist = diff.pow(2).sum(-1).sqrt();          // [B, K]
  auto q = torch::softmax(-dist, -1);              // soft target, detached
  auto logp = torch::log_softmax(imit_logits, -1);
  return -(q * logp).sum(-1).mean();
}

torch::Tensor loss_sim(const torch::Tensor& sim_logits,
                       const torch::Tensor& anchor_targets) {
  TORCH_CHECK(sim_logits.sizes() == anchor_targets.sizes(),
              "loss_sim: target shape mismatch");
  return torch::binary_cross_entropy_with_logits(sim_logits, anchor_targets);
}

torch::Tensor loss_wm(const torch::Tensor& cur_logits,
                      const torch::Tensor& fut_logits,
                      const torch::Tensor& cur_target,
                      const torch::Tensor& fut_target, const WmLossConfig& cfg) {
  auto total = cfg.lambda_cur * nn::sigmoid_focal_loss(cur_logits, cur_target,
                                                       cfg.focal_alpha,
                                                       cfg.focal_gamma,
                                                       cfg.alpha_balance);
  if (fut_logits.defined()) {
    TORCH_CHECK(fut_target.defined(), "loss_wm: future target missing");
    total = total + cfg.lambda_fut * nn::sigmoid_focal_loss(
                        fut_logits, fut_target, cfg.focal_alpha,
                        cfg.focal_gamma, cfg.alpha_balance);
  }
  return total;
}

}  // namespace bevplan::wm
