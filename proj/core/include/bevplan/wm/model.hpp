#pragma once

#include <torch/torch.h>

#include <vector>

#include "bevplan/nn/common.hpp"
#include "bevplan/nn/dims.hpp"

namespace bevplan::wm {

struct BevState {
  torch::Tensor features;  // [B, K, hw, d] per-candidate BEV tokens
  int iteration = 0;
};

// Per-candidate rollout results: bev_states/action_tokens hold iterations
// 0..N, enriched_states holds iterations 0..N-1.
struct RolloutOutput {
  std::vector<torch::Tensor> bev_states;       // each [B, K, hw, d]
  std::vector<torch::Tensor> action_tokens;    // each [B, K, d]
  std::vector<torch::Tensor> enriched_states;  // each [B, K, d]
};

struct RewardHeadsOutput {
  torch::Tensor imit_logits;  // [B, K]
  torch::Tensor sim_logits;   // [B, K, 5] (NC, DAC, TTC, C, EP)
  torch::Tensor r_im;         // softmax over K
  torch::Tensor r_sim;        // sigmoid
};

// Recurrent BEV world model: a raster encoder for the initial state, an
// action-token encoder over trajectory geometry and ego kinematics, a
// shared transformer encoder applied per iteration over the
// [action; ego-token; BEV] sequence, semantic decoding, and the two reward
// heads over the aggregated rollout representation.
class WorldModelImpl : public torch::nn::Module {
 public:
  explicit WorldModelImpl(const nn::ModelDims& dims);

  // [B, c_sem, in_h, in_w] -> [B, hw, d] initial BEV tokens.
  torch::Tensor encode_initial_bev(const torch::Tensor& raster);

  // [B, K, T, 3] + [B, 3] -> [B, K, d].
  torch::Tensor encode_action_token(const torch::Tensor& proposals,
                                    const torch::Tensor& ego_status);

  // One world-model step over a [*, hw+2, d] sequence; adds the learned
  // positional embedding, preserves length, and returns the full output
  // sequence (callers slice at the fixed boundaries 0 / 1 / 2..).
  torch::Tensor wm_step(const torch::Tensor& seq);

  // Iterates wm_step N times per candidate. ego_tokens is [B, N, K, d]
  // (zeros when injection is disabled); pass N = 0 for the degenerate
  // horizon where only iteration-0 quantities exist.
  RolloutOutput rollout(const torch::Tensor& initial_bev,
                        const torch::Tensor& action_tokens,
                        const torch::Tensor& ego_tokens, int n_iterations);

  RewardHeadsOutput reward_heads(const RolloutOutput& rollout);

  // [B, K, hw, d] (or [B, hw, d]) BEV tokens -> [B(, K), c_sem, in_h, in_w]
  // semantic logits; each token decodes its sem_scale^2 sub-cells.
  torch::Tensor decode_semantic(const torch::Tensor& bev_tokens);

  const nn::ModelDims& dims() const { return dims_; }

 private:
  nn::ModelDims dims_;
  torch::nn::Conv2d enc1_{nullptr}, enc2_{nullptr}, enc3_{nullptr};
  torch::nn::Linear action_fc1_{nullptr}, action_fc2_{nullptr};
  torch::Tensor pos_scene_;  // [hw+2, d]
  std::vector<nn::TransformerEncoderLayer> layers_;
  torch::nn::Linear sem_head_{nullptr};
  torch::nn::Linear imit_fc1_{nullptr}, imit_fc2_{nullptr};
  torch::nn::Linear sim_fc1_{nullptr}, sim_fc2_{nullptr};
};
TORCH_MODULE(WorldModel);

struct RewardWeights {
  double w0 = 1.0;  // imitation
  double w1 = 1.0;  // NC
  double w2 = 1.0;  // DAC
  double w3 = 1.0;  // 5 TTC + 2 C + 5 EP
  double log_clamp = 1e-4;
};

// R^k = w0 log r_im + w1 log NC + w2 log DAC + w3 log(5 TTC + 2 C + 5 EP),
// every log argument clamped below at log_clamp. Negative weights rejected.
torch::Tensor aggregate_reward(const torch::Tensor& r_im,
                               const torch::Tensor& r_sim,
                               const RewardWeights& w);

// Argmax with lowest-index tie-breaking.
std::vector<std::int64_t> select_candidate(const torch::Tensor& rewards);

// Cross-entropy between the expert-distance softmax target
// q = softmax(-||tau_k - tau*||_2) and the imitation head.
torch::Tensor loss_im(const torch::Tensor& imit_logits,
                      const torch::Tensor& proposals,
                      const torch::Tensor& expert);

// Per-candidate, per-subscore BCE against precomputed targets gathered from
// each proposal's nearest anchor.
torch::Tensor loss_sim(const torch::Tensor& sim_logits,
                       const torch::Tensor& anchor_targets);

struct WmLossConfig {
  double lambda_cur = 1.0;
  double lambda_fut = 1.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  bool alpha_balance = true;
};

// lambda_cur * Focal(current) + lambda_fut * Focal(future). Pass an
// undefined future tensor to drop that term (N = 0 horizons).
torch::Tensor loss_wm(const torch::Tensor& cur_logits,
                      const torch::Tensor& fut_logits,
                      const torch::Tensor& cur_target,
                      const torch::Tensor& fut_target, const WmLossConfig& cfg);

}  // namespace bevplan::wm
