#pragma once

#include <torch/torch.h>

namespace bevplan::nn {

// Pre-LN transformer encoder layer with scaled-dot-product self-attention
// and a GELU feed-forward block. No masking, no dropout.
class TransformerEncoderLayerImpl : public torch::nn::Module {
 public:
  TransformerEncoderLayerImpl(int dim, int heads, int ff_mult);

  torch::Tensor forward(const torch::Tensor& x);  // [B, S, d]

 private:
  torch::nn::LayerNorm ln1_{nullptr}, ln2_{nullptr};
  torch::nn::Linear qkv_{nullptr}, out_{nullptr}, ff1_{nullptr}, ff2_{nullptr};
  int heads_;
};
TORCH_MODULE(TransformerEncoderLayer);

// Multi-head self-attention used standalone (token refinement).
torch::Tensor multihead_self_attention(const torch::Tensor& x,
                                       const torch::Tensor& qkv_weight,
                                       const torch::Tensor& qkv_bias,
                                       const torch::Tensor& out_weight,
                                       const torch::Tensor& out_bias, int heads);

// Bilinear sample of a feature map at world-frame points.
//   features: [B, d, H, W] covering a square extent centered on the origin
//   points:   [B, P, 2] world (x, y) in meters
// Outside the extent samples are zero.
torch::Tensor sample_features_at(const torch::Tensor& features,
                                 const torch::Tensor& points, double extent);

// Per-element sigmoid focal loss, summed over the channel dim and averaged
// over everything else. gamma = 0 with alpha_balance = false reduces exactly
// to binary cross-entropy under the same reduction.
torch::Tensor sigmoid_focal_loss(const torch::Tensor& logits,
                                 const torch::Tensor& targets, double alpha,
                                 double gamma, bool alpha_balance,
                                 int channel_dim = 1);

// Binary cross-entropy with logits under the focal reduction (sum over the
// channel dim, mean elsewhere). Reference for the focal degeneracy check.
torch::Tensor bce_logits_channel_sum(const torch::Tensor& logits,
                                     const torch::Tensor& targets,
                                     int channel_dim = 1);

// Lowest-index argmax over the last dim (the tie-breaking contract).
std::vector<std::int64_t> argmax_lowest_index(const torch::Tensor& scores);

}  // namespace bevplan::nn
