#include "bevplan/nn/common.hpp"

#include <cmath>

namespace bevplan::nn {

TransformerEncoderLayerImpl::TransformerEncoderLayerImpl(int dim, int heads,
                                                         int ff_mult)
    : heads_(heads) {
  TORCH_CHECK(dim % heads == 0, "dim must be divisible by heads");
  ln1_ = register_module("ln1", torch::nn::LayerNorm(torch::nn::LayerNormOptions(
                                    {static_cast<std::int64_t>(dim)})));
  ln2_ = register_module("ln2", torch::nn::LayerNorm(torch::nn::LayerNormOptions(
                                    {static_cast<std::int64_t>(dim)})));
  qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  out_ = register_module("out", torch::nn::Linear(dim, dim));
  ff1_ = register_module("ff1", torch::nn::Linear(dim, ff_mult * dim));
  ff2_ = register_module("ff2", torch::nn::Linear(ff_mult * dim, dim));
}

torch::Tensor TransformerEncoderLayerImpl::forward(const torch::Tensor& x) {
  auto h = ln1_->forward(x);
  h = multihead_self_attention(h, qkv_->weight, qkv_->bias, out_->weight,
                               out_->bias, heads_);
  auto y = x + h;
  auto f = ff2_->forward(torch::gelu(ff1_->forward(ln2_->forward(y))));
  return y + f;
}

torch::Tensor multihead_self_attention(const torch::Tensor& x,
                                       const torch::Tensor& qkv_weight,
                                       const torch::Tensor& qkv_bias,
                                       const torch::Tensor& out_weight,
                                       const torch::Tensor& out_bias, int heads) {
  const auto B = x.size(0);
  const auto S = x.size(1);
  const auto d = x.size(2);
  const auto dh = d / heads;
  auto qkv = torch::linear(x, qkv_weight, qkv_bias)
                 .view({B, S, 3, heads, dh})
                 .permute({2, 0, 3, 1, 4});  // [3, B, H, S, dh]
  auto attn = at::scaled_dot_product_attention(qkv[0], qkv[1], qkv[2]);
  auto y = attn.transpose(1, 2).reshape({B, S, d});
  return torch::linear(y, out_weight, out_bias);
}

torch::Tensor sample_features_at(const torch::Tensor& features,
                                 const torch::Tensor& points, double extent) {
  const auto B = features.size(0);
  const auto P = points.size(1);
  // World (x, y) -> normalized grid coords in [-1, 1]; align_corners=false
  // puts cell centers at ((2i + 1) / n) - 1, matching the raster layout
  // (x indexes columns, y indexes rows).
  auto grid = (points * (2.0 / extent)).view({B, P, 1, 2});
  auto sampled = torch::nn::functional::grid_sample(
      features, grid,
      torch::nn::functional::GridSampleFuncOptions()
          .mode(torch::kBilinear)
          .padding_mode(torch::kZeros)
          .align_corners(false));  // [B, d, P, 1]
  return sampled.squeeze(-1).transpose(1, 2);  // [B, P, d]
}

torch::Tensor sigmoid_focal_loss(const torch::Tensor& logits,
                                 const torch::Tensor& targets, double alpha,
                                 double gamma, bool alpha_balance,
                                 int channel_dim) {
  auto ce = torch::binary_cross_entropy_with_logits(
      logits, targets, {}, {}, torch::Reduction::None);  // = -log(p_t)
  auto p = torch::sigmoid(logits);
  auto p_t = p * targets + (1.0 - p) * (1.0 - targets);
  auto loss = ce * torch::pow(1.0 - p_t, gamma);
  if (alpha_balance) {
    auto alpha_t = alpha * targets + (1.0 - alpha) * (1.0 - targets);
    loss = loss * alpha_t;
  }
  return loss.sum(channel_dim).mean();
}

torch::Tensor bce_logits_channel_sum(const torch::Tensor& logits,
                                     const torch::Tensor& targets,
                                     int channel_dim) {
  auto ce = torch::binary_cross_entropy_with_logits(
      logits, targets, {}, {}, torch::Reduction::None);
  return ce.sum(channel_dim).mean();
}

std::vector<std::int64_t> argmax_lowest_index(const torch::Tensor& scores) {
  auto s = scores.detach().to(torch::kFloat64).contiguous();
  TORCH_CHECK(s.dim() == 2, "argmax_lowest_index expects [B, K]");
  const auto B = s.size(0);
  const auto K = s.size(1);
  std::vector<std::int64_t> out(B);
  auto acc = s.accessor<double, 2>();
  for (std::int64_t b = 0; b < B; ++b) {
    double best = acc[b][0];
    std::int64_t best_k = 0;
    for (std::int64_t k = 1; k < K; ++k) {
      if (acc[b][k] > best) {
        best = acc[b][k];
        best_k = k;
      }
    }
    out[b] = best_k;
  }
  return out;
}

}  // namespace bevplan::nn
