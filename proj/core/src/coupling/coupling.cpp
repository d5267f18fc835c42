#include "bevplan/coupling/coupling.hpp"

#include <stdexcept>

namespace bevplan::coupling {

void CouplingConfig::validate() const {
  TORCH_CHECK(use_world_model || !inject_ego_tokens,
              "CouplingConfig: ego token injection requires the world model");
  TORCH_CHECK(lambda_im >= 0.0 && lambda_sim >= 0.0 && lambda_align >= 0.0 &&
                  wm_loss.lambda_cur >= 0.0 && wm_loss.lambda_fut >= 0.0,
              "CouplingConfig: loss weights must be non-negative");
  TORCH_CHECK(mlp_reward_dims.size() == 4 && mlp_reward_dims.back() == 6,
              "CouplingConfig: mlp_reward_dims must be [in, h1, h2, 6]");
}

StateInjectorImpl::StateInjectorImpl(int d) {
  fc1_ = register_module("fc1", torch::nn::Linear(d, d));
  fc2_ = register_module("fc2", torch::nn::Linear(d, d));
}

torch::Tensor StateInjectorImpl::project(const torch::Tensor& token) {
  return fc2_->forward(torch::gelu(fc1_->forward(token)));
}

torch::Tensor StateInjectorImpl::forward(
    const torch::Tensor& final_tokens, int K, int T,
    const std::vector<int>& iteration_waypoints) {
  const auto B = final_tokens.size(0);
  const auto d = final_tokens.size(2);
  auto q_plan = final_tokens.view({B, K, T, d});
  std::vector<torch::Tensor> per_iter;
  per_iter.reserve(iteration_waypoints.size());
  for (int t_i : iteration_waypoints) {
    TORCH_CHECK(t_i >= 0 && t_i < T, "inject_ego_token: timestep out of range");
    per_iter.push_back(project(q_plan.select(2, t_i)));  // [B, K, d]
  }
  if (per_iter.empty()) {
    return torch::zeros({B, 0, K, d}, final_tokens.options());
  }
  return torch::stack(per_iter, 1);  // [B, N, K, d]
}

MlpRewardPredictorImpl::MlpRewardPredictorImpl(int T, const std::vector<int>& dims) {
  TORCH_CHECK(dims.size() == 4, "mlp_reward_dims must have 4 entries");
  embed_ = register_module("embed", torch::nn::Linear(T * 3 + 3, dims[0]));
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    fcs_.push_back(torch::nn::Linear(dims[i], dims[i + 1]));
    register_module("fc" + std::to_string(i), fcs_.back());
  }
}

torch::Tensor MlpRewardPredictorImpl::embed(const torch::Tensor& proposals,
                                            const torch::Tensor& ego_status) {
  const auto B = proposals.size(0);
  const auto K = proposals.size(1);
  auto flat = proposals.reshape({B, K, -1});
  auto ego = ego_status.unsqueeze(1).expand({B, K, 3});
  return embed_->forward(torch::cat({flat, ego}, -1));
}

torch::Tensor MlpRewardPredictorImpl::predict(const torch::Tensor& token) {
  auto x = token;
  for (std::size_t i = 0; i < fcs_.size(); ++i) {
    x = fcs_[i]->forward(x);
    if (i + 1 < fcs_.size()) {
      x = torch::gelu(x);
    }
  }
  return x;
}

torch::Tensor loss_align(const torch::Tensor& planner_logits,
                         const torch::Tensor& rewards) {
  auto r = rewards.detach();
  auto mn = std::get<0>(r.min(-1, /*keepdim=*/true));
  auto mx = std::get<0>(r.max(-1, /*keepdim=*/true));
  auto span = mx - mn;
  auto normalized = torch::where(span > 1e-12, (r - mn) / span.clamp_min(1e-12),
                                 torch::full_like(r, 0.5));
  auto diff = torch::sigmoid(planner_logits) - normalized;
  return diff.pow(2).mean();
}

torch::Tensor total_loss(const PartialLosses& partials,
                         const CouplingConfig& cfg) {
  auto check = [](const torch::Tensor& t, const char* name) {
    TORCH_CHECK(t.defined(), "total_loss: missing partial loss ", name);
    TORCH_CHECK(torch::isfinite(t).all().item<bool>(),
                "total_loss: non-finite partial loss '", name, "'");
  };
  check(partials.traj, "traj");
  check(partials.score, "score");
  check(partials.aux, "aux");
  check(partials.im, "im");
  check(partials.sim, "sim");
  check(partials.align, "align");
  auto reward = cfg.lambda_im * partials.im + cfg.lambda_sim * partials.sim +
                cfg.lambda_align * partials.align;
  auto total = partials.traj + partials.score + reward + partials.aux;
  if (cfg.use_world_model) {
    check(partials.wm, "wm");
    total = total + partials.wm;  // lambda_cur/lambda_fut applied inside
  }
  return total;
}

CoupledModelImpl::CoupledModelImpl(const nn::ModelDims& dims,
                                   const CouplingConfig& cfg)
    : dims_(dims), cfg_(cfg) {
  cfg_.validate();
  planner_ = register_module("planner", planner::PlannerModel(dims_));
  if (cfg_.use_world_model) {
    world_model_ = register_module("world_model", wm::WorldModel(dims_));
    injector_ = register_module("injector", StateInjector(dims_.d));
  } else {
    mlp_ = register_module("mlp_reward",
                           MlpRewardPredictor(dims_.T, cfg_.mlp_reward_dims));
  }
}

std::vector<int> CoupledModelImpl::iteration_waypoints() const {
  std::vector<int> out;
  out.reserve(dims_.wm_n);
  for (int i = 0; i < dims_.wm_n; ++i) {
    out.push_back(dims_.iteration_waypoint(i));
  }
  return out;
}

CoupledModelImpl::Outputs CoupledModelImpl::forward(
    const torch::Tensor& raster, const torch::Tensor& ego_status) {
  Outputs out;
  out.plan = planner_->plan(raster, ego_status);

  // Stop-gradient boundary on every ego -> environment interface when the
  // proactive gradient is severed.
  auto proposals_env = cfg_.proactive_gradient ? out.plan.proposals
                                               : out.plan.proposals.detach();

  if (cfg_.use_world_model) {
    auto tokens_env = cfg_.proactive_gradient
                          ? out.plan.final_tokens.tokens
                          : out.plan.final_tokens.tokens.detach();
    auto b0 = world_model_->encode_initial_bev(raster);
    auto a0 = world_model_->encode_action_token(proposals_env, ego_status);
    torch::Tensor ego_tokens;
    if (cfg_.inject_ego_tokens) {
      ego_tokens = injector_->forward(tokens_env, dims_.K, dims_.T,
                                      iteration_waypoints());
    } else {
      ego_tokens = torch::zeros({raster.size(0), dims_.wm_n, dims_.K, dims_.d},
                                raster.options());
    }
    out.rollout = world_model_->rollout(b0, a0, ego_tokens, dims_.wm_n);
    auto heads = world_model_->reward_heads(out.rollout);
    out.imit_logits = heads.imit_logits;
    out.sim_logits = heads.sim_logits;
    out.r_im = heads.r_im;
    out.r_sim = heads.r_sim;
    out.rewards = wm::aggregate_reward(out.r_im, out.r_sim, cfg_.reward_weights);
    out.selected = wm::select_candidate(out.rewards);

    out.current_semantic = world_model_->decode_semantic(b0);
    if (dims_.wm_n > 0) {
      auto final_bev = out.rollout.bev_states.back();  // [B, K, hw, d]
      const auto B = final_bev.size(0);
      std::vector<torch::Tensor> picked;
      picked.reserve(B);
      for (std::int64_t b = 0; b < B; ++b) {
        picked.push_back(final_bev[b][out.selected[b]]);
      }
      out.future_semantic = world_model_->decode_semantic(torch::stack(picked, 0));
    }
  } else {
    auto token = mlp_->embed(proposals_env, ego_status);
    auto logits6 = mlp_->predict(token);  // [B, K, 6]
    out.imit_logits = logits6.select(-1, 0);
    out.sim_logits = logits6.narrow(-1, 1, 5);
    out.r_im = torch::softmax(out.imit_logits, -1);
    out.r_sim = torch::sigmoid(out.sim_logits);
    out.rewards = wm::aggregate_reward(out.r_im, out.r_sim, cfg_.reward_weights);
    out.selected = wm::select_candidate(out.rewards);
  }
  return out;
}

wm::RolloutOutput CoupledModelImpl::rollout_fixed(
    const torch::Tensor& raster, const torch::Tensor& proposals,
    const torch::Tensor& ego_status, const torch::Tensor& final_tokens) {
  TORCH_CHECK(cfg_.use_world_model, "rollout_fixed requires the world model");
  auto b0 = world_model_->encode_initial_bev(raster);
  auto a0 = world_model_->encode_action_token(proposals, ego_status);
  torch::Tensor ego_tokens;
  if (cfg_.inject_ego_tokens) {
    ego_tokens =
        injector_->forward(final_tokens, dims_.K, dims_.T, iteration_waypoints());
  } else {
    ego_tokens = torch::zeros({raster.size(0), dims_.wm_n, dims_.K, dims_.d},
                              raster.options());
  }
  return world_model_->rollout(b0, a0, ego_tokens, dims_.wm_n);
}

std::vector<std::string> CoupledModelImpl::ego_parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : named_parameters()) {
    if (p.key().rfind("planner.", 0) == 0) {
      out.push_back(p.key());
    }
  }
  return out;
}

std::vector<std::string> CoupledModelImpl::env_parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : named_parameters()) {
    if (p.key().rfind("planner.", 0) != 0) {
      out.push_back(p.key());
    }
  }
  return out;
}

}  // namespace bevplan::coupling
