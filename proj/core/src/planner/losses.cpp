#include "bevplan/planner/losses.hpp"

#include "bevplan/nn/common.hpp"

namespace bevplan::planner {

torch::Tensor loss_traj(const std::vector<torch::Tensor>& stage_trajectories,
                        const torch::Tensor& expert, const TrajLossConfig& cfg) {
  TORCH_CHECK(!stage_trajectories.empty(), "loss_traj: no stage trajectories");
  const auto L = static_cast<int>(stage_trajectories.size());
  auto total = torch::zeros({}, expert.options());
  for (int l = 1; l <= L; ++l) {
    const auto& tau = stage_trajectories[l - 1];  // [B, K, T, 3]
    const auto B = tau.size(0);
    const auto K = tau.size(1);
    const auto T = tau.size(2);
    auto err = (tau - expert.unsqueeze(1)).abs().sum({2, 3}) /
               static_cast<double>(T);  // [B, K] mean-over-T L1
    // Winner-take-all: select the argmin candidate per sample so gradients
    // only reach the winner.
    auto win = std::get<1>(err.min(1, /*keepdim=*/true));  // [B, 1]
    auto wta = err.gather(1, win).mean();

    auto stage = wta;
    if (cfg.lambda_div != 0.0 && K > 1) {
      auto endpoints = tau.select(2, T - 1).narrow(-1, 0, 2);  // [B, K, 2]
      auto diff = endpoints.unsqueeze(2) - endpoints.unsqueeze(1);
      auto dist = diff.pow(2).sum(-1).clamp_min(1e-12).sqrt();  // [B, K, K]
      auto hinge = (cfg.delta_div - dist).clamp_min(0.0);
      auto mask = 1.0 - torch::eye(K, tau.options());
      auto div = (hinge * mask).sum({1, 2}) /
                 static_cast<double>(K * (K - 1));
      stage = stage + cfg.lambda_div * div.mean();
    }
    total = total + std::pow(cfg.gamma, L - l) * stage;
  }
  return total;
}

torch::Tensor loss_score(const PlannerScores& scores, const ScoreTargets& targets,
                         const ScoreLossConfig& cfg) {
  TORCH_CHECK(scores.logits.sizes() == targets.pdm.sizes(),
              "loss_score: pdm target shape mismatch");
  TORCH_CHECK(scores.validity.sizes() == targets.validity.sizes(),
              "loss_score: validity shape mismatch");
  TORCH_CHECK(scores.agent_states.sizes() == targets.agent_states.sizes(),
              "loss_score: agent state shape mismatch");
  TORCH_CHECK(scores.area.sizes() == targets.area.sizes(),
              "loss_score: area shape mismatch");

  auto final_term = torch::binary_cross_entropy_with_logits(
      scores.logits, targets.pdm);
  auto valid_term = torch::binary_cross_entropy_with_logits(
      scores.validity, targets.validity);

  // L1 on key-agent states, valid entries only; zero when nothing is valid.
  auto mask = targets.validity.unsqueeze(-1).unsqueeze(-1);  // [B, A, 1, 1]
  auto l1 = (scores.agent_states - targets.agent_states).abs() * mask;
  auto denom = mask.sum() * scores.agent_states.size(2) *
               scores.agent_states.size(3);
  auto state_term = denom.item<double>() > 0.0
                        ? l1.sum() / denom
                        : torch::zeros({}, l1.options());

  auto area_term =
      torch::binary_cross_entropy_with_logits(scores.area, targets.area);

  return cfg.lambda_final * final_term + cfg.lambda_valid * valid_term +
         cfg.lambda_state * state_term + cfg.lambda_area * area_term;
}

torch::Tensor loss_aux(const PlannerScores& scores, const AuxTargets& targets,
                       const AuxLossConfig& cfg) {
  TORCH_CHECK(scores.bev.sizes() == targets.bev.sizes(),
              "loss_aux: bev shape mismatch");
  TORCH_CHECK(scores.det_cls.sizes() == targets.det_cls.sizes(),
              "loss_aux: det_cls shape mismatch");
  TORCH_CHECK(scores.det_box.sizes() == targets.det_box.sizes(),
              "loss_aux: det_box shape mismatch");

  auto bev_term = nn::bce_logits_channel_sum(scores.bev, targets.bev);
  auto cls_term = nn::sigmoid_focal_loss(scores.det_cls, targets.det_cls,
                                         cfg.focal_alpha, cfg.focal_gamma,
                                         /*alpha_balance=*/true,
                                         /*channel_dim=*/1);
  auto mask = targets.det_cls.unsqueeze(-1);  // [B, A, 1]
  auto l1 = (scores.det_box - targets.det_box).abs() * mask;
  auto denom = mask.sum() * scores.det_box.size(2);
  auto box_term = denom.item<double>() > 0.0 ? l1.sum() / denom
                                             : torch::zeros({}, l1.options());

  return cfg.lambda_bev * bev_term + cfg.lambda_cls * cls_term +
         cfg.lambda_box * box_term;
}

}  // namespace bevplan::planner
