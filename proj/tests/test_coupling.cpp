#include <doctest.h>
#include <torch/torch.h>

#include "bevplan/coupling/coupling.hpp"
#include "support/gradcheck.hpp"
#include "support/toy.hpp"

using namespace bevplan;
using testing::toy_dims;
using testing::toy_ego;
using testing::toy_raster;

namespace {

coupling::CouplingConfig toy_coupling() {
  coupling::CouplingConfig cfg;
  cfg.mlp_reward_dims = {8, 16, 16, 6};
  return cfg;
}

coupling::CoupledModel make_model(const coupling::CouplingConfig& cfg,
                                  unsigned seed = 0) {
  torch::manual_seed(seed);
  coupling::CoupledModel model(toy_dims(), cfg);
  model->to(torch::kFloat64);
  return model;
}

// Random targets with the right shapes for the toy model.
struct ToyTargets {
  planner::ScoreTargets score;
  planner::AuxTargets aux;
  torch::Tensor expert;
  torch::Tensor sim_targets;
  torch::Tensor cur_sem;
  torch::Tensor fut_sem;
};

ToyTargets toy_targets(const nn::ModelDims& dims, int B = 1) {
  ToyTargets t;
  t.score.pdm = torch::rand({B, dims.K}, torch::kFloat64);
  t.score.validity = torch::randint(0, 2, {B, dims.A}, torch::kFloat64);
  t.score.agent_states = torch::randn({B, dims.A, dims.Ta, 2}, torch::kFloat64);
  t.score.area =
      torch::randint(0, 2, {B, dims.bev_h * dims.bev_w}, torch::kFloat64);
  t.aux.bev =
      torch::randint(0, 2, {B, dims.c_sem, dims.in_h, dims.in_w}, torch::kFloat64);
  t.aux.det_cls = torch::randint(0, 2, {B, dims.A}, torch::kFloat64);
  t.aux.det_box = torch::randn({B, dims.A, 4}, torch::kFloat64);
  t.expert = torch::randn({B, dims.T, 3}, torch::kFloat64);
  t.sim_targets = torch::rand({B, dims.K, 5}, torch::kFloat64);
  t.cur_sem =
      torch::randint(0, 2, {B, dims.c_sem, dims.in_h, dims.in_w}, torch::kFloat64);
  t.fut_sem =
      torch::randint(0, 2, {B, dims.c_sem, dims.in_h, dims.in_w}, torch::kFloat64);
  return t;
}

coupling::PartialLosses compute_toy_losses(coupling::CoupledModel& model,
                                           const coupling::CoupledModelImpl::Outputs& out,
                                           const ToyTargets& t,
                                           const coupling::CouplingConfig& cfg) {
  coupling::PartialLosses p;
  p.traj = planner::loss_traj(out.plan.stage_trajectories, t.expert, cfg.traj_loss);
  p.score = planner::loss_score(out.plan.scores, t.score, cfg.score_loss);
  p.aux = planner::loss_aux(out.plan.scores, t.aux, cfg.aux_loss);
  p.im = wm::loss_im(out.imit_logits, out.plan.proposals, t.expert);
  p.sim = wm::loss_sim(out.sim_logits, t.sim_targets);
  auto align_logits = cfg.proactive_gradient
                          ? out.plan.scores.logits
                          : out.plan.scores.logits.detach();
  p.align = coupling::loss_align(align_logits, out.rewards);
  if (cfg.use_world_model) {
    p.wm = wm::loss_wm(out.current_semantic, out.future_semantic, t.cur_sem,
                       t.fut_sem, cfg.wm_loss);
  }
  return p;
}

}  // namespace

TEST_CASE("state injector") {
  torch::manual_seed(1);
  const auto dims = toy_dims();
  coupling::StateInjector inj(dims.d);
  inj->to(torch::kFloat64);

  SUBCASE("zero projection weights give zero tokens") {
    {
      torch::NoGradGuard g;
      for (auto& p : inj->parameters()) {
        p.zero_();
      }
    }
    auto q = torch::randn({1, dims.K * dims.T, dims.d}, torch::kFloat64);
    auto out = inj->forward(q, dims.K, dims.T, {1, 3});
    CHECK(out.abs().max().item<double>() == 0.0);
  }

  SUBCASE("identical planner rows give identical injected tokens") {
    auto q = torch::randn({1, dims.K * dims.T, dims.d}, torch::kFloat64);
    auto qp = q.view({1, dims.K, dims.T, dims.d});
    {
      torch::NoGradGuard g;
      qp[0][1][3] = qp[0][0][3];
    }
    auto out = inj->forward(q, dims.K, dims.T, {3});
    CHECK(torch::equal(out[0][0][0], out[0][0][1]));
  }

  SUBCASE("gradient localizes to the selected row") {
    auto q = torch::randn({1, dims.K * dims.T, dims.d}, torch::kFloat64)
                 .requires_grad_(true);
    const int t_i = 2;
    auto fn = [&] { return inj->forward(q, dims.K, dims.T, {t_i}).norm(); };
    CHECK(testing::gradcheck_tensor(fn, q, 16) < 1e-4);
    // Rows other than (k, t_i) have exactly zero gradient.
    q.mutable_grad().zero_();
    fn().backward();
    auto g = q.grad().view({dims.K, dims.T, dims.d});
    for (int k = 0; k < dims.K; ++k) {
      for (int t = 0; t < dims.T; ++t) {
        const double mag = g[k][t].abs().max().item<double>();
        if (t == t_i) {
          CHECK(mag > 0.0);
        } else {
          CHECK(mag == 0.0);
        }
      }
    }
  }

  SUBCASE("timestep out of range rejected") {
    auto q = torch::randn({1, dims.K * dims.T, dims.d}, torch::kFloat64);
    CHECK_THROWS(inj->forward(q, dims.K, dims.T, {dims.T}));
  }
}

TEST_CASE("loss_align") {
  SUBCASE("matching prediction gives zero") {
    auto r = torch::tensor({{0.0, 2.0, 4.0}}, torch::kFloat64);
    auto normalized = torch::tensor({{0.0, 0.5, 1.0}}, torch::kFloat64);
    // logit(x) = log(x / (1-x)); use safe interior values via clamp.
    auto logits = torch::log(normalized.clamp(1e-9, 1.0 - 1e-9) /
                             (1.0 - normalized.clamp(1e-9, 1.0 - 1e-9)));
    auto loss = coupling::loss_align(logits, r);
    CHECK(loss.item<double>() < 1e-12);
  }

  SUBCASE("degenerate rows normalize to one half") {
    auto r = torch::full({2, 3}, 7.0, torch::kFloat64);
    auto logits = torch::zeros({2, 3}, torch::kFloat64);  // sigmoid = 0.5
    CHECK(coupling::loss_align(logits, r).item<double>() == 0.0);
  }

  SUBCASE("hand-computed case: 0.25") {
    auto logits = torch::zeros({1, 2}, torch::kFloat64);
    auto r = torch::tensor({{1.0, 3.0}}, torch::kFloat64);
    CHECK(coupling::loss_align(logits, r).item<double>() ==
          doctest::Approx(0.25).epsilon(1e-12));
  }

  SUBCASE("targets are detached") {
    auto r = torch::randn({1, 4}, torch::kFloat64).requires_grad_(true);
    auto logits = torch::randn({1, 4}, torch::kFloat64);
    auto loss = coupling::loss_align(logits, r);
    CHECK(!loss.requires_grad());
  }
}

TEST_CASE("total_loss") {
  auto scalar = [](double v) { return torch::tensor(v, torch::kFloat64); };
  coupling::CouplingConfig cfg = toy_coupling();

  SUBCASE("weighted combination is linear in each partial") {
    coupling::PartialLosses p;
    p.traj = scalar(1.0);
    p.score = scalar(2.0);
    p.aux = scalar(3.0);
    p.im = scalar(4.0);
    p.sim = scalar(5.0);
    p.align = scalar(6.0);
    p.wm = scalar(7.0);
    cfg.lambda_im = 0.5;
    cfg.lambda_sim = 0.25;
    cfg.lambda_align = 2.0;
    auto total = coupling::total_loss(p, cfg);
    CHECK(total.item<double>() ==
          doctest::Approx(1 + 2 + 3 + 0.5 * 4 + 0.25 * 5 + 2.0 * 6 + 7));
  }

  SUBCASE("zeroed coefficients leave the trajectory term alone") {
    coupling::PartialLosses p;
    p.traj = scalar(1.25);
    p.score = scalar(0.0);  // internal Eq.4 lambdas zeroed upstream
    p.aux = scalar(0.0);
    p.im = scalar(9.0);
    p.sim = scalar(9.0);
    p.align = scalar(9.0);
    p.wm = scalar(0.0);
    cfg.lambda_im = cfg.lambda_sim = cfg.lambda_align = 0.0;
    CHECK(coupling::total_loss(p, cfg).item<double>() == 1.25);
  }

  SUBCASE("NaN partial aborts naming the term") {
    coupling::PartialLosses p;
    p.traj = scalar(1.0);
    p.score = scalar(1.0);
    p.aux = scalar(1.0);
    p.im = scalar(std::numeric_limits<double>::quiet_NaN());
    p.sim = scalar(1.0);
    p.align = scalar(1.0);
    p.wm = scalar(1.0);
    try {
      coupling::total_loss(p, cfg);
      FAIL("expected abort");
    } catch (const c10::Error& e) {
      CHECK(std::string(e.what()).find("'im'") != std::string::npos);
    }
  }
}

TEST_CASE("mlp reward predictor") {
  torch::manual_seed(2);
  const auto dims = toy_dims();
  coupling::MlpRewardPredictor mlp(dims.T, std::vector<int>{8, 16, 16, 6});
  mlp->to(torch::kFloat64);
  auto proposals = torch::randn({1, dims.K, dims.T, 3}, torch::kFloat64);
  auto ego = toy_ego();

  SUBCASE("zero final layer gives logits 0 and subscores one half") {
    {
      torch::NoGradGuard g;
      for (auto& p : mlp->named_modules()["fc2"]->parameters()) {
        p.zero_();
      }
    }
    auto out = mlp->predict(mlp->embed(proposals, ego));
    CHECK(out.abs().max().item<double>() == 0.0);
    CHECK((torch::sigmoid(out.narrow(-1, 1, 5)) - 0.5).abs().max().item<double>() ==
          0.0);
  }

  SUBCASE("identical trajectory tokens give identical logits") {
    auto token = mlp->embed(proposals, ego);
    auto same = token.select(1, 0).unsqueeze(1).expand({1, dims.K, 8}).clone();
    auto out = mlp->predict(same);
    CHECK((out - out.select(1, 0).unsqueeze(1)).abs().max().item<double>() == 0.0);
  }

  SUBCASE("gradient check at reduced dims") {
    auto token = torch::randn({1, dims.K, 8}, torch::kFloat64).requires_grad_(true);
    auto fn = [&] { return mlp->predict(token).norm(); };
    CHECK(testing::gradcheck_tensor(fn, token, 8) < 1e-4);
  }
}

TEST_CASE("coupling config validation") {
  coupling::CouplingConfig cfg = toy_coupling();
  cfg.use_world_model = false;
  cfg.inject_ego_tokens = true;
  CHECK_THROWS(cfg.validate());
  cfg.inject_ego_tokens = false;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda_sim = -1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("proactive gradient gating") {
  auto cfg = toy_coupling();

  SUBCASE("disabled: environment losses reach no planner parameter") {
    cfg.proactive_gradient = false;
    auto model = make_model(cfg, 3);
    auto raster = toy_raster(model->dims());
    auto ego = toy_ego();
    auto out = model->forward(raster, ego);
    auto t = toy_targets(model->dims());
    auto p = compute_toy_losses(model, out, t, cfg);

    auto env_losses = cfg.lambda_im * p.im + cfg.lambda_sim * p.sim +
                      cfg.lambda_align * p.align + p.wm;
    model->zero_grad();
    env_losses.backward();
    for (const auto& name : model->ego_parameter_names()) {
      auto& param = model->named_parameters()[name];
      if (param.grad().defined()) {
        CAPTURE(name);
        CHECK(param.grad().abs().max().item<double>() == 0.0);
      }
    }
    // The environment module itself still trains.
    double env_norm = 0.0;
    for (const auto& name : model->env_parameter_names()) {
      auto& param = model->named_parameters()[name];
      if (param.grad().defined()) {
        env_norm += param.grad().abs().sum().item<double>();
      }
    }
    CHECK(env_norm > 0.0);
  }

  SUBCASE("enabled: reward losses reach the planner") {
    cfg.proactive_gradient = true;
    auto model = make_model(cfg, 3);
    auto raster = toy_raster(model->dims());
    auto ego = toy_ego();
    auto out = model->forward(raster, ego);
    auto t = toy_targets(model->dims());
    auto p = compute_toy_losses(model, out, t, cfg);
    auto env_losses = cfg.lambda_im * p.im + cfg.lambda_sim * p.sim +
                      cfg.lambda_align * p.align + p.wm;
    model->zero_grad();
    env_losses.backward();
    double ego_norm = 0.0;
    for (const auto& name : model->ego_parameter_names()) {
      auto& param = model->named_parameters()[name];
      if (param.grad().defined()) {
        ego_norm += param.grad().abs().sum().item<double>();
      }
    }
    CHECK(ego_norm > 0.0);
  }

  SUBCASE("disabled: total gradient equals the planner-only gradient") {
    cfg.proactive_gradient = false;
    auto model = make_model(cfg, 4);
    auto raster = toy_raster(model->dims());
    auto ego = toy_ego();
    auto t = toy_targets(model->dims());

    auto grads_of = [&](bool planner_only) {
      model->zero_grad();
      auto out = model->forward(raster, ego);
      auto p = compute_toy_losses(model, out, t, cfg);
      torch::Tensor loss;
      if (planner_only) {
        loss = p.traj + p.score + p.aux;
      } else {
        loss = coupling::total_loss(p, cfg);
      }
      loss.backward();
      std::vector<torch::Tensor> gs;
      for (const auto& name : model->ego_parameter_names()) {
        auto& param = model->named_parameters()[name];
        gs.push_back(param.grad().defined() ? param.grad().clone()
                                            : torch::zeros_like(param));
      }
      return gs;
    };
    auto full = grads_of(false);
    auto planner_only = grads_of(true);
    REQUIRE(full.size() == planner_only.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
      CHECK((full[i] - planner_only[i]).abs().max().item<double>() <= 1e-8);
    }
  }
}

TEST_CASE("injection gating") {
  auto cfg = toy_coupling();
  auto raster = [] { return toy_raster(toy_dims()); }();
  auto ego = toy_ego();
  torch::manual_seed(5);
  auto proposals = torch::randn({1, toy_dims().K, toy_dims().T, 3}, torch::kFloat64);

  SUBCASE("enabled: perturbing final tokens changes the rollout") {
    cfg.inject_ego_tokens = true;
    auto model = make_model(cfg, 6);
    auto q = torch::randn({1, toy_dims().K * toy_dims().T, toy_dims().d},
                          torch::kFloat64);
    auto a = model->rollout_fixed(raster, proposals, ego, q);
    auto b = model->rollout_fixed(raster, proposals, ego, q + 0.1);
    CHECK((a.bev_states.back() - b.bev_states.back()).abs().max().item<double>() >
          1e-6);
  }

  SUBCASE("disabled: rollouts are bitwise invariant to token perturbations") {
    cfg.inject_ego_tokens = false;
    auto model = make_model(cfg, 6);
    auto q = torch::randn({1, toy_dims().K * toy_dims().T, toy_dims().d},
                          torch::kFloat64);
    auto a = model->rollout_fixed(raster, proposals, ego, q);
    auto b = model->rollout_fixed(raster, proposals, ego, q + 123.0);
    for (std::size_t i = 0; i < a.bev_states.size(); ++i) {
      CHECK(torch::equal(a.bev_states[i], b.bev_states[i]));
    }
  }
}

TEST_CASE("world-model-free variant") {
  auto cfg = toy_coupling();
  cfg.use_world_model = false;
  cfg.inject_ego_tokens = false;
  auto model = make_model(cfg, 7);

  SUBCASE("no world-model parameters exist") {
    for (const auto& p : model->named_parameters()) {
      CHECK(p.key().rfind("world_model.", 0) != 0);
      CHECK(p.key().rfind("injector.", 0) != 0);
    }
    bool has_mlp = false;
    for (const auto& p : model->named_parameters()) {
      has_mlp |= p.key().rfind("mlp_reward.", 0) == 0;
    }
    CHECK(has_mlp);
  }

  SUBCASE("selection still runs on MLP-predicted rewards") {
    auto raster = toy_raster(model->dims());
    auto ego = toy_ego();
    auto out = model->forward(raster, ego);
    CHECK(out.rewards.sizes() == torch::IntArrayRef({1, model->dims().K}));
    CHECK(out.selected.size() == 1);
    CHECK(out.selected[0] >= 0);
    CHECK(out.selected[0] < model->dims().K);
    CHECK(!out.current_semantic.defined());
  }
}
