#include <doctest.h>
#include <torch/torch.h>

#include <cmath>

#include "bevplan/nn/common.hpp"
#include "bevplan/wm/model.hpp"
#include "support/gradcheck.hpp"
#include "support/toy.hpp"

using namespace bevplan;
using testing::toy_dims;
using testing::toy_ego;
using testing::toy_raster;

namespace {

wm::WorldModel toy_wm(unsigned seed = 0) {
  torch::manual_seed(seed);
  auto dims = toy_dims();
  wm::WorldModel model(dims);
  model->to(torch::kFloat64);
  return model;
}

}  // namespace

TEST_CASE("wm_step shape contract and equivariance") {
  auto model = toy_wm();
  const auto& dims = model->dims();
  const int S = dims.seq_len();

  SUBCASE("sequence length preserved") {
    auto seq = torch::randn({3, S, dims.d}, torch::kFloat64);
    auto out = model->wm_step(seq);
    CHECK(out.sizes() == seq.sizes());
    CHECK_THROWS(model->wm_step(torch::randn({3, S + 1, dims.d}, torch::kFloat64)));
  }

  SUBCASE("zero positional embedding makes the BEV slice permutation-equivariant") {
    {
      torch::NoGradGuard g;
      model->named_parameters()["pos_scene"].zero_();
    }
    auto seq = torch::randn({1, S, dims.d}, torch::kFloat64);
    auto out = model->wm_step(seq);
    auto perm = torch::randperm(dims.bev_cells(), torch::kLong) + 2;
    auto idx = torch::cat({torch::tensor({0L, 1L}), perm});
    auto out_perm = model->wm_step(seq.index_select(1, idx));
    CHECK((out.index_select(1, idx) - out_perm).abs().max().item<double>() <
          1e-10);
  }

  SUBCASE("gradient from the output BEV norm to the ego-token slot") {
    auto seq = torch::randn({1, S, dims.d}, torch::kFloat64).requires_grad_(true);
    auto fn = [&] { return model->wm_step(seq).narrow(1, 2, dims.bev_cells()).norm(); };
    CHECK(testing::gradcheck_tensor(fn, seq) < 1e-4);
  }
}

TEST_CASE("rollout") {
  auto model = toy_wm(1);
  const auto& dims = model->dims();
  const int B = 1, K = dims.K, N = dims.wm_n;
  auto b0 = torch::randn({B, dims.bev_cells(), dims.d}, torch::kFloat64);
  auto a0 = torch::randn({B, K, dims.d}, torch::kFloat64);
  auto ego_tokens = torch::randn({B, N, K, dims.d}, torch::kFloat64);

  SUBCASE("N = 0 leaves only iteration-0 quantities") {
    auto out = model->rollout(b0, a0, ego_tokens.narrow(1, 0, 0), 0);
    CHECK(out.bev_states.size() == 1);
    CHECK(out.action_tokens.size() == 1);
    CHECK(out.enriched_states.empty());
    auto heads = model->reward_heads(out);
    CHECK(heads.r_im.size(1) == K);
  }

  SUBCASE("identical candidates roll out identically") {
    auto a_same = a0.select(1, 0).unsqueeze(1).expand({B, K, dims.d}).clone();
    auto e_same = ego_tokens.select(2, 0).unsqueeze(2)
                      .expand({B, N, K, dims.d}).clone();
    auto out = model->rollout(b0, a_same, e_same, N);
    for (const auto& bev : out.bev_states) {
      CHECK((bev - bev.select(1, 0).unsqueeze(1)).abs().max().item<double>() ==
            0.0);
    }
  }

  SUBCASE("candidates evolve independently") {
    auto out_a = model->rollout(b0, a0, ego_tokens, N);
    auto a_perturbed = a0.clone();
    a_perturbed[0][0] += 0.5;
    auto out_b = model->rollout(b0, a_perturbed, ego_tokens, N);
    // Candidate 0 changes, every other candidate is bitwise unchanged.
    CHECK((out_a.bev_states.back().select(1, 0) -
           out_b.bev_states.back().select(1, 0))
              .abs()
              .max()
              .item<double>() > 0.0);
    for (int k = 1; k < K; ++k) {
      CHECK(torch::equal(out_a.bev_states.back().select(1, k),
                         out_b.bev_states.back().select(1, k)));
      CHECK(torch::equal(out_a.action_tokens.back().select(1, k),
                         out_b.action_tokens.back().select(1, k)));
    }
  }

  SUBCASE("sequence slicing round trip") {
    auto out = model->rollout(b0, a0, ego_tokens, 1);
    auto rebuilt = torch::cat({out.action_tokens[1].unsqueeze(2),
                               out.enriched_states[0].unsqueeze(2),
                               out.bev_states[1]},
                              2);
    CHECK(rebuilt.size(2) == dims.seq_len());
  }
}

TEST_CASE("reward heads") {
  const auto dims_base = toy_dims();

  SUBCASE("K = 1 softmax is exactly one") {
    torch::manual_seed(2);
    auto dims = dims_base;
    dims.K = 1;
    wm::WorldModel model(dims);
    model->to(torch::kFloat64);
    auto b0 = torch::randn({1, dims.bev_cells(), dims.d}, torch::kFloat64);
    auto a0 = torch::randn({1, 1, dims.d}, torch::kFloat64);
    auto ego = torch::zeros({1, dims.wm_n, 1, dims.d}, torch::kFloat64);
    auto heads = model->reward_heads(model->rollout(b0, a0, ego, dims.wm_n));
    CHECK(heads.r_im.item<double>() == 1.0);
  }

  SUBCASE("identical candidate representations give a uniform simplex") {
    auto model = toy_wm(3);
    const auto& dims = model->dims();
    auto b0 = torch::randn({1, dims.bev_cells(), dims.d}, torch::kFloat64);
    auto a_same = torch::randn({1, 1, dims.d}, torch::kFloat64)
                      .expand({1, dims.K, dims.d}).clone();
    auto ego = torch::zeros({1, dims.wm_n, dims.K, dims.d}, torch::kFloat64);
    auto heads = model->reward_heads(model->rollout(b0, a_same, ego, dims.wm_n));
    CHECK((heads.r_im - 1.0 / dims.K).abs().max().item<double>() < 1e-12);
    CHECK(heads.r_im.sum().item<double>() == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("softmax and sigmoid re-derived from the logits") {
    auto model = toy_wm(4);
    const auto& dims = model->dims();
    auto b0 = torch::randn({2, dims.bev_cells(), dims.d}, torch::kFloat64);
    auto a0 = torch::randn({2, dims.K, dims.d}, torch::kFloat64);
    auto ego = torch::randn({2, dims.wm_n, dims.K, dims.d}, torch::kFloat64);
    auto heads = model->reward_heads(model->rollout(b0, a0, ego, dims.wm_n));
    auto exp = torch::exp(heads.imit_logits -
                          std::get<0>(heads.imit_logits.max(1, true)));
    auto softmax_ref = exp / exp.sum(1, true);
    CHECK((heads.r_im - softmax_ref).abs().max().item<double>() < 1e-8);
    auto sig_ref = 1.0 / (1.0 + torch::exp(-heads.sim_logits));
    CHECK((heads.r_sim - sig_ref).abs().max().item<double>() < 1e-8);
  }
}

TEST_CASE("aggregate_reward and selection") {
  SUBCASE("all ones with unit weights gives log 12") {
    auto r_im = torch::ones({1, 1}, torch::kFloat64);
    auto r_sim = torch::ones({1, 1, 5}, torch::kFloat64);
    auto r = wm::aggregate_reward(r_im, r_sim, {});
    CHECK(r.item<double>() == doctest::Approx(std::log(12.0)).epsilon(1e-12));
  }

  SUBCASE("clamped safety zero dominates negatively") {
    // Bound from the clamp constant: an NC ~ 0 candidate scores at most
    // log(eps) + log(12); an all-safe candidate scores at least
    // log(clamp(r_im)) + log(12) >= log(eps) + log(12), strictly above
    // whenever the unsafe candidate is not simultaneously perfect
    // everywhere else.
    const double eps = 1e-4;
    const double unsafe_cap = std::log(eps) + std::log(12.0);
    torch::manual_seed(5);
    for (int trial = 0; trial < 200; ++trial) {
      auto logits = torch::randn({1, 2}, torch::kFloat64);
      auto r_im = torch::softmax(logits, 1);
      auto r_sim = torch::rand({1, 2, 5}, torch::kFloat64);
      r_sim[0][0][0] = 1e-9;  // candidate 0 unsafe (clamped to eps)
      r_sim[0][1] = torch::ones({5}, torch::kFloat64);  // candidate 1 all safe
      auto r = wm::aggregate_reward(r_im, r_sim, {});
      CHECK(r[0][0].item<double>() <= unsafe_cap + 1e-12);
      CHECK(r[0][1].item<double>() >= std::log(eps) + std::log(12.0) - 1e-12);
      // Softmax keeps r_im < 1 strictly, so the safe candidate outranks.
      CHECK(r[0][1].item<double>() > r[0][0].item<double>());
    }
  }

  SUBCASE("negative weights rejected") {
    wm::RewardWeights w;
    w.w1 = -0.5;
    CHECK_THROWS(wm::aggregate_reward(torch::ones({1, 1}, torch::kFloat64),
                                      torch::ones({1, 1, 5}, torch::kFloat64), w));
  }

  SUBCASE("selection is invariant to uniform shifts and ties break low") {
    torch::manual_seed(6);
    auto r = torch::randn({4, 6}, torch::kFloat64);
    auto base = wm::select_candidate(r);
    CHECK(wm::select_candidate(r + 3.7) == base);
    CHECK(wm::select_candidate(r - 123.0) == base);
    auto tied = torch::zeros({1, 4}, torch::kFloat64);
    tied[0][1] = 5.0;
    tied[0][3] = 5.0;
    CHECK(wm::select_candidate(tied)[0] == 1);
  }
}

TEST_CASE("loss_im") {
  torch::manual_seed(7);
  const int T = 4;

  SUBCASE("equidistant proposals: uniform target, minimum value log K") {
    const int K = 4;
    auto expert = torch::zeros({1, T, 3}, torch::kFloat64);
    auto proposals = torch::zeros({1, K, T, 3}, torch::kFloat64);
    for (int k = 0; k < K; ++k) {
      proposals[0][k][0][k % 3] = 2.0;  // all at L2 distance 2 from expert
    }
    auto uniform_logits = torch::zeros({1, K}, torch::kFloat64);
    auto loss_uniform = wm::loss_im(uniform_logits, proposals, expert);
    CHECK(loss_uniform.item<double>() ==
          doctest::Approx(std::log(static_cast<double>(K))).epsilon(1e-12));
    auto other = torch::randn({1, K}, torch::kFloat64);
    CHECK(wm::loss_im(other, proposals, expert).item<double>() >=
          loss_uniform.item<double>() - 1e-12);
  }

  SUBCASE("distances (0, ln 3) give target (0.75, 0.25); matched head yields its entropy") {
    auto expert = torch::zeros({1, T, 3}, torch::kFloat64);
    auto proposals = torch::zeros({1, 2, T, 3}, torch::kFloat64);
    proposals[0][1][0][0] = std::log(3.0);
    // exp(0) = 1, exp(-ln 3) = 1/3 -> q = (0.75, 0.25).
    auto q = torch::tensor({{0.75, 0.25}}, torch::kFloat64);
    auto logits = torch::log(q);
    auto loss = wm::loss_im(logits, proposals, expert);
    const double entropy = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    CHECK(loss.item<double>() == doctest::Approx(entropy).epsilon(1e-12));
  }
}

TEST_CASE("loss_sim") {
  torch::manual_seed(8);
  const int B = 1, K = 3;

  SUBCASE("saturated predictions at the targets vanish") {
    auto targets = torch::randint(0, 2, {B, K, 5}, torch::kFloat64);
    auto logits = (targets * 2.0 - 1.0) * 20.0;
    CHECK(wm::loss_sim(logits, targets).item<double>() <= 1e-6);
  }

  SUBCASE("matches element-wise BCE") {
    auto logits = torch::randn({B, K, 5}, torch::kFloat64);
    auto targets = torch::rand({B, K, 5}, torch::kFloat64);
    const double loss = wm::loss_sim(logits, targets).item<double>();
    double expect = 0.0;
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < 5; ++j) {
        const double x = logits[0][k][j].item<double>();
        const double y = targets[0][k][j].item<double>();
        expect += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
      }
    }
    expect /= K * 5;
    CHECK(loss == doctest::Approx(expect).epsilon(1e-10));
  }

  SUBCASE("shape mismatch rejected") {
    CHECK_THROWS(wm::loss_sim(torch::randn({B, K, 5}, torch::kFloat64),
                              torch::randn({B, K, 4}, torch::kFloat64)));
  }
}

TEST_CASE("focal semantic loss") {
  torch::manual_seed(9);
  const int B = 1, C = 5, H = 4, W = 4;
  auto target = torch::randint(0, 2, {B, C, H, W}, torch::kFloat64);
  auto logits = torch::randn({B, C, H, W}, torch::kFloat64);

  SUBCASE("gamma 0 without balancing reduces exactly to cross-entropy") {
    auto focal = nn::sigmoid_focal_loss(logits, target, 0.25, 0.0, false);
    auto ce = nn::bce_logits_channel_sum(logits, target);
    CHECK((focal - ce).abs().item<double>() < 1e-8);
  }

  SUBCASE("perfect saturated prediction vanishes") {
    auto sat = (target * 2.0 - 1.0) * 20.0;
    wm::WmLossConfig cfg;
    auto loss = wm::loss_wm(sat, sat, target, target, cfg);
    CHECK(loss.item<double>() <= 1e-6);
  }

  SUBCASE("matches a per-cell re-implementation") {
    wm::WmLossConfig cfg;
    cfg.lambda_cur = 0.8;
    cfg.lambda_fut = 1.2;
    auto fut_logits = torch::randn({B, C, H, W}, torch::kFloat64);
    auto fut_target = torch::randint(0, 2, {B, C, H, W}, torch::kFloat64);
    const double loss =
        wm::loss_wm(logits, fut_logits, target, fut_target, cfg).item<double>();

    auto focal_ref = [&](const torch::Tensor& x, const torch::Tensor& y) {
      double acc = 0.0;
      for (int c = 0; c < C; ++c) {
        for (int i = 0; i < H; ++i) {
          for (int j = 0; j < W; ++j) {
            const double logit = x[0][c][i][j].item<double>();
            const double t = y[0][c][i][j].item<double>();
            const double p = 1.0 / (1.0 + std::exp(-logit));
            const double pt = t > 0.5 ? p : 1.0 - p;
            const double at = t > 0.5 ? cfg.focal_alpha : 1.0 - cfg.focal_alpha;
            const double ce = std::max(logit, 0.0) - logit * t +
                              std::log1p(std::exp(-std::abs(logit)));
            acc += at * std::pow(1.0 - pt, cfg.focal_gamma) * ce;
          }
        }
      }
      return acc / (H * W);
    };
    const double expect = cfg.lambda_cur * focal_ref(logits, target) +
                          cfg.lambda_fut * focal_ref(fut_logits, fut_target);
    CHECK(loss == doctest::Approx(expect).epsilon(1e-10));
  }

  SUBCASE("undefined future logits drop the future term") {
    wm::WmLossConfig cfg;
    auto cur_only = wm::loss_wm(logits, {}, target, {}, cfg);
    auto with_fut = wm::loss_wm(logits, logits, target, target, cfg);
    CHECK(with_fut.item<double>() > cur_only.item<double>());
  }
}

TEST_CASE("decode_semantic locality") {
  auto model = toy_wm(10);
  const auto& dims = model->dims();
  auto tokens = torch::randn({1, dims.bev_cells(), dims.d}, torch::kFloat64);
  auto base = model->decode_semantic(tokens);
  CHECK(base.sizes() ==
        torch::IntArrayRef({1, dims.c_sem, dims.in_h, dims.in_w}));
  auto perturbed = tokens.clone();
  perturbed[0][5] += 1.0;  // BEV cell (row 1, col 1) on the 4x4 grid
  auto out = model->decode_semantic(perturbed);
  auto diff = (out - base).abs().sum(1).squeeze(0);  // [in_h, in_w]
  const int sc = dims.sem_scale();
  for (int r = 0; r < dims.in_h; ++r) {
    for (int c = 0; c < dims.in_w; ++c) {
      const bool inside = (r / sc == 1) && (c / sc == 1);
      if (inside) {
        CHECK(diff[r][c].item<double>() > 0.0);
      } else {
        CHECK(diff[r][c].item<double>() == 0.0);
      }
    }
  }
}

TEST_CASE("world-model gradient checks at toy dims") {
  auto model = toy_wm(11);
  const auto& dims = model->dims();
  auto raster = toy_raster(dims);
  auto ego = toy_ego();
  auto proposals = torch::randn({1, dims.K, dims.T, 3}, torch::kFloat64);

  SUBCASE("initial BEV encoder") {
    auto fn = [&] { return model->encode_initial_bev(raster).mean(); };
    CHECK(testing::gradcheck_parameters(fn, *model, 4) < 1e-4);
  }

  SUBCASE("action token encoder vs waypoint inputs") {
    auto wp = proposals.clone().requires_grad_(true);
    auto fn = [&] { return model->encode_action_token(wp, ego).norm(); };
    CHECK(testing::gradcheck_tensor(fn, wp) < 1e-4);
  }

  SUBCASE("zero action encoder weights give zero tokens") {
    torch::manual_seed(12);
    wm::WorldModel z(dims);
    z->to(torch::kFloat64);
    {
      torch::NoGradGuard g;
      for (auto& p : z->named_modules()["action_fc1"]->parameters()) {
        p.zero_();
      }
      for (auto& p : z->named_modules()["action_fc2"]->parameters()) {
        p.zero_();
      }
    }
    auto tok = z->encode_action_token(proposals, ego);
    CHECK(tok.abs().max().item<double>() == 0.0);
  }
}
