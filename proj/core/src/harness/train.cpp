#include "bevplan/harness/train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>

#include "bevplan/harness/checkpoint.hpp"
#include "bevplan/scenario/dataset.hpp"
#include "bevplan/scenario/generate.hpp"

namespace bevplan::harness {

namespace scn = bevplan::scenario;

namespace {

std::vector<scn::Scenario> load_or_generate(const std::filesystem::path& dir,
                                            std::uint64_t seed_base, int count,
                                            const scn::GeneratorConfig& gen) {
  if (std::filesystem::exists(dir / "manifest")) {
    return scn::read_dataset(dir);
  }
  std::vector<scn::Scenario> scenarios;
  scenarios.reserve(count);
  for (int i = 0; i < count; ++i) {
    scenarios.push_back(scn::generate_scenario(seed_base + i, gen));
  }
  scn::write_dataset(scenarios, dir, gen.version);
  return scenarios;
}

// Platform-stable Fisher-Yates shuffle.
void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x2545f4914f6cdd1dull);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

struct PerScenarioTargets {
  StaticTargets targets;  // batch dimension of 1
};

coupling::PartialLosses compute_losses(
    coupling::CoupledModel& model, const coupling::CoupledModelImpl::Outputs& out,
    const std::vector<const scn::Scenario*>& batch, const StaticTargets& st,
    const RunConfig& cfg, const pdm::AnchorSet& anchors) {
  const auto& cc = model->coupling();
  coupling::PartialLosses p;
  p.traj = planner::loss_traj(out.plan.stage_trajectories, st.expert, cc.traj_loss);

  planner::ScoreTargets score = st.score;
  score.pdm = online_pdm_targets_tensor(batch, out.plan.proposals, cfg.oracle,
                                        cfg.cache_pdm_targets);
  p.score = planner::loss_score(out.plan.scores, score, cc.score_loss);
  p.aux = planner::loss_aux(out.plan.scores, st.aux, cc.aux_loss);

  p.im = wm::loss_im(out.imit_logits, out.plan.proposals, st.expert);
  p.sim = wm::loss_sim(out.sim_logits,
                       anchor_sim_targets(batch, out.plan.proposals, anchors));
  auto align_logits = cc.proactive_gradient ? out.plan.scores.logits
                                            : out.plan.scores.logits.detach();
  p.align = coupling::loss_align(align_logits, out.rewards);

  if (cc.use_world_model) {
    torch::Tensor fut_logits, fut_target;
    if (model->dims().wm_n > 0) {
      fut_logits = out.future_semantic;
      fut_target = future_semantic_targets(batch, out.plan.proposals,
                                           out.selected, model->dims());
    }
    p.wm = wm::loss_wm(out.current_semantic, fut_logits, st.cur_sem, fut_target,
                       cc.wm_loss);
  }
  return p;
}

StaticTargets concat_targets(const std::vector<const PerScenarioTargets*>& parts) {
  auto cat = [&](auto getter) {
    std::vector<torch::Tensor> ts;
    ts.reserve(parts.size());
    for (const auto* p : parts) {
      ts.push_back(getter(p->targets));
    }
    return torch::cat(ts, 0);
  };
  StaticTargets out;
  out.score.validity = cat([](const StaticTargets& t) { return t.score.validity; });
  out.score.agent_states =
      cat([](const StaticTargets& t) { return t.score.agent_states; });
  out.score.area = cat([](const StaticTargets& t) { return t.score.area; });
  out.aux.bev = cat([](const StaticTargets& t) { return t.aux.bev; });
  out.aux.det_cls = cat([](const StaticTargets& t) { return t.aux.det_cls; });
  out.aux.det_box = cat([](const StaticTargets& t) { return t.aux.det_box; });
  out.expert = cat([](const StaticTargets& t) { return t.expert; });
  out.cur_sem = out.aux.bev;
  return out;
}

}  // namespace

TrainContext prepare_context(const RunConfig& cfg) {
  TrainContext ctx;
  ctx.train_scenarios = load_or_generate(cfg.train_dataset, cfg.train_seed_base,
                                         cfg.train_scenarios, cfg.generator);
  ctx.eval_scenarios = load_or_generate(cfg.eval_dataset, cfg.eval_seed_base,
                                        cfg.eval_scenarios, cfg.generator);
  const int M = std::min<int>(cfg.anchor_count,
                              static_cast<int>(ctx.train_scenarios.size()));
  ctx.anchors =
      pdm::build_anchor_set(ctx.train_scenarios, M, cfg.oracle, cfg.anchor_seed);
  // Eval scenarios also need anchor metrics only when training probes run on
  // them; the PDMS probe goes through evaluate_model which does not, so the
  // table stays train-only.
  return ctx;
}

TrainResult train(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  return train(cfg, run_dir, prepare_context(cfg));
}

TrainResult train(const RunConfig& cfg, const std::filesystem::path& run_dir,
                  const TrainContext& ctx) {
  cfg.validate();
  torch::set_num_threads(cfg.threads);
  torch::manual_seed(cfg.seed);
  std::filesystem::create_directories(run_dir);
  save_config(cfg, run_dir / "config.json");
  const std::string hash = config_hash_hex(cfg);

  coupling::CoupledModel model(cfg.dims, cfg.coupling);
  model->to(cfg.dims.dtype);

  // Two-group Adam; every parameter belongs to exactly one group.
  const auto ego_names = model->ego_parameter_names();
  const auto env_names = model->env_parameter_names();
  {
    std::ofstream groups(run_dir / "param_groups.txt", std::ios::trunc);
    auto params = model->named_parameters();
    TORCH_CHECK(ego_names.size() + env_names.size() == params.size(),
                "optimizer groups must cover every parameter exactly once");
    for (const auto& n : ego_names) {
      groups << "ego " << n << "\n";
    }
    for (const auto& n : env_names) {
      groups << "env " << n << "\n";
    }
  }
  std::vector<torch::optim::OptimizerParamGroup> groups;
  {
    auto params = model->named_parameters();
    std::vector<torch::Tensor> ego_params, env_params;
    for (const auto& n : ego_names) {
      ego_params.push_back(*params.find(n));
    }
    for (const auto& n : env_names) {
      env_params.push_back(*params.find(n));
    }
    auto mk_options = [&](double lr) {
      auto o = std::make_unique<torch::optim::AdamOptions>(lr);
      o->betas({cfg.adam_beta1, cfg.adam_beta2});
      o->eps(cfg.adam_eps);
      return o;
    };
    groups.emplace_back(ego_params, mk_options(cfg.lr_ego));
    if (!env_params.empty()) {
      groups.emplace_back(env_params, mk_options(cfg.lr_env));
    }
  }
  torch::optim::Adam optimizer(groups, torch::optim::AdamOptions(cfg.lr_ego));

  // Proposal-independent targets, one entry per scenario, reused each epoch.
  std::vector<PerScenarioTargets> per_scenario(ctx.train_scenarios.size());
  for (std::size_t i = 0; i < ctx.train_scenarios.size(); ++i) {
    per_scenario[i].targets =
        build_static_targets({&ctx.train_scenarios[i]}, cfg.dims);
  }

  TrainResult result;
  result.metrics_path = run_dir / "train_log.csv";
  std::ofstream log(result.metrics_path, std::ios::trunc);
  log << "epoch,step,loss_traj,loss_score,loss_aux,loss_im,loss_sim,"
         "loss_align,loss_wm,total,wall_ms,config_hash\n";
  std::ofstream pdms_log(run_dir / "epoch_pdms.csv", std::ios::trunc);
  pdms_log << "epoch,pdms,config_hash\n";

  std::vector<std::size_t> order(ctx.train_scenarios.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }

  std::int64_t global_step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_indices(order, cfg.seed * 1000003ull + epoch);
    double epoch_loss = 0.0;
    std::int64_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const scn::Scenario*> batch;
      std::vector<const PerScenarioTargets*> batch_targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&ctx.train_scenarios[order[i]]);
        batch_targets.push_back(&per_scenario[order[i]]);
      }
      auto inputs = build_inputs(batch, cfg.dims);
      auto st = concat_targets(batch_targets);

      coupling::PartialLosses partials;
      torch::Tensor total;
      try {
        auto out = model->forward(inputs.raster, inputs.ego);
        partials = compute_losses(model, out, batch, st, cfg, ctx.anchors);
        total = coupling::total_loss(partials, cfg.coupling);
      } catch (const c10::Error& e) {
        throw TrainAbort("training aborted at epoch " + std::to_string(epoch) +
                         ", step " + std::to_string(global_step) + ": " +
                         e.what_without_backtrace());
      }
      optimizer.zero_grad();
      total.backward();
      optimizer.step();

      const double wall_ms =
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - t0)
              .count();
      auto v = [](const torch::Tensor& t) {
        return t.defined() ? t.item<double>() : 0.0;
      };
      char line[512];
      std::snprintf(line, sizeof(line),
                    "%d,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                    "%.3f,%s\n",
                    epoch, static_cast<long long>(global_step), v(partials.traj),
                    v(partials.score), v(partials.aux), v(partials.im),
                    v(partials.sim), v(partials.align), v(partials.wm),
                    v(total), wall_ms, hash.c_str());
      log << line;
      epoch_loss += total.item<double>();
      ++epoch_steps;
      ++global_step;
    }
    result.epoch_mean_loss.push_back(epoch_loss / std::max<std::int64_t>(1, epoch_steps));

    double probe_pdms = 0.0;
    if (cfg.eval_curve_subset > 0 && !ctx.eval_scenarios.empty()) {
      std::vector<const scn::Scenario*> probe;
      const std::size_t n = std::min<std::size_t>(cfg.eval_curve_subset,
                                                  ctx.eval_scenarios.size());
      for (std::size_t i = 0; i < n; ++i) {
        probe.push_back(&ctx.eval_scenarios[i]);
      }
      probe_pdms = evaluate_model(model, cfg, probe).pdms;
    }
    result.epoch_pdms.push_back(probe_pdms);
    char pline[128];
    std::snprintf(pline, sizeof(pline), "%d,%.17g,%s\n", epoch, probe_pdms,
                  hash.c_str());
    pdms_log << pline;
  }

  result.checkpoint_path = run_dir / "checkpoint.bin";
  save_checkpoint(result.checkpoint_path, model, cfg);
  return result;
}

EvalSummary evaluate_model(coupling::CoupledModel& model, const RunConfig& cfg,
                           const std::vector<const scn::Scenario*>& scenarios,
                           std::vector<EvalRow>* rows_out) {
  torch::NoGradGuard no_grad;
  std::vector<const scn::Scenario*> sorted = scenarios;
  std::sort(sorted.begin(), sorted.end(),
            [](const scn::Scenario* a, const scn::Scenario* b) {
              return a->scenario_id < b->scenario_id;
            });

  std::vector<EvalRow> rows;
  const std::size_t eval_batch = 16;
  for (std::size_t start = 0; start < sorted.size(); start += eval_batch) {
    const std::size_t end = std::min(sorted.size(), start + eval_batch);
    std::vector<const scn::Scenario*> batch(sorted.begin() + start,
                                            sorted.begin() + end);
    auto inputs = build_inputs(batch, cfg.dims);
    auto out = model->forward(inputs.raster, inputs.ego);
    auto trajs = proposals_to_trajectories(out.plan.proposals);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      EvalRow row;
      row.scenario_id = batch[b]->scenario_id;
      row.selected = out.selected[b];
      try {
        row.subscores =
            pdm::rollout_check(*batch[b], trajs[b][row.selected], cfg.oracle);
        row.pdms = pdm::pdms(row.subscores);
      } catch (const std::exception&) {
        row.selected = -1;  // recorded as a failure
      }
      rows.push_back(std::move(row));
    }
  }

  const EvalSummary summary = summary_from_rows(rows);
  if (rows_out != nullptr) {
    *rows_out = std::move(rows);
  }
  return summary;
}

EvalSummary summary_from_rows(const std::vector<EvalRow>& rows) {
  EvalSummary s;
  for (const auto& r : rows) {
    if (r.selected < 0) {
      ++s.failures;
      continue;
    }
    s.nc += r.subscores.nc;
    s.dac += r.subscores.dac;
    s.ttc += r.subscores.ttc;
    s.comfort += r.subscores.comfort;
    s.ep += r.subscores.ep;
    s.pdms += r.pdms;
    ++s.count;
  }
  if (s.count > 0) {
    const double n = static_cast<double>(s.count);
    s.nc /= n;
    s.dac /= n;
    s.ttc /= n;
    s.comfort /= n;
    s.ep /= n;
    s.pdms /= n;
  }
  return s;
}

void write_eval_csv(const std::filesystem::path& path,
                    const std::vector<EvalRow>& rows, const EvalSummary& summary,
                    const std::string& config_hash_hex) {
  std::ofstream out(path, std::ios::trunc);
  TORCH_CHECK(out.good(), "cannot write eval csv ", path.string());
  out << "scenario_id,nc,dac,ttc,comfort,ep,pdms,selected,config_hash\n";
  char line[512];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld,%s\n",
                  r.scenario_id.c_str(), r.subscores.nc, r.subscores.dac,
                  r.subscores.ttc, r.subscores.comfort, r.subscores.ep, r.pdms,
                  static_cast<long long>(r.selected), config_hash_hex.c_str());
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "summary,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%s\n",
                summary.nc, summary.dac, summary.ttc, summary.comfort,
                summary.ep, summary.pdms, summary.count, config_hash_hex.c_str());
  out << line;
  if (summary.failures > 0) {
    out << "# excluded " << summary.failures << " scenario(s) with failures\n";
  }
}

EvalSummary evaluate_checkpoint(const std::filesystem::path& ckpt,
                                const std::filesystem::path& split_dir,
                                const std::filesystem::path& csv_out) {
  auto loaded = load_checkpoint(ckpt);
  torch::set_num_threads(loaded.config.threads);
  auto scenarios = scn::read_dataset(split_dir);
  std::vector<const scn::Scenario*> ptrs;
  ptrs.reserve(scenarios.size());
  for (const auto& s : scenarios) {
    ptrs.push_back(&s);
  }
  std::vector<EvalRow> rows;
  auto summary = evaluate_model(loaded.model, loaded.config, ptrs, &rows);
  if (!csv_out.empty()) {
    write_eval_csv(csv_out, rows, summary, config_hash_hex(loaded.config));
  }
  return summary;
}

RunConfig variant_config(const RunConfig& base, const std::string& variant,
                         std::uint64_t seed) {
  RunConfig cfg = base;
  cfg.seed = seed;
  if (variant == "full") {
  } else if (variant == "no_world_model") {
    cfg.coupling.use_world_model = false;
    cfg.coupling.inject_ego_tokens = false;
  } else if (variant == "no_ego_injection") {
    cfg.coupling.inject_ego_tokens = false;
  } else if (variant == "no_proactive_gradient") {
    cfg.coupling.proactive_gradient = false;
  } else {
    TORCH_CHECK(false, "unknown ablation variant ", variant);
  }
  return cfg;
}

std::vector<AblationRow> ablate(const RunConfig& base,
                                const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const TrainContext ctx = prepare_context(base);
  std::vector<const scn::Scenario*> eval_ptrs;
  eval_ptrs.reserve(ctx.eval_scenarios.size());
  for (const auto& s : ctx.eval_scenarios) {
    eval_ptrs.push_back(&s);
  }

  std::vector<AblationRow> rows;
  std::ofstream csv(out_dir / "ablation.csv", std::ios::trunc);
  csv << "variant,seed,nc,dac,ttc,comfort,ep,pdms,config_hash\n";
  for (const auto seed : seeds) {
    for (const auto* variant : kAblationVariants) {
      RunConfig cfg = variant_config(base, variant, seed);
      const auto run_dir =
          out_dir / (std::string(variant) + "-seed" + std::to_string(seed));
      auto trained = train(cfg, run_dir, ctx);
      auto loaded = load_checkpoint(trained.checkpoint_path);
      std::vector<EvalRow> eval_rows;
      auto summary = evaluate_model(loaded.model, cfg, eval_ptrs, &eval_rows);
      write_eval_csv(run_dir / "eval.csv", eval_rows, summary,
                     config_hash_hex(cfg));
      AblationRow row{variant, seed, summary, config_hash_hex(cfg)};
      char line[512];
      std::snprintf(line, sizeof(line),
                    "%s,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", variant,
                    static_cast<unsigned long long>(seed), summary.nc,
                    summary.dac, summary.ttc, summary.comfort, summary.ep,
                    summary.pdms, row.config_hash.c_str());
      csv << line;
      csv.flush();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

double sign_test_p(int wins, int n) {
  double p = 0.0;
  for (int i = wins; i <= n; ++i) {
    double binom = 1.0;
    for (int j = 0; j < i; ++j) {
      binom *= static_cast<double>(n - j) / (j + 1);
    }
    p += binom;
  }
  return p / std::pow(2.0, n);
}

}  // namespace bevplan::harness
