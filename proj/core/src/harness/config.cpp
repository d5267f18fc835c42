#include "bevplan/harness/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace bevplan::harness {

using nlohmann::json;

void RunConfig::validate() const {
  dims.validate();
  coupling.validate();
  TORCH_CHECK(lr_ego > 0.0 && lr_env > 0.0, "learning rates must be positive");
  TORCH_CHECK(epochs >= 1 && batch_size >= 1, "epochs/batch_size must be >= 1");
  TORCH_CHECK(anchor_count >= 1, "anchor_count must be >= 1");
  TORCH_CHECK(dims.wm_n == 0 || dims.T % dims.wm_n == 0, "N must divide T");
}

namespace {

json dims_to_json(const nn::ModelDims& d) {
  return json{{"d", d.d},
              {"K", d.K},
              {"T", d.T},
              {"L", d.L},
              {"heads", d.heads},
              {"A", d.A},
              {"Ta", d.Ta},
              {"bev_h", d.bev_h},
              {"bev_w", d.bev_w},
              {"in_h", d.in_h},
              {"in_w", d.in_w},
              {"c_sem", d.c_sem},
              {"wm_layers", d.wm_layers},
              {"wm_n", d.wm_n},
              {"ff_mult", d.ff_mult},
              {"extent", d.extent},
              {"dtype", d.dtype == torch::kFloat64 ? "float64" : "float32"}};
}

void dims_from_json(const json& j, nn::ModelDims& d) {
  d.d = j.value("d", d.d);
  d.K = j.value("K", d.K);
  d.T = j.value("T", d.T);
  d.L = j.value("L", d.L);
  d.heads = j.value("heads", d.heads);
  d.A = j.value("A", d.A);
  d.Ta = j.value("Ta", d.Ta);
  d.bev_h = j.value("bev_h", d.bev_h);
  d.bev_w = j.value("bev_w", d.bev_w);
  d.in_h = j.value("in_h", d.in_h);
  d.in_w = j.value("in_w", d.in_w);
  d.c_sem = j.value("c_sem", d.c_sem);
  d.wm_layers = j.value("wm_layers", d.wm_layers);
  d.wm_n = j.value("wm_n", d.wm_n);
  d.ff_mult = j.value("ff_mult", d.ff_mult);
  d.extent = j.value("extent", d.extent);
  const std::string dtype = j.value("dtype", std::string("float32"));
  TORCH_CHECK(dtype == "float32" || dtype == "float64",
              "dims.dtype must be float32 or float64");
  d.dtype = dtype == "float64" ? torch::kFloat64 : torch::kFloat32;
}

json coupling_to_json(const coupling::CouplingConfig& c) {
  return json{{"inject_ego_tokens", c.inject_ego_tokens},
              {"proactive_gradient", c.proactive_gradient},
              {"use_world_model", c.use_world_model},
              {"mlp_reward_dims", c.mlp_reward_dims},
              {"lambda_im", c.lambda_im},
              {"lambda_sim", c.lambda_sim},
              {"lambda_align", c.lambda_align},
              {"lambda_cur", c.wm_loss.lambda_cur},
              {"lambda_fut", c.wm_loss.lambda_fut},
              {"focal_alpha", c.wm_loss.focal_alpha},
              {"focal_gamma", c.wm_loss.focal_gamma},
              {"reward_w0", c.reward_weights.w0},
              {"reward_w1", c.reward_weights.w1},
              {"reward_w2", c.reward_weights.w2},
              {"reward_w3", c.reward_weights.w3},
              {"reward_log_clamp", c.reward_weights.log_clamp},
              {"traj_gamma", c.traj_loss.gamma},
              {"lambda_div", c.traj_loss.lambda_div},
              {"delta_div", c.traj_loss.delta_div},
              {"lambda_final", c.score_loss.lambda_final},
              {"lambda_valid", c.score_loss.lambda_valid},
              {"lambda_state", c.score_loss.lambda_state},
              {"lambda_area", c.score_loss.lambda_area},
              {"lambda_bev", c.aux_loss.lambda_bev},
              {"lambda_cls", c.aux_loss.lambda_cls},
              {"lambda_box", c.aux_loss.lambda_box}};
}

void coupling_from_json(const json& j, coupling::CouplingConfig& c) {
  c.inject_ego_tokens = j.value("inject_ego_tokens", c.inject_ego_tokens);
  c.proactive_gradient = j.value("proactive_gradient", c.proactive_gradient);
  c.use_world_model = j.value("use_world_model", c.use_world_model);
  c.mlp_reward_dims = j.value("mlp_reward_dims", c.mlp_reward_dims);
  c.lambda_im = j.value("lambda_im", c.lambda_im);
  c.lambda_sim = j.value("lambda_sim", c.lambda_sim);
  c.lambda_align = j.value("lambda_align", c.lambda_align);
  c.wm_loss.lambda_cur = j.value("lambda_cur", c.wm_loss.lambda_cur);
  c.wm_loss.lambda_fut = j.value("lambda_fut", c.wm_loss.lambda_fut);
  c.wm_loss.focal_alpha = j.value("focal_alpha", c.wm_loss.focal_alpha);
  c.wm_loss.focal_gamma = j.value("focal_gamma", c.wm_loss.focal_gamma);
  c.reward_weights.w0 = j.value("reward_w0", c.reward_weights.w0);
  c.reward_weights.w1 = j.value("reward_w1", c.reward_weights.w1);
  c.reward_weights.w2 = j.value("reward_w2", c.reward_weights.w2);
  c.reward_weights.w3 = j.value("reward_w3", c.reward_weights.w3);
  c.reward_weights.log_clamp = j.value("reward_log_clamp", c.reward_weights.log_clamp);
  c.traj_loss.gamma = j.value("traj_gamma", c.traj_loss.gamma);
  c.traj_loss.lambda_div = j.value("lambda_div", c.traj_loss.lambda_div);
  c.traj_loss.delta_div = j.value("delta_div", c.traj_loss.delta_div);
  c.score_loss.lambda_final = j.value("lambda_final", c.score_loss.lambda_final);
  c.score_loss.lambda_valid = j.value("lambda_valid", c.score_loss.lambda_valid);
  c.score_loss.lambda_state = j.value("lambda_state", c.score_loss.lambda_state);
  c.score_loss.lambda_area = j.value("lambda_area", c.score_loss.lambda_area);
  c.aux_loss.lambda_bev = j.value("lambda_bev", c.aux_loss.lambda_bev);
  c.aux_loss.lambda_cls = j.value("lambda_cls", c.aux_loss.lambda_cls);
  c.aux_loss.lambda_box = j.value("lambda_box", c.aux_loss.lambda_box);
  c.aux_loss.focal_alpha = c.wm_loss.focal_alpha;
  c.aux_loss.focal_gamma = c.wm_loss.focal_gamma;
}

json generator_to_json(const scenario::GeneratorConfig& g) {
  return json{{"min_agents", g.min_agents},
              {"max_agents", g.max_agents},
              {"template_weights", g.template_weights},
              {"min_speed", g.min_speed},
              {"max_speed", g.max_speed},
              {"lane_width", g.lane_width},
              {"max_retries", g.max_retries},
              {"version", g.version}};
}

void generator_from_json(const json& j, scenario::GeneratorConfig& g) {
  g.min_agents = j.value("min_agents", g.min_agents);
  g.max_agents = j.value("max_agents", g.max_agents);
  g.template_weights = j.value("template_weights", g.template_weights);
  g.min_speed = j.value("min_speed", g.min_speed);
  g.max_speed = j.value("max_speed", g.max_speed);
  g.lane_width = j.value("lane_width", g.lane_width);
  g.max_retries = j.value("max_retries", g.max_retries);
  g.version = j.value("version", g.version);
}

json oracle_to_json(const pdm::OracleConfig& o) {
  return json{{"collision_substep", o.collision_substep},
              {"ttc_threshold", o.ttc_threshold},
              {"ttc_projection_step", o.ttc_projection_step},
              {"max_accel", o.max_accel},
              {"max_jerk", o.max_jerk},
              {"max_yaw_rate", o.max_yaw_rate},
              {"ego_length", o.ego_length},
              {"ego_width", o.ego_width}};
}

void oracle_from_json(const json& j, pdm::OracleConfig& o) {
  o.collision_substep = j.value("collision_substep", o.collision_substep);
  o.ttc_threshold = j.value("ttc_threshold", o.ttc_threshold);
  o.ttc_projection_step = j.value("ttc_projection_step", o.ttc_projection_step);
  o.max_accel = j.value("max_accel", o.max_accel);
  o.max_jerk = j.value("max_jerk", o.max_jerk);
  o.max_yaw_rate = j.value("max_yaw_rate", o.max_yaw_rate);
  o.ego_length = j.value("ego_length", o.ego_length);
  o.ego_width = j.value("ego_width", o.ego_width);
}

}  // namespace

std::string to_json_string(const RunConfig& cfg) {
  json j{{"train_dataset", cfg.train_dataset},
         {"eval_dataset", cfg.eval_dataset},
         {"train_scenarios", cfg.train_scenarios},
         {"eval_scenarios", cfg.eval_scenarios},
         {"train_seed_base", cfg.train_seed_base},
         {"eval_seed_base", cfg.eval_seed_base},
         {"generator", generator_to_json(cfg.generator)},
         {"dims", dims_to_json(cfg.dims)},
         {"coupling", coupling_to_json(cfg.coupling)},
         {"oracle", oracle_to_json(cfg.oracle)},
         {"anchor_count", cfg.anchor_count},
         {"anchor_seed", cfg.anchor_seed},
         {"lr_ego", cfg.lr_ego},
         {"lr_env", cfg.lr_env},
         {"adam_beta1", cfg.adam_beta1},
         {"adam_beta2", cfg.adam_beta2},
         {"adam_eps", cfg.adam_eps},
         {"epochs", cfg.epochs},
         {"batch_size", cfg.batch_size},
         {"seed", cfg.seed},
         {"threads", cfg.threads},
         {"cache_pdm_targets", cfg.cache_pdm_targets},
         {"eval_curve_subset", cfg.eval_curve_subset}};
  return j.dump(2);
}

RunConfig config_from_json_string(const std::string& text) {
  const json j = json::parse(text);
  RunConfig cfg;
  static const std::set<std::string> known{
      "train_dataset", "eval_dataset", "train_scenarios", "eval_scenarios",
      "train_seed_base", "eval_seed_base", "generator", "dims", "coupling",
      "oracle", "anchor_count", "anchor_seed", "lr_ego", "lr_env",
      "adam_beta1", "adam_beta2", "adam_eps", "epochs", "batch_size", "seed",
      "threads", "cache_pdm_targets", "eval_curve_subset"};
  for (const auto& [key, value] : j.items()) {
    TORCH_CHECK(known.count(key) == 1, "unknown config key: ", key);
  }
  cfg.train_dataset = j.value("train_dataset", cfg.train_dataset);
  cfg.eval_dataset = j.value("eval_dataset", cfg.eval_dataset);
  cfg.train_scenarios = j.value("train_scenarios", cfg.train_scenarios);
  cfg.eval_scenarios = j.value("eval_scenarios", cfg.eval_scenarios);
  cfg.train_seed_base = j.value("train_seed_base", cfg.train_seed_base);
  cfg.eval_seed_base = j.value("eval_seed_base", cfg.eval_seed_base);
  if (j.contains("generator")) {
    generator_from_json(j.at("generator"), cfg.generator);
  }
  if (j.contains("dims")) {
    dims_from_json(j.at("dims"), cfg.dims);
  }
  if (j.contains("coupling")) {
    coupling_from_json(j.at("coupling"), cfg.coupling);
  }
  if (j.contains("oracle")) {
    oracle_from_json(j.at("oracle"), cfg.oracle);
  }
  cfg.anchor_count = j.value("anchor_count", cfg.anchor_count);
  cfg.anchor_seed = j.value("anchor_seed", cfg.anchor_seed);
  cfg.lr_ego = j.value("lr_ego", cfg.lr_ego);
  cfg.lr_env = j.value("lr_env", cfg.lr_env);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.cache_pdm_targets = j.value("cache_pdm_targets", cfg.cache_pdm_targets);
  cfg.eval_curve_subset = j.value("eval_curve_subset", cfg.eval_curve_subset);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  TORCH_CHECK(in.good(), "cannot open config file ", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_string(ss.str());
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  TORCH_CHECK(out.good(), "cannot write config file ", path.string());
  out << to_json_string(cfg) << "\n";
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string canonical = to_json_string(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash_hex(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return std::string(buf);
}

}  // namespace bevplan::harness
