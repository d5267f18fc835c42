#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bevplan/harness/report.hpp"
#include "bevplan/harness/train.hpp"
#include "bevplan/scenario/dataset.hpp"
#include "bevplan/scenario/generate.hpp"

namespace fs = std::filesystem;
using namespace bevplan;

namespace {

std::pair<std::uint64_t, std::uint64_t> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw CLI::ValidationError("range", "expected A:B, got " + text);
  }
  const std::uint64_t a = std::stoull(text.substr(0, colon));
  const std::uint64_t b = std::stoull(text.substr(colon + 1));
  if (b < a) {
    throw CLI::ValidationError("range", "range end before start: " + text);
  }
  return {a, b};
}

scenario::GeneratorConfig generator_config_from_file(const std::string& path) {
  if (path.empty()) {
    return {};
  }
  // Accept either a bare generator config or a full run config.
  std::ifstream in(path);
  if (!in.good()) {
    throw CLI::ValidationError("--config", "cannot open " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  const auto j = nlohmann::json::parse(ss.str());
  if (j.contains("generator") || j.contains("dims")) {
    return harness::config_from_json_string(ss.str()).generator;
  }
  scenario::GeneratorConfig g;
  g.min_agents = j.value("min_agents", g.min_agents);
  g.max_agents = j.value("max_agents", g.max_agents);
  g.template_weights = j.value("template_weights", g.template_weights);
  g.min_speed = j.value("min_speed", g.min_speed);
  g.max_speed = j.value("max_speed", g.max_speed);
  g.lane_width = j.value("lane_width", g.lane_width);
  g.max_retries = j.value("max_retries", g.max_retries);
  return g;
}

int cmd_generate(const std::string& range_text, const std::string& config_path,
                 const std::string& out_dir) {
  const auto [a, b] = parse_range(range_text);
  const auto gen = generator_config_from_file(config_path);
  std::vector<scenario::Scenario> scenarios;
  scenarios.reserve(b - a);
  for (std::uint64_t seed = a; seed < b; ++seed) {
    scenarios.push_back(scenario::generate_scenario(seed, gen));
  }
  const auto manifest = scenario::write_dataset(scenarios, out_dir, gen.version);
  std::cout << "wrote " << manifest.count << " scenarios to " << out_dir << "\n";
  return 0;
}

int cmd_score(const std::string& dataset_dir, const std::string& traj_file,
              const std::string& out_csv) {
  const auto scenarios = scenario::read_dataset(dataset_dir);
  std::ifstream in(traj_file);
  if (!in.good()) {
    std::cerr << "cannot open trajectories file " << traj_file << "\n";
    return 1;
  }
  const auto j = nlohmann::json::parse(in);
  std::unordered_map<std::string, scenario::Trajectory> trajs;
  for (const auto& item : j.at("trajectories")) {
    scenario::Trajectory t;
    for (const auto& wp : item.at("waypoints")) {
      t.waypoints.push_back({wp.at(0).get<double>(), wp.at(1).get<double>(),
                             wp.at(2).get<double>()});
    }
    trajs[item.at("scenario_id").get<std::string>()] = std::move(t);
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_csv.empty()) {
    file.open(out_csv, std::ios::trunc);
    out = &file;
  }
  *out << "scenario_id,nc,dac,ttc,comfort,ep,pdms\n";
  pdm::Subscores mean;
  double mean_pdms = 0.0;
  std::size_t n = 0;
  for (const auto& s : scenarios) {
    auto it = trajs.find(s.scenario_id);
    if (it == trajs.end()) {
      continue;
    }
    const auto sub = pdm::rollout_check(s, it->second);
    const double score = pdm::pdms(sub);
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%g,%g,%g,%g,%g,%.6f\n",
                  s.scenario_id.c_str(), sub.nc, sub.dac, sub.ttc, sub.comfort,
                  sub.ep, score);
    *out << line;
    mean.nc += sub.nc;
    mean.dac += sub.dac;
    mean.ttc += sub.ttc;
    mean.comfort += sub.comfort;
    mean.ep += sub.ep;
    mean_pdms += score;
    ++n;
  }
  if (n > 0) {
    char line[256];
    std::snprintf(line, sizeof(line), "summary,%g,%g,%g,%g,%g,%.6f\n",
                  mean.nc / n, mean.dac / n, mean.ttc / n, mean.comfort / n,
                  mean.ep / n, mean_pdms / n);
    *out << line;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bevplan: a BEV world-model coupled trajectory planner"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "generate a scenario dataset");
  std::string seed_range = "0:512";
  std::string gen_config;
  std::string gen_out = "data/train";
  generate->add_option("--seed-range", seed_range, "seed range A:B (B exclusive)")
      ->envname("BEVPLAN_SEED_RANGE");
  generate->add_option("--config", gen_config, "generator config JSON")
      ->envname("BEVPLAN_CONFIG");
  generate->add_option("--out", gen_out, "output dataset directory")
      ->envname("BEVPLAN_OUT");

  // score
  auto* score = app.add_subcommand("score", "score trajectories with the oracle");
  std::string score_dataset, score_trajs, score_out;
  score->add_option("--dataset", score_dataset, "dataset directory")
      ->required()
      ->envname("BEVPLAN_DATASET");
  score->add_option("--trajectories", score_trajs, "trajectories JSON file")
      ->required()
      ->envname("BEVPLAN_TRAJECTORIES");
  score->add_option("--out", score_out, "CSV output path (default stdout)")
      ->envname("BEVPLAN_OUT");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string train_config;
  std::string train_run = "runs/default";
  train_cmd->add_option("--config", train_config, "run config JSON")
      ->envname("BEVPLAN_CONFIG");
  train_cmd->add_option("--run", train_run, "run output directory")
      ->envname("BEVPLAN_RUN");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_split, eval_out = "eval.csv";
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")
      ->required()
      ->envname("BEVPLAN_CKPT");
  eval_cmd->add_option("--split", eval_split, "dataset directory")
      ->required()
      ->envname("BEVPLAN_SPLIT");
  eval_cmd->add_option("--out", eval_out, "CSV output path")
      ->envname("BEVPLAN_OUT");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "run the ablation suite");
  std::string ablate_config;
  std::string ablate_seeds = "0:5";
  std::string ablate_run = "runs/ablation";
  ablate_cmd->add_option("--config", ablate_config, "base run config JSON")
      ->envname("BEVPLAN_CONFIG");
  ablate_cmd->add_option("--seeds", ablate_seeds, "seed range A:B (B exclusive)")
      ->envname("BEVPLAN_SEEDS");
  ablate_cmd->add_option("--run", ablate_run, "output directory")
      ->envname("BEVPLAN_RUN");

  // report
  auto* report_cmd = app.add_subcommand("report", "render run artifacts");
  std::string report_run;
  report_cmd->add_option("--run", report_run, "run directory")
      ->required()
      ->envname("BEVPLAN_RUN");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      return cmd_generate(seed_range, gen_config, gen_out);
    }
    if (score->parsed()) {
      return cmd_score(score_dataset, score_trajs, score_out);
    }
    if (train_cmd->parsed()) {
      harness::RunConfig cfg = train_config.empty()
                                   ? harness::RunConfig{}
                                   : harness::load_config(train_config);
      const auto result = harness::train(cfg, train_run);
      std::cout << "checkpoint: " << result.checkpoint_path << "\n";
      for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
        std::cout << "epoch " << (e + 1)
                  << " mean total loss: " << result.epoch_mean_loss[e]
                  << "  pdms probe: " << result.epoch_pdms[e] << "\n";
      }
      return 0;
    }
    if (eval_cmd->parsed()) {
      const auto summary =
          harness::evaluate_checkpoint(eval_ckpt, eval_split, eval_out);
      std::printf(
          "scenarios=%zu failures=%zu\nNC=%.4f DAC=%.4f TTC=%.4f C=%.4f "
          "EP=%.4f PDMS=%.4f\n",
          summary.count, summary.failures, summary.nc, summary.dac, summary.ttc,
          summary.comfort, summary.ep, summary.pdms);
      return 0;
    }
    if (ablate_cmd->parsed()) {
      harness::RunConfig cfg = ablate_config.empty()
                                   ? harness::RunConfig{}
                                   : harness::load_config(ablate_config);
      const auto [a, b] = parse_range(ablate_seeds);
      std::vector<std::uint64_t> seeds;
      for (std::uint64_t s = a; s < b; ++s) {
        seeds.push_back(s);
      }
      const auto rows = harness::ablate(cfg, seeds, ablate_run);
      std::printf("%-24s %-6s %-7s %-7s %-7s %-7s %-7s %-7s\n", "variant",
                  "seed", "NC", "DAC", "TTC", "Comf.", "EP", "PDMS");
      for (const auto& row : rows) {
        std::printf("%-24s %-6llu %-7.4f %-7.4f %-7.4f %-7.4f %-7.4f %-7.4f\n",
                    row.variant.c_str(),
                    static_cast<unsigned long long>(row.seed), row.summary.nc,
                    row.summary.dac, row.summary.ttc, row.summary.comfort,
                    row.summary.ep, row.summary.pdms);
      }
      for (const char* variant : harness::kAblationVariants) {
        double mean = 0.0;
        int n = 0;
        for (const auto& row : rows) {
          if (row.variant == variant) {
            mean += row.summary.pdms;
            ++n;
          }
        }
        if (n > 0) {
          std::printf("%-24s mean PDMS over %d seed(s): %.4f\n", variant, n,
                      mean / n);
        }
      }
      return 0;
    }
    if (report_cmd->parsed()) {
      const auto outputs = harness::report(report_run);
      for (const auto& p : outputs) {
        std::cout << p.string() << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
