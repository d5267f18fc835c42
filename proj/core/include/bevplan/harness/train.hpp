#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bevplan/harness/config.hpp"
#include "bevplan/harness/featurize.hpp"

namespace bevplan::harness {

// Shared, immutable training inputs. Built once and reused across runs
// (the ablation suite trains 4 variants x S seeds on identical data).
struct TrainContext {
  std::vector<scenario::Scenario> train_scenarios;
  std::vector<scenario::Scenario> eval_scenarios;
  pdm::AnchorSet anchors;
};

// Loads the configured datasets (generating them deterministically when the
// directories are missing) and precomputes the anchor set + metrics table.
TrainContext prepare_context(const RunConfig& cfg);

struct TrainAbort : std::runtime_error {
  explicit TrainAbort(const std::string& what) : std::runtime_error(what) {}
};

struct TrainResult {
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
  std::vector<double> epoch_mean_loss;
  std::vector<double> epoch_pdms;  // probe-subset PDMS per epoch
};

// End-to-end training: two-group Adam (planner at lr_ego, environment +
// coupling at lr_env), per-step loss logging, per-epoch PDMS probe, and a
// final checkpoint with the embedded config. Deterministic for a fixed
// (config, platform, thread count).
TrainResult train(const RunConfig& cfg, const std::filesystem::path& run_dir,
                  const TrainContext& ctx);
TrainResult train(const RunConfig& cfg, const std::filesystem::path& run_dir);

struct EvalRow {
  std::string scenario_id;
  pdm::Subscores subscores;
  double pdms = 0.0;
  std::int64_t selected = -1;
};

struct EvalSummary {
  double nc = 0.0;
  double dac = 0.0;
  double ttc = 0.0;
  double comfort = 0.0;
  double ep = 0.0;
  double pdms = 0.0;
  std::size_t count = 0;
  std::size_t failures = 0;
};

// Plans, rolls out, selects (identical code path as training), and scores
// the selected trajectory with the oracle. Rows come back sorted by
// scenario_id; per-scenario failures are recorded, not fatal.
EvalSummary evaluate_model(coupling::CoupledModel& model, const RunConfig& cfg,
                           const std::vector<const scenario::Scenario*>& scenarios,
                           std::vector<EvalRow>* rows_out = nullptr);

// Checkpoint-file surface used by the CLI.
EvalSummary evaluate_checkpoint(const std::filesystem::path& ckpt,
                                const std::filesystem::path& split_dir,
                                const std::filesystem::path& csv_out);

EvalSummary summary_from_rows(const std::vector<EvalRow>& rows);

void write_eval_csv(const std::filesystem::path& path,
                    const std::vector<EvalRow>& rows, const EvalSummary& summary,
                    const std::string& config_hash_hex);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  EvalSummary summary;
  std::string config_hash;
};

// Trains full + {w/o world model, w/o ego token injection, w/o proactive
// gradient} on identical data per seed and evaluates each on the eval
// split. Writes ablation.csv plus per-run artifacts under out_dir.
std::vector<AblationRow> ablate(const RunConfig& base,
                                const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& out_dir);

// One-sided sign test: P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_p(int wins, int n);

inline const char* const kAblationVariants[4] = {
    "full", "no_world_model", "no_ego_injection", "no_proactive_gradient"};

// Applies a variant's coupling switches to a base config.
RunConfig variant_config(const RunConfig& base, const std::string& variant,
                         std::uint64_t seed);

}  // namespace bevplan::harness
