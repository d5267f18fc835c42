#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bevplan/coupling/coupling.hpp"
#include "bevplan/nn/dims.hpp"
#include "bevplan/pdm/oracle.hpp"
#include "bevplan/scenario/generate.hpp"

namespace bevplan::harness {

struct RunConfig {
  // Datasets: directories of generated scenarios. Missing directories are
  // generated on demand from the deterministic seed bases below.
  std::string train_dataset = "data/train";
  std::string eval_dataset = "data/eval";
  int train_scenarios = 512;
  int eval_scenarios = 128;
  std::uint64_t train_seed_base = 0;
  std::uint64_t eval_seed_base = 100000;
  scenario::GeneratorConfig generator;

  nn::ModelDims dims;
  coupling::CouplingConfig coupling;
  pdm::OracleConfig oracle;
  int anchor_count = 64;
  unsigned anchor_seed = 0;

  // Two-group Adam: the planner group and the environment+coupling group.
  double lr_ego = 1e-4;
  double lr_env = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 5;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int threads = 2;
  bool cache_pdm_targets = false;
  int eval_curve_subset = 32;  // per-epoch PDMS probe size (0 disables)

  void validate() const;
};

// JSON (de)serialization. Unknown keys are rejected; missing keys keep
// defaults. The documented schema lives in the README.
std::string to_json_string(const RunConfig& cfg);
RunConfig config_from_json_string(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

// Stable FNV-1a hash of the canonical JSON serialization; embedded in every
// checkpoint and metrics artifact.
std::uint64_t config_hash(const RunConfig& cfg);
std::string config_hash_hex(const RunConfig& cfg);

}  // namespace bevplan::harness
