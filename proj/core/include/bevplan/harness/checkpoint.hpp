#pragma once

#include <filesystem>
#include <string>

#include "bevplan/coupling/coupling.hpp"
#include "bevplan/harness/config.hpp"

namespace bevplan::harness {

// Single-file parameter archive with the full run config embedded. Loading
// reconstructs the model from the embedded config and fills every
// parameter by name (missing or extra parameters are rejected).
void save_checkpoint(const std::filesystem::path& path,
                     coupling::CoupledModel& model, const RunConfig& cfg);

struct LoadedCheckpoint {
  RunConfig config;
  coupling::CoupledModel model{nullptr};
  std::uint64_t config_hash = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bevplan::harness
