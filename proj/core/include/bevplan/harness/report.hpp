#pragma once

#include <filesystem>
#include <vector>

namespace bevplan::harness {

// Renders run artifacts into report/: loss curves, the PDMS-per-epoch
// curve, an ablation bar chart when ablation.csv is present, BEV scene
// plots (ground truth + predicted current/future semantics with candidate
// trajectories, selected highlighted), and summary.md. Regeneration is
// idempotent. Missing inputs raise an error listing the expected files.
std::vector<std::filesystem::path> report(const std::filesystem::path& run_dir);

}  // namespace bevplan::harness
