#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "bevplan/scenario/types.hpp"

namespace bevplan::scenario {

enum class SceneTemplate : int {
  kStraight = 0,
  kTurn = 1,
  kMerge = 2,
  kCrossing = 3,
  kLeadingVehicle = 4,
};
inline constexpr int kNumTemplates = 5;

struct GeneratorConfig {
  int min_agents = 1;
  int max_agents = 4;
  // Mixture weights over {straight, turn, merge, crossing, leading-vehicle}.
  std::array<double, kNumTemplates> template_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  double min_speed = 3.0;   // m/s, ego initial speed sample range
  double max_speed = 11.0;
  double lane_width = 7.0;  // corridor half-width is lane_width/2 + margin
  int max_retries = 40;
  int version = 1;  // recorded in dataset manifests
};

struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic function of (seed, config). The expert trajectory is
// collision-free and drivable-area compliant under the pdm oracle; retries
// exhausted raises GenerationError naming the seed.
Scenario generate_scenario(std::uint64_t seed, const GeneratorConfig& cfg = {});

}  // namespace bevplan::scenario
