#include "bevplan/harness/featurize.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_map>

namespace bevplan::harness {

namespace scn = bevplan::scenario;

scn::RasterConfig input_raster_config(const nn::ModelDims& dims) {
  scn::RasterConfig cfg;
  cfg.h = dims.in_h;
  cfg.w = dims.in_w;
  cfg.resolution = dims.input_resolution();
  return cfg;
}

scn::RasterConfig bev_raster_config(const nn::ModelDims& dims) {
  scn::RasterConfig cfg;
  cfg.h = dims.bev_h;
  cfg.w = dims.bev_w;
  cfg.resolution = dims.bev_resolution();
  return cfg;
}

namespace {

torch::Tensor raster_to_tensor(const scn::BevRaster& r, torch::Dtype dtype) {
  auto t = torch::from_blob(const_cast<double*>(r.data.data()),
                            {scn::kNumChannels, r.h, r.w}, torch::kFloat64);
  return t.clone().to(dtype);
}

}  // namespace

BatchInputs build_inputs(const std::vector<const scn::Scenario*>& batch,
                         const nn::ModelDims& dims) {
  const auto cfg = input_raster_config(dims);
  std::vector<torch::Tensor> rasters;
  std::vector<torch::Tensor> egos;
  rasters.reserve(batch.size());
  egos.reserve(batch.size());
  for (const auto* s : batch) {
    rasters.push_back(raster_to_tensor(scn::rasterize_bev(*s, 0.0, cfg), dims.dtype));
    egos.push_back(torch::tensor({s->ego_status.velocity, s->ego_status.acceleration,
                                  s->ego_status.yaw_rate},
                                 torch::kFloat64)
                       .to(dims.dtype));
  }
  return {torch::stack(rasters, 0), torch::stack(egos, 0)};
}

StaticTargets build_static_targets(
    const std::vector<const scn::Scenario*>& batch, const nn::ModelDims& dims) {
  const auto B = static_cast<std::int64_t>(batch.size());
  const auto opts = torch::TensorOptions().dtype(dims.dtype);
  StaticTargets t;
  t.score.validity = torch::zeros({B, dims.A}, opts);
  t.score.agent_states = torch::zeros({B, dims.A, dims.Ta, 2}, opts);
  t.score.area = torch::zeros({B, dims.bev_h * dims.bev_w}, opts);
  t.aux.det_cls = torch::zeros({B, dims.A}, opts);
  t.aux.det_box = torch::zeros({B, dims.A, 4}, opts);
  t.expert = torch::zeros({B, dims.T, 3}, opts);

  const auto in_cfg = input_raster_config(dims);
  const auto bev_cfg = bev_raster_config(dims);
  std::vector<torch::Tensor> sem;
  sem.reserve(batch.size());

  for (std::int64_t b = 0; b < B; ++b) {
    const auto& s = *batch[b];
    sem.push_back(raster_to_tensor(scn::rasterize_bev(s, 0.0, in_cfg), dims.dtype));

    // Key-agent slots: the A nearest agents at t = 0, by distance to the
    // ego origin.
    std::vector<std::pair<double, const scn::AgentTrack*>> by_dist;
    for (const auto& agent : s.agents) {
      by_dist.emplace_back(agent.pose_at(0.0).position().norm(), &agent);
    }
    std::sort(by_dist.begin(), by_dist.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const int slots = std::min<int>(dims.A, static_cast<int>(by_dist.size()));
    for (int a = 0; a < slots; ++a) {
      const auto* agent = by_dist[a].second;
      t.score.validity[b][a] = 1.0;
      t.aux.det_cls[b][a] = 1.0;
      const auto p0 = agent->pose_at(0.0);
      t.aux.det_box[b][a][0] = p0.x;
      t.aux.det_box[b][a][1] = p0.y;
      t.aux.det_box[b][a][2] = agent->length;
      t.aux.det_box[b][a][3] = agent->width;
      for (int i = 0; i < dims.Ta; ++i) {
        const auto p = agent->pose_at((i + 1) * scn::kStepSeconds);
        t.score.agent_states[b][a][i][0] = p.x;
        t.score.agent_states[b][a][i][1] = p.y;
      }
    }

    // Ego-area occupancy: the expert's swept footprint on the BEV grid.
    const auto swept = scn::swept_ego_cells(s.expert, bev_cfg);
    auto area = torch::from_blob(const_cast<double*>(swept.data()),
                                 {dims.bev_h * dims.bev_w}, torch::kFloat64);
    t.score.area[b] = area.to(dims.dtype);

    const int T = std::min<int>(dims.T, static_cast<int>(s.expert.waypoints.size()));
    for (int i = 0; i < T; ++i) {
      const auto& wp = s.expert.waypoints[i];
      t.expert[b][i][0] = wp.x;
      t.expert[b][i][1] = wp.y;
      t.expert[b][i][2] = wp.theta;
    }
  }
  t.cur_sem = torch::stack(sem, 0);
  t.aux.bev = t.cur_sem;
  return t;
}

std::vector<std::vector<scn::Trajectory>> proposals_to_trajectories(
    const torch::Tensor& proposals) {
  auto p = proposals.detach().to(torch::kFloat64).contiguous();
  const auto B = p.size(0);
  const auto K = p.size(1);
  const auto T = p.size(2);
  auto acc = p.accessor<double, 4>();
  std::vector<std::vector<scn::Trajectory>> out(B);
  for (std::int64_t b = 0; b < B; ++b) {
    out[b].resize(K);
    for (std::int64_t k = 0; k < K; ++k) {
      out[b][k].waypoints.resize(T);
      for (std::int64_t t = 0; t < T; ++t) {
        out[b][k].waypoints[t] = {acc[b][k][t][0], acc[b][k][t][1],
                                  acc[b][k][t][2]};
      }
    }
  }
  return out;
}

namespace {

std::uint64_t hash_trajectory(const std::string& scenario_id,
                              const scn::Trajectory& t) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 0x100000001b3ull;
    }
  };
  mix(scenario_id.data(), scenario_id.size());
  for (const auto& wp : t.waypoints) {
    mix(&wp.x, sizeof(double));
    mix(&wp.y, sizeof(double));
    mix(&wp.theta, sizeof(double));
  }
  return h;
}

std::unordered_map<std::uint64_t, double>& pdm_cache() {
  static std::unordered_map<std::uint64_t, double> cache;
  return cache;
}
std::mutex pdm_cache_mutex;

}  // namespace

torch::Tensor online_pdm_targets_tensor(
    const std::vector<const scn::Scenario*>& batch,
    const torch::Tensor& proposals, const pdm::OracleConfig& oracle,
    bool use_cache) {
  const auto trajs = proposals_to_trajectories(proposals);
  const auto B = static_cast<std::int64_t>(batch.size());
  const auto K = static_cast<std::int64_t>(trajs.empty() ? 0 : trajs[0].size());
  auto out = torch::zeros({B, K}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t k = 0; k < K; ++k) {
      double value;
      if (use_cache) {
        const auto key = hash_trajectory(batch[b]->scenario_id, trajs[b][k]);
        std::lock_guard<std::mutex> lock(pdm_cache_mutex);
        auto it = pdm_cache().find(key);
        if (it != pdm_cache().end()) {
          value = it->second;
        } else {
          value = pdm::pdms(pdm::rollout_check(*batch[b], trajs[b][k], oracle));
          pdm_cache().emplace(key, value);
        }
      } else {
        value = pdm::pdms(pdm::rollout_check(*batch[b], trajs[b][k], oracle));
      }
      acc[b][k] = value;
    }
  }
  return out.to(proposals.dtype());
}

torch::Tensor anchor_sim_targets(
    const std::vector<const scn::Scenario*>& batch,
    const torch::Tensor& proposals, const pdm::AnchorSet& anchors) {
  const auto trajs = proposals_to_trajectories(proposals);
  const auto B = static_cast<std::int64_t>(batch.size());
  const auto K = static_cast<std::int64_t>(trajs.empty() ? 0 : trajs[0].size());
  auto out = torch::zeros({B, K, 5}, torch::kFloat64);
  auto acc = out.accessor<double, 3>();
  for (std::int64_t b = 0; b < B; ++b) {
    auto it = anchors.metrics.find(batch[b]->scenario_id);
    TORCH_CHECK(it != anchors.metrics.end(),
                "anchor_sim_targets: no precomputed metrics for scenario ",
                batch[b]->scenario_id);
    for (std::int64_t k = 0; k < K; ++k) {
      const auto j = pdm::nearest_anchor(trajs[b][k], anchors.anchors);
      const auto& sub = it->second.at(j);
      acc[b][k][0] = sub.nc;
      acc[b][k][1] = sub.dac;
      acc[b][k][2] = sub.ttc;
      acc[b][k][3] = sub.comfort;
      acc[b][k][4] = sub.ep;
    }
  }
  return out.to(proposals.dtype());
}

torch::Tensor future_semantic_targets(
    const std::vector<const scn::Scenario*>& batch,
    const torch::Tensor& proposals, const std::vector<std::int64_t>& selected,
    const nn::ModelDims& dims) {
  const auto trajs = proposals_to_trajectories(proposals);
  const auto cfg = input_raster_config(dims);
  const double t_future = dims.T * scn::kStepSeconds;
  std::vector<torch::Tensor> maps;
  maps.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& traj = trajs[b][selected[b]];
    maps.push_back(raster_to_tensor(
        scn::render_future_target(*batch[b], traj, t_future, cfg), dims.dtype));
  }
  return torch::stack(maps, 0);
}

}  // namespace bevplan::harness
