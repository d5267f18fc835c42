#include "bevplan/harness/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "bevplan/harness/checkpoint.hpp"
#include "bevplan/harness/featurize.hpp"
#include "bevplan/harness/train.hpp"
#include "bevplan/scenario/dataset.hpp"

namespace bevplan::harness {

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) {
        return static_cast<int>(i);
      }
    }
    return -1;
  }
};

Csv read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  TORCH_CHECK(in.good(), "cannot read ", path.string());
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      fields.push_back(field);
    }
    if (first) {
      csv.header = fields;
      first = false;
    } else {
      csv.rows.push_back(fields);
    }
  }
  return csv;
}

class Svg {
 public:
  Svg(int width, int height) : w_(width), h_(height) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_
          << "\" height=\"" << h_ << "\" viewBox=\"0 0 " << w_ << " " << h_
          << "\">\n";
    body_ << "<rect width=\"" << w_ << "\" height=\"" << h_
          << "\" fill=\"#ffffff\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& extra = "") {
    body_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w
          << "\" height=\"" << h << "\" fill=\"" << fill << "\" " << extra
          << "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0, const std::string& extra = "") {
    body_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2
          << "\" y2=\"" << y2 << "\" stroke=\"" << stroke << "\" stroke-width=\""
          << width << "\" " << extra << "/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& stroke, double width = 1.5,
                const std::string& extra = "") {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke
          << "\" stroke-width=\"" << width << "\" " << extra << " points=\"";
    for (const auto& [x, y] : pts) {
      body_ << x << "," << y << " ";
    }
    body_ << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill,
              const std::string& extra = "") {
    body_ << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << r
          << "\" fill=\"" << fill << "\" " << extra << "/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& fill = "#333333") {
    body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
          << "\" font-family=\"sans-serif\" fill=\"" << fill << "\">" << s
          << "</text>\n";
  }
  void save(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    out << body_.str() << "</svg>\n";
  }

 private:
  int w_, h_;
  std::stringstream body_;
};

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

const char* kSeriesColors[8] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

void line_chart(const std::filesystem::path& out,
                const std::vector<std::string>& names,
                const std::vector<std::vector<double>>& series,
                const std::string& x_label) {
  const int W = 860, H = 420, ml = 60, mr = 160, mt = 20, mb = 40;
  Svg svg(W, H);
  double ymax = 1e-9, ymin = 0.0;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.size());
    for (double v : s) {
      ymax = std::max(ymax, v);
      ymin = std::min(ymin, v);
    }
  }
  const double plot_w = W - ml - mr, plot_h = H - mt - mb;
  auto X = [&](double i) {
    return ml + (n > 1 ? i / (n - 1) : 0.5) * plot_w;
  };
  auto Y = [&](double v) {
    return mt + (1.0 - (v - ymin) / std::max(1e-12, ymax - ymin)) * plot_h;
  };
  svg.line(ml, mt, ml, H - mb, "#999999");
  svg.line(ml, H - mb, W - mr, H - mb, "#999999");
  svg.text(ml, H - 8, x_label);
  svg.text(4, mt + 10, fmt(ymax, "%.4g"));
  svg.text(4, H - mb, fmt(ymin, "%.4g"));
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < series[s].size(); ++i) {
      pts.emplace_back(X(static_cast<double>(i)), Y(series[s][i]));
    }
    const std::string color = kSeriesColors[s % 8];
    svg.polyline(pts, color, 1.5);
    svg.text(W - mr + 10, mt + 16 + 16 * static_cast<double>(s), names[s], 11,
             color);
  }
  svg.save(out);
}

// Semantic raster panel; channels thresholded at 0.5 and drawn with the
// priority ego > agent > route > drivable > background.
void draw_semantic_panel(Svg& svg, const torch::Tensor& maps, double x0,
                         double y0, double panel, const std::string& title) {
  const auto C = maps.size(0);
  const auto h = maps.size(1);
  const auto w = maps.size(2);
  const double cell = panel / std::max(h, w);
  static const char* colors[5] = {"#8d8d8d", "#d9534f", "#5cb85c", "#64a0dc",
                                  "#f2f0eb"};
  auto maps64 = maps.to(torch::kFloat64).contiguous();
  auto acc = maps64.accessor<double, 3>();
  svg.text(x0, y0 - 6, title);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      int cls = 4;
      if (C > 2 && acc[2][r][c] > 0.5) {
        cls = 2;
      } else if (C > 1 && acc[1][r][c] > 0.5) {
        cls = 1;
      } else if (C > 3 && acc[3][r][c] > 0.5) {
        cls = 3;
      } else if (acc[0][r][c] > 0.5) {
        cls = 0;
      }
      // Row r indexes y upward; SVG y grows downward.
      svg.rect(x0 + c * cell, y0 + (h - 1 - r) * cell, cell + 0.1, cell + 0.1,
               colors[cls]);
    }
  }
}

}  // namespace

std::vector<std::filesystem::path> report(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  const bool is_ablation = fs::exists(run_dir / "ablation.csv");
  std::vector<std::string> missing;
  for (const char* name :
       {"config.json", "train_log.csv", "epoch_pdms.csv", "checkpoint.bin"}) {
    if (!is_ablation && !fs::exists(run_dir / name)) {
      missing.push_back(name);
    }
  }
  if (is_ablation) {
    // Ablation directories only need the table.
    missing.clear();
  }
  TORCH_CHECK(missing.empty(), "report: missing run artifacts in ",
              run_dir.string(), ": ",
              [&] {
                std::string all;
                for (const auto& m : missing) {
                  all += m + " ";
                }
                return all;
              }());

  const fs::path out_dir = run_dir / "report";
  fs::create_directories(out_dir);
  std::vector<fs::path> outputs;
  std::stringstream summary;
  summary << "# Run report\n\n";

  if (!is_ablation) {
    const Csv log = read_csv(run_dir / "train_log.csv");
    const std::vector<std::string> loss_cols = {
        "loss_traj", "loss_score", "loss_aux", "loss_im",
        "loss_sim",  "loss_align", "loss_wm",  "total"};
    std::vector<std::string> names;
    std::vector<std::vector<double>> series;
    for (const auto& col : loss_cols) {
      const int idx = log.column(col);
      if (idx < 0) {
        continue;
      }
      std::vector<double> s;
      s.reserve(log.rows.size());
      for (const auto& row : log.rows) {
        s.push_back(std::stod(row[idx]));
      }
      names.push_back(col);
      series.push_back(std::move(s));
    }
    line_chart(out_dir / "loss_curves.svg", names, series, "step");
    outputs.push_back(out_dir / "loss_curves.svg");

    const Csv pdms_csv = read_csv(run_dir / "epoch_pdms.csv");
    {
      const int pe = pdms_csv.column("pdms");
      const int W = 520, H = 300, ml = 60, mb = 40, mt = 20;
      Svg svg(W, H);
      const std::size_t n = pdms_csv.rows.size();
      svg.line(ml, mt, ml, H - mb, "#999999");
      svg.line(ml, H - mb, W - 20, H - mb, "#999999");
      svg.text(ml, H - 8, "epoch");
      svg.text(4, mt + 10, "pdms");
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = std::stod(pdms_csv.rows[i][pe]);
        const double x = ml + (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5) *
                                  (W - ml - 20);
        const double y = mt + (1.0 - v) * (H - mt - mb);
        pts.emplace_back(x, y);
      }
      svg.polyline(pts, "#2ca02c", 2.0);
      for (std::size_t i = 0; i < n; ++i) {
        svg.circle(pts[i].first, pts[i].second, 3.0, "#2ca02c",
                   "data-pdms=\"" + pdms_csv.rows[i][pe] + "\"");
      }
      svg.save(out_dir / "pdms_epoch.svg");
      outputs.push_back(out_dir / "pdms_epoch.svg");
    }

    // BEV scene plots from the checkpointed model on eval scenarios.
    auto loaded = load_checkpoint(run_dir / "checkpoint.bin");
    torch::set_num_threads(loaded.config.threads);
    if (fs::exists(fs::path(loaded.config.eval_dataset) / "manifest")) {
      auto scenarios = scenario::read_dataset(loaded.config.eval_dataset);
      std::sort(scenarios.begin(), scenarios.end(),
                [](const auto& a, const auto& b) {
                  return a.scenario_id < b.scenario_id;
                });
      torch::NoGradGuard no_grad;
      const int plots = std::min<int>(3, static_cast<int>(scenarios.size()));
      for (int i = 0; i < plots; ++i) {
        const auto& scn = scenarios[i];
        auto inputs = build_inputs({&scn}, loaded.config.dims);
        auto out = loaded.model->forward(inputs.raster, inputs.ego);

        const double panel = 256.0, gap = 24.0, m = 28.0;
        const bool has_future = out.future_semantic.defined();
        const int panels = 2 + (has_future ? 1 : 0);
        Svg svg(static_cast<int>(m * 2 + panels * panel + (panels - 1) * gap),
                static_cast<int>(panel + 2 * m + 10));
        draw_semantic_panel(svg, inputs.raster[0], m, m + 10, panel,
                            "observed scene t=0 (" + scn.scenario_id + ")");
        auto pred_cur = torch::sigmoid(out.current_semantic.defined()
                                           ? out.current_semantic[0]
                                           : out.plan.scores.bev[0]);
        draw_semantic_panel(svg, pred_cur, m + panel + gap, m + 10, panel,
                            "predicted current semantics");
        if (has_future) {
          auto pred_fut = torch::sigmoid(out.future_semantic[0]);
          draw_semantic_panel(svg, pred_fut, m + 2 * (panel + gap), m + 10,
                              panel, "predicted future semantics (selected)");
        }

        // Candidate trajectories over the observed panel.
        const double extent = loaded.config.dims.extent;
        auto world_to_panel = [&](double wx, double wy) {
          return std::pair<double, double>{
              m + (wx / extent + 0.5) * panel,
              m + 10 + (0.5 - wy / extent) * panel};
        };
        auto trajs = proposals_to_trajectories(out.plan.proposals);
        for (std::size_t k = 0; k < trajs[0].size(); ++k) {
          std::vector<std::pair<double, double>> pts{world_to_panel(0, 0)};
          for (const auto& wp : trajs[0][k].waypoints) {
            pts.push_back(world_to_panel(wp.x, wp.y));
          }
          const bool selected = static_cast<std::int64_t>(k) == out.selected[0];
          svg.polyline(pts, selected ? "#ff2222" : "#ffd24d",
                       selected ? 3.0 : 1.2);
        }
        std::vector<std::pair<double, double>> expert_pts{world_to_panel(0, 0)};
        for (const auto& wp : scn.expert.waypoints) {
          expert_pts.push_back(world_to_panel(wp.x, wp.y));
        }
        svg.polyline(expert_pts, "#00bcd4", 1.5, "stroke-dasharray=\"5,4\"");

        const auto path = out_dir / ("bev_scene_" + std::to_string(i) + ".svg");
        svg.save(path);
        outputs.push_back(path);
      }
    }

    summary << "- final step total loss: "
            << (log.rows.empty() ? std::string("n/a")
                                 : log.rows.back()[log.column("total")]);
    summary << "\n- epochs: " << pdms_csv.rows.size() << "\n";
    summary << "- loss curves: report/loss_curves.svg\n";
    summary << "- pdms curve: report/pdms_epoch.svg\n";
  }

  if (is_ablation) {
    const Csv ab = read_csv(run_dir / "ablation.csv");
    const int pv = ab.column("pdms");
    const int vv = ab.column("variant");
    std::map<std::string, std::vector<double>> by_variant;
    for (const auto& row : ab.rows) {
      by_variant[row[vv]].push_back(std::stod(row[pv]));
    }
    const int W = 560, H = 320, ml = 60, mb = 70, mt = 20;
    Svg svg(W, H);
    svg.line(ml, mt, ml, H - mb, "#999999");
    svg.line(ml, H - mb, W - 20, H - mb, "#999999");
    const double bar_w = (W - ml - 40) / std::max<std::size_t>(1, by_variant.size());
    int idx = 0;
    summary << "\n## Ablation means (PDMS)\n\n";
    for (const char* variant : kAblationVariants) {
      auto it = by_variant.find(variant);
      if (it == by_variant.end()) {
        continue;
      }
      double mean = 0.0;
      for (double v : it->second) {
        mean += v;
      }
      mean /= static_cast<double>(it->second.size());
      const double x = ml + 10 + idx * bar_w;
      const double bh = mean * (H - mt - mb);
      svg.rect(x, H - mb - bh, bar_w * 0.7, bh, kSeriesColors[idx % 8],
               "data-pdms=\"" + fmt(mean) + "\"");
      svg.text(x, H - mb + 14, variant, 9);
      svg.text(x, H - mb - bh - 4, fmt(mean, "%.3f"), 10);
      summary << "- " << variant << ": " << fmt(mean, "%.4f") << " over "
              << it->second.size() << " seed(s)\n";
      ++idx;
    }
    svg.save(out_dir / "ablation_bars.svg");
    outputs.push_back(out_dir / "ablation_bars.svg");
  }

  {
    std::ofstream md(out_dir / "summary.md", std::ios::trunc);
    md << summary.str();
    outputs.push_back(out_dir / "summary.md");
  }
  return outputs;
}

}  // namespace bevplan::harness
