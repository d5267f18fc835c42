#include <doctest.h>

#include <cmath>
#include <random>

#include "bevplan/geometry.hpp"

using namespace bevplan;

namespace {

// Sampling-based overlap oracle: dense point grid over box a tested against
// box b (and vice versa). Misses thin slivers, so tests use a margin.
bool overlap_by_sampling(const geom::OrientedBox& a, const geom::OrientedBox& b) {
  const int n = 40;
  for (const auto& [first, second] : {std::pair{&a, &b}, std::pair{&b, &a}}) {
    const auto& src = *first;
    const auto& dst = *second;
    const double c = std::cos(src.pose.theta);
    const double s = std::sin(src.pose.theta);
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        const double lx = (static_cast<double>(i) / n - 0.5) * src.length;
        const double ly = (static_cast<double>(j) / n - 0.5) * src.width;
        const geom::Vec2 p{src.pose.x + c * lx - s * ly,
                           src.pose.y + s * lx + c * ly};
        if (geom::point_in_box(p, dst)) {
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(geom::wrap_angle(0.0) == doctest::Approx(0.0));
  CHECK(geom::wrap_angle(geom::kPi) == doctest::Approx(geom::kPi));
  CHECK(geom::wrap_angle(-geom::kPi) == doctest::Approx(geom::kPi));
  CHECK(geom::wrap_angle(3.0 * geom::kPi) == doctest::Approx(geom::kPi));
  CHECK(geom::wrap_angle(2.5 * geom::kPi) == doctest::Approx(0.5 * geom::kPi));
}

TEST_CASE("box overlap agrees with a dense sampling oracle") {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> pos(-6.0, 6.0);
  std::uniform_real_distribution<double> ang(-3.2, 3.2);
  std::uniform_real_distribution<double> dim(0.5, 5.0);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const geom::OrientedBox a{{pos(rng), pos(rng), ang(rng)}, dim(rng), dim(rng)};
    const geom::OrientedBox b{{pos(rng), pos(rng), ang(rng)}, dim(rng), dim(rng)};
    const bool sat = geom::boxes_overlap(a, b);
    const bool sampled = overlap_by_sampling(a, b);
    if (sat != sampled) {
      // The sampling oracle can miss slivers thinner than its grid; a SAT
      // positive with a sampling negative is conclusive only when boxes are
      // clearly apart. Re-test with grown boxes: if shrinking by 10% flips
      // SAT, it was a boundary case.
      geom::OrientedBox a_small = a;
      geom::OrientedBox b_small = b;
      a_small.length *= 0.9;
      a_small.width *= 0.9;
      b_small.length *= 0.9;
      b_small.width *= 0.9;
      if (geom::boxes_overlap(a_small, b_small) == sampled) {
        continue;
      }
      CAPTURE(trial);
      CHECK(sat == sampled);
    }
    ++checked;
  }
  CHECK(checked > 400);
}

TEST_CASE("point_in_polygon handles convex quad") {
  geom::Polygon quad;
  quad.vertices = {{0, 0}, {4, 0}, {4, 2}, {0, 2}};
  CHECK(geom::point_in_polygon({2, 1}, quad));
  CHECK(geom::point_in_polygon({0, 0}, quad));  // boundary counts
  CHECK(!geom::point_in_polygon({5, 1}, quad));
  CHECK(!geom::point_in_polygon({2, 3}, quad));
}

TEST_CASE("polyline projection and pose lookup are consistent") {
  geom::Polyline line;
  for (double x = 0.0; x <= 20.0; x += 2.0) {
    line.points.push_back({x, 0.5 * x});
  }
  const double total = line.total_length();
  CHECK(total == doctest::Approx(std::hypot(20.0, 10.0)));
  for (double s = 0.0; s <= total; s += 1.37) {
    const geom::Pose2 p = line.pose_at(s);
    CHECK(line.project({p.x, p.y}) == doctest::Approx(s).epsilon(1e-9));
  }
}
