#include "bevplan/geometry.hpp"

#include <algorithm>
#include <limits>

namespace bevplan::geom {

double wrap_angle(double theta) {
  double t = std::fmod(theta + kPi, 2.0 * kPi);
  if (t <= 0.0) {
    t += 2.0 * kPi;
  }
  return t - kPi;
}

double lerp_angle(double a, double b, double u) {
  return wrap_angle(a + wrap_angle(b - a) * u);
}

Pose2 lerp_pose(const Pose2& a, const Pose2& b, double u) {
  return {a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u,
          lerp_angle(a.theta, b.theta, u)};
}

std::vector<Vec2> OrientedBox::corners() const {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  std::vector<Vec2> out(4);
  const double lx[4] = {hl, hl, -hl, -hl};
  const double ly[4] = {hw, -hw, -hw, hw};
  for (int i = 0; i < 4; ++i) {
    out[i] = {pose.x + c * lx[i] - s * ly[i], pose.y + s * lx[i] + c * ly[i]};
  }
  return out;
}

namespace {

// Projects corner sets onto an axis and checks interval separation.
bool separated_on_axis(const Vec2& axis, const std::vector<Vec2>& a,
                       const std::vector<Vec2>& b) {
  double amin = std::numeric_limits<double>::infinity();
  double amax = -amin;
  for (const auto& p : a) {
    const double d = p.dot(axis);
    amin = std::min(amin, d);
    amax = std::max(amax, d);
  }
  double bmin = std::numeric_limits<double>::infinity();
  double bmax = -bmin;
  for (const auto& p : b) {
    const double d = p.dot(axis);
    bmin = std::min(bmin, d);
    bmax = std::max(bmax, d);
  }
  return amax < bmin || bmax < amin;
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 axes[4] = {
      {std::cos(a.pose.theta), std::sin(a.pose.theta)},
      {-std::sin(a.pose.theta), std::cos(a.pose.theta)},
      {std::cos(b.pose.theta), std::sin(b.pose.theta)},
      {-std::sin(b.pose.theta), std::cos(b.pose.theta)},
  };
  for (const auto& axis : axes) {
    if (separated_on_axis(axis, ca, cb)) {
      return false;
    }
  }
  return true;
}

bool point_in_box(const Vec2& p, const OrientedBox& b) {
  const double c = std::cos(b.pose.theta);
  const double s = std::sin(b.pose.theta);
  const double dx = p.x - b.pose.x;
  const double dy = p.y - b.pose.y;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= 0.5 * b.length && std::abs(ly) <= 0.5 * b.width;
}

bool point_in_polygon(const Vec2& p, const Polygon& poly) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  if (n < 3) {
    return false;
  }
  // Boundary check first so edge points are unambiguous.
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 e = v[i] - v[j];
    const Vec2 w = p - v[j];
    const double cross = e.x * w.y - e.y * w.x;
    if (std::abs(cross) < 1e-12) {
      const double t = w.dot(e);
      if (t >= -1e-12 && t <= e.dot(e) + 1e-12) {
        return true;
      }
    }
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double xint =
          v[j].x + (p.y - v[j].y) / (v[i].y - v[j].y) * (v[i].x - v[j].x);
      if (p.x < xint) {
        inside = !inside;
      }
    }
  }
  return inside;
}

bool point_in_any(const Vec2& p, const std::vector<Polygon>& polys) {
  return std::any_of(polys.begin(), polys.end(),
                     [&](const Polygon& poly) { return point_in_polygon(p, poly); });
}

double Polyline::total_length() const {
  double s = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    s += (points[i] - points[i - 1]).norm();
  }
  return s;
}

Pose2 Polyline::pose_at(double s) const {
  if (points.size() < 2) {
    const Vec2 p = points.empty() ? Vec2{} : points.front();
    return {p.x, p.y, 0.0};
  }
  double acc = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const Vec2 seg = points[i] - points[i - 1];
    const double len = seg.norm();
    if (s <= acc + len || i + 1 == points.size()) {
      const double u = len > 0.0 ? std::clamp((s - acc) / len, 0.0, 1.0) : 0.0;
      const Vec2 p = points[i - 1] + seg * u;
      return {p.x, p.y, std::atan2(seg.y, seg.x)};
    }
    acc += len;
  }
  const Vec2 p = points.back();
  return {p.x, p.y, 0.0};
}

double Polyline::project(const Vec2& p) const {
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const Vec2 a = points[i - 1];
    const Vec2 seg = points[i] - a;
    const double len2 = seg.dot(seg);
    const double u = len2 > 0.0 ? std::clamp((p - a).dot(seg) / len2, 0.0, 1.0) : 0.0;
    const Vec2 q = a + seg * u;
    const double d = (p - q).norm();
    if (d < best_d) {
      best_d = d;
      best_s = acc + std::sqrt(len2) * u;
    }
    acc += std::sqrt(len2);
  }
  return best_s;
}

}  // namespace bevplan::geom
