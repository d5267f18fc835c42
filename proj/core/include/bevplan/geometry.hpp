#pragma once

#include <cmath>
#include <vector>

namespace bevplan::geom {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
};

// Wraps an angle into (-pi, pi].
double wrap_angle(double theta);

// Shortest-arc interpolation between two headings; u in [0, 1].
double lerp_angle(double a, double b, double u);

Pose2 lerp_pose(const Pose2& a, const Pose2& b, double u);

// Axis-aligned length along the heading, width across it.
struct OrientedBox {
  Pose2 pose;
  double length = 0.0;
  double width = 0.0;

  std::vector<Vec2> corners() const;
};

// Separating-axis test for two oriented rectangles. Touching edges count
// as overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

bool point_in_box(const Vec2& p, const OrientedBox& b);

// Simple polygon, vertices in order (either winding).
struct Polygon {
  std::vector<Vec2> vertices;
};

// Even-odd rule; boundary points count as inside.
bool point_in_polygon(const Vec2& p, const Polygon& poly);

bool point_in_any(const Vec2& p, const std::vector<Polygon>& polys);

struct Polyline {
  std::vector<Vec2> points;

  double total_length() const;
  // Pose at arc length s (clamped to [0, total]); heading follows the
  // segment direction.
  Pose2 pose_at(double s) const;
  // Arc length of the closest point on the polyline to p.
  double project(const Vec2& p) const;
};

}  // namespace bevplan::geom
