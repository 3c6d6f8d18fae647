#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace guidebot {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

struct DegenerateProjection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::fmod(a, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  if (a > pi) a -= 2.0 * pi;
  return a;
}

/// Rigid transform: translation plus unit quaternion (w,x,y,z), right-handed,
/// z-up map frame. The quaternion is renormalized on construction.
struct Transform3D {
  Vec3 translation{Vec3::Zero()};
  Quat rotation{Quat::Identity()};

  Transform3D() = default;
  Transform3D(const Vec3& t, const Quat& q) : translation(t), rotation(q.normalized()) {}

  static Transform3D identity() { return {}; }

  static Transform3D from_translation(double x, double y, double z) {
    return {Vec3(x, y, z), Quat::Identity()};
  }
};

/// Planar pose in the map frame, theta kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

  bool operator==(const Pose2D&) const = default;

  Vec2 position() const { return {x, y}; }
  Vec2 heading() const { return {std::cos(theta), std::sin(theta)}; }
};

inline Transform3D compose(const Transform3D& a, const Transform3D& b) {
  return {a.translation + a.rotation * b.translation, (a.rotation * b.rotation).normalized()};
}

inline Transform3D invert(const Transform3D& t) {
  const Quat qi = t.rotation.conjugate();
  return {qi * (-t.translation), qi};
}

inline Vec3 apply(const Transform3D& t, const Vec3& p) {
  return t.translation + t.rotation * p;
}

/// Extracts the planar pose of a transform: (x,y) from the translation, theta
/// from the body x-axis projected onto the map floor plane.
/// Throws DegenerateProjection when the x-axis is near-vertical.
inline Pose2D planar_pose(const Transform3D& t) {
  const Vec3 x_axis = t.rotation * Vec3::UnitX();
  const double nx = x_axis.x();
  const double ny = x_axis.y();
  if (std::hypot(nx, ny) < 1e-6) {
    throw DegenerateProjection("planar_pose: body x-axis is near-vertical");
  }
  return {t.translation.x(), t.translation.y(), std::atan2(ny, nx)};
}

/// Embeds a planar pose on the floor plane (z = 0, yaw about +z).
inline Transform3D lift_pose(const Pose2D& p) {
  return {{p.x, p.y, 0.0}, Quat{Eigen::AngleAxisd(p.theta, Vec3::UnitZ())}};
}

/// Global localization from one fiducial sighting:
///   map_T_robot = map_T_qr * (cam_T_qr)^-1 * (robot_T_cam)^-1
/// then reduced to a planar pose.
inline Pose2D qr_localize(const Transform3D& map_T_qr, const Transform3D& cam_T_qr,
                          const Transform3D& robot_T_cam) {
  const Transform3D map_T_robot = compose(compose(map_T_qr, invert(cam_T_qr)), invert(robot_T_cam));
  return planar_pose(map_T_robot);
}

/// Convex polygon, counter-clockwise, produced by convex_hull.
struct Polygon2D {
  std::vector<Vec2> vertices;
};

namespace detail {
inline double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}
}  // namespace detail

/// Andrew's monotone chain. Duplicates, interior and collinear boundary points
/// are dropped; the result is strictly convex and counter-clockwise.
/// Throws DegenerateInput for fewer than 3 distinct points or collinear input.
inline Polygon2D convex_hull(std::vector<Vec2> points) {
  std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const Vec2& a, const Vec2& b) {
                             return (a - b).norm() < 1e-12;
                           }),
               points.end());
  const size_t n = points.size();
  if (n < 3) throw DegenerateInput("convex_hull: fewer than 3 distinct points");

  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower chain
    while (k >= 2 && detail::cross2(hull[k - 2], hull[k - 1], points[i]) <= 1e-12) --k;
    hull[k++] = points[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {  // upper chain
    while (k >= lower && detail::cross2(hull[k - 2], hull[k - 1], points[i]) <= 1e-12) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw DegenerateInput("convex_hull: collinear input");
  return {std::move(hull)};
}

/// Signed polygon area (positive for counter-clockwise vertex order).
inline double signed_area(const Polygon2D& poly) {
  double acc = 0.0;
  const auto& v = poly.vertices;
  for (size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    acc += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * acc;
}

/// Area-weighted centroid. Throws DegenerateInput when |area| < 1e-12.
inline Vec2 centroid(const Polygon2D& poly) {
  const auto& v = poly.vertices;
  double area = 0.0;
  Vec2 acc = Vec2::Zero();
  for (size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    const double w = a.x() * b.y() - b.x() * a.y();
    area += w;
    acc += w * (a + b);
  }
  area *= 0.5;
  if (std::abs(area) < 1e-12) throw DegenerateInput("centroid: degenerate polygon");
  return acc / (6.0 * area);
}

/// Membership test for simple polygons, convex or not; boundary points count
/// as inside so adjacent zones tile without gaps.
inline bool point_in_polygon(const Vec2& p, const Polygon2D& poly) {
  const auto& v = poly.vertices;
  if (v.size() < 3) return false;
  for (size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2 ab = v[(i + 1) % n] - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    if ((p - (a + t * ab)).norm() <= 1e-9) return true;
  }
  // Even-odd ray crossing; the half-open test counts a vertex on the ray once.
  bool inside = false;
  for (size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (x_cross > p.x()) inside = !inside;
    }
  }
  return inside;
}

}  // namespace guidebot
