#pragma once

#include <string>
#include <vector>

#include "guidebot/geometry.hpp"
#include "guidebot/maps.hpp"
#include "guidebot/planning.hpp"

namespace guidebot {

struct UnknownLabel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnreachableGoal : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedSemantic : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Labeled plane stored as its convex hull in 3D map coordinates.
struct PlanarLandmark {
  std::string label;
  std::vector<Vec3> hull;
};

struct Waypoint {
  std::string label;
  Pose2D pose;
};

struct SemanticMap {
  std::vector<PlanarLandmark> landmarks;
  std::vector<Waypoint> waypoints;

  const Waypoint* find_waypoint(const std::string& label) const {
    for (const auto& w : waypoints) {
      if (w.label == label) return &w;
    }
    return nullptr;
  }

  std::vector<const PlanarLandmark*> find_landmarks(const std::string& label) const {
    std::vector<const PlanarLandmark*> out;
    for (const auto& lm : landmarks) {
      if (lm.label == label) out.push_back(&lm);
    }
    return out;
  }
};

/// Validates and inserts a landmark: at least 3 vertices, coplanar within
/// 1e-3 m, and a label never names both a waypoint and a landmark.
inline void add_landmark(SemanticMap& sm, PlanarLandmark lm) {
  if (lm.hull.size() < 3) throw MalformedSemantic("landmark needs at least 3 vertices");
  if (sm.find_waypoint(lm.label)) {
    throw MalformedSemantic("label names both waypoint and landmark: " + lm.label);
  }
  // Plane through the first vertex with the dominant normal of the vertex fan.
  const Vec3& p0 = lm.hull[0];
  Vec3 normal = Vec3::Zero();
  for (size_t i = 1; i + 1 < lm.hull.size(); ++i) {
    normal += (lm.hull[i] - p0).cross(lm.hull[i + 1] - p0);
  }
  if (normal.norm() > 1e-12) {
    normal.normalize();
    for (const auto& v : lm.hull) {
      if (std::abs(normal.dot(v - p0)) > 1e-3) {
        throw MalformedSemantic("landmark vertices not coplanar: " + lm.label);
      }
    }
  }
  sm.landmarks.push_back(std::move(lm));
}

inline void add_waypoint(SemanticMap& sm, Waypoint w) {
  if (!sm.find_landmarks(w.label).empty()) {
    throw MalformedSemantic("label names both waypoint and landmark: " + w.label);
  }
  sm.waypoints.push_back(std::move(w));
}

namespace detail {

/// Closest hull vertex (ground projection) to the robot; ties break toward
/// the lowest vertex index.
inline Vec2 closest_vertex_to(const PlanarLandmark& lm, const Vec2& from) {
  Vec2 best{lm.hull[0].x(), lm.hull[0].y()};
  double best_d = (best - from).norm();
  for (size_t i = 1; i < lm.hull.size(); ++i) {
    const Vec2 v{lm.hull[i].x(), lm.hull[i].y()};
    const double d = (v - from).norm();
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

}  // namespace detail

/// Goal pose for a label:
///  - waypoint: its pose verbatim;
///  - one landmark: 1 m standoff from the hull vertex closest to the robot,
///    on the robot-vertex line, facing the vertex (falls beyond the robot
///    when the robot is closer than 1 m);
///  - several landmarks: centroid of the ground-projected joint convex hull,
///    arrival heading left to the path follower.
/// Occupied goals are replaced by raytracing toward the robot.
inline Pose2D goal_for_label(const SemanticMap& sm, const OccupancyGrid& grid, double inflation,
                             const Pose2D& robot, const std::string& label) {
  Pose2D goal;
  if (const Waypoint* w = sm.find_waypoint(label)) {
    goal = w->pose;
  } else {
    const auto lms = sm.find_landmarks(label);
    if (lms.empty()) throw UnknownLabel("no waypoint or landmark labeled: " + label);
    if (lms.size() == 1) {
      const Vec2 v = detail::closest_vertex_to(*lms[0], robot.position());
      Vec2 dir = robot.position() - v;
      const double n = dir.norm();
      if (n < 1e-9) {
        dir = -robot.heading();  // robot standing on the vertex; back straight off
      } else {
        dir /= n;
      }
      const Vec2 pos = v + dir * 1.0;
      goal = Pose2D(pos.x(), pos.y(), std::atan2(v.y() - pos.y(), v.x() - pos.x()));
    } else {
      std::vector<Vec2> pts;
      for (const auto* lm : lms) {
        for (const auto& v : lm->hull) pts.emplace_back(v.x(), v.y());
      }
      const Vec2 c = centroid(convex_hull(pts));
      goal = Pose2D(c.x(), c.y(), robot.theta);
    }
  }
  if (grid.occupied_at(goal.position()) ||
      inflate_grid(grid, inflation).occupied_at(goal.position())) {
    try {
      const Vec2 fixed = raytrace_free_goal(grid, inflation, goal.position(), robot);
      goal = Pose2D(fixed.x(), fixed.y(), goal.theta);
    } catch (const NoFreeCell&) {
      throw UnreachableGoal("no free cell on the ray toward the robot for: " + label);
    }
  }
  return goal;
}

/// Parses the line-oriented semantic config:
///   landmark <label> x1 y1 z1 x2 y2 z2 ...
///   waypoint <label> x y theta
inline SemanticMap semantic_from_config(const std::string& doc) {
  SemanticMap sm;
  std::istringstream in(doc);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag.empty() || tag[0] == '#') continue;
    if (tag == "landmark") {
      PlanarLandmark lm;
      if (!(ls >> lm.label)) throw MalformedSemantic("landmark line missing label");
      double x = 0.0, y = 0.0, z = 0.0;
      while (ls >> x >> y >> z) lm.hull.emplace_back(x, y, z);
      add_landmark(sm, std::move(lm));
    } else if (tag == "waypoint") {
      Waypoint w;
      double x = 0.0, y = 0.0, th = 0.0;
      if (!(ls >> w.label >> x >> y >> th)) throw MalformedSemantic("waypoint line too short");
      w.pose = Pose2D(x, y, th);
      add_waypoint(sm, std::move(w));
    } else {
      throw MalformedSemantic("unknown semantic config line: " + tag);
    }
  }
  return sm;
}

}  // namespace guidebot
