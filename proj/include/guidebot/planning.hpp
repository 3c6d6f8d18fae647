#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "guidebot/maps.hpp"

namespace guidebot {

struct NoPath : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StartOccupied : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GoalOccupied : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoFreeCell : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Path {
  std::vector<Vec2> waypoints;

  bool empty() const { return waypoints.empty(); }

  double length() const {
    double acc = 0.0;
    for (size_t i = 1; i < waypoints.size(); ++i) acc += (waypoints[i] - waypoints[i - 1]).norm();
    return acc;
  }
};

/// Distance-to-human speed profile, piecewise linear through
/// (d_safe, v_safe), (d_peak, v_peak), (d_guide, 0).
struct SpeedProfile {
  double d_safe = 0.1;
  double d_peak = 0.9;
  double d_guide = 1.7;
  double v_safe = 0.1;
  double v_peak = 1.0;

  bool valid() const {
    return 0.0 < d_safe && d_safe < d_peak && d_peak < d_guide && 0.0 < v_safe && v_safe <= v_peak;
  }
};

struct VelocityCommand {
  double v = 0.0;      // m/s forward
  double omega = 0.0;  // rad/s
};

/// Dilates occupied cells by ceil(inflation/resolution) cells (Chebyshev),
/// so the planner treats the robot as a point.
inline OccupancyGrid inflate_grid(const OccupancyGrid& grid, double inflation) {
  const int k = std::max(0, static_cast<int>(std::ceil(inflation / grid.resolution())));
  OccupancyGrid out(grid.width(), grid.height(), grid.resolution(), grid.origin());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (!grid.occupied({x, y})) continue;
      for (int dy = -k; dy <= k; ++dy) {
        for (int dx = -k; dx <= k; ++dx) {
          const Cell c{x + dx, y + dy};
          if (out.in_bounds(c)) out.set_occupied(c, true);
        }
      }
    }
  }
  return out;
}

namespace detail {

constexpr double kSqrt2 = 1.4142135623730951;

struct GridNeighbor {
  Cell cell;
  double cost;
};

/// 8-connected moves; diagonals are blocked when either adjacent orthogonal
/// cell is occupied, so paths cannot clip wall corners.
inline void grid_neighbors(const OccupancyGrid& g, Cell c, std::vector<GridNeighbor>& out) {
  out.clear();
  static constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  for (int i = 0; i < 8; ++i) {
    const Cell n{c.x + dx8[i], c.y + dy8[i]};
    if (!g.in_bounds(n) || g.occupied(n)) continue;
    if (i >= 4) {
      if (g.occupied({c.x + dx8[i], c.y}) || g.occupied({c.x, c.y + dy8[i]})) continue;
    }
    out.push_back({n, i < 4 ? 1.0 : kSqrt2});
  }
}

inline double octile(Cell a, Cell b) {
  const double dx = std::abs(a.x - b.x);
  const double dy = std::abs(a.y - b.y);
  return std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy);
}

}  // namespace detail

/// 8-connected A* over the inflated grid, cost 1 straight and sqrt(2)
/// diagonal, octile heuristic. Returns cell-center waypoints including start
/// and goal cells. Path cost is optimal.
inline Path plan_path(const OccupancyGrid& grid, double inflation, const Vec2& start,
                      const Vec2& goal) {
  const OccupancyGrid g = inflate_grid(grid, inflation);
  const Cell sc = g.cell_of(start);
  const Cell gc = g.cell_of(goal);
  if (!g.in_bounds(sc) || g.occupied(sc)) throw StartOccupied("start cell occupied or outside");
  if (!g.in_bounds(gc) || g.occupied(gc)) throw GoalOccupied("goal cell occupied or outside");

  const int w = g.width(), h = g.height();
  const auto idx = [w](Cell c) { return static_cast<size_t>(c.y) * w + c.x; };
  std::vector<double> gscore(static_cast<size_t>(w) * h, std::numeric_limits<double>::infinity());
  std::vector<int> parent(static_cast<size_t>(w) * h, -1);
  std::vector<uint8_t> closed(static_cast<size_t>(w) * h, 0);

  struct QEntry {
    double f;
    double g;
    size_t i;
    bool operator>(const QEntry& o) const {
      if (f != o.f) return f > o.f;
      if (g != o.g) return g < o.g;  // prefer larger g on ties (deeper nodes)
      return i > o.i;
    }
  };
  std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> open;
  gscore[idx(sc)] = 0.0;
  open.push({detail::octile(sc, gc), 0.0, idx(sc)});

  std::vector<detail::GridNeighbor> nbrs;
  nbrs.reserve(8);
  while (!open.empty()) {
    const QEntry top = open.top();
    open.pop();
    if (closed[top.i]) continue;
    closed[top.i] = 1;
    const Cell c{static_cast<int>(top.i % w), static_cast<int>(top.i / w)};
    if (c == gc) break;
    detail::grid_neighbors(g, c, nbrs);
    for (const auto& nb : nbrs) {
      const size_t ni = idx(nb.cell);
      if (closed[ni]) continue;
      const double tentative = gscore[top.i] + nb.cost;
      if (tentative < gscore[ni]) {
        gscore[ni] = tentative;
        parent[ni] = static_cast<int>(top.i);
        open.push({tentative + detail::octile(nb.cell, gc), tentative, ni});
      }
    }
  }
  if (!closed[idx(gc)]) throw NoPath("goal unreachable");

  std::vector<Vec2> rev;
  for (int i = static_cast<int>(idx(gc)); i >= 0; i = parent[i]) {
    rev.push_back(g.world_of({i % w, i / w}));
    if (parent[i] < 0) break;
  }
  Path path;
  path.waypoints.assign(rev.rbegin(), rev.rend());
  return path;
}

struct FollowRef {
  Vec2 target{0.0, 0.0};
  double bearing_error = 0.0;  // positive = target to the left
  double remaining = 0.0;      // along-path distance to the final waypoint
  size_t nearest_index = 0;
};

/// Pure-pursuit style reference: the target is the first waypoint at least
/// `lookahead` beyond the nearest path point (last waypoint if none).
inline FollowRef follow_path(const Path& path, const Pose2D& pose, double lookahead) {
  const auto& wp = path.waypoints;
  FollowRef ref;
  if (wp.empty()) return ref;

  size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < wp.size(); ++i) {
    const double d = (wp[i] - pose.position()).norm();
    if (d < best) {
      best = d;
      nearest = i;
    }
  }
  ref.nearest_index = nearest;

  double along = 0.0;
  size_t target = wp.size() - 1;
  for (size_t i = nearest; i + 1 < wp.size(); ++i) {
    along += (wp[i + 1] - wp[i]).norm();
    if (along >= lookahead) {
      target = i + 1;
      break;
    }
  }
  ref.target = wp[target];

  double remaining = 0.0;
  for (size_t i = nearest; i + 1 < wp.size(); ++i) remaining += (wp[i + 1] - wp[i]).norm();
  ref.remaining = remaining;

  const Vec2 to_target = ref.target - pose.position();
  if (to_target.norm() > 1e-9) {
    ref.bearing_error = normalize_angle(std::atan2(to_target.y(), to_target.x()) - pose.theta);
  }
  return ref;
}

/// Guidance speed as a function of robot-human distance: v_safe when too
/// close, peak at d_peak, zero from d_guide on.
inline double guidance_speed(double d, const SpeedProfile& p) {
  if (d < p.d_safe) return p.v_safe;
  if (d <= p.d_peak) {
    return p.v_safe + (p.v_peak - p.v_safe) * (d - p.d_safe) / (p.d_peak - p.d_safe);
  }
  if (d < p.d_guide) return p.v_peak * (p.d_guide - d) / (p.d_guide - p.d_peak);
  return 0.0;
}

/// Applies the layered speed limit at p, then the acceleration clamp around
/// prev_v, then clips at zero. Limits are applied before the clamp so they
/// are approached, never violated from above when already slower.
inline double governed_speed(double nominal, const StaticSpeedMap& static_map,
                             const std::vector<SpeedLayer>& layers, const Vec2& p, double now,
                             double prev_v, double a_max, double dt) {
  double v = std::min(nominal, effective_limit(static_map, layers, p, now));
  v = std::clamp(v, prev_v - a_max * dt, prev_v + a_max * dt);
  return std::max(0.0, v);
}

/// Goal point that keeps `follow_dist` between robot and person, on the
/// person->robot ray. Returns the robot position when the two coincide.
inline Vec2 following_goal(const Pose2D& robot, const Vec2& person, double follow_dist) {
  const Vec2 away = robot.position() - person;
  const double n = away.norm();
  if (n < 1e-6) return robot.position();
  return person + away * (follow_dist / n);
}

/// Walks cells from goal toward the robot over the inflated grid and returns
/// the center of the first free cell (the goal itself when already free).
inline Vec2 raytrace_free_goal(const OccupancyGrid& grid, double inflation, const Vec2& goal,
                               const Pose2D& robot) {
  const OccupancyGrid g = inflate_grid(grid, inflation);
  const Cell gc = g.cell_of(goal);
  if (g.in_bounds(gc) && !g.occupied(gc)) return goal;

  // Bresenham from goal cell to robot cell.
  const Cell rc = g.cell_of(robot.position());
  int x0 = gc.x, y0 = gc.y;
  const int x1 = rc.x, y1 = rc.y;
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    const Cell c{x0, y0};
    if (g.in_bounds(c) && !g.occupied(c)) return g.world_of(c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
  throw NoFreeCell("no free cell between goal and robot");
}

/// Highest speed from which a per-tick deceleration of a_max still reaches
/// `limit` within distance s: the discrete-safe inverse of the braking
/// distance v*dt + (v^2 - limit^2)/(2 a_max) <= s.
inline double brake_speed(double limit, double s, double a_max, double dt) {
  if (s <= 0.0) return std::max(0.0, limit);
  const double ad = a_max * dt;
  return std::max(limit, -ad + std::sqrt(ad * ad + limit * limit + 2.0 * a_max * s));
}

/// Anticipatory limit: samples the layered speed limit along the path ahead
/// of `nearest_index` and returns the fastest speed that can still brake to
/// every upcoming limit (and to rest at the path end) in time. Keeping the
/// command under this bound guarantees the robot never enters a zone above
/// that zone's limit.
inline double path_speed_limit(const Path& path, size_t nearest_index,
                               const StaticSpeedMap& static_map,
                               const std::vector<SpeedLayer>& layers, const Vec2& robot,
                               double now, double a_max, double a_goal, double dt,
                               double sample_step = 0.05, double horizon = 4.0) {
  const auto& wp = path.waypoints;
  if (wp.empty()) return 0.0;

  // Distance to an upcoming zone is measured along the path chain, but the
  // robot tracks the path with lateral error and cuts corners short, so the
  // chain overstates the true distance. Braking is budgeted against a
  // shortened distance to absorb that error.
  constexpr double kTrackingMargin = 0.25;

  double allowed = std::numeric_limits<double>::infinity();
  double s = 0.0;
  Vec2 prev = robot;
  bool truncated = false;
  for (size_t i = nearest_index; i < wp.size() && !truncated; ++i) {
    const Vec2 seg = wp[i] - prev;
    const double len = seg.norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(len / sample_step)));
    for (int k = 1; k <= steps; ++k) {
      const Vec2 p = prev + seg * (static_cast<double>(k) / steps);
      const double ds = s + len * (static_cast<double>(k) / steps);
      const double lim = effective_limit(static_map, layers, p, now);
      allowed = std::min(allowed, brake_speed(lim, std::max(0.0, ds - kTrackingMargin), a_max, dt));
      if (ds > horizon) {
        truncated = true;
        break;
      }
    }
    s += len;
    prev = wp[i];
  }
  if (!truncated) {
    // Path end acts as a limit-zero breakpoint: the gentler a_goal shapes
    // the final approach.
    allowed = std::min(allowed, brake_speed(0.0, s, a_goal, dt));
  }
  allowed = std::min(allowed,
                     brake_speed(effective_limit(static_map, layers, robot, now), 0.0, a_max, dt));
  return allowed;
}

/// Forward-speed scale for large bearing errors: full speed up to pi/4,
/// linear to zero at 3pi/4 (target behind the robot).
inline double bearing_gate(double bearing_error) {
  constexpr double e_free = std::numbers::pi / 4.0;
  constexpr double e_stop = 3.0 * std::numbers::pi / 4.0;
  const double e = std::abs(bearing_error);
  return std::clamp((e_stop - e) / (e_stop - e_free), 0.0, 1.0);
}

}  // namespace guidebot
