#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "guidebot/geometry.hpp"

namespace guidebot {

struct MalformedGrid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedZone : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

/// Binary occupancy grid. Cell (0,0) sits at `origin`; cell y grows with map
/// y, so row 0 of the ASCII form is the top of the map.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int width, int height, double resolution, Pose2D origin)
      : width_(width), height_(height), resolution_(resolution), origin_(origin),
        cells_(static_cast<size_t>(width) * height, 0) {
    if (width < 1 || height < 1 || resolution <= 0.0) {
      throw MalformedGrid("grid dimensions must be positive");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Pose2D& origin() const { return origin_; }

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
  }

  bool occupied(Cell c) const { return cells_[index(c)] != 0; }
  void set_occupied(Cell c, bool v) { cells_[index(c)] = v ? 1 : 0; }

  /// Center of cell `c` in the map frame.
  Vec2 world_of(Cell c) const {
    const double lx = (c.x + 0.5) * resolution_;
    const double ly = (c.y + 0.5) * resolution_;
    const double ct = std::cos(origin_.theta), st = std::sin(origin_.theta);
    return {origin_.x + ct * lx - st * ly, origin_.y + st * lx + ct * ly};
  }

  Cell cell_of(const Vec2& p) const {
    const double dx = p.x() - origin_.x, dy = p.y() - origin_.y;
    const double ct = std::cos(origin_.theta), st = std::sin(origin_.theta);
    const double lx = ct * dx + st * dy;
    const double ly = -st * dx + ct * dy;
    return {static_cast<int>(std::floor(lx / resolution_)),
            static_cast<int>(std::floor(ly / resolution_))};
  }

  bool occupied_at(const Vec2& p) const {
    const Cell c = cell_of(p);
    return !in_bounds(c) || occupied(c);
  }

  bool operator==(const OccupancyGrid&) const = default;

 private:
  size_t index(Cell c) const { return static_cast<size_t>(c.y) * width_ + c.x; }

  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.0;
  Pose2D origin_;
  std::vector<uint8_t> cells_;
};

/// Parses the ASCII grid document:
///   grid <width> <height> <resolution_m> <origin_x> <origin_y> <origin_theta>
/// followed by <height> rows of <width> characters, '#' occupied and '.' free,
/// first row topmost.
inline OccupancyGrid load_grid(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  int width = 0, height = 0;
  double res = 0.0, ox = 0.0, oy = 0.0, oth = 0.0;
  if (!(in >> tag >> width >> height >> res >> ox >> oy >> oth) || tag != "grid") {
    throw MalformedGrid("missing or malformed grid header");
  }
  if (width < 1 || height < 1 || res <= 0.0) throw MalformedGrid("bad grid dimensions");
  std::string line;
  std::getline(in, line);  // rest of header line
  OccupancyGrid grid(width, height, res, Pose2D(ox, oy, oth));
  for (int row = 0; row < height; ++row) {
    if (!std::getline(in, line)) throw MalformedGrid("missing grid row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (static_cast<int>(line.size()) != width) throw MalformedGrid("ragged grid row");
    for (int col = 0; col < width; ++col) {
      const char ch = line[col];
      if (ch != '#' && ch != '.') throw MalformedGrid("unknown grid character");
      grid.set_occupied({col, height - 1 - row}, ch == '#');
    }
  }
  return grid;
}

inline std::string save_grid(const OccupancyGrid& grid) {
  std::ostringstream out;
  out << "grid " << grid.width() << ' ' << grid.height() << ' ' << grid.resolution() << ' '
      << grid.origin().x << ' ' << grid.origin().y << ' ' << grid.origin().theta << '\n';
  for (int row = 0; row < grid.height(); ++row) {
    for (int col = 0; col < grid.width(); ++col) {
      out << (grid.occupied({col, grid.height() - 1 - row}) ? '#' : '.');
    }
    out << '\n';
  }
  return out.str();
}

enum class ZoneClass { Green, Yellow, Red };

inline const char* to_string(ZoneClass z) {
  switch (z) {
    case ZoneClass::Green: return "green";
    case ZoneClass::Yellow: return "yellow";
    case ZoneClass::Red: return "red";
  }
  return "?";
}

struct SpeedZone {
  Polygon2D region;
  double limit = 0.0;  // m/s, > 0
  ZoneClass cls = ZoneClass::Yellow;
};

/// Hand-authored zone map. Points outside every zone fall back to
/// default_limit (the yellow limit).
struct StaticSpeedMap {
  std::vector<SpeedZone> zones;
  double default_limit = 0.5;
};

/// Time-limited speed discs contributed at runtime (e.g. around tracked
/// humans). A layer is ignored once `now > expiry`.
struct SpeedLayer {
  struct Disc {
    Vec2 center{0.0, 0.0};
    double radius = 0.0;
    double limit = 0.0;
  };
  std::vector<Disc> discs;
  double expiry = 0.0;
};

/// Minimum static limit over all zones containing p; most restrictive zone
/// wins on overlap. The default applies only where no zone reaches.
inline double static_limit_at(const StaticSpeedMap& m, const Vec2& p) {
  bool covered = false;
  double limit = 0.0;
  for (const auto& zone : m.zones) {
    if (!point_in_polygon(p, zone.region)) continue;
    if (!covered || zone.limit < limit) limit = zone.limit;
    covered = true;
  }
  return covered ? limit : m.default_limit;
}

/// Class of the binding static zone at p (yellow when no zone applies).
inline ZoneClass zone_class_at(const StaticSpeedMap& m, const Vec2& p) {
  bool covered = false;
  double limit = 0.0;
  ZoneClass cls = ZoneClass::Yellow;
  for (const auto& zone : m.zones) {
    if (!point_in_polygon(p, zone.region)) continue;
    if (!covered || zone.limit < limit) {
      limit = zone.limit;
      cls = zone.cls;
    }
    covered = true;
  }
  return cls;
}

/// Layered limit: minimum of the static limit and every live layer disc
/// containing p.
inline double effective_limit(const StaticSpeedMap& m, const std::vector<SpeedLayer>& layers,
                              const Vec2& p, double now) {
  double limit = static_limit_at(m, p);
  for (const auto& layer : layers) {
    if (now > layer.expiry) continue;
    for (const auto& disc : layer.discs) {
      if (disc.limit < limit && (p - disc.center).norm() <= disc.radius) limit = disc.limit;
    }
  }
  return limit;
}

inline ZoneClass zone_class_from_string(const std::string& s) {
  if (s == "green") return ZoneClass::Green;
  if (s == "yellow") return ZoneClass::Yellow;
  if (s == "red") return ZoneClass::Red;
  throw MalformedZone("unknown zone class: " + s);
}

/// Parses the line-oriented zone config:
///   zone <class> <limit_mps> x1 y1 x2 y2 ...
///   default <limit_mps>
/// Vertex lists are hull-ified, so authors may list corners in any order.
inline StaticSpeedMap zones_from_config(const std::string& doc) {
  StaticSpeedMap map;
  std::istringstream in(doc);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag.empty() || tag[0] == '#') continue;
    if (tag == "default") {
      if (!(ls >> map.default_limit) || map.default_limit <= 0.0) {
        throw MalformedZone("default limit must be positive");
      }
    } else if (tag == "zone") {
      std::string cls;
      double limit = 0.0;
      if (!(ls >> cls >> limit)) throw MalformedZone("zone line too short");
      if (limit <= 0.0) throw MalformedZone("zone limit must be positive");
      std::vector<Vec2> pts;
      double x = 0.0, y = 0.0;
      while (ls >> x >> y) pts.emplace_back(x, y);
      if (pts.size() < 3) throw MalformedZone("zone needs at least 3 vertices");
      SpeedZone zone;
      zone.cls = zone_class_from_string(cls);
      zone.limit = limit;
      try {
        zone.region = convex_hull(pts);
      } catch (const DegenerateInput&) {
        throw MalformedZone("zone vertices are collinear");
      }
      map.zones.push_back(std::move(zone));
    } else {
      throw MalformedZone("unknown zone config line: " + tag);
    }
  }
  return map;
}

}  // namespace guidebot
