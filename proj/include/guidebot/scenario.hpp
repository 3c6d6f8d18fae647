#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "guidebot/behavior.hpp"
#include "guidebot/maps.hpp"
#include "guidebot/perception.hpp"
#include "guidebot/qr_payload.hpp"
#include "guidebot/semantic_map.hpp"

namespace guidebot {

struct MalformedScenario : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PedMode { Stand, Scripted, FollowRobot };

struct TimedWaypoint {
  double t = 0.0;
  Vec2 pos{0.0, 0.0};
};

/// A walking (or standing) person with the body cross-sections the two laser
/// channels see: two ankle discs and one torso ellipse.
struct PedestrianAgent {
  int id = 0;
  PedMode mode = PedMode::Stand;
  Vec2 position{0.0, 0.0};
  Vec2 facing{1.0, 0.0};  // unit walk direction
  std::vector<TimedWaypoint> waypoints;  // scripted mode

  // follow_robot mode
  double preferred_speed = 0.55;  // m/s, hard ceiling
  double reaction_delay = 0.3;    // s
  double standoff = 1.3;          // m, stops this far from the (delayed) target
  double engagement = 3.0;        // m, ignores the robot beyond this
  double gain = 2.0;              // 1/s, speed per meter of slack

  double leg_radius = 0.06;     // m
  double leg_separation = 0.30;  // m, center to center
  double torso_a = 0.15;         // m, semi-axis along facing
  double torso_b = 0.10;         // m, semi-axis across
};

struct ScanParams {
  double fov = 3.141592653589793;
  int n_beams = 361;
  double max_range = 10.0;
  double noise_std = 0.0;
};

struct QrTag {
  Transform3D pose;  // map frame; +x is the tag's outward normal
  std::string payload;
};

struct QrCamera {
  double fov = 1.0471975511965976;  // rad
  double max_range = 3.0;
  double noise_std = 0.0;
  Transform3D robot_T_cam;  // camera looks along its +x
};

struct ScenarioEvent {
  double t = 0.0;
  BehaviorEvent event;
};

struct SimParams {
  double dt = 0.1;
  double time_cap = 120.0;
  std::uint64_t seed = 1;
  ScanParams ankle;  // front-facing
  ScanParams torso;  // rear-facing
  QrCamera camera;
  double segment_gap = 0.15;
  double pair_max_sep = 0.5;
  LegClassifierParams leg_classifier;
  TorsoBands torso_bands;
  TrackerParams tracker;
  bool oracle_tracks = false;
};

struct Scenario {
  std::string id = "scenario";
  OccupancyGrid grid;
  StaticSpeedMap speed_map;
  SemanticMap semantic;
  std::vector<QrTag> tags;
  Pose2D robot_start;
  std::vector<PedestrianAgent> pedestrians;
  std::vector<ScenarioEvent> events;  // sorted by t
  BehaviorConfig behavior;
  SimParams sim;
};

namespace detail {

inline double snum(std::istringstream& in, const std::string& what) {
  double v = 0.0;
  if (!(in >> v)) throw MalformedScenario("expected a number for " + what);
  return v;
}

inline BehaviorEvent parse_event(std::istringstream& in) {
  std::string name;
  if (!(in >> name)) throw MalformedScenario("event line missing event name");
  BehaviorEvent ev;
  if (name == "pose_initialized") {
    ev.kind = EventKind::PoseInitialized;
  } else if (name == "person_nearby") {
    ev.kind = EventKind::PersonNearby;
    in >> ev.track_id;  // optional; defaults to nearest
  } else if (name == "guide_requested") {
    ev.kind = EventKind::GuideRequested;
    if (!(in >> ev.label)) throw MalformedScenario("guide_requested needs a label");
  } else if (name == "confirmed") {
    ev.kind = EventKind::Confirmed;
  } else if (name == "follow_requested") {
    ev.kind = EventKind::FollowRequested;
    in >> ev.track_id;
  } else if (name == "goal_reached") {
    ev.kind = EventKind::GoalReached;
  } else if (name == "person_lost") {
    ev.kind = EventKind::PersonLost;
  } else if (name == "cancel") {
    ev.kind = EventKind::Cancel;
  } else if (name == "dwell_timeout") {
    ev.kind = EventKind::DwellTimeout;
  } else {
    throw MalformedScenario("unknown event: " + name);
  }
  return ev;
}

inline PedestrianAgent parse_pedestrian(std::istringstream& in) {
  PedestrianAgent ped;
  std::string mode;
  if (!(in >> ped.id >> mode)) throw MalformedScenario("pedestrian line too short");
  if (mode == "stand") ped.mode = PedMode::Stand;
  else if (mode == "scripted") ped.mode = PedMode::Scripted;
  else if (mode == "follow_robot") ped.mode = PedMode::FollowRobot;
  else throw MalformedScenario("unknown pedestrian mode: " + mode);
  double x = snum(in, "pedestrian x"), y = snum(in, "pedestrian y");
  ped.position = {x, y};

  std::string key;
  while (in >> key) {
    if (key == "wp") {
      TimedWaypoint w;
      w.t = snum(in, "wp t");
      w.pos = {snum(in, "wp x"), snum(in, "wp y")};
      ped.waypoints.push_back(w);
    } else if (key == "pref") ped.preferred_speed = snum(in, key);
    else if (key == "delay") ped.reaction_delay = snum(in, key);
    else if (key == "standoff") ped.standoff = snum(in, key);
    else if (key == "engagement") ped.engagement = snum(in, key);
    else if (key == "gain") ped.gain = snum(in, key);
    else if (key == "leg_radius") ped.leg_radius = snum(in, key);
    else if (key == "leg_sep") ped.leg_separation = snum(in, key);
    else if (key == "torso_a") ped.torso_a = snum(in, key);
    else if (key == "torso_b") ped.torso_b = snum(in, key);
    else if (key == "facing") {
      const double th = snum(in, key);
      ped.facing = {std::cos(th), std::sin(th)};
    } else {
      throw MalformedScenario("unknown pedestrian key: " + key);
    }
  }
  if (ped.mode == PedMode::Scripted) {
    if (ped.waypoints.empty()) throw MalformedScenario("scripted pedestrian needs wp entries");
    for (size_t i = 1; i < ped.waypoints.size(); ++i) {
      if (ped.waypoints[i].t <= ped.waypoints[i - 1].t) {
        throw MalformedScenario("scripted waypoints must increase in time");
      }
    }
  }
  if (ped.leg_radius <= 0.0 || ped.leg_separation <= 0.0 || ped.torso_a <= 0.0 ||
      ped.torso_b <= 0.0) {
    throw MalformedScenario("pedestrian body dimensions must be positive");
  }
  return ped;
}

inline void parse_param(std::istringstream& in, Scenario& sc) {
  std::string key;
  if (!(in >> key)) throw MalformedScenario("param line missing key");
  auto& b = sc.behavior;
  auto& s = sc.sim;
  if (key == "dt") {
    s.dt = snum(in, key);
    if (s.dt <= 0.0) throw MalformedScenario("dt must be positive");
    b.dt = s.dt;
  } else if (key == "time_cap") s.time_cap = snum(in, key);
  else if (key == "seed") s.seed = static_cast<std::uint64_t>(snum(in, key));
  else if (key == "a_max") b.a_max = snum(in, key);
  else if (key == "a_goal") b.a_goal = snum(in, key);
  else if (key == "k_ang") b.k_ang = snum(in, key);
  else if (key == "omega_max") b.omega_max = snum(in, key);
  else if (key == "lookahead") b.lookahead = snum(in, key);
  else if (key == "goal_tol") b.goal_tolerance = snum(in, key);
  else if (key == "inflation") b.inflation = snum(in, key);
  else if (key == "person_nearby") b.person_nearby = snum(in, key);
  else if (key == "dwell") b.dwell = snum(in, key);
  else if (key == "follow_dist") b.follow_dist = snum(in, key);
  else if (key == "fixed_max_v") b.fixed_max_v = snum(in, key);
  else if (key == "disc_radius") b.human_disc_radius = snum(in, key);
  else if (key == "disc_limit") b.human_disc_limit = snum(in, key);
  else if (key == "profile") {
    b.profile.d_safe = snum(in, key);
    b.profile.d_peak = snum(in, key);
    b.profile.d_guide = snum(in, key);
    b.profile.v_safe = snum(in, key);
    b.profile.v_peak = snum(in, key);
    if (!b.profile.valid()) throw MalformedScenario("invalid speed profile parameters");
  } else if (key == "laser_beams") {
    s.ankle.n_beams = s.torso.n_beams = static_cast<int>(snum(in, key));
    if (s.ankle.n_beams < 2) throw MalformedScenario("laser_beams must be at least 2");
  } else if (key == "laser_fov") s.ankle.fov = s.torso.fov = snum(in, key);
  else if (key == "laser_range") s.ankle.max_range = s.torso.max_range = snum(in, key);
  else if (key == "laser_noise") s.ankle.noise_std = s.torso.noise_std = snum(in, key);
  else if (key == "qr_fov") s.camera.fov = snum(in, key);
  else if (key == "qr_range") s.camera.max_range = snum(in, key);
  else if (key == "qr_noise") s.camera.noise_std = snum(in, key);
  else if (key == "segment_gap") s.segment_gap = snum(in, key);
  else if (key == "pair_max_sep") s.pair_max_sep = snum(in, key);
  else if (key == "track_gate") s.tracker.gate = snum(in, key);
  else if (key == "track_timeout") s.tracker.timeout = snum(in, key);
  else if (key == "confirm_hits") s.tracker.confirm_hits = static_cast<int>(snum(in, key));
  else if (key == "leg_threshold") s.leg_classifier.threshold = snum(in, key);
  else if (key == "oracle_tracks") s.oracle_tracks = snum(in, key) != 0.0;
  else throw MalformedScenario("unknown param: " + key);
}

}  // namespace detail

/// Parses the one-file scenario format. Sections may come in any order; the
/// grid block is the only multi-line construct.
inline Scenario parse_scenario(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }

  Scenario sc;
  std::string zone_doc, semantic_doc;
  bool have_grid = false, have_robot = false;

  for (size_t i = 0; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    std::string tag;
    if (!(in >> tag) || tag[0] == '#') continue;

    if (tag == "scenario") {
      if (!(in >> sc.id)) throw MalformedScenario("scenario line missing id");
    } else if (tag == "grid") {
      int w = 0, h = 0;
      double res = 0, ox = 0, oy = 0, oth = 0;
      if (!(in >> w >> h >> res >> ox >> oy >> oth)) {
        throw MalformedScenario("malformed grid header");
      }
      std::string block = lines[i];
      block += '\n';
      for (int r = 0; r < h; ++r) {
        if (++i >= lines.size()) throw MalformedScenario("grid block truncated");
        block += lines[i];
        block += '\n';
      }
      try {
        sc.grid = load_grid(block);
      } catch (const MalformedGrid& e) {
        throw MalformedScenario(e.what());
      }
      have_grid = true;
    } else if (tag == "zone" || tag == "default") {
      zone_doc += lines[i];
      zone_doc += '\n';
    } else if (tag == "landmark" || tag == "waypoint") {
      semantic_doc += lines[i];
      semantic_doc += '\n';
    } else if (tag == "robot") {
      double x, y, th;
      if (!(in >> x >> y >> th)) throw MalformedScenario("robot line needs x y theta");
      sc.robot_start = Pose2D(x, y, th);
      have_robot = true;
    } else if (tag == "pedestrian") {
      sc.pedestrians.push_back(detail::parse_pedestrian(in));
    } else if (tag == "qr") {
      double x, y, z, qw, qx, qy, qz;
      if (!(in >> x >> y >> z >> qw >> qx >> qy >> qz)) {
        throw MalformedScenario("qr line needs x y z qw qx qy qz");
      }
      QrTag t;
      t.pose = Transform3D{{x, y, z}, Quat{qw, qx, qy, qz}};
      QrPayload payload;
      payload.map_link = "inline";
      payload.speed_map_link = "inline";
      payload.tag_pose = t.pose;
      t.payload = generate_payload(payload);
      sc.tags.push_back(std::move(t));
    } else if (tag == "param") {
      detail::parse_param(in, sc);
    } else if (tag == "at") {
      ScenarioEvent ev;
      ev.t = detail::snum(in, "event time");
      std::string kw;
      if (!(in >> kw) || kw != "event") throw MalformedScenario("at line must read: at <t> event ...");
      ev.event = detail::parse_event(in);
      sc.events.push_back(std::move(ev));
    } else {
      throw MalformedScenario("unknown scenario directive: " + tag);
    }
  }

  if (!have_grid) throw MalformedScenario("scenario has no grid");
  if (!have_robot) throw MalformedScenario("scenario has no robot start");
  try {
    sc.speed_map = zones_from_config(zone_doc);
    sc.semantic = semantic_from_config(semantic_doc);
  } catch (const MalformedZone& e) {
    throw MalformedScenario(e.what());
  } catch (const MalformedSemantic& e) {
    throw MalformedScenario(e.what());
  }
  if (sc.grid.occupied_at(sc.robot_start.position())) {
    throw MalformedScenario("robot start is inside an obstacle");
  }
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.t < b.t; });
  return sc;
}

}  // namespace guidebot
