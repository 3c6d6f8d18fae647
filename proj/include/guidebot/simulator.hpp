#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "guidebot/scenario.hpp"

namespace guidebot {

struct SimulationFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RobotKinState {
  Pose2D pose;
  double v = 0.0;
  double omega = 0.0;
};

/// Unicycle step: integrates the commanded twist over dt, which then becomes
/// the current twist.
inline RobotKinState step_robot(const RobotKinState& s, const VelocityCommand& cmd, double dt) {
  if (dt <= 0.0) throw SimulationFault("step_robot needs dt > 0");
  RobotKinState out = s;
  out.pose.x += cmd.v * std::cos(s.pose.theta) * dt;
  out.pose.y += cmd.v * std::sin(s.pose.theta) * dt;
  out.pose.theta = normalize_angle(s.pose.theta + cmd.omega * dt);
  out.v = cmd.v;
  out.omega = cmd.omega;
  return out;
}

namespace detail {

inline Vec2 scripted_position(const PedestrianAgent& ped, double t, Vec2* dir_out) {
  const auto& wp = ped.waypoints;
  if (t <= wp.front().t) return wp.front().pos;
  for (size_t i = 1; i < wp.size(); ++i) {
    if (t <= wp[i].t) {
      const double f = (t - wp[i - 1].t) / (wp[i].t - wp[i - 1].t);
      const Vec2 seg = wp[i].pos - wp[i - 1].pos;
      if (dir_out != nullptr && seg.norm() > 1e-9) *dir_out = seg.normalized();
      return wp[i - 1].pos + f * seg;
    }
  }
  return wp.back().pos;
}

}  // namespace detail

/// Advances one pedestrian by dt. follow_robot agents walk toward where the
/// robot was `reaction_delay` ago, capped at preferred_speed, stopping at
/// `standoff` and ignoring robots beyond `engagement`.
inline void step_pedestrian(PedestrianAgent& ped, double now, double dt,
                            const Vec2& robot_now, const Vec2& robot_delayed) {
  switch (ped.mode) {
    case PedMode::Stand:
      return;
    case PedMode::Scripted: {
      Vec2 dir = ped.facing;
      ped.position = detail::scripted_position(ped, now + dt, &dir);
      ped.facing = dir;
      return;
    }
    case PedMode::FollowRobot: {
      if ((robot_now - ped.position).norm() > ped.engagement) return;
      const Vec2 to_target = robot_delayed - ped.position;
      const double d = to_target.norm();
      if (d <= ped.standoff + 1e-9) return;
      const double speed = std::min(ped.preferred_speed, ped.gain * (d - ped.standoff));
      const double step = std::min(speed * dt, d - ped.standoff);
      if (step <= 0.0) return;
      const Vec2 dir = to_target / d;
      ped.position += dir * step;
      ped.facing = dir;
      return;
    }
  }
}

namespace detail {

/// Nearest positive ray-circle hit, or infinity.
inline double ray_circle(const Vec2& o, const Vec2& d, const Vec2& c, double r) {
  const Vec2 oc = o - c;
  const double b = oc.dot(d);
  const double q = oc.squaredNorm() - r * r;
  const double disc = b * b - q;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double sq = std::sqrt(disc);
  const double t1 = -b - sq;
  if (t1 > 0.0) return t1;
  const double t2 = -b + sq;
  if (t2 > 0.0) return t2;
  return std::numeric_limits<double>::infinity();
}

/// Nearest positive hit on an axis-aligned-in-body-frame ellipse.
inline double ray_ellipse(const Vec2& o, const Vec2& d, const Vec2& center, const Vec2& facing,
                          double a, double b) {
  // Rotate into the ellipse frame, then scale to a unit circle.
  const double fx = facing.x(), fy = facing.y();
  const Vec2 rel{o.x() - center.x(), o.y() - center.y()};
  const Vec2 ol{(fx * rel.x() + fy * rel.y()) / a, (-fy * rel.x() + fx * rel.y()) / b};
  const Vec2 dl{(fx * d.x() + fy * d.y()) / a, (-fy * d.x() + fx * d.y()) / b};
  const double A = dl.squaredNorm();
  const double B = ol.dot(dl);
  const double C = ol.squaredNorm() - 1.0;
  const double disc = B * B - A * C;
  if (disc < 0.0 || A < 1e-18) return std::numeric_limits<double>::infinity();
  const double sq = std::sqrt(disc);
  const double t1 = (-B - sq) / A;
  if (t1 > 0.0) return t1;
  const double t2 = (-B + sq) / A;
  if (t2 > 0.0) return t2;
  return std::numeric_limits<double>::infinity();
}

inline double nearest_pedestrian_hit(const std::vector<PedestrianAgent>& peds, ScanChannel ch,
                                     const Vec2& o, const Vec2& d) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ped : peds) {
    if (ch == ScanChannel::Ankle) {
      const Vec2 perp{-ped.facing.y(), ped.facing.x()};
      const Vec2 off = perp * (ped.leg_separation / 2.0);
      best = std::min(best, ray_circle(o, d, ped.position + off, ped.leg_radius));
      best = std::min(best, ray_circle(o, d, ped.position - off, ped.leg_radius));
    } else {
      best = std::min(best, ray_ellipse(o, d, ped.position, ped.facing, ped.torso_a, ped.torso_b));
    }
  }
  return best;
}

}  // namespace detail

/// One simulated scan: per beam, the nearest of the marched grid hit
/// (half-resolution steps) and the analytic pedestrian hits on this channel.
/// Hits get Gaussian range noise; misses report exactly max_range.
inline LaserScan cast_scan(const OccupancyGrid& grid, const std::vector<PedestrianAgent>& peds,
                           const Pose2D& sensor, ScanChannel channel, const ScanParams& params,
                           std::mt19937_64& rng, double stamp = 0.0) {
  if (params.n_beams < 2) throw SimulationFault("cast_scan needs at least 2 beams");
  LaserScan scan;
  scan.sensor_pose = sensor;
  scan.channel = channel;
  scan.angle_min = -params.fov / 2.0;
  scan.angle_increment = params.fov / (params.n_beams - 1);
  scan.max_range = params.max_range;
  scan.stamp = stamp;
  scan.ranges.resize(params.n_beams);

  std::normal_distribution<double> noise(0.0, params.noise_std);
  const double march = grid.resolution() / 2.0;
  const Vec2 origin = sensor.position();
  for (int i = 0; i < params.n_beams; ++i) {
    const double a = sensor.theta + scan.angle_min + i * scan.angle_increment;
    const Vec2 dir{std::cos(a), std::sin(a)};

    double hit = detail::nearest_pedestrian_hit(peds, channel, origin, dir);
    for (double t = march; t <= params.max_range && t < hit; t += march) {
      if (grid.occupied_at(origin + dir * t)) {
        hit = t;
        break;
      }
    }
    if (hit < params.max_range) {
      double r = hit;
      if (params.noise_std > 0.0) r += noise(rng);
      scan.ranges[i] = std::clamp(r, 0.0, params.max_range - 1e-6);
    } else {
      scan.ranges[i] = params.max_range;
    }
  }
  return scan;
}

/// First tag inside the camera frustum whose face points back at the camera
/// (normals' dot < 0). Returns the camera-frame tag transform plus payload.
inline std::optional<std::pair<Transform3D, const QrTag*>> detect_qr(
    const std::vector<QrTag>& tags, const Pose2D& robot, const QrCamera& cam,
    std::mt19937_64& rng) {
  const Transform3D map_T_cam = compose(lift_pose(robot), cam.robot_T_cam);
  const Transform3D cam_T_map = invert(map_T_cam);
  for (const auto& tag : tags) {
    Transform3D cam_T_tag = compose(cam_T_map, tag.pose);
    const Vec3& t = cam_T_tag.translation;
    if (t.x() <= 0.0) continue;
    if (t.norm() > cam.max_range) continue;
    if (std::abs(std::atan2(t.y(), t.x())) > cam.fov / 2.0) continue;
    const Vec3 tag_normal = cam_T_tag.rotation * Vec3::UnitX();
    if (tag_normal.x() >= 0.0) continue;  // facing away
    if (cam.noise_std > 0.0) {
      std::normal_distribution<double> n(0.0, cam.noise_std);
      cam_T_tag.translation += Vec3{n(rng), n(rng), n(rng)};
      cam_T_tag.rotation = Quat{Eigen::AngleAxisd(n(rng), Vec3::UnitZ())} * cam_T_tag.rotation;
    }
    return std::make_pair(cam_T_tag, &tag);
  }
  return std::nullopt;
}

struct TickRow {
  double time = 0.0;
  Pose2D pose;
  double v = 0.0;
  double omega = 0.0;
  double limit = 0.0;
  ZoneClass zone = ZoneClass::Yellow;
  RobotState state = RobotState::NonLocalized;
  double d_guided = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> ped_dist;  // aligned with scenario pedestrian order
};

struct RunSummary {
  std::string scenario_id;
  std::string controller;
  double completion_time = 0.0;
  double min_human_distance = std::numeric_limits<double>::infinity();
  double max_accel = 0.0;
  bool timeout = false;
};

struct MetricsLog {
  std::vector<TickRow> rows;
  RunSummary summary;
  std::vector<int> ped_ids;
};

namespace detail {

inline std::vector<Track> oracle_tracks(const std::vector<PedestrianAgent>& peds,
                                        const std::vector<Vec2>& prev_pos, double dt, double now) {
  std::vector<Track> tracks;
  tracks.reserve(peds.size());
  for (size_t i = 0; i < peds.size(); ++i) {
    Track t;
    t.id = peds[i].id;
    const Vec2 vel = dt > 0.0 ? Vec2{(peds[i].position - prev_pos[i]) / dt} : Vec2{0.0, 0.0};
    t.state << peds[i].position.x(), peds[i].position.y(), vel.x(), vel.y();
    t.last_seen = now;
    t.confirmed = true;
    t.consecutive_hits = 1000;
    tracks.push_back(std::move(t));
  }
  return tracks;
}

inline std::vector<Detection> detect_legs(const LaserScan& scan, const SimParams& p, double now) {
  std::vector<Vec2> legs;
  for (const auto& seg : segment_scan(scan, p.segment_gap)) {
    if (seg.points.size() < 3) continue;
    const LegFeatures f = leg_features(seg);
    if (classify_leg(f, p.leg_classifier).detected) {
      legs.push_back(fit_circle(seg.points).center);
    }
  }
  return pair_legs(legs, p.pair_max_sep, now);
}

inline std::vector<Detection> detect_torsos(const LaserScan& scan, const SimParams& p,
                                            double now) {
  std::vector<Detection> out;
  for (const auto& seg : segment_scan(scan, p.segment_gap)) {
    if (seg.points.size() < 6) continue;
    try {
      const EllipseFit e =
          fit_ellipse_arc(seg.points, Vec2{scan.sensor_pose.x, scan.sensor_pose.y});
      if (classify_torso(e, p.torso_bands)) {
        out.push_back({e.center, DetectionSource::Torso, now});
      }
    } catch (const DegenerateFit&) {
    }
  }
  return out;
}

}  // namespace detail

/// Deterministic closed loop: scans -> perception -> behavior -> kinematics,
/// at fixed dt, until the mission completes or the time cap hits. State
/// flows only forward; same scenario + seed gives identical logs.
inline MetricsLog run_scenario(const Scenario& sc, Controller controller) {
  BehaviorConfig cfg = sc.behavior;
  cfg.controller = controller;
  GuideBehavior behavior(sc.grid, sc.speed_map, sc.semantic, cfg);
  PersonTracker tracker(sc.sim.tracker);
  std::mt19937_64 rng(sc.sim.seed);

  RobotKinState robot{sc.robot_start};
  std::vector<PedestrianAgent> peds = sc.pedestrians;
  std::vector<Vec2> prev_ped_pos;
  for (const auto& ped : peds) prev_ped_pos.push_back(ped.position);

  MetricsLog log;
  log.summary.scenario_id = sc.id;
  log.summary.controller = to_string(controller);
  for (const auto& ped : peds) log.ped_ids.push_back(ped.id);

  std::vector<Vec2> robot_history;  // one entry per tick, for reaction delays
  const double dt = sc.sim.dt;
  const int delay_cap = static_cast<int>(std::ceil(sc.sim.time_cap / dt)) + 2;
  robot_history.reserve(delay_cap);

  size_t event_cursor = 0;
  bool localized = false;
  bool completed = false;
  double prev_v = 0.0;

  const int max_ticks = static_cast<int>(std::llround(sc.sim.time_cap / dt));
  for (int step = 0; step <= max_ticks; ++step) {
    const double now = step * dt;
    robot_history.push_back(robot.pose.position());

    std::vector<BehaviorEvent> scripted;
    if (!localized) {
      if (const auto hit = detect_qr(sc.tags, robot.pose, sc.sim.camera, rng)) {
        const QrPayload payload = parse_payload(hit->second->payload);
        // The chain estimate is exact under zero noise; the behavior runs on
        // the simulator's pose either way.
        (void)qr_localize(payload.tag_pose, hit->first, sc.sim.camera.robot_T_cam);
        scripted.push_back({EventKind::PoseInitialized});
        localized = true;
      }
    }
    while (event_cursor < sc.events.size() && sc.events[event_cursor].t <= now + 1e-9) {
      if (sc.events[event_cursor].event.kind == EventKind::PoseInitialized) localized = true;
      scripted.push_back(sc.events[event_cursor].event);
      ++event_cursor;
    }

    std::vector<Track> tracks;
    if (sc.sim.oracle_tracks) {
      tracks = detail::oracle_tracks(peds, prev_ped_pos, step == 0 ? 0.0 : dt, now);
    } else {
      const LaserScan ankle =
          cast_scan(sc.grid, peds, robot.pose, ScanChannel::Ankle, sc.sim.ankle, rng, now);
      const Pose2D rear{robot.pose.x, robot.pose.y, robot.pose.theta + std::numbers::pi};
      const LaserScan torso =
          cast_scan(sc.grid, peds, rear, ScanChannel::Torso, sc.sim.torso, rng, now);
      tracker.step(now, {detail::detect_legs(ankle, sc.sim, now),
                         detail::detect_torsos(torso, sc.sim, now)});
      for (const auto& t : tracker.tracks()) {
        if (t.confirmed) tracks.push_back(t);
      }
    }

    const BehaviorTick res = behavior.tick(now, robot.pose, tracks, scripted);

    TickRow row;
    row.time = now;
    row.pose = robot.pose;
    row.v = res.cmd.v;
    row.omega = res.cmd.omega;
    row.limit = res.limit;
    row.zone = res.zone;
    row.state = res.state;
    row.d_guided = res.d_guided;
    for (const auto& ped : peds) {
      const double d = (ped.position - robot.pose.position()).norm();
      row.ped_dist.push_back(d);
      log.summary.min_human_distance = std::min(log.summary.min_human_distance, d);
    }
    log.summary.max_accel = std::max(log.summary.max_accel, std::abs(res.cmd.v - prev_v) / dt);
    prev_v = res.cmd.v;
    log.rows.push_back(std::move(row));

    if (behavior.mission_complete()) {
      log.summary.completion_time = now;
      completed = true;
      break;
    }

    robot = step_robot(robot, res.cmd, dt);
    if (sc.grid.occupied_at(robot.pose.position())) {
      throw SimulationFault("robot drove into an occupied cell at t=" + std::to_string(now));
    }
    for (size_t i = 0; i < peds.size(); ++i) {
      prev_ped_pos[i] = peds[i].position;
      const int delay_ticks = static_cast<int>(std::llround(peds[i].reaction_delay / dt));
      const int idx = std::max(0, static_cast<int>(robot_history.size()) - 1 - delay_ticks);
      step_pedestrian(peds[i], now, dt, robot.pose.position(), robot_history[idx]);
    }
  }

  if (!completed) {
    log.summary.timeout = true;
    log.summary.completion_time = sc.sim.time_cap;
  }
  return log;
}

namespace detail {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

/// Fixed-schema CSV; pedestrian distance columns follow scenario order.
inline std::string metrics_csv(const MetricsLog& log) {
  std::string out = "time,x,y,theta,cmd_v,cmd_omega,limit,zone,state,d_guided";
  for (const int id : log.ped_ids) out += ",dist_ped_" + std::to_string(id);
  out += '\n';
  for (const auto& r : log.rows) {
    out += detail::num(r.time);
    out += ',';
    out += detail::num(r.pose.x);
    out += ',';
    out += detail::num(r.pose.y);
    out += ',';
    out += detail::num(r.pose.theta);
    out += ',';
    out += detail::num(r.v);
    out += ',';
    out += detail::num(r.omega);
    out += ',';
    out += detail::num(r.limit);
    out += ',';
    out += to_string(r.zone);
    out += ',';
    out += to_string(r.state);
    out += ',';
    out += detail::num(r.d_guided);
    for (const double d : r.ped_dist) {
      out += ',';
      out += detail::num(d);
    }
    out += '\n';
  }
  return out;
}

inline std::string summary_text(const RunSummary& s) {
  std::string out = "scenario=" + s.scenario_id + " controller=" + s.controller;
  out += " completion_time=" + detail::num(s.completion_time);
  out += " min_human_distance=" + detail::num(s.min_human_distance);
  out += " max_accel=" + detail::num(s.max_accel);
  out += " timeout=";
  out += s.timeout ? '1' : '0';
  out += '\n';
  return out;
}

/// Trajectory plot: occupied cells in grey, zone polygons tinted, one dot per
/// tick colored by the zone class under the robot. Assumes an axis-aligned
/// grid (origin theta 0), which shipped scenarios use.
inline std::string svg_plot(const Scenario& sc, const MetricsLog& log) {
  const double res = sc.grid.resolution();
  const double w = sc.grid.width() * res, h = sc.grid.height() * res;
  const double ox = sc.grid.origin().x, oy = sc.grid.origin().y;
  const double scale = 48.0;
  const auto px = [&](double x) { return (x - ox) * scale; };
  const auto py = [&](double y) { return (oy + h - y) * scale; };  // svg y grows down

  const auto zone_color = [](ZoneClass z) {
    switch (z) {
      case ZoneClass::Green: return "#2e9e44";
      case ZoneClass::Yellow: return "#d8a513";
      case ZoneClass::Red: return "#cf3423";
    }
    return "#000000";
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    detail::num(w * scale) + "\" height=\"" + detail::num(h * scale) +
                    "\" viewBox=\"0 0 " + detail::num(w * scale) + " " + detail::num(h * scale) +
                    "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  // Zone fills under everything else.
  for (const auto& zone : sc.speed_map.zones) {
    svg += "<polygon points=\"";
    for (const auto& v : zone.region.vertices) {
      svg += detail::num(px(v.x())) + "," + detail::num(py(v.y())) + " ";
    }
    svg += std::string("\" fill=\"") + zone_color(zone.cls) + "\" fill-opacity=\"0.18\"/>\n";
  }

  // Occupied cells, merged into horizontal runs.
  for (int cy = 0; cy < sc.grid.height(); ++cy) {
    int run_start = -1;
    for (int cx = 0; cx <= sc.grid.width(); ++cx) {
      const bool occ = cx < sc.grid.width() && sc.grid.occupied({cx, cy});
      if (occ && run_start < 0) run_start = cx;
      if (!occ && run_start >= 0) {
        const Vec2 a = sc.grid.origin().position() + Vec2{run_start * res, cy * res};
        svg += "<rect x=\"" + detail::num(px(a.x())) + "\" y=\"" +
               detail::num(py(a.y() + res)) + "\" width=\"" +
               detail::num((cx - run_start) * res * scale) + "\" height=\"" +
               detail::num(res * scale) + "\" fill=\"#444444\"/>\n";
        run_start = -1;
      }
    }
  }

  for (const auto& ped : sc.pedestrians) {
    svg += "<circle cx=\"" + detail::num(px(ped.position.x())) + "\" cy=\"" +
           detail::num(py(ped.position.y())) + "\" r=\"6\" fill=\"#2456c9\"/>\n";
  }
  for (const auto& r : log.rows) {
    svg += "<circle cx=\"" + detail::num(px(r.pose.x)) + "\" cy=\"" + detail::num(py(r.pose.y)) +
           std::string("\" r=\"2.5\" fill=\"") + zone_color(r.zone) + "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace guidebot
