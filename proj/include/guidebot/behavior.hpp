#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "guidebot/perception.hpp"
#include "guidebot/planning.hpp"
#include "guidebot/semantic_map.hpp"

namespace guidebot {

enum class RobotState {
  NonLocalized,
  Waiting,
  ApproachingUser,
  Confirming,
  Guiding,
  Following,
  ReturningToBase,
};

inline const char* to_string(RobotState s) {
  switch (s) {
    case RobotState::NonLocalized: return "NON_LOCALIZED";
    case RobotState::Waiting: return "WAITING";
    case RobotState::ApproachingUser: return "APPROACHING_USER";
    case RobotState::Confirming: return "CONFIRMING";
    case RobotState::Guiding: return "GUIDING";
    case RobotState::Following: return "FOLLOWING";
    case RobotState::ReturningToBase: return "RETURNING_TO_BASE";
  }
  return "?";
}

enum class EventKind {
  PoseInitialized,
  PersonNearby,
  GuideRequested,
  Confirmed,
  FollowRequested,
  GoalReached,
  PersonLost,
  Cancel,
  DwellTimeout,
};

struct BehaviorEvent {
  EventKind kind = EventKind::Cancel;
  int track_id = -1;  // PersonNearby / FollowRequested
  std::string label;  // GuideRequested
};

enum class ActionKind {
  FacePerson,       // turn toward track_id
  AskConfirmation,  // display label, wait for Confirmed
  SetGoalPending,   // navigate to the previously requested label
  SetGoalBase,      // navigate to the "base" waypoint
  ArmDwell,         // start the post-guidance dwell countdown
  ClearAll,         // drop goal, path, pending request
};

struct Action {
  ActionKind kind;
  int track_id = -1;
  std::string label;
};

struct FsmResult {
  RobotState state;
  std::vector<Action> actions;
};

/// Total transition function. Unlisted (state, event) pairs are no-ops.
inline FsmResult fsm_step(RobotState state, const BehaviorEvent& ev) {
  using K = EventKind;
  using S = RobotState;
  if (ev.kind == K::Cancel) return {S::Waiting, {{ActionKind::ClearAll}}};
  switch (state) {
    case S::NonLocalized:
      if (ev.kind == K::PoseInitialized) return {S::Waiting, {}};
      break;
    case S::Waiting:
      if (ev.kind == K::PersonNearby) {
        return {S::ApproachingUser, {{ActionKind::FacePerson, ev.track_id}}};
      }
      if (ev.kind == K::DwellTimeout) {
        return {S::ReturningToBase, {{ActionKind::SetGoalBase}}};
      }
      break;
    case S::ApproachingUser:
      if (ev.kind == K::GuideRequested) {
        return {S::Confirming, {{ActionKind::AskConfirmation, -1, ev.label}}};
      }
      if (ev.kind == K::FollowRequested) return {S::Following, {}};
      break;
    case S::Confirming:
      if (ev.kind == K::Confirmed) return {S::Guiding, {{ActionKind::SetGoalPending}}};
      break;
    case S::Guiding:
      if (ev.kind == K::GoalReached) return {S::Waiting, {{ActionKind::ArmDwell}}};
      if (ev.kind == K::PersonLost) return {S::Waiting, {}};
      break;
    case S::Following:
      if (ev.kind == K::PersonLost) return {S::Waiting, {}};
      break;
    case S::ReturningToBase:
      if (ev.kind == K::GoalReached) return {S::Waiting, {}};
      break;
  }
  return {state, {}};
}

enum class Controller { FixedMax, SpeedMap, GuidanceProfile, GuidanceFixed };

inline const char* to_string(Controller c) {
  switch (c) {
    case Controller::FixedMax: return "fixed_max";
    case Controller::SpeedMap: return "speedmap";
    case Controller::GuidanceProfile: return "guidance_profile";
    case Controller::GuidanceFixed: return "guidance_fixed";
  }
  return "?";
}

struct BehaviorConfig {
  Controller controller = Controller::SpeedMap;
  double fixed_max_v = 1.0;  // m/s, fixed_max and guidance_fixed cruise
  double a_max = 1.0;        // m/s^2
  double a_goal = 0.5;       // m/s^2, final approach ramp
  double k_ang = 2.0;        // 1/s
  double omega_max = 1.5;    // rad/s
  double lookahead = 0.3;    // m
  double goal_tolerance = 0.15;  // m
  double inflation = 0.35;       // m
  double person_nearby = 2.0;    // m
  double dwell = 10.0;           // s
  double follow_dist = 0.9;      // m
  SpeedProfile profile;
  double human_disc_radius = 1.0;  // m
  double human_disc_limit = 0.5;   // m/s
  double dt = 0.1;                 // s
};

/// One behavior tick's outputs: the drive command, the dynamic speed layer
/// contributed around tracked humans, and everything worth logging.
struct BehaviorTick {
  VelocityCommand cmd;
  SpeedLayer layer;
  RobotState state = RobotState::NonLocalized;
  double limit = 0.0;  // effective limit at the robot
  ZoneClass zone = ZoneClass::Yellow;
  double d_guided = std::numeric_limits<double>::quiet_NaN();
  std::vector<BehaviorEvent> fired;
};

/// Owns the FSM, the current plan and prev_v. Single-threaded; the simulator
/// (or a robot executive) calls tick at a fixed rate.
class GuideBehavior {
 public:
  GuideBehavior(OccupancyGrid grid, StaticSpeedMap speed_map, SemanticMap semantic,
                BehaviorConfig cfg)
      : grid_(std::move(grid)),
        speed_map_(std::move(speed_map)),
        semantic_(std::move(semantic)),
        cfg_(cfg) {}

  RobotState state() const { return state_; }
  bool mission_complete() const { return mission_complete_; }
  double prev_v() const { return prev_v_; }
  const std::optional<Pose2D>& goal() const { return goal_; }
  const Path* path() const { return path_ ? &*path_ : nullptr; }

  /// Runs scripted events, derives automatic ones, then computes the drive
  /// command for the resulting state.
  BehaviorTick tick(double now, const Pose2D& pose, const std::vector<Track>& tracks,
                    const std::vector<BehaviorEvent>& scripted = {}) {
    BehaviorTick out;
    for (const auto& ev : scripted) dispatch(ev, now, pose, tracks, out);
    auto_events(now, pose, tracks, out);

    out.layer.expiry = now + 2.0 * cfg_.dt;
    for (const auto& t : tracks) {
      out.layer.discs.push_back({t.position(), cfg_.human_disc_radius, cfg_.human_disc_limit});
    }
    layers_.clear();
    layers_.push_back(out.layer);

    out.cmd = command_for_state(now, pose, tracks, out);
    out.state = state_;
    out.limit = effective_limit(speed_map_, layers_, pose.position(), now);
    out.zone = zone_class_at(speed_map_, pose.position());
    prev_v_ = out.cmd.v;
    return out;
  }

  /// Scripted or externally detected event, outside the tick cycle.
  void handle_event(const BehaviorEvent& ev, double now, const Pose2D& pose,
                    const std::vector<Track>& tracks) {
    BehaviorTick scratch;
    dispatch(ev, now, pose, tracks, scratch);
  }

 private:
  const Track* find_track(const std::vector<Track>& tracks, int id) const {
    for (const auto& t : tracks) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }

  const Track* nearest_track(const std::vector<Track>& tracks, const Pose2D& pose) const {
    const Track* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& t : tracks) {
      const double d = (t.position() - pose.position()).norm();
      if (d < best_d) {
        best_d = d;
        best = &t;
      }
    }
    return best;
  }

  void dispatch(const BehaviorEvent& ev, double now, const Pose2D& pose,
                const std::vector<Track>& tracks, BehaviorTick& out) {
    const FsmResult res = fsm_step(state_, ev);
    state_ = res.state;
    out.fired.push_back(ev);
    for (const auto& action : res.actions) apply_action(action, now, pose, tracks);
    // The follow transition carries no action; the target track binds here.
    if (ev.kind == EventKind::FollowRequested && state_ == RobotState::Following) {
      followed_id_ = ev.track_id >= 0 ? ev.track_id : approach_id_;
      if (followed_id_ < 0) {
        if (const Track* t = nearest_track(tracks, pose)) followed_id_ = t->id;
      }
    }
  }

  void apply_action(const Action& action, double now, const Pose2D& pose,
                    const std::vector<Track>& tracks) {
    switch (action.kind) {
      case ActionKind::FacePerson: {
        approach_id_ = action.track_id;
        if (approach_id_ < 0) {
          if (const Track* t = nearest_track(tracks, pose)) approach_id_ = t->id;
        }
        break;
      }
      case ActionKind::AskConfirmation:
        pending_label_ = action.label;
        break;
      case ActionKind::SetGoalPending: {
        if (pending_label_.empty()) {
          throw UnknownLabel("guide confirmed with no pending destination");
        }
        set_goal(goal_for_label(semantic_, grid_, cfg_.inflation, pose, pending_label_), pose);
        guided_id_ = approach_id_;
        if (guided_id_ < 0) {
          if (const Track* t = nearest_track(tracks, pose)) guided_id_ = t->id;
        }
        break;
      }
      case ActionKind::SetGoalBase:
        set_goal(goal_for_label(semantic_, grid_, cfg_.inflation, pose, "base"), pose);
        break;
      case ActionKind::ArmDwell:
        dwell_deadline_ = now + cfg_.dwell;
        break;
      case ActionKind::ClearAll:
        goal_.reset();
        path_.reset();
        pending_label_.clear();
        approach_id_ = guided_id_ = followed_id_ = -1;
        dwell_deadline_.reset();
        break;
    }
  }

  void auto_events(double now, const Pose2D& pose, const std::vector<Track>& tracks,
                   BehaviorTick& out) {
    if (state_ == RobotState::Waiting) {
      if (const Track* t = nearest_track(tracks, pose)) {
        if ((t->position() - pose.position()).norm() <= cfg_.person_nearby) {
          dispatch({EventKind::PersonNearby, t->id}, now, pose, tracks, out);
        }
      }
    }
    if (state_ == RobotState::Waiting && dwell_deadline_ && now >= *dwell_deadline_) {
      dwell_deadline_.reset();
      dispatch({EventKind::DwellTimeout}, now, pose, tracks, out);
    }
    if ((state_ == RobotState::Guiding && guided_id_ >= 0 &&
         find_track(tracks, guided_id_) == nullptr) ||
        (state_ == RobotState::Following && followed_id_ >= 0 &&
         find_track(tracks, followed_id_) == nullptr)) {
      dispatch({EventKind::PersonLost}, now, pose, tracks, out);
    }
    if ((state_ == RobotState::Guiding || state_ == RobotState::ReturningToBase) && goal_ &&
        (goal_->position() - pose.position()).norm() <= cfg_.goal_tolerance) {
      mission_complete_ = true;
      dispatch({EventKind::GoalReached}, now, pose, tracks, out);
    }
  }

  void set_goal(const Pose2D& goal, const Pose2D& from) {
    goal_ = goal;
    path_ = plan_path(grid_, cfg_.inflation, from.position(), goal.position());
  }

  VelocityCommand command_for_state(double now, const Pose2D& pose,
                                    const std::vector<Track>& tracks, BehaviorTick& out) {
    switch (state_) {
      case RobotState::NonLocalized:
      case RobotState::Waiting:
        return braked_stop();
      case RobotState::Confirming:
        // Pausing to ask is a planned stop in front of a person, not an
        // interrupt; wind down on the approach ramp.
        return braked_stop(cfg_.a_goal);
      case RobotState::ApproachingUser: {
        const Track* t = approach_id_ >= 0 ? find_track(tracks, approach_id_) : nullptr;
        if (t == nullptr) return braked_stop();
        const Vec2 to = t->position() - pose.position();
        const double dist = to.norm();
        const double bearing = normalize_angle(std::atan2(to.y(), to.x()) - pose.theta);
        // Close on the person but pull up follow_dist short, braking into the
        // standoff point and any limit along the straight line to it.
        const double remaining = std::max(0.0, dist - cfg_.follow_dist);
        double nominal = 0.0;
        if (remaining > 0.0 && dist > 1e-9) {
          if (cfg_.controller == Controller::FixedMax) {
            nominal = std::min(cfg_.fixed_max_v, brake_speed(0.0, remaining, cfg_.a_goal, cfg_.dt));
          } else {
            Path line;
            line.waypoints = {pose.position() + to * (remaining / dist)};
            nominal = path_speed_limit(line, 0, speed_map_, layers_, pose.position(), now,
                                       cfg_.a_max, cfg_.a_goal, cfg_.dt);
          }
        }
        VelocityCommand cmd;
        cmd.v = governed(bearing_gate(bearing) * nominal, pose, now);
        // Meeting a person is a final approach: gain speed on the gentle
        // ramp, keep the full braking authority.
        cmd.v = std::min(cmd.v, prev_v_ + cfg_.a_goal * cfg_.dt);
        cmd.omega = std::clamp(cfg_.k_ang * bearing, -cfg_.omega_max, cfg_.omega_max);
        return cmd;
      }
      case RobotState::Guiding: {
        const Track* t = guided_id_ >= 0 ? find_track(tracks, guided_id_) : nullptr;
        double d_profile = std::numeric_limits<double>::quiet_NaN();
        if (t != nullptr) {
          const Vec2 sep = t->position() - pose.position();
          const double d = sep.norm();
          out.d_guided = d;
          // The profile bound falls as the person drops back, and the
          // deceleration clamp sheds at most a_max*dt per tick, so chasing
          // the bound at the current separation overshoots it whenever the
          // gap widens fast. Size the command against the separation one
          // tick ahead: own retreat at the current bound plus the person's
          // radial drift from the track estimate.
          double drift = 0.0;
          if (d > 1e-9) drift = std::max(0.0, sep.dot(t->velocity()) / d);
          d_profile = d + (guidance_speed(d, cfg_.profile) + drift) * cfg_.dt;
        }
        return drive_path(now, pose, d_profile);
      }
      case RobotState::ReturningToBase:
        return drive_path(now, pose, std::numeric_limits<double>::quiet_NaN());
      case RobotState::Following: {
        const Track* t = followed_id_ >= 0 ? find_track(tracks, followed_id_) : nullptr;
        if (t == nullptr) return braked_stop();
        out.d_guided = (t->position() - pose.position()).norm();
        const Vec2 goal = following_goal(pose, t->position(), cfg_.follow_dist);
        replan_following(pose, goal);
        return drive_path(now, pose, std::numeric_limits<double>::quiet_NaN());
      }
    }
    return {};
  }

  VelocityCommand braked_stop() {
    // A completed mission winds down on the goal-approach ramp; interrupt
    // stops (cancel, person lost) brake at the hard limit.
    return braked_stop(mission_complete_ ? cfg_.a_goal : cfg_.a_max);
  }

  VelocityCommand braked_stop(double decel) {
    VelocityCommand cmd;
    cmd.v = std::max(0.0, prev_v_ - decel * cfg_.dt);
    return cmd;
  }

  /// Speed-map governance for stationary states too, so a freshly appearing
  /// limit is still honored while decelerating.
  double governed(double nominal, const Pose2D& pose, double now) const {
    if (cfg_.controller == Controller::FixedMax) {
      const double v =
          std::clamp(nominal, prev_v_ - cfg_.a_max * cfg_.dt, prev_v_ + cfg_.a_max * cfg_.dt);
      return std::max(0.0, v);
    }
    return governed_speed(nominal, speed_map_, layers_, pose.position(), now, prev_v_, cfg_.a_max,
                          cfg_.dt);
  }

  VelocityCommand drive_path(double now, const Pose2D& pose, double d_person) {
    if (!path_ || path_->empty()) return braked_stop();
    const FollowRef ref = follow_path(*path_, pose, cfg_.lookahead);

    double nominal = std::numeric_limits<double>::infinity();
    switch (cfg_.controller) {
      case Controller::FixedMax: {
        nominal = cfg_.fixed_max_v;
        // End-of-path ramp only; this controller ignores the speed map.
        const double to_stop = brake_speed(0.0, ref.remaining, cfg_.a_goal, cfg_.dt);
        nominal = std::min(nominal, to_stop);
        break;
      }
      case Controller::SpeedMap:
        nominal = path_speed_limit(*path_, ref.nearest_index, speed_map_, layers_,
                                   pose.position(), now, cfg_.a_max, cfg_.a_goal, cfg_.dt);
        break;
      case Controller::GuidanceProfile: {
        const double prof = std::isnan(d_person) ? 0.0 : guidance_speed(d_person, cfg_.profile);
        nominal = std::min(prof, path_speed_limit(*path_, ref.nearest_index, speed_map_, layers_,
                                                  pose.position(), now, cfg_.a_max, cfg_.a_goal,
                                                  cfg_.dt));
        break;
      }
      case Controller::GuidanceFixed: {
        const double base =
            (!std::isnan(d_person) && d_person < cfg_.profile.d_guide) ? cfg_.fixed_max_v : 0.0;
        nominal = std::min(base, path_speed_limit(*path_, ref.nearest_index, speed_map_, layers_,
                                                  pose.position(), now, cfg_.a_max, cfg_.a_goal,
                                                  cfg_.dt));
        break;
      }
    }

    VelocityCommand cmd;
    cmd.v = governed(bearing_gate(ref.bearing_error) * nominal, pose, now);
    if (cfg_.controller == Controller::GuidanceProfile) {
      // The smoothness half of the guidance contract: the profile is chased
      // upward on the gentle ramp only, so a person stepping into the peak
      // band does not yank the robot at the hard acceleration limit.
      cmd.v = std::min(cmd.v, prev_v_ + cfg_.a_goal * cfg_.dt);
    }
    cmd.omega = std::clamp(cfg_.k_ang * ref.bearing_error, -cfg_.omega_max, cfg_.omega_max);
    return cmd;
  }

  void replan_following(const Pose2D& pose, const Vec2& goal) {
    Vec2 target = goal;
    if (grid_.occupied_at(target) || inflate_grid(grid_, cfg_.inflation).occupied_at(target)) {
      target = raytrace_free_goal(grid_, cfg_.inflation, target, pose);
    }
    goal_ = Pose2D(target.x(), target.y(), pose.theta);
    path_ = plan_path(grid_, cfg_.inflation, pose.position(), target);
  }

  OccupancyGrid grid_;
  StaticSpeedMap speed_map_;
  SemanticMap semantic_;
  BehaviorConfig cfg_;

  RobotState state_ = RobotState::NonLocalized;
  double prev_v_ = 0.0;
  std::optional<Pose2D> goal_;
  std::optional<Path> path_;
  std::vector<SpeedLayer> layers_;
  std::string pending_label_;
  int approach_id_ = -1;
  int guided_id_ = -1;
  int followed_id_ = -1;
  std::optional<double> dwell_deadline_;
  bool mission_complete_ = false;
};

}  // namespace guidebot
