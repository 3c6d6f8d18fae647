// Command-line front end: scenario runs, controller comparisons, payload
// localization, semantic goal queries.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "guidebot/simulator.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
}

guidebot::Transform3D parse_transform_arg(const std::string& arg) {
  std::istringstream in(arg);
  double x, y, z, qw, qx, qy, qz;
  if (!(in >> x >> y >> z >> qw >> qx >> qy >> qz)) {
    throw std::runtime_error("transform must be 7 numbers: x y z qw qx qy qz");
  }
  std::string extra;
  if (in >> extra) throw std::runtime_error("transform has trailing tokens: " + extra);
  const guidebot::Quat q{qw, qx, qy, qz};
  if (q.norm() < 1e-6) throw std::runtime_error("transform quaternion is near zero");
  return {{x, y, z}, q};
}

struct ControllerChoice {
  guidebot::Controller controller;
  std::optional<double> fixed_v;
};

ControllerChoice parse_controller(const std::string& name) {
  std::string base = name;
  std::optional<double> v;
  if (const auto colon = name.find(':'); colon != std::string::npos) {
    base = name.substr(0, colon);
    try {
      size_t used = 0;
      v = std::stod(name.substr(colon + 1), &used);
      if (used != name.size() - colon - 1) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::runtime_error("bad controller speed suffix in: " + name);
    }
    if (*v <= 0.0) throw std::runtime_error("controller speed must be positive");
  }
  using guidebot::Controller;
  if (base == "fixed_max") return {Controller::FixedMax, v};
  if (base == "speedmap") return {Controller::SpeedMap, v};
  if (base == "guidance_profile") return {Controller::GuidanceProfile, v};
  if (base == "guidance_fixed") return {Controller::GuidanceFixed, v};
  throw std::runtime_error("unknown controller: " + base);
}

guidebot::MetricsLog run_one(guidebot::Scenario sc, const std::string& controller_name,
                             std::optional<std::uint64_t> seed, bool oracle_tracks) {
  const ControllerChoice choice = parse_controller(controller_name);
  if (seed) sc.sim.seed = *seed;
  if (oracle_tracks) sc.sim.oracle_tracks = true;
  if (choice.fixed_v) sc.behavior.fixed_max_v = *choice.fixed_v;
  return guidebot::run_scenario(sc, choice.controller);
}

int cmd_simulate(const std::string& scenario_path, const std::string& controller,
                 std::optional<std::uint64_t> seed, const std::string& out_dir, bool svg,
                 bool oracle_tracks) {
  const guidebot::Scenario sc = guidebot::parse_scenario(read_file(scenario_path));
  const guidebot::MetricsLog log = run_one(sc, controller, seed, oracle_tracks);
  std::filesystem::create_directories(out_dir);
  write_file(std::filesystem::path(out_dir) / "ticks.csv", guidebot::metrics_csv(log));
  write_file(std::filesystem::path(out_dir) / "summary.txt", guidebot::summary_text(log.summary));
  if (svg) {
    write_file(std::filesystem::path(out_dir) / "trajectory.svg", guidebot::svg_plot(sc, log));
  }
  std::cout << guidebot::summary_text(log.summary);
  return log.summary.timeout ? 2 : 0;
}

int cmd_compare(const std::string& scenario_path, const std::string& controllers,
                std::optional<std::uint64_t> seed, bool oracle_tracks) {
  const guidebot::Scenario sc = guidebot::parse_scenario(read_file(scenario_path));
  std::vector<std::string> names;
  std::istringstream in(controllers);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (!name.empty()) names.push_back(name);
  }
  if (names.empty()) throw std::runtime_error("--controllers needs at least one name");

  std::printf("%-20s %-18s %15s %18s %12s %8s\n", "scenario", "controller", "completion_time",
              "min_human_distance", "max_accel", "timeout");
  bool any_timeout = false;
  for (const auto& n : names) {
    const guidebot::MetricsLog log = run_one(sc, n, seed, oracle_tracks);
    const auto& s = log.summary;
    std::printf("%-20s %-18s %15.3f %18.3f %12.3f %8s\n", s.scenario_id.c_str(),
                s.controller.c_str(), s.completion_time, s.min_human_distance, s.max_accel,
                s.timeout ? "yes" : "no");
    any_timeout = any_timeout || s.timeout;
  }
  return any_timeout ? 2 : 0;
}

int cmd_localize(const std::string& payload_path, const std::string& cam_t_qr,
                 const std::string& robot_t_cam) {
  const guidebot::QrPayload payload = guidebot::parse_payload(read_file(payload_path));
  const guidebot::Pose2D pose = guidebot::qr_localize(
      payload.tag_pose, parse_transform_arg(cam_t_qr), parse_transform_arg(robot_t_cam));
  std::printf("%.6f %.6f %.6f\n", pose.x, pose.y, pose.theta);
  return 0;
}

int cmd_goal(const std::string& scenario_path, const std::string& robot_arg,
             const std::string& label) {
  const guidebot::Scenario sc = guidebot::parse_scenario(read_file(scenario_path));
  std::istringstream in(robot_arg);
  double x, y, theta;
  if (!(in >> x >> y >> theta)) throw std::runtime_error("--robot must be: \"x y theta\"");
  const guidebot::Pose2D goal = guidebot::goal_for_label(
      sc.semantic, sc.grid, sc.behavior.inflation, guidebot::Pose2D(x, y, theta), label);
  std::printf("%.6f %.6f %.6f\n", goal.x, goal.y, goal.theta);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speed-map navigation and guide-robot scenario tool"};
  app.require_subcommand(1);

  std::string scenario_path, controller = "speedmap", controllers, out_dir = "out";
  std::string payload_path, cam_t_qr, robot_t_cam, robot_arg, label;
  std::optional<std::uint64_t> seed;
  bool svg = false, oracle_tracks = false;

  auto* sim = app.add_subcommand("simulate", "run one scenario and write logs");
  sim->add_option("--scenario", scenario_path, "scenario file")->required();
  sim->add_option("--controller", controller,
                  "fixed_max[:v] | speedmap | guidance_profile | guidance_fixed");
  sim->add_option("--seed", seed, "RNG seed override");
  sim->add_option("--out", out_dir, "output directory");
  sim->add_flag("--svg", svg, "also write trajectory.svg");
  sim->add_flag("--oracle-tracks", oracle_tracks, "bypass perception, use true tracks");

  auto* cmp = app.add_subcommand("compare", "run several controllers, print a table");
  cmp->add_option("--scenario", scenario_path, "scenario file")->required();
  cmp->add_option("--controllers", controllers, "comma-separated controller names")->required();
  cmp->add_option("--seed", seed, "RNG seed override");
  cmp->add_flag("--oracle-tracks", oracle_tracks, "bypass perception, use true tracks");

  auto* loc = app.add_subcommand("localize", "planar pose from a payload and transforms");
  loc->add_option("--payload", payload_path, "anchor payload XML file")->required();
  loc->add_option("--cam-t-qr", cam_t_qr, "\"x y z qw qx qy qz\"")->required();
  loc->add_option("--robot-t-cam", robot_t_cam, "\"x y z qw qx qy qz\"")->required();

  auto* goal = app.add_subcommand("goal", "semantic goal pose for a label");
  goal->add_option("--scenario", scenario_path, "scenario file")->required();
  goal->add_option("--robot", robot_arg, "\"x y theta\"")->required();
  goal->add_option("--label", label, "waypoint or landmark label")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(scenario_path, controller, seed, out_dir, svg, oracle_tracks);
    }
    if (cmp->parsed()) return cmd_compare(scenario_path, controllers, seed, oracle_tracks);
    if (loc->parsed()) return cmd_localize(payload_path, cam_t_qr, robot_t_cam);
    if (goal->parsed()) return cmd_goal(scenario_path, robot_arg, label);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
