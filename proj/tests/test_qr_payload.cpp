#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "guidebot/qr_payload.hpp"

using namespace guidebot;

namespace {

std::string slurp(const std::string& rel) {
  std::ifstream in(std::string(REPO_ROOT) + "/" + rel, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("payload round trips through generate and parse") {
  QrPayload p;
  p.map_link = "maps/hall.grid";
  p.speed_map_link = "maps/hall.zones";
  p.semantic_link = "maps/hall.landmarks";
  p.tag_pose = Transform3D{Vec3(3.25, -1.5, 1.2),
                           Quat(Eigen::AngleAxisd(0.7, Vec3::UnitZ()))};

  const QrPayload back = parse_payload(generate_payload(p));
  CHECK(back.map_link == p.map_link);
  CHECK(back.speed_map_link == p.speed_map_link);
  REQUIRE(back.semantic_link.has_value());
  CHECK(*back.semantic_link == *p.semantic_link);
  CHECK((back.tag_pose.translation - p.tag_pose.translation).norm() < 1e-7);
  CHECK(back.tag_pose.rotation.angularDistance(p.tag_pose.rotation) < 1e-7);

  // Without the optional semantic link.
  p.semantic_link.reset();
  const QrPayload bare = parse_payload(generate_payload(p));
  CHECK_FALSE(bare.semantic_link.has_value());
}

TEST_CASE("generate_payload is canonical, byte for byte") {
  QrPayload p;
  p.map_link = "maps/lobby.grid";
  p.speed_map_link = "maps/lobby.zones";
  p.semantic_link = "maps/lobby.landmarks";
  p.tag_pose = Transform3D{Vec3(3.25, -1.5, 1.2), Quat(1.0, 0.0, 0.0, 0.0)};

  CHECK(generate_payload(p) == slurp("data/payloads/lobby_anchor.xml"));
  // Idempotent: parse then regenerate reproduces the file exactly.
  const QrPayload parsed = parse_payload(slurp("data/payloads/lobby_anchor.xml"));
  CHECK(generate_payload(parsed) == slurp("data/payloads/lobby_anchor.xml"));
}

TEST_CASE("golden payloads parse with their quirks") {
  SECTION("canonical file") {
    const QrPayload p = parse_payload(slurp("data/payloads/lobby_anchor.xml"));
    CHECK(p.map_link == "maps/lobby.grid");
    CHECK(p.speed_map_link == "maps/lobby.zones");
    REQUIRE(p.semantic_link.has_value());
    CHECK(*p.semantic_link == "maps/lobby.landmarks");
    CHECK(p.tag_pose.translation.x() == Catch::Approx(3.25));
    CHECK(p.tag_pose.translation.y() == Catch::Approx(-1.5));
    CHECK(p.tag_pose.rotation.w() == Catch::Approx(1.0));
  }

  SECTION("single quotes, comments, shuffled attributes, multi-line tag") {
    const QrPayload p = parse_payload(slurp("data/payloads/atrium_anchor.xml"));
    CHECK(p.map_link == "floor2/atrium.grid");
    CHECK(p.speed_map_link == "floor2/atrium.zones");
    CHECK_FALSE(p.semantic_link.has_value());
    CHECK(p.tag_pose.translation.x() == Catch::Approx(12.625));
    CHECK(p.tag_pose.translation.z() == Catch::Approx(1.45));
    // 0.7072 twice is off unit by ~1.3e-4: inside the renorm window, and the
    // stored rotation comes out normalized.
    CHECK(p.tag_pose.rotation.norm() == Catch::Approx(1.0).margin(1e-12));
    CHECK(p.tag_pose.rotation.w() == Catch::Approx(std::sqrt(0.5)).margin(1e-4));
  }

  SECTION("entities and exponent notation") {
    const QrPayload p = parse_payload(slurp("data/payloads/dock_anchor.xml"));
    CHECK(p.map_link == "share/maps/dock&yard.grid");
    CHECK(p.speed_map_link == "share/maps/dock&yard.zones");
    REQUIRE(p.semantic_link.has_value());
    CHECK(*p.semantic_link == "share/maps/dock&yard.landmarks");
    CHECK(p.tag_pose.translation.x() == Catch::Approx(-0.45));
    CHECK(p.tag_pose.rotation.z() == Catch::Approx(-0.382683432));
  }
}

TEST_CASE("entity escaping round trips") {
  QrPayload p;
  p.map_link = "a&b<c>\"d'e.grid";
  p.speed_map_link = "plain.zones";
  p.tag_pose = Transform3D::identity();
  const std::string xml = generate_payload(p);
  CHECK(xml.find("a&amp;b&lt;c&gt;&quot;d&apos;e.grid") != std::string::npos);
  CHECK(parse_payload(xml).map_link == p.map_link);
}

namespace {

const char* kGood = R"(<?xml version="1.0"?>
<speedmap_anchor>
  <map href="m.grid"/>
  <speedmap href="m.zones"/>
  <pose x="1" y="2" z="3" qw="1" qx="0" qy="0" qz="0"/>
</speedmap_anchor>
)";

std::string drop_line(const std::string& doc, const std::string& needle) {
  std::istringstream in(doc);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.find(needle) != std::string::npos) continue;
    out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("parse_payload rejects structural mutations") {
  CHECK_NOTHROW(parse_payload(kGood));
  CHECK_THROWS_AS(parse_payload(drop_line(kGood, "<map")), MalformedPayload);
  CHECK_THROWS_AS(parse_payload(drop_line(kGood, "<speedmap ")), MalformedPayload);
  CHECK_THROWS_AS(parse_payload(drop_line(kGood, "<pose")), MalformedPayload);

  // Wrong root element.
  std::string renamed = kGood;
  while (renamed.find("speedmap_anchor") != std::string::npos) {
    renamed.replace(renamed.find("speedmap_anchor"), 15, "anchor_document");
  }
  CHECK_THROWS_AS(parse_payload(renamed), MalformedPayload);

  // Missing pose attribute.
  std::string no_y = kGood;
  no_y.replace(no_y.find(" y=\"2\""), 6, "");
  CHECK_THROWS_AS(parse_payload(no_y), MalformedPayload);

  // Attribute that is not a number.
  std::string bad_num = kGood;
  bad_num.replace(bad_num.find("x=\"1\""), 5, "x=\"one\"");
  CHECK_THROWS_AS(parse_payload(bad_num), MalformedPayload);

  // Unterminated element and stray text.
  CHECK_THROWS_AS(parse_payload("<speedmap_anchor><map href=\"a\"/>"), MalformedPayload);
  CHECK_THROWS_AS(parse_payload(""), MalformedPayload);

  // Empty href.
  std::string empty_href = kGood;
  empty_href.replace(empty_href.find("href=\"m.grid\""), 13, "href=\"\"");
  CHECK_THROWS_AS(parse_payload(empty_href), MalformedPayload);
}

TEST_CASE("quaternion unit check has a 1e-3 window") {
  const auto with_quat = [](const std::string& qw) {
    return std::string("<speedmap_anchor><map href=\"a\"/><speedmap href=\"b\"/>") +
           "<pose x=\"0\" y=\"0\" z=\"0\" qw=\"" + qw + "\" qx=\"0\" qy=\"0\" qz=\"0\"/>" +
           "</speedmap_anchor>";
  };
  // |norm - 1| just inside the window: accepted and renormalized.
  const QrPayload ok = parse_payload(with_quat("1.0009"));
  CHECK(ok.tag_pose.rotation.norm() == Catch::Approx(1.0).margin(1e-12));
  CHECK(ok.tag_pose.rotation.w() == Catch::Approx(1.0).margin(1e-12));
  // Just outside: rejected.
  CHECK_THROWS_AS(parse_payload(with_quat("1.0011")), MalformedPayload);
  CHECK_THROWS_AS(parse_payload(with_quat("0.9989")), MalformedPayload);
  // The degenerate zero quaternion is far outside the window.
  CHECK_THROWS_AS(parse_payload(with_quat("0")), MalformedPayload);
}
