#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "guidebot/perception.hpp"
#include "guidebot/simulator.hpp"

using namespace guidebot;

TEST_CASE("segment_scan splits on gaps and max-range returns") {
  LaserScan scan;
  scan.sensor_pose = Pose2D(0.0, 0.0, 0.0);
  scan.angle_min = -0.2;
  scan.angle_increment = 0.05;
  scan.max_range = 5.0;
  // Two close returns, a max-range hole, two more, then a range jump.
  scan.ranges = {1.0, 1.0, 5.0, 1.0, 1.02, 3.0, 3.0};

  const auto segs = segment_scan(scan, 0.5);
  REQUIRE(segs.size() == 3);
  CHECK(segs[0].points.size() == 2);
  CHECK(segs[1].points.size() == 2);
  CHECK(segs[2].points.size() == 2);
  CHECK(segs[0].channel == ScanChannel::Ankle);

  // First return: angle -0.2, range 1.
  CHECK(segs[0].points[0].x() == Catch::Approx(std::cos(-0.2)));
  CHECK(segs[0].points[0].y() == Catch::Approx(std::sin(-0.2)));
}

TEST_CASE("segment_scan maps points through the sensor pose") {
  LaserScan scan;
  scan.sensor_pose = Pose2D(2.0, 1.0, M_PI / 2.0);
  scan.angle_min = 0.0;
  scan.angle_increment = 0.1;
  scan.max_range = 5.0;
  scan.ranges = {1.0};
  const auto segs = segment_scan(scan, 0.5);
  REQUIRE(segs.size() == 1);
  // Beam along sensor +x, rotated to map +y.
  CHECK(segs[0].points[0].x() == Catch::Approx(2.0).margin(1e-12));
  CHECK(segs[0].points[0].y() == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("fit_circle recovers an exact circle") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 8; ++i) {
    const double a = 0.3 + 0.2 * i;
    pts.emplace_back(1.5 + 0.06 * std::cos(a), -0.7 + 0.06 * std::sin(a));
  }
  const auto fit = detail::fit_circle(pts);
  CHECK(fit.center.x() == Catch::Approx(1.5).margin(1e-9));
  CHECK(fit.center.y() == Catch::Approx(-0.7).margin(1e-9));
  CHECK(fit.radius == Catch::Approx(0.06).margin(1e-9));
}

TEST_CASE("leg_features on a circular arc look leg-like") {
  Segment s;
  // Front arc of a 6 cm leg as a forward-looking laser would sample it.
  for (int i = -6; i <= 6; ++i) {
    const double a = M_PI + i * 0.12;  // sensor side of the circle
    s.points.emplace_back(2.0 + 0.06 * std::cos(a), 0.06 * std::sin(a));
  }
  const LegFeatures f = leg_features(s);
  CHECK(f.width > 0.05);
  CHECK(f.width < 0.13);
  CHECK(f.circularity < 0.01);   // on-circle points fit essentially exactly
  CHECK(f.iav_mean > M_PI / 2.0);  // inscribed angles of a circle exceed 90 deg
  CHECK(f.iav_std < 0.3);

  const LegScore score = classify_leg(f, LegClassifierParams{});
  CHECK(score.detected);

  // A straight wall strip of the same width is rejected.
  Segment wall;
  for (int i = 0; i <= 12; ++i) wall.points.emplace_back(2.0, -0.3 + i * 0.05);
  const LegScore wall_score = classify_leg(leg_features(wall), LegClassifierParams{});
  CHECK_FALSE(wall_score.detected);

  Segment tiny;
  tiny.points = {{0, 0}, {0.01, 0}};
  CHECK_THROWS_AS(leg_features(tiny), TooFewPoints);
}

TEST_CASE("pair_legs merges mutual nearest pairs and keeps singles") {
  // Two people 2 m apart plus one lone leg.
  const std::vector<Vec2> legs = {{0.0, 0.0}, {0.3, 0.0}, {2.0, 0.0}, {2.0, 0.3}, {5.0, 5.0}};
  const auto dets = pair_legs(legs, 0.5, 1.25);
  REQUIRE(dets.size() == 3);
  CHECK(dets[0].stamp == 1.25);
  CHECK(dets[0].source == DetectionSource::LegPair);

  std::vector<Vec2> centers;
  for (const auto& d : dets) centers.push_back(d.position);
  const auto has = [&](double x, double y) {
    return std::any_of(centers.begin(), centers.end(),
                       [&](const Vec2& c) { return (c - Vec2(x, y)).norm() < 1e-12; });
  };
  CHECK(has(0.15, 0.0));
  CHECK(has(2.0, 0.15));
  CHECK(has(5.0, 5.0));
}

namespace {

// Independent greedy pairing: same contract, separate code path.
std::vector<Vec2> oracle_pair_centers(const std::vector<Vec2>& legs, double max_sep) {
  std::vector<std::tuple<double, size_t, size_t>> cand;
  for (size_t i = 0; i < legs.size(); ++i) {
    for (size_t j = i + 1; j < legs.size(); ++j) {
      const double d = (legs[i] - legs[j]).norm();
      if (d < max_sep) cand.emplace_back(d, i, j);
    }
  }
  std::sort(cand.begin(), cand.end());
  std::vector<bool> used(legs.size(), false);
  std::vector<Vec2> out;
  for (const auto& [d, i, j] : cand) {
    if (used[i] || used[j]) continue;
    used[i] = used[j] = true;
    out.push_back((legs[i] + legs[j]) / 2.0);
  }
  for (size_t i = 0; i < legs.size(); ++i) {
    if (!used[i]) out.push_back(legs[i]);
  }
  return out;
}

bool same_point_multiset(std::vector<Vec2> a, std::vector<Vec2> b) {
  if (a.size() != b.size()) return false;
  const auto lt = [](const Vec2& p, const Vec2& q) {
    return p.x() < q.x() || (p.x() == q.x() && p.y() < q.y());
  };
  std::sort(a.begin(), a.end(), lt);
  std::sort(b.begin(), b.end(), lt);
  for (size_t i = 0; i < a.size(); ++i) {
    if ((a[i] - b[i]).norm() > 1e-12) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("pair_legs matches the greedy oracle on random layouts") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::uniform_int_distribution<int> cnt(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec2> legs;
    const int n = cnt(rng);
    for (int i = 0; i < n; ++i) legs.emplace_back(u(rng), u(rng));
    const auto dets = pair_legs(legs, 0.5);
    std::vector<Vec2> got;
    for (const auto& d : dets) got.push_back(d.position);
    CHECK(same_point_multiset(got, oracle_pair_centers(legs, 0.5)));
  }
}

TEST_CASE("fit_ellipse recovers exact ellipses") {
  const Vec2 center(1.0, -2.0);
  const double a = 0.20, b = 0.12, phi = 0.4;
  std::vector<Vec2> pts;
  for (int i = 0; i < 12; ++i) {
    const double t = 2.0 * M_PI * i / 12.0;
    const double ex = a * std::cos(t), ey = b * std::sin(t);
    pts.emplace_back(center.x() + ex * std::cos(phi) - ey * std::sin(phi),
                     center.y() + ex * std::sin(phi) + ey * std::cos(phi));
  }
  const EllipseFit fit = fit_ellipse(pts);
  CHECK(fit.center.x() == Catch::Approx(center.x()).margin(1e-6));
  CHECK(fit.center.y() == Catch::Approx(center.y()).margin(1e-6));
  CHECK(fit.semi_major == Catch::Approx(a).margin(1e-6));
  CHECK(fit.semi_minor == Catch::Approx(b).margin(1e-6));
  // Major axis direction, modulo half turn.
  const double d = std::remainder(fit.orientation - phi, M_PI);
  CHECK(std::abs(d) < 1e-6);
}

TEST_CASE("fit_ellipse orders the axes for every orientation") {
  std::mt19937_64 rng(60);
  std::uniform_real_distribution<double> uphi(-M_PI, M_PI), uc(-3.0, 3.0);
  std::uniform_real_distribution<double> ua(0.1, 0.4), ratio(0.3, 0.95);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = ua(rng), b = a * ratio(rng), phi = uphi(rng);
    const Vec2 c(uc(rng), uc(rng));
    std::vector<Vec2> pts;
    for (int i = 0; i < 10; ++i) {
      const double t = 2.0 * M_PI * i / 10.0 + 0.1;
      const double ex = a * std::cos(t), ey = b * std::sin(t);
      pts.emplace_back(c.x() + ex * std::cos(phi) - ey * std::sin(phi),
                       c.y() + ex * std::sin(phi) + ey * std::cos(phi));
    }
    const EllipseFit fit = fit_ellipse(pts);
    REQUIRE(fit.semi_major >= fit.semi_minor);
    CHECK(fit.semi_major == Catch::Approx(a).margin(1e-5));
    CHECK(fit.semi_minor == Catch::Approx(b).margin(1e-5));
    CHECK(std::abs(std::remainder(fit.orientation - phi, M_PI)) < 1e-4);
  }
}

TEST_CASE("fit_ellipse handles the circle and rejects degenerate input") {
  std::vector<Vec2> circle;
  for (int i = 0; i < 9; ++i) {
    const double t = 2.0 * M_PI * i / 9.0;
    circle.emplace_back(0.5 + 0.15 * std::cos(t), 0.5 + 0.15 * std::sin(t));
  }
  const EllipseFit fit = fit_ellipse(circle);
  CHECK(fit.semi_major == Catch::Approx(0.15).margin(1e-6));
  CHECK(fit.semi_minor == Catch::Approx(0.15).margin(1e-6));

  CHECK_THROWS_AS(fit_ellipse({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}}), TooFewPoints);

  std::vector<Vec2> line;
  for (int i = 0; i < 8; ++i) line.emplace_back(0.1 * i, 0.2 * i);
  CHECK_THROWS_AS(fit_ellipse(line), DegenerateFit);

  const std::vector<Vec2> same(7, Vec2(1.0, 1.0));
  CHECK_THROWS_AS(fit_ellipse(same), DegenerateFit);
}

TEST_CASE("fit_ellipse_arc recovers torso axes from scanned half arcs") {
  // The laser sees only the near half of the torso outline, and with 5 mm of
  // range noise the plain algebraic fits shrink the major axis far past 15
  // percent. Refining against the beam model keeps both axes inside 15
  // percent in at least 90 percent of seeded trials, and the resulting fits
  // clear the torso bands at the same rate. The scanner looks straight at the
  // person, as the rear sensor does while guiding; a body well off the fan
  // axis loses the symmetric pair of grazing beams that pins the width, and
  // recovery degrades below the rate asserted here.
  const OccupancyGrid empty(100, 100, 0.5, Pose2D());
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> ubear(-M_PI, M_PI);
  ScanParams sp;
  sp.fov = M_PI;
  sp.n_beams = 721;
  sp.max_range = 5.0;
  sp.noise_std = 0.005;
  const double a = 0.15, b = 0.10;
  const Vec2 origin{25.0, 25.0};
  const TorsoBands bands;
  int arcs = 0, good = 0, accepted = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const double bear = ubear(rng);
    const Vec2 dir{std::cos(bear), std::sin(bear)};
    PedestrianAgent ped;
    ped.position = origin + 1.2 * dir;
    ped.facing = dir;
    const LaserScan scan =
        cast_scan(empty, {ped}, Pose2D(origin.x(), origin.y(), bear), ScanChannel::Torso, sp, rng);
    const auto segs = segment_scan(scan, 0.15);
    const Segment* arc = nullptr;
    for (const auto& seg : segs) {
      if (seg.points.size() >= 6 && (!arc || seg.points.size() > arc->points.size())) arc = &seg;
    }
    if (!arc) continue;
    ++arcs;
    try {
      const EllipseFit fit = fit_ellipse_arc(arc->points, origin);
      if (std::abs(fit.semi_major - a) < 0.15 * a && std::abs(fit.semi_minor - b) < 0.15 * b) {
        ++good;
      }
      if (classify_torso(fit, bands)) ++accepted;
    } catch (const DegenerateFit&) {
    }
  }
  REQUIRE(arcs == trials);
  CHECK(good >= trials * 9 / 10);
  CHECK(accepted >= trials * 9 / 10);
}

TEST_CASE("classify_torso applies inclusive bands") {
  const TorsoBands bands;
  CHECK(classify_torso({{0, 0}, 0.15, 0.10, 0.0}, bands));
  CHECK(classify_torso({{0, 0}, 0.10, 0.05, 0.0}, bands));  // lower edges
  CHECK(classify_torso({{0, 0}, 0.25, 0.18, 0.0}, bands));  // upper edges
  CHECK_FALSE(classify_torso({{0, 0}, 0.26, 0.10, 0.0}, bands));
  CHECK_FALSE(classify_torso({{0, 0}, 0.15, 0.04, 0.0}, bands));
  CHECK_FALSE(classify_torso({{0, 0}, 0.09, 0.10, 0.0}, bands));
}

namespace {

struct Kf1 {
  // One-axis constant-velocity filter: state (p, v), covariance entries.
  double p = 0.0, v = 0.0;
  double ppp = 1.0, ppv = 0.0, pvv = 1.0;

  void predict(double dt, double q) {
    p += v * dt;
    const double n_pp = ppp + 2.0 * dt * ppv + dt * dt * pvv + q * dt * dt * dt / 3.0;
    const double n_pv = ppv + dt * pvv + q * dt * dt / 2.0;
    const double n_vv = pvv + q * dt;
    ppp = n_pp;
    ppv = n_pv;
    pvv = n_vv;
  }

  void update(double z, double r) {
    const double s = ppp + r * r;
    const double kp = ppp / s, kv = ppv / s;
    const double innov = z - p;
    p += kp * innov;
    v += kv * innov;
    // Joseph form for a scalar measurement of p.
    const double a = 1.0 - kp;
    const double n_pp = a * a * ppp + kp * kp * r * r;
    const double n_pv = a * (ppv - kv * ppp) + kp * kv * r * r;
    const double n_vv = pvv - 2.0 * kv * ppv + kv * kv * ppp + kv * kv * r * r;
    ppp = n_pp;
    ppv = n_pv;
    pvv = n_vv;
  }
};

}  // namespace

TEST_CASE("Kalman predict and update match a per-axis scalar oracle") {
  // The 4-state filter decouples into two (pos, vel) pairs; run both against
  // independently coded scalar filters through a mixed predict/update run.
  Track t;
  t.state << 0.5, -1.0, 0.2, 0.4;
  t.covariance = Eigen::Vector4d(0.09, 0.04, 0.5, 0.25).asDiagonal();

  Kf1 fx{0.5, 0.2, 0.09, 0.0, 0.5};
  Kf1 fy{-1.0, 0.4, 0.04, 0.0, 0.25};

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> udt(0.05, 0.3), uz(-2.0, 2.0);
  const double q = 0.5, r = 0.05;
  for (int step = 0; step < 40; ++step) {
    const double dt = udt(rng);
    t = kf_predict(t, dt, q);
    fx.predict(dt, q);
    fy.predict(dt, q);

    if (step % 3 != 2) {
      Detection d;
      d.position = Vec2(uz(rng), uz(rng));
      d.stamp = step * 0.1;
      t = kf_update(t, d, r);
      fx.update(d.position.x(), r);
      fy.update(d.position.y(), r);
      CHECK(t.last_seen == Catch::Approx(d.stamp));
    }

    CHECK(t.state(0) == Catch::Approx(fx.p).margin(1e-9));
    CHECK(t.state(2) == Catch::Approx(fx.v).margin(1e-9));
    CHECK(t.state(1) == Catch::Approx(fy.p).margin(1e-9));
    CHECK(t.state(3) == Catch::Approx(fy.v).margin(1e-9));
    CHECK(t.covariance(0, 0) == Catch::Approx(fx.ppp).margin(1e-9));
    CHECK(t.covariance(0, 2) == Catch::Approx(fx.ppv).margin(1e-9));
    CHECK(t.covariance(2, 2) == Catch::Approx(fx.pvv).margin(1e-9));
    CHECK(t.covariance(1, 1) == Catch::Approx(fy.ppp).margin(1e-9));
    CHECK(t.covariance(1, 3) == Catch::Approx(fy.ppv).margin(1e-9));
    CHECK(t.covariance(3, 3) == Catch::Approx(fy.pvv).margin(1e-9));
    // Cross-axis terms never appear.
    CHECK(std::abs(t.covariance(0, 1)) < 1e-12);
    CHECK(std::abs(t.covariance(2, 3)) < 1e-12);
  }
}

TEST_CASE("covariance stays symmetric and positive semidefinite") {
  Track t;
  t.state << 0.0, 0.0, 0.0, 0.0;
  t.covariance = Eigen::Matrix4d::Identity() * 0.04;

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> udt(0.01, 0.5), uz(-5.0, 5.0);
  for (int step = 0; step < 200; ++step) {
    t = kf_predict(t, udt(rng), 0.5);
    if (step % 2 == 0) {
      Detection d;
      d.position = Vec2(uz(rng), uz(rng));
      t = kf_update(t, d, 0.05);
    }
    CHECK((t.covariance - t.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(t.covariance);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
  }
}

namespace {

Track track_at(int id, double x, double y) {
  Track t;
  t.id = id;
  t.state << x, y, 0.0, 0.0;
  return t;
}

// Greedy association oracle, coded independently: repeatedly extract the
// globally smallest in-gate pair.
std::vector<std::pair<size_t, size_t>> oracle_associate(const std::vector<Track>& tracks,
                                                        const std::vector<Detection>& dets,
                                                        double gate) {
  std::set<size_t> t_free, d_free;
  for (size_t i = 0; i < tracks.size(); ++i) t_free.insert(i);
  for (size_t i = 0; i < dets.size(); ++i) d_free.insert(i);
  std::vector<std::pair<size_t, size_t>> out;
  while (true) {
    double best = gate;
    size_t bi = 0, bj = 0;
    bool found = false;
    for (size_t ti : t_free) {
      for (size_t di : d_free) {
        const double d = (tracks[ti].position() - dets[di].position).norm();
        if (d < best) {
          best = d;
          bi = ti;
          bj = di;
          found = true;
        }
      }
    }
    if (!found) break;
    out.emplace_back(bi, bj);
    t_free.erase(bi);
    d_free.erase(bj);
  }
  return out;
}

}  // namespace

TEST_CASE("associate is greedy global nearest neighbor") {
  // Crossing targets: the naive row-wise assignment would swap these.
  std::vector<Track> tracks = {track_at(1, 0.0, 0.0), track_at(2, 0.5, 0.0)};
  std::vector<Detection> dets;
  dets.push_back({{0.45, 0.0}, DetectionSource::LegPair, 0.0});
  dets.push_back({{0.9, 0.0}, DetectionSource::LegPair, 0.0});

  const auto res = associate(tracks, dets, 1.0);
  REQUIRE(res.matches.size() == 2);
  // Track 2 grabs the 0.05 m detection, track 1 settles for the far one.
  CHECK(res.matches[0] == std::pair<size_t, size_t>{1, 0});
  CHECK(res.matches[1] == std::pair<size_t, size_t>{0, 1});
  CHECK(res.unmatched_detections.empty());

  // Out-of-gate detections come back unmatched.
  dets.push_back({{10.0, 10.0}, DetectionSource::Torso, 0.0});
  const auto res2 = associate(tracks, dets, 1.0);
  REQUIRE(res2.unmatched_detections.size() == 1);
  CHECK(res2.unmatched_detections[0] == 2);
}

TEST_CASE("associate matches the exhaustive greedy oracle") {
  std::mt19937_64 rng(92);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_int_distribution<int> tc(0, 6), dc(0, 6);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Track> tracks;
    const int nt = tc(rng);
    for (int i = 0; i < nt; ++i) tracks.push_back(track_at(i, u(rng), u(rng)));
    std::vector<Detection> dets;
    const int nd = dc(rng);
    for (int i = 0; i < nd; ++i) dets.push_back({{u(rng), u(rng)}, DetectionSource::LegPair, 0.0});

    const auto got = associate(tracks, dets, 0.8);
    const auto want = oracle_associate(tracks, dets, 0.8);
    REQUIRE(got.matches.size() == want.size());
    // Same set of pairs (order of equal-distance picks is deterministic).
    auto a = got.matches;
    auto b = want;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);

    // Unmatched list is exactly the complement.
    std::vector<bool> used(dets.size(), false);
    for (const auto& [ti, di] : got.matches) used[di] = true;
    for (const size_t di : got.unmatched_detections) {
      CHECK_FALSE(used[di]);
      used[di] = true;
    }
    CHECK(std::all_of(used.begin(), used.end(), [](bool x) { return x; }));
  }
}

TEST_CASE("prune_tracks drops tracks strictly past the timeout") {
  Track fresh = track_at(1, 0, 0);
  fresh.last_seen = 1.0;
  Track stale = track_at(2, 0, 0);
  stale.last_seen = 0.0;
  const auto kept = prune_tracks({fresh, stale}, 3.0, 2.0);
  REQUIRE(kept.size() == 1);  // 3.0 - 1.0 == timeout is kept, 3.0 - 0.0 is not
  CHECK(kept[0].id == 1);
}

TEST_CASE("PersonTracker confirms after three consecutive hits") {
  PersonTracker tracker{TrackerParams{}};

  const auto feed = [&](double now, Vec2 p) {
    std::vector<std::vector<Detection>> batches(1);
    batches[0].push_back({p, DetectionSource::LegPair, now});
    tracker.step(now, batches);
  };

  feed(0.0, {1.0, 1.0});
  REQUIRE(tracker.tracks().size() == 1);
  CHECK_FALSE(tracker.tracks()[0].confirmed);
  feed(0.1, {1.02, 1.0});
  CHECK_FALSE(tracker.tracks()[0].confirmed);
  feed(0.2, {1.04, 1.0});
  CHECK(tracker.tracks()[0].confirmed);

  // A miss resets the hit streak but confirmation is sticky.
  tracker.step(0.3, {});
  REQUIRE(tracker.tracks().size() == 1);
  CHECK(tracker.tracks()[0].confirmed);
  CHECK(tracker.tracks()[0].consecutive_hits == 0);

  // Unseen past the timeout: gone.
  tracker.step(2.4, {});
  CHECK(tracker.tracks().empty());
}

TEST_CASE("PersonTracker keeps two crossing-free targets apart") {
  PersonTracker tracker{TrackerParams{}};
  // Two people walking in parallel, 1.5 m apart, 0.6 m/s.
  for (int k = 0; k < 20; ++k) {
    const double now = 0.1 * k;
    std::vector<std::vector<Detection>> batches(1);
    batches[0].push_back({{0.6 * now, 0.0}, DetectionSource::LegPair, now});
    batches[0].push_back({{0.6 * now, 1.5}, DetectionSource::LegPair, now});
    tracker.step(now, batches);
  }
  REQUIRE(tracker.tracks().size() == 2);
  const auto& a = tracker.tracks()[0];
  const auto& b = tracker.tracks()[1];
  CHECK(a.confirmed);
  CHECK(b.confirmed);
  CHECK(a.id != b.id);
  // Each track stayed on its own lane.
  const double t_end = 1.9;
  const auto& lane0 = a.position().y() < 0.75 ? a : b;
  const auto& lane1 = a.position().y() < 0.75 ? b : a;
  CHECK(lane0.position().x() == Catch::Approx(0.6 * t_end).margin(0.15));
  CHECK(std::abs(lane0.position().y()) < 0.1);
  CHECK(lane1.position().y() == Catch::Approx(1.5).margin(0.1));
  // Velocity estimates converged toward the true walking speed.
  CHECK(lane0.velocity().x() == Catch::Approx(0.6).margin(0.2));
  CHECK(std::abs(lane0.velocity().y()) < 0.2);

  // find() resolves ids.
  CHECK(tracker.find(a.id) == &tracker.tracks()[0]);
  CHECK(tracker.find(9999) == nullptr);
}

TEST_CASE("PersonTracker fuses both channels without duplicating a person") {
  PersonTracker tracker{TrackerParams{}};
  for (int k = 0; k < 10; ++k) {
    const double now = 0.1 * k;
    std::vector<std::vector<Detection>> batches(2);
    batches[0].push_back({{2.0, 1.0}, DetectionSource::LegPair, now});
    batches[1].push_back({{2.03, 1.01}, DetectionSource::Torso, now});
    tracker.step(now, batches);
  }
  REQUIRE(tracker.tracks().size() == 1);
  CHECK(tracker.tracks()[0].confirmed);
  CHECK(tracker.tracks()[0].position().x() == Catch::Approx(2.0).margin(0.05));
}
