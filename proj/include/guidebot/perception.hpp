#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "guidebot/geometry.hpp"

namespace guidebot {

struct TooFewPoints : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateFit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ScanChannel { Ankle, Torso };

/// One planar scan. Ranges equal to max_range mean no return.
struct LaserScan {
  Pose2D sensor_pose;  // map frame
  ScanChannel channel = ScanChannel::Ankle;
  double angle_min = 0.0;        // rad, sensor frame
  double angle_increment = 0.0;  // rad, > 0
  double max_range = 10.0;
  std::vector<double> ranges;
  double stamp = 0.0;
};

struct Segment {
  std::vector<Vec2> points;  // map frame
  ScanChannel channel = ScanChannel::Ankle;
};

/// Splits a scan into maximal runs of consecutive returns closer than `gap`
/// apart. Max-range readings break segments. Points come out in map frame.
inline std::vector<Segment> segment_scan(const LaserScan& scan, double gap) {
  std::vector<Segment> segments;
  Segment current;
  current.channel = scan.channel;
  const double ct = std::cos(scan.sensor_pose.theta);
  const double st = std::sin(scan.sensor_pose.theta);
  Vec2 prev;
  for (size_t i = 0; i < scan.ranges.size(); ++i) {
    const double r = scan.ranges[i];
    if (r >= scan.max_range - 1e-9) {
      if (!current.points.empty()) segments.push_back(std::move(current));
      current = Segment{{}, scan.channel};
      continue;
    }
    const double a = scan.angle_min + static_cast<double>(i) * scan.angle_increment;
    const Vec2 local{r * std::cos(a), r * std::sin(a)};
    const Vec2 p{scan.sensor_pose.x + ct * local.x() - st * local.y(),
                 scan.sensor_pose.y + st * local.x() + ct * local.y()};
    if (!current.points.empty() && (p - prev).norm() >= gap) {
      segments.push_back(std::move(current));
      current = Segment{{}, scan.channel};
    }
    current.points.push_back(p);
    prev = p;
  }
  if (!current.points.empty()) segments.push_back(std::move(current));
  return segments;
}

/// Leg candidate features: endpoint width, circle-fit residual normalized by
/// the fitted radius, and inscribed-angle statistics.
struct LegFeatures {
  double width = 0.0;
  double circularity = 0.0;
  double iav_mean = 0.0;  // rad
  double iav_std = 0.0;   // rad
};

namespace detail {

struct CircleFit {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;
};

/// Kasa algebraic circle fit (linear least squares).
inline CircleFit fit_circle(const std::vector<Vec2>& pts) {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector3d row(p.x(), p.y(), 1.0);
    A += row * row.transpose();
    b += row * (p.x() * p.x() + p.y() * p.y());
  }
  const Eigen::Vector3d sol = A.ldlt().solve(b);
  CircleFit fit;
  fit.center = Vec2(sol.x() / 2.0, sol.y() / 2.0);
  const double r2 = sol.z() + fit.center.squaredNorm();
  fit.radius = r2 > 0.0 ? std::sqrt(r2) : 0.0;
  return fit;
}

}  // namespace detail

inline LegFeatures leg_features(const Segment& s) {
  const auto& pts = s.points;
  if (pts.size() < 3) throw TooFewPoints("leg_features needs at least 3 points");
  LegFeatures f;
  f.width = (pts.front() - pts.back()).norm();

  const auto circle = detail::fit_circle(pts);
  if (circle.radius > 1e-9) {
    double acc = 0.0;
    for (const auto& p : pts) acc += std::abs((p - circle.center).norm() - circle.radius);
    f.circularity = acc / static_cast<double>(pts.size()) / circle.radius;
  }

  double mean = 0.0;
  for (size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2 u = pts.front() - pts[i];
    const Vec2 v = pts.back() - pts[i];
    const double den = u.norm() * v.norm();
    const double c = den > 1e-12 ? std::clamp(u.dot(v) / den, -1.0, 1.0) : 1.0;
    mean += std::acos(c);
  }
  const double n_interior = static_cast<double>(pts.size() - 2);
  mean /= n_interior;
  double var = 0.0;
  for (size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2 u = pts.front() - pts[i];
    const Vec2 v = pts.back() - pts[i];
    const double den = u.norm() * v.norm();
    const double c = den > 1e-12 ? std::clamp(u.dot(v) / den, -1.0, 1.0) : 1.0;
    const double d = std::acos(c) - mean;
    var += d * d;
  }
  f.iav_mean = mean;
  f.iav_std = std::sqrt(var / n_interior);
  return f;
}

/// Calibrated against the simulator's leg model; parameters, not claims.
struct LegClassifierParams {
  double proto_width = 0.12;
  double proto_circularity = 0.01;
  double proto_iav_mean = 2.0;  // rad
  double w_width = 5.0;
  double w_circularity = 2.0;
  double w_iav = 1.0;
  double threshold = 0.8;
};

struct LegScore {
  bool detected = false;
  double score = 0.0;
};

/// Weighted feature-space distance to the leg prototype; a candidate is a
/// leg iff score < threshold (strict).
inline LegScore classify_leg(const LegFeatures& f, const LegClassifierParams& p) {
  const double score = p.w_width * std::abs(f.width - p.proto_width) +
                       p.w_circularity * std::abs(f.circularity - p.proto_circularity) +
                       p.w_iav * std::abs(f.iav_mean - p.proto_iav_mean);
  return {score < p.threshold, score};
}

enum class DetectionSource { LegPair, Torso };

struct Detection {
  Vec2 position{0.0, 0.0};  // map frame
  DetectionSource source = DetectionSource::LegPair;
  double stamp = 0.0;
};

/// Greedy mutually-nearest leg pairing: closest pairs under max_sep merge to
/// a midpoint detection, leftover legs count as single-leg detections.
inline std::vector<Detection> pair_legs(const std::vector<Vec2>& legs, double max_sep,
                                        double stamp = 0.0) {
  struct Pair {
    double d;
    size_t i, j;
  };
  std::vector<Pair> pairs;
  for (size_t i = 0; i < legs.size(); ++i) {
    for (size_t j = i + 1; j < legs.size(); ++j) {
      const double d = (legs[i] - legs[j]).norm();
      if (d < max_sep) pairs.push_back({d, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    return std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });
  std::vector<bool> used(legs.size(), false);
  std::vector<Detection> out;
  for (const auto& pr : pairs) {
    if (used[pr.i] || used[pr.j]) continue;
    used[pr.i] = used[pr.j] = true;
    out.push_back({(legs[pr.i] + legs[pr.j]) / 2.0, DetectionSource::LegPair, stamp});
  }
  for (size_t i = 0; i < legs.size(); ++i) {
    if (!used[i]) out.push_back({legs[i], DetectionSource::LegPair, stamp});
  }
  return out;
}

struct EllipseFit {
  Vec2 center{0.0, 0.0};
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double orientation = 0.0;  // rad, major-axis direction
};

/// Direct least-squares conic fit constrained to ellipses (solved through the
/// reduced generalized eigensystem), returned as geometric parameters.
/// Input is centered and scaled for conditioning.
inline EllipseFit fit_ellipse(const std::vector<Vec2>& points) {
  if (points.size() < 6) throw TooFewPoints("fit_ellipse needs at least 6 points");

  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  double scale = 0.0;
  for (const auto& p : points) scale += (p - mean).norm();
  scale /= static_cast<double>(points.size());
  if (scale < 1e-9) throw DegenerateFit("fit_ellipse: coincident points");

  const size_t n = points.size();
  Eigen::MatrixXd d1(n, 3), d2(n, 3);
  for (size_t i = 0; i < n; ++i) {
    const Vec2 p = (points[i] - mean) / scale;
    d1(i, 0) = p.x() * p.x();
    d1(i, 1) = p.x() * p.y();
    d1(i, 2) = p.y() * p.y();
    d2(i, 0) = p.x();
    d2(i, 1) = p.y();
    d2(i, 2) = 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;
  const auto s3_lu = s3.fullPivLu();
  if (!s3_lu.isInvertible()) throw DegenerateFit("fit_ellipse: degenerate point set");
  const Eigen::Matrix3d t = -s3_lu.solve(s2.transpose());
  const Eigen::Matrix3d m_full = s1 + s2 * t;
  Eigen::Matrix3d m;
  m.row(0) = m_full.row(2) / 2.0;
  m.row(1) = -m_full.row(1);
  m.row(2) = m_full.row(0) / 2.0;

  const Eigen::EigenSolver<Eigen::Matrix3d> eig(m);
  Eigen::Vector3d a1 = Eigen::Vector3d::Zero();
  bool found = false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(eig.eigenvalues()[i].imag()) > 1e-9) continue;
    const Eigen::Vector3d v = eig.eigenvectors().col(i).real();
    const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (cond > 0.0) {
      a1 = v;
      found = true;
      break;
    }
  }
  if (!found) throw DegenerateFit("fit_ellipse: conic is not an ellipse");
  const Eigen::Vector3d a2 = t * a1;
  const double a = a1(0), b = a1(1), c = a1(2), d = a2(0), e = a2(1), f = a2(2);

  const double det = 4.0 * a * c - b * b;
  const double xc = (b * e - 2.0 * c * d) / det;
  const double yc = (b * d - 2.0 * a * e) / det;
  const double f0 = a * xc * xc + b * xc * yc + c * yc * yc + d * xc + e * yc + f;

  Eigen::Matrix2d quad;
  quad << a, b / 2.0, b / 2.0, c;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qe(quad);
  const double l0 = qe.eigenvalues()(0), l1 = qe.eigenvalues()(1);
  if (-f0 / l0 <= 0.0 || -f0 / l1 <= 0.0) throw DegenerateFit("fit_ellipse: not an ellipse");

  EllipseFit fit;
  // The conic coefficient vector carries an arbitrary overall sign, so the
  // axes are ordered explicitly rather than trusting eigenvalue order.
  const double r0 = std::sqrt(-f0 / l0), r1 = std::sqrt(-f0 / l1);
  const int major_col = r0 >= r1 ? 0 : 1;
  fit.semi_major = std::max(r0, r1) * scale;
  fit.semi_minor = std::min(r0, r1) * scale;
  const Eigen::Vector2d major_dir = qe.eigenvectors().col(major_col);
  fit.orientation = normalize_angle(std::atan2(major_dir.y(), major_dir.x()));
  fit.center = Vec2(xc, yc) * scale + mean;
  return fit;
}

namespace detail {

/// Taubin's gradient-normalized conic fit. Unlike the ellipse-constrained fit
/// it stays near-unbiased on short arcs, but the conic may come out as a
/// hyperbola on bad draws, so it is only a seed here.
inline bool taubin_ellipse(const std::vector<Vec2>& points, EllipseFit& out) {
  const size_t n = points.size();
  if (n < 6) return false;
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  double scale = 0.0;
  for (const auto& p : points) scale += (p - mean).norm();
  scale /= static_cast<double>(n);
  if (scale < 1e-9) return false;

  Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 6> g = Eigen::Matrix<double, 6, 6>::Zero();
  for (const auto& pw : points) {
    const Vec2 p = (pw - mean) / scale;
    Eigen::Matrix<double, 6, 1> xi, dx, dy;
    xi << p.x() * p.x(), p.x() * p.y(), p.y() * p.y(), p.x(), p.y(), 1.0;
    dx << 2.0 * p.x(), p.y(), 0.0, 1.0, 0.0, 0.0;
    dy << 0.0, p.x(), 2.0 * p.y(), 0.0, 1.0, 0.0;
    m += xi * xi.transpose();
    g += dx * dx.transpose() + dy * dy.transpose();
  }
  // Minimizing vMv/vGv with G singular (the constant term has no gradient):
  // flip the quotient and take the largest eigenvector of G v = mu M v.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(g, m);
  if (eig.info() != Eigen::Success) return false;
  const Eigen::Matrix<double, 6, 1> v = eig.eigenvectors().col(5);

  const double a = v(0), b = v(1), c = v(2), d = v(3), e = v(4), f = v(5);
  const double det = 4.0 * a * c - b * b;
  if (det <= 0.0) return false;
  const double xc = (b * e - 2.0 * c * d) / det;
  const double yc = (b * d - 2.0 * a * e) / det;
  const double f0 = a * xc * xc + b * xc * yc + c * yc * yc + d * xc + e * yc + f;
  Eigen::Matrix2d quad;
  quad << a, b / 2.0, b / 2.0, c;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qe(quad);
  const double l0 = qe.eigenvalues()(0), l1 = qe.eigenvalues()(1);
  if (-f0 / l0 <= 0.0 || -f0 / l1 <= 0.0) return false;
  const double r0 = std::sqrt(-f0 / l0), r1 = std::sqrt(-f0 / l1);
  const int major_col = r0 >= r1 ? 0 : 1;
  out.semi_major = std::max(r0, r1) * scale;
  out.semi_minor = std::min(r0, r1) * scale;
  const Eigen::Vector2d major_dir = qe.eigenvectors().col(major_col);
  out.orientation = normalize_angle(std::atan2(major_dir.y(), major_dir.x()));
  out.center = Vec2(xc, yc) * scale + mean;
  return true;
}

/// Measured range minus the first ray hit on the candidate ellipse, the
/// quantity the scanner's noise actually perturbs. A return whose ray misses
/// the candidate outright cannot be explained as a hit, so feasible is
/// cleared instead of inventing a distance.
inline double arc_range_residual(const Vec2& p, const Vec2& origin, const double* prm,
                                 bool& feasible) {
  const double c = std::cos(prm[4]), s = std::sin(prm[4]);
  const double a = std::exp(prm[2]), b = std::exp(prm[3]);
  const Vec2 rel = p - origin;
  const double meas = rel.norm();
  if (meas < 1e-12) {
    feasible = false;
    return 0.0;
  }
  const Vec2 dir = rel / meas;
  const double ox = (c * (origin.x() - prm[0]) + s * (origin.y() - prm[1])) / a;
  const double oy = (-s * (origin.x() - prm[0]) + c * (origin.y() - prm[1])) / b;
  const double dx = (c * dir.x() + s * dir.y()) / a;
  const double dy = (-s * dir.x() + c * dir.y()) / b;
  const double qa = dx * dx + dy * dy;
  const double qb = 2.0 * (ox * dx + oy * dy);
  const double qc = ox * ox + oy * oy - 1.0;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0 || qa < 1e-18) {
    feasible = false;
    return 0.0;
  }
  const double sq = std::sqrt(disc);
  double t = (-qb - sq) / (2.0 * qa);
  if (t < 0.0) t = (-qb + sq) / (2.0 * qa);
  if (t < 0.0) {
    feasible = false;
    return 0.0;
  }
  return meas - t;
}

inline bool arc_sse(const std::vector<Vec2>& pts, const Vec2& origin, const double* p,
                    double& out) {
  double total = 0.0;
  for (const auto& q : pts) {
    bool ok = true;
    const double r = arc_range_residual(q, origin, p, ok);
    if (!ok) return false;
    total += r * r;
  }
  out = total;
  return true;
}

/// Levenberg-Marquardt on (cx, cy, log a, log b, phi). Steps that leave any
/// return unexplained are rejected, which walls off the shrunken local optima
/// algebraic seeds tend to sit near.
inline bool arc_lm(const std::vector<Vec2>& pts, const Vec2& origin, double* p) {
  double cur;
  if (!arc_sse(pts, origin, p, cur)) {
    bool ok = false;
    for (int k = 0; k < 40 && !ok; ++k) {
      p[2] += std::log(1.05);
      p[3] += std::log(1.05);
      ok = arc_sse(pts, origin, p, cur);
    }
    if (!ok) return false;
  }
  const int n = static_cast<int>(pts.size());
  double lambda = 1e-3;
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::MatrixXd jac(n, 5);
    Eigen::VectorXd res(n);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      res(i) = arc_range_residual(pts[i], origin, p, ok);
      for (int k = 0; k < 5 && ok; ++k) {
        double ph[5], pl[5];
        std::copy(p, p + 5, ph);
        std::copy(p, p + 5, pl);
        const double h = 1e-6;
        ph[k] += h;
        pl[k] -= h;
        bool okh = true, okl = true;
        const double rh = arc_range_residual(pts[i], origin, ph, okh);
        const double rl = arc_range_residual(pts[i], origin, pl, okl);
        if (okh && okl) {
          jac(i, k) = (rh - rl) / (2.0 * h);
        } else if (okh) {
          jac(i, k) = (rh - res(i)) / h;
        } else if (okl) {
          jac(i, k) = (res(i) - rl) / h;
        } else {
          jac(i, k) = 0.0;
        }
      }
    }
    if (!ok) break;
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 5, 1> grad = jac.transpose() * res;
    bool stepped = false;
    for (int tries = 0; tries < 16; ++tries) {
      Eigen::Matrix<double, 5, 5> h = jtj;
      h.diagonal() += lambda * jtj.diagonal();
      h.diagonal().array() += 1e-15;
      const Eigen::Matrix<double, 5, 1> step = h.ldlt().solve(grad);
      double cand[5];
      for (int k = 0; k < 5; ++k) cand[k] = p[k] - step(k);
      double c2;
      if (arc_sse(pts, origin, cand, c2) && c2 < cur) {
        std::copy(cand, cand + 5, p);
        cur = c2;
        lambda = std::max(lambda * 0.5, 1e-9);
        stepped = true;
        if (step.norm() < 1e-12) return true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) break;
  }
  return true;
}

}  // namespace detail

/// Ellipse recovery for a partial arc seen by a range scanner at
/// `sensor_origin`, which must lie outside the target. Algebraic fits drift
/// badly on noisy arcs (the constrained fit shrinks the major axis by tens of
/// percent), so they only seed a refinement against the sensor model: range
/// error along each beam, constrained so every return stays a hit.
inline EllipseFit fit_ellipse_arc(const std::vector<Vec2>& points, const Vec2& sensor_origin) {
  if (points.size() < 6) throw TooFewPoints("fit_ellipse_arc needs at least 6 points");

  EllipseFit seeds[2];
  bool have[2] = {false, false};
  have[0] = detail::taubin_ellipse(points, seeds[0]);
  try {
    seeds[1] = fit_ellipse(points);
    have[1] = true;
  } catch (const DegenerateFit&) {
  }
  if (!have[0] && !have[1]) throw DegenerateFit("fit_ellipse_arc: no usable seed");

  double best[5];
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 2; ++i) {
    if (!have[i]) continue;
    const EllipseFit& e = seeds[i];
    // A seed that already swallowed the sensor cannot be scored by first hits.
    const double co = std::cos(e.orientation), so = std::sin(e.orientation);
    const Vec2 d = sensor_origin - e.center;
    const double u = (co * d.x() + so * d.y()) / e.semi_major;
    const double v = (-so * d.x() + co * d.y()) / e.semi_minor;
    if (u * u + v * v <= 1.0) continue;
    double p[5] = {e.center.x(), e.center.y(), std::log(e.semi_major), std::log(e.semi_minor),
                   e.orientation};
    if (!detail::arc_lm(points, sensor_origin, p)) continue;
    double s2;
    if (detail::arc_sse(points, sensor_origin, p, s2) && s2 < best_sse) {
      best_sse = s2;
      std::copy(p, p + 5, best);
    }
  }
  if (!std::isfinite(best_sse)) {
    // No seed survived refinement; fall back to the best algebraic answer.
    if (have[1]) return seeds[1];
    return seeds[0];
  }
  EllipseFit out;
  out.center = Vec2(best[0], best[1]);
  double a = std::exp(best[2]), b = std::exp(best[3]);
  double phi = best[4];
  if (a < b) {
    std::swap(a, b);
    phi += std::numbers::pi / 2.0;
  }
  out.semi_major = a;
  out.semi_minor = b;
  out.orientation = normalize_angle(phi);
  return out;
}

/// Acceptance bands for fitted torso axes, from the simulator's body model.
struct TorsoBands {
  double major_min = 0.10;
  double major_max = 0.25;
  double minor_min = 0.05;
  double minor_max = 0.18;
};

inline bool classify_torso(const EllipseFit& e, const TorsoBands& bands) {
  return e.semi_major >= bands.major_min && e.semi_major <= bands.major_max &&
         e.semi_minor >= bands.minor_min && e.semi_minor <= bands.minor_max;
}

/// Constant-velocity person hypothesis.
struct Track {
  int id = 0;
  Eigen::Vector4d state = Eigen::Vector4d::Zero();  // x, y, vx, vy
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double last_seen = 0.0;
  int consecutive_hits = 0;
  bool confirmed = false;

  Vec2 position() const { return {state(0), state(1)}; }
  Vec2 velocity() const { return {state(2), state(3)}; }
};

inline Track kf_predict(const Track& t, double dt, double q) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  Eigen::Matrix4d qm = Eigen::Matrix4d::Zero();
  const double dt2 = dt * dt, dt3 = dt2 * dt;
  qm(0, 0) = qm(1, 1) = q * dt3 / 3.0;
  qm(0, 2) = qm(2, 0) = qm(1, 3) = qm(3, 1) = q * dt2 / 2.0;
  qm(2, 2) = qm(3, 3) = q * dt;
  Track out = t;
  out.state = f * t.state;
  out.covariance = f * t.covariance * f.transpose() + qm;
  out.covariance = ((out.covariance + out.covariance.transpose()) / 2.0).eval();
  return out;
}

/// Position-measurement update, Joseph form, covariance symmetrized.
inline Track kf_update(const Track& t, const Detection& d, double r) {
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Eigen::Matrix2d rm = Eigen::Matrix2d::Identity() * (r * r);
  const Eigen::Vector2d innovation = d.position - h * t.state;
  const Eigen::Matrix2d s = h * t.covariance * h.transpose() + rm;
  const Eigen::Matrix<double, 4, 2> k = t.covariance * h.transpose() * s.inverse();
  Track out = t;
  out.state = t.state + k * innovation;
  const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - k * h;
  out.covariance = ikh * t.covariance * ikh.transpose() + k * rm * k.transpose();
  out.covariance = ((out.covariance + out.covariance.transpose()) / 2.0).eval();
  out.last_seen = d.stamp;
  return out;
}

struct AssociationResult {
  std::vector<std::pair<size_t, size_t>> matches;  // (track index, detection index)
  std::vector<size_t> unmatched_detections;
};

/// Greedy global nearest neighbor: repeatedly takes the smallest
/// track-detection distance under the gate, each side used at most once.
inline AssociationResult associate(const std::vector<Track>& tracks,
                                   const std::vector<Detection>& detections, double gate) {
  struct Cand {
    double d;
    size_t ti, di;
  };
  std::vector<Cand> cands;
  for (size_t ti = 0; ti < tracks.size(); ++ti) {
    for (size_t di = 0; di < detections.size(); ++di) {
      const double d = (tracks[ti].position() - detections[di].position).norm();
      if (d < gate) cands.push_back({d, ti, di});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.d != b.d) return a.d < b.d;
    return std::tie(a.ti, a.di) < std::tie(b.ti, b.di);
  });
  AssociationResult res;
  std::vector<bool> track_used(tracks.size(), false), det_used(detections.size(), false);
  for (const auto& c : cands) {
    if (track_used[c.ti] || det_used[c.di]) continue;
    track_used[c.ti] = det_used[c.di] = true;
    res.matches.emplace_back(c.ti, c.di);
  }
  for (size_t di = 0; di < detections.size(); ++di) {
    if (!det_used[di]) res.unmatched_detections.push_back(di);
  }
  return res;
}

/// Drops tracks unseen for longer than `timeout` (strictly).
inline std::vector<Track> prune_tracks(std::vector<Track> tracks, double now, double timeout) {
  std::erase_if(tracks, [&](const Track& t) { return now - t.last_seen > timeout; });
  return tracks;
}

struct TrackerParams {
  double gate = 1.0;              // m
  double timeout = 2.0;           // s
  double measurement_noise = 0.05;  // m
  double process_noise = 0.5;
  int confirm_hits = 3;
};

/// Single-owner multi-target tracker fed by per-channel detection batches.
class PersonTracker {
 public:
  explicit PersonTracker(TrackerParams params = {}) : params_(params) {}

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerParams& params() const { return params_; }

  const Track* find(int id) const {
    for (const auto& t : tracks_) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }

  /// One fixed-rate step: predict, associate and update per source batch,
  /// then prune. Batches are processed in the order given, so a track can be
  /// refined by both sensors in the same tick.
  void step(double now, const std::vector<std::vector<Detection>>& batches) {
    if (has_time_) {
      const double dt = now - last_time_;
      if (dt > 0.0) {
        for (auto& t : tracks_) t = kf_predict(t, dt, params_.process_noise);
      }
    }
    last_time_ = now;
    has_time_ = true;

    std::vector<bool> hit(tracks_.size(), false);
    for (const auto& batch : batches) {
      const auto res = associate(tracks_, batch, params_.gate);
      for (const auto& [ti, di] : res.matches) {
        tracks_[ti] = kf_update(tracks_[ti], batch[di], params_.measurement_noise);
        tracks_[ti].last_seen = now;
        if (ti < hit.size()) hit[ti] = true;
      }
      for (const size_t di : res.unmatched_detections) spawn(batch[di], now);
    }
    for (size_t i = 0; i < hit.size(); ++i) {
      auto& t = tracks_[i];
      t.consecutive_hits = hit[i] ? t.consecutive_hits + 1 : 0;
      if (t.consecutive_hits >= params_.confirm_hits) t.confirmed = true;
    }
    tracks_ = prune_tracks(std::move(tracks_), now, params_.timeout);
  }

 private:
  void spawn(const Detection& d, double now) {
    Track t;
    t.id = next_id_++;
    t.state << d.position.x(), d.position.y(), 0.0, 0.0;
    const double r2 = params_.measurement_noise * params_.measurement_noise;
    t.covariance = Eigen::Vector4d(r2, r2, 1.0, 1.0).asDiagonal();
    t.last_seen = now;
    t.consecutive_hits = 1;
    tracks_.push_back(std::move(t));
  }

  TrackerParams params_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  double last_time_ = 0.0;
  bool has_time_ = false;
};

}  // namespace guidebot
