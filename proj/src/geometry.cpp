#include "vistrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vistrack {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace geometry {

Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  return (p - closest_point_on_segment(p, a, b)).norm();
}

// Ericson, Real-Time Collision Detection, 5.1.9.
SegmentPair segment_segment(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                            const Vec3& q1) {
  constexpr double kEps = 1e-14;
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) {
    // both degenerate
  } else if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  const Vec3 c1 = p0 + s * d1;
  const Vec3 c2 = q0 + t * d2;
  return {(c1 - c2).norm(), c1, c2};
}

double point_box_signed_distance(const Vec3& p, const Aabb& box) {
  const Vec3 below = box.min - p;
  const Vec3 above = p - box.max;
  const Vec3 outside = below.cwiseMax(above).cwiseMax(0.0);
  if ((outside.array() > 0.0).any()) return outside.norm();
  // inside or on the surface: depth to nearest face
  return below.cwiseMax(above).maxCoeff();
}

double segment_box_distance(const Vec3& a, const Vec3& b, const Aabb& box) {
  if (segment_intersects_box(a, b, box)) return 0.0;
  // Point-to-box distance is convex along the segment; golden-section search.
  const auto f = [&](double t) { return point_box_signed_distance(a + t * (b - a), box); };
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f(0.0), f(1.0), f(0.5 * (lo + hi))});
}

bool segment_intersects_box(const Vec3& a, const Vec3& b, const Aabb& box) {
  const Vec3 d = b - a;
  double t0 = 0.0, t1 = 1.0;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (a[i] < box.min[i] || a[i] > box.max[i]) return false;
      continue;
    }
    double ta = (box.min[i] - a[i]) / d[i];
    double tb = (box.max[i] - a[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

namespace {

double distance_2d(double x, double y, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = x - (ax + t * dx), ey = y - (ay + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

double point_cone_signed_distance(const Vec3& p, const Vec3& apex, const Vec3& axis,
                                  double length, double base_radius) {
  // Work in the meridian half-plane: axial coordinate a, radial coordinate rho.
  // The solid is the triangle (0,0)-(length,base_radius)-(length,0) revolved.
  const Vec3 d = p - apex;
  const double a = d.dot(axis);
  const double rho = (d - a * axis).norm();
  const double lateral = distance_2d(a, rho, 0.0, 0.0, length, base_radius);
  const bool inside = a >= 0.0 && a <= length && rho * length <= a * base_radius;
  if (inside) return -std::min(lateral, length - a);
  const double base = distance_2d(a, rho, length, 0.0, length, base_radius);
  return std::min(lateral, base);
}

}  // namespace geometry
}  // namespace vistrack
