#pragma once

#include "vistrack/common.hpp"

namespace vistrack::geometry {

struct SegmentPair {
  double distance;
  Vec3 on_first;
  Vec3 on_second;
};

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);
Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);

/// Closest points between segments [p0,p1] and [q0,q1]. Handles degenerate
/// (zero-length) segments.
SegmentPair segment_segment(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                            const Vec3& q1);

/// Signed distance from a point to a box: negative inside (depth to the
/// nearest face).
double point_box_signed_distance(const Vec3& p, const Aabb& box);

/// Unsigned distance from a segment to a box; 0 when they intersect.
double segment_box_distance(const Vec3& a, const Vec3& b, const Aabb& box);

/// Slab test; true when the closed segment touches the closed box.
bool segment_intersects_box(const Vec3& a, const Vec3& b, const Aabb& box);

/// Signed distance from a point to the solid finite cone with apex `apex`,
/// unit `axis`, height `length` and radius `base_radius` at the base plane.
/// Negative inside (penetration depth).
double point_cone_signed_distance(const Vec3& p, const Vec3& apex, const Vec3& axis,
                                  double length, double base_radius);

}  // namespace vistrack::geometry
