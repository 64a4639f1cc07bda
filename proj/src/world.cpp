#include "vistrack/world.hpp"

#include "vistrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace vistrack {

void GridSpec::validate() const {
  if (!(resolution > 0.0)) throw SchemaError("grid.resolution: must be > 0");
  for (int d : dims)
    if (d <= 0) throw SchemaError("grid.dims: every dimension must be > 0");
}

std::array<int, 3> GridSpec::unindex(std::size_t idx) const {
  const int i = int(idx % std::size_t(dims[0]));
  idx /= std::size_t(dims[0]);
  const int j = int(idx % std::size_t(dims[1]));
  const int k = int(idx / std::size_t(dims[1]));
  return {i, j, k};
}

std::optional<std::array<int, 3>> GridSpec::locate(const Vec3& p) const {
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double u = std::floor((p[a] - origin[a]) / resolution);
    if (!(u >= 0.0) || u >= dims[a]) return std::nullopt;
    c[a] = int(u);
  }
  return c;
}

GridSpec GridSpec::covering(const Aabb& box, double resolution) {
  GridSpec spec;
  spec.origin = box.min;
  spec.resolution = resolution;
  for (int a = 0; a < 3; ++a)
    spec.dims[a] = std::max(1, int(std::ceil((box.max[a] - box.min[a]) / resolution - 1e-9)));
  return spec;
}

// ---------------------------------------------------------------------------

OccupancyGrid::OccupancyGrid(const GridSpec& spec) : spec_(spec) {
  spec_.validate();
  cells_.assign(spec_.cell_count(), 0);
}

void OccupancyGrid::set(int i, int j, int k, bool value) {
  std::uint8_t& cell = cells_[spec_.index(i, j, k)];
  if ((cell != 0) == value) return;
  cell = value ? 1 : 0;
  if (value) {
    centers_.push_back(spec_.center(i, j, k));
    indices_.push_back(spec_.index(i, j, k));
  } else {
    rebuild_centers();
  }
}

void OccupancyGrid::clear() {
  for (std::size_t idx : indices_) cells_[idx] = 0;
  centers_.clear();
  indices_.clear();
}

void OccupancyGrid::rebuild_centers() {
  centers_.clear();
  indices_.clear();
  for (std::size_t idx = 0; idx < cells_.size(); ++idx) {
    if (cells_[idx] == 0) continue;
    const auto [i, j, k] = spec_.unindex(idx);
    centers_.push_back(spec_.center(i, j, k));
    indices_.push_back(idx);
  }
}

std::vector<std::uint8_t> OccupancyGrid::packed_bits() const {
  std::vector<std::uint8_t> out((cells_.size() + 7) / 8, 0);
  for (std::size_t idx = 0; idx < cells_.size(); ++idx)
    if (cells_[idx] != 0) out[idx / 8] |= std::uint8_t(1u << (idx % 8));
  return out;
}

void OccupancyGrid::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write grid file " + path.string());
  const auto bits = packed_bits();
  char header[512];
  std::snprintf(header, sizeof header,
                "vistrack-grid 1\norigin %.17g %.17g %.17g\nresolution %.17g\ndims %d %d %d\ndata %zu\n",
                spec_.origin[0], spec_.origin[1], spec_.origin[2], spec_.resolution, spec_.dims[0],
                spec_.dims[1], spec_.dims[2], bits.size());
  out << header;
  out.write(reinterpret_cast<const char*>(bits.data()), std::streamsize(bits.size()));
}

OccupancyGrid OccupancyGrid::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open grid file " + path.string());
  std::string magic, key;
  int version = 0;
  GridSpec spec;
  std::size_t nbytes = 0;
  in >> magic >> version;
  if (magic != "vistrack-grid" || version != 1) throw SchemaError(path.string() + ": not a grid file");
  in >> key >> spec.origin[0] >> spec.origin[1] >> spec.origin[2];
  in >> key >> spec.resolution;
  in >> key >> spec.dims[0] >> spec.dims[1] >> spec.dims[2];
  in >> key >> nbytes;
  in.get();
  if (!in) throw SchemaError(path.string() + ": malformed grid header");
  OccupancyGrid grid(spec);
  std::vector<std::uint8_t> bits(nbytes);
  in.read(reinterpret_cast<char*>(bits.data()), std::streamsize(nbytes));
  if (!in || nbytes != (grid.cells_.size() + 7) / 8)
    throw SchemaError(path.string() + ": truncated grid data");
  for (std::size_t idx = 0; idx < grid.cells_.size(); ++idx)
    grid.cells_[idx] = (bits[idx / 8] >> (idx % 8)) & 1u;
  grid.rebuild_centers();
  return grid;
}

// ---------------------------------------------------------------------------

Aabb Shape::bounds_at(const Vec3& center) const {
  const Vec3 half = kind == Kind::Sphere ? Vec3::Constant(radius) : half_extents;
  return {center - half, center + half};
}

Vec3 Trajectory::position(double t) const {
  if (waypoints.empty()) return Vec3::Zero();
  double remaining = t - start_time;
  if (remaining <= 0.0) return waypoints.front();
  for (std::size_t s = 0; s + 1 < waypoints.size(); ++s) {
    const Vec3 d = waypoints[s + 1] - waypoints[s];
    const double len = d.norm();
    if (speeds[s] <= 0.0 || len <= 0.0) continue;
    const double seg_time = len / speeds[s];
    if (remaining < seg_time) return waypoints[s] + d * (remaining / seg_time);
    remaining -= seg_time;
  }
  return waypoints.back();
}

double Trajectory::duration() const {
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < waypoints.size(); ++s)
    if (speeds[s] > 0.0) total += (waypoints[s + 1] - waypoints[s]).norm() / speeds[s];
  return total;
}

double Trajectory::max_speed() const {
  double v = 0.0;
  for (double s : speeds) v = std::max(v, s);
  return v;
}

void ObstacleBody::validate() const {
  const std::string w = "obstacle " + std::to_string(id);
  if (shape.kind == Shape::Kind::Sphere ? !(shape.radius > 0.0)
                                        : !(shape.half_extents.array() > 0.0).all())
    throw SchemaError(w + ": shape dimensions must be > 0");
  if (trajectory.waypoints.empty()) throw SchemaError(w + ": trajectory has no waypoints");
  if (trajectory.speeds.size() + 1 != trajectory.waypoints.size())
    throw SchemaError(w + ": need one speed per trajectory segment");
  for (double s : trajectory.speeds)
    if (!(s >= 0.0)) throw SchemaError(w + ": speeds must be >= 0");
}

double PlacedBody::signed_distance(const Vec3& p) const {
  if (shape.kind == Shape::Kind::Sphere) return (p - center).norm() - shape.radius;
  return geometry::point_box_signed_distance(p, bounds());
}

double PlacedBody::segment_distance(const Vec3& a, const Vec3& b) const {
  if (shape.kind == Shape::Kind::Sphere)
    return geometry::point_segment_distance(center, a, b) - shape.radius;
  return geometry::segment_box_distance(a, b, bounds());
}

SightCone SightCone::between(const Vec3& camera, const Vec3& target, double base_radius) {
  SightCone cone;
  cone.apex = camera;
  const Vec3 d = target - camera;
  cone.length = d.norm();
  cone.axis = cone.length > 0.0 ? Vec3(d / cone.length) : Vec3::UnitZ();
  cone.base_radius = base_radius;
  return cone;
}

void SightCone::validate() const {
  if (!(length > 0.0)) throw SchemaError("cone.length: must be > 0");
  if (!(base_radius > 0.0)) throw SchemaError("cone.base_radius: must be > 0");
  if (std::abs(axis.norm() - 1.0) > 1e-12) throw SchemaError("cone.axis: not a unit vector");
}

// ---------------------------------------------------------------------------

namespace {

bool excluded(const Vec3& c, const Exclusions& ex, double diag) {
  for (const WorldCapsule& cap : ex.capsules)
    if (geometry::point_segment_distance(c, cap.a, cap.b) < cap.radius + diag) return true;
  if (ex.target && (c - *ex.target).norm() < ex.target_radius + diag) return true;
  return false;
}

bool overlaps_voxel(const PlacedBody& body, const Vec3& lo, const Vec3& hi) {
  if (body.shape.kind == Shape::Kind::Sphere) {
    const Vec3 nearest = body.center.cwiseMax(lo).cwiseMin(hi);
    return (nearest - body.center).norm() < body.shape.radius;
  }
  const Aabb b = body.bounds();
  return (lo.array() < b.max.array()).all() && (hi.array() > b.min.array()).all();
}

}  // namespace

void rasterize_into(OccupancyGrid& grid, const SceneState& scene, const Exclusions& exclusions,
                    const Aabb& workspace) {
  const GridSpec& spec = grid.spec();
  const Aabb gb = spec.bounds();
  const double diag = 2.0 * spec.half_diagonal();
  constexpr double kTol = 1e-9;
  grid.clear();
  for (const PlacedBody& body : scene.obstacles) {
    const Aabb bb = body.bounds();
    // the part of the body inside the workspace must be inside the grid
    const Vec3 wlo = bb.min.cwiseMax(workspace.min);
    const Vec3 whi = bb.max.cwiseMin(workspace.max);
    if ((wlo.array() < whi.array()).all() &&
        ((wlo.array() < gb.min.array() - kTol).any() || (whi.array() > gb.max.array() + kTol).any())) {
      throw GridError("obstacle " + std::to_string(body.id) +
                      " lies inside the workspace but outside the occupancy grid");
    }
    std::array<int, 3> lo{}, hi{};
    bool outside = false;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, int(std::floor((bb.min[a] - spec.origin[a]) / spec.resolution)));
      hi[a] = std::min(spec.dims[a] - 1, int(std::ceil((bb.max[a] - spec.origin[a]) / spec.resolution)) - 1);
      if (lo[a] > hi[a]) outside = true;
    }
    if (outside) continue;
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const Vec3 vlo = spec.origin + Vec3(i, j, k) * spec.resolution;
          const Vec3 vhi = vlo + Vec3::Constant(spec.resolution);
          if (!overlaps_voxel(body, vlo, vhi)) continue;
          if (excluded(spec.center(i, j, k), exclusions, diag)) continue;
          grid.set(i, j, k);
        }
  }
}

OccupancyGrid rasterize(const SceneState& scene, const GridSpec& spec, const Exclusions& exclusions,
                        const Aabb& workspace) {
  OccupancyGrid grid(spec);
  rasterize_into(grid, scene, exclusions, workspace);
  return grid;
}

double point_grid_distance(const OccupancyGrid& grid, const Vec3& p) {
  if (grid.empty()) return kNoObstacleDistance;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& c : grid.occupied_centers()) best = std::min(best, (c - p).squaredNorm());
  return std::sqrt(best) - grid.spec().half_diagonal();
}

double cone_grid_distance(const OccupancyGrid& grid, const SightCone& cone) {
  if (grid.empty()) return kNoObstacleDistance;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& c : grid.occupied_centers())
    best = std::min(best, geometry::point_cone_signed_distance(c, cone.apex, cone.axis, cone.length,
                                                                cone.base_radius));
  return best - grid.spec().half_diagonal();
}

double capsule_grid_distance(const OccupancyGrid& grid, const WorldCapsule& capsule) {
  if (grid.empty()) return kNoObstacleDistance;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& c : grid.occupied_centers())
    best = std::min(best, geometry::point_segment_distance(c, capsule.a, capsule.b));
  return best - capsule.radius - grid.spec().half_diagonal();
}

bool segment_visibility(const SceneState& scene, const Vec3& a, const Vec3& b) {
  for (const PlacedBody& body : scene.obstacles) {
    if (body.shape.kind == Shape::Kind::Sphere) {
      if (geometry::point_segment_distance(body.center, a, b) < body.shape.radius) return false;
    } else if (geometry::segment_intersects_box(a, b, body.bounds())) {
      return false;
    }
  }
  return true;
}

}  // namespace vistrack
