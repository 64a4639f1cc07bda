#pragma once

#include "vistrack/common.hpp"
#include "vistrack/kinematics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vistrack {

/// Returned by grid distance queries when nothing is occupied.
inline constexpr double kNoObstacleDistance = 1.0e3;

/// Cell layout shared by the occupancy grid and the reachability map.
/// Cell (i,j,k) spans origin + [i,i+1) * resolution along x (same for y, z).
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double resolution = 0.05;
  std::array<int, 3> dims{1, 1, 1};

  void validate() const;
  std::size_t cell_count() const {
    return std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return std::size_t(i) + std::size_t(dims[0]) * (std::size_t(j) + std::size_t(dims[1]) * std::size_t(k));
  }
  std::array<int, 3> unindex(std::size_t idx) const;
  Vec3 center(int i, int j, int k) const {
    return origin + (Vec3(i, j, k) + Vec3::Constant(0.5)) * resolution;
  }
  /// Cell containing p, or nullopt outside the grid.
  std::optional<std::array<int, 3>> locate(const Vec3& p) const;
  Aabb bounds() const {
    return {origin, origin + Vec3(dims[0], dims[1], dims[2]) * resolution};
  }
  double half_diagonal() const { return 0.5 * std::sqrt(3.0) * resolution; }

  /// Smallest grid with the given resolution covering `box`.
  static GridSpec covering(const Aabb& box, double resolution);
};

/// Binary voxel occupancy. Keeps the list of occupied centers alongside the
/// bitmap so distance queries scan only occupied cells.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  bool occupied(int i, int j, int k) const { return cells_[spec_.index(i, j, k)] != 0; }
  bool occupied_index(std::size_t idx) const { return cells_[idx] != 0; }
  void set(int i, int j, int k, bool value = true);
  void clear();
  std::size_t occupied_count() const { return centers_.size(); }
  bool empty() const { return centers_.empty(); }
  std::span<const Vec3> occupied_centers() const { return centers_; }

  /// Packed bitmap, LSB-first, in linear index order.
  std::vector<std::uint8_t> packed_bits() const;

  /// Text header ("vistrack-grid 1", origin, resolution, dims) then packed bits.
  void save(const std::filesystem::path& path) const;
  static OccupancyGrid load(const std::filesystem::path& path);

 private:
  void rebuild_centers();

  GridSpec spec_;
  std::vector<std::uint8_t> cells_;
  std::vector<Vec3> centers_;
  std::vector<std::size_t> indices_;
};

struct Shape {
  enum class Kind { Sphere, Box };
  Kind kind = Kind::Box;
  double radius = 0.125;                       // sphere
  Vec3 half_extents = Vec3::Constant(0.125);   // box

  static Shape sphere(double r) { return {Kind::Sphere, r, Vec3::Zero()}; }
  static Shape box(const Vec3& half) { return {Kind::Box, 0.0, half}; }
  static Shape cube(double edge) { return box(Vec3::Constant(0.5 * edge)); }
  Aabb bounds_at(const Vec3& center) const;
};

/// Piecewise-linear path with per-segment speed. The body waits at the first
/// waypoint until `start_time` (which may be negative) and parks at the last one.
struct Trajectory {
  std::vector<Vec3> waypoints;
  std::vector<double> speeds;  // one per segment, m/s
  double start_time = 0.0;

  Vec3 position(double t) const;
  double duration() const;
  double max_speed() const;
};

struct ObstacleBody {
  int id = 0;
  Shape shape;
  Trajectory trajectory;

  void validate() const;
};

/// A body at a fixed instant.
struct PlacedBody {
  int id = 0;
  Shape shape;
  Vec3 center = Vec3::Zero();

  /// Signed distance from p to the body surface (negative inside).
  double signed_distance(const Vec3& p) const;
  /// Distance from the segment to the body; <= 0 means contact.
  double segment_distance(const Vec3& a, const Vec3& b) const;
  Aabb bounds() const { return shape.bounds_at(center); }
};

/// Ground-truth world at one instant.
struct SceneState {
  double time = 0.0;
  Vec3 target = Vec3::Zero();
  double target_radius = 0.05;
  std::vector<PlacedBody> obstacles;
};

struct Exclusions {
  std::vector<WorldCapsule> capsules;
  std::optional<Vec3> target;
  double target_radius = 0.0;
};

/// Finite sight cone from the camera to the target.
struct SightCone {
  Vec3 apex = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double length = 1.0;
  double base_radius = 0.10;

  static SightCone between(const Vec3& camera, const Vec3& target, double base_radius);
  void validate() const;
};

/// Voxelize obstacle bodies. A voxel is occupied iff its cube overlaps a body
/// and its center lies outside every exclusion volume (capsules and target,
/// each inflated by one voxel diagonal). Bodies are clipped to the grid; a
/// body whose overlap with `workspace` is not inside the grid raises GridError.
OccupancyGrid rasterize(const SceneState& scene, const GridSpec& spec,
                        const Exclusions& exclusions, const Aabb& workspace);
/// Same, writing into an existing grid of matching spec.
void rasterize_into(OccupancyGrid& grid, const SceneState& scene, const Exclusions& exclusions,
                    const Aabb& workspace);

/// Distance from p to the nearest occupied voxel center minus half the voxel
/// diagonal. Negative inside inflated occupancy; kNoObstacleDistance if empty.
double point_grid_distance(const OccupancyGrid& grid, const Vec3& p);

/// Minimum over occupied voxels of the signed distance from the voxel center
/// to the cone solid, minus half the voxel diagonal.
double cone_grid_distance(const OccupancyGrid& grid, const SightCone& cone);

/// Minimum over occupied voxels of the distance to a capsule surface, minus
/// half the voxel diagonal.
double capsule_grid_distance(const OccupancyGrid& grid, const WorldCapsule& capsule);

/// True iff the open segment a->b touches no obstacle body (analytic).
bool segment_visibility(const SceneState& scene, const Vec3& a, const Vec3& b);

}  // namespace vistrack
