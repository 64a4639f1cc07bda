#pragma once

#include "vistrack/ik.hpp"
#include "vistrack/kinematics.hpp"
#include "vistrack/world.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace vistrack {

struct ReachabilityMeta {
  std::string chain_hash;
  int orientations = 0;
  std::uint64_t seed = 0;
  int restarts = 0;
};

/// Per-cell ratio of successful IK solves over sampled orientations.
/// Queries interpolate trilinearly between cell centers and ignore the
/// orientation of the query pose.
class ReachabilityMap {
 public:
  ReachabilityMap() = default;
  ReachabilityMap(const GridSpec& grid, std::vector<double> scores, ReachabilityMeta meta);

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& scores() const { return scores_; }
  const ReachabilityMeta& meta() const { return meta_; }
  double score(int i, int j, int k) const { return scores_[grid_.index(i, j, k)]; }

  /// Trilinear interpolation at p; 0 outside the grid bounds. Between the
  /// bounds and the outermost cell centers the edge values are held.
  double query(const Vec3& p) const;
  double query(const Pose6& pose) const { return query(pose.p); }

  /// Text header then little-endian float64 scores in linear index order.
  void save(const std::filesystem::path& path) const;
  /// Throws SchemaError when `expected_chain_hash` is non-empty and differs.
  static ReachabilityMap load(const std::filesystem::path& path,
                              const std::string& expected_chain_hash = {});

  /// CSV of the horizontal layer nearest to height z: x,y,score per cell.
  void write_slice_csv(std::ostream& out, double z) const;

 private:
  GridSpec grid_;
  std::vector<double> scores_;
  ReachabilityMeta meta_;
};

/// `count` rotations uniformly distributed on SO(3), deterministic in seed.
std::vector<Mat3> sample_orientations(int count, std::uint64_t seed);

struct BuildOptions {
  int orientations = 50;
  int restarts = 8;
  std::uint64_t seed = 1;
  IkParams ik;
  int threads = 1;  // cells are scored independently; output does not depend on this
  /// Called with (cells done, total cells); may be empty.
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Score each cell center of the grid covering `box` at `resolution`.
/// `progress` is invoked from the calling thread only.
ReachabilityMap build_map(const KinematicChain& chain, const Aabb& box, double resolution,
                          const BuildOptions& options);

}  // namespace vistrack
