#include "vistrack/reachability.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <random>
#include <thread>

namespace vistrack {

ReachabilityMap::ReachabilityMap(const GridSpec& grid, std::vector<double> scores,
                                 ReachabilityMeta meta)
    : grid_(grid), scores_(std::move(scores)), meta_(std::move(meta)) {
  grid_.validate();
  if (scores_.size() != grid_.cell_count())
    throw SchemaError("reachability: score count does not match grid dims");
  for (double s : scores_)
    if (!(s >= 0.0 && s <= 1.0)) throw SchemaError("reachability: scores must lie in [0, 1]");
}

double ReachabilityMap::query(const Vec3& p) const {
  if (scores_.empty() || !grid_.bounds().contains(p)) return 0.0;
  std::array<int, 3> i0{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double u = (p[a] - grid_.origin[a]) / grid_.resolution - 0.5;
    const double clamped = std::clamp(u, 0.0, double(grid_.dims[a] - 1));
    i0[a] = std::min(int(std::floor(clamped)), std::max(0, grid_.dims[a] - 2));
    frac[a] = grid_.dims[a] > 1 ? clamped - i0[a] : 0.0;
  }
  double value = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      const int bit = (corner >> a) & 1;
      c[a] = std::min(i0[a] + bit, grid_.dims[a] - 1);
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    if (w != 0.0) value += w * score(c[0], c[1], c[2]);
  }
  return std::clamp(value, 0.0, 1.0);
}

void ReachabilityMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write reachability map " + path.string());
  char header[1024];
  std::snprintf(header, sizeof header,
                "vistrack-reach 1\norigin %.17g %.17g %.17g\nresolution %.17g\ndims %d %d %d\n"
                "orientations %d\nrestarts %d\nseed %llu\nchain %s\ndata %zu\n",
                grid_.origin[0], grid_.origin[1], grid_.origin[2], grid_.resolution, grid_.dims[0],
                grid_.dims[1], grid_.dims[2], meta_.orientations, meta_.restarts,
                static_cast<unsigned long long>(meta_.seed), meta_.chain_hash.c_str(), scores_.size());
  out << header;
  static_assert(std::endian::native == std::endian::little, "map files are little-endian");
  out.write(reinterpret_cast<const char*>(scores_.data()), std::streamsize(scores_.size() * sizeof(double)));
  if (!out) throw IoError("failed writing reachability map " + path.string());
}

ReachabilityMap ReachabilityMap::load(const std::filesystem::path& path,
                                      const std::string& expected_chain_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open reachability map " + path.string());
  std::string magic, key;
  int version = 0;
  GridSpec grid;
  ReachabilityMeta meta;
  unsigned long long seed = 0;
  std::size_t count = 0;
  in >> magic >> version;
  if (magic != "vistrack-reach" || version != 1)
    throw SchemaError(path.string() + ": not a reachability map");
  in >> key >> grid.origin[0] >> grid.origin[1] >> grid.origin[2];
  in >> key >> grid.resolution;
  in >> key >> grid.dims[0] >> grid.dims[1] >> grid.dims[2];
  in >> key >> meta.orientations >> key >> meta.restarts >> key >> seed;
  in >> key >> meta.chain_hash >> key >> count;
  in.get();
  if (!in) throw SchemaError(path.string() + ": malformed reachability header");
  meta.seed = seed;
  if (!expected_chain_hash.empty() && meta.chain_hash != expected_chain_hash)
    throw SchemaError(path.string() + ": chain hash " + meta.chain_hash +
                      " does not match the configured chain " + expected_chain_hash);
  std::vector<double> scores(count);
  in.read(reinterpret_cast<char*>(scores.data()), std::streamsize(count * sizeof(double)));
  if (!in) throw SchemaError(path.string() + ": truncated reachability data");
  return ReachabilityMap(grid, std::move(scores), std::move(meta));
}

void ReachabilityMap::write_slice_csv(std::ostream& out, double z) const {
  const double u = (z - grid_.origin[2]) / grid_.resolution - 0.5;
  const int k = std::clamp(int(std::lround(u)), 0, grid_.dims[2] - 1);
  out << "x,y,z,score\n";
  char line[128];
  for (int j = 0; j < grid_.dims[1]; ++j)
    for (int i = 0; i < grid_.dims[0]; ++i) {
      const Vec3 c = grid_.center(i, j, k);
      std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f\n", c[0], c[1], c[2], score(i, j, k));
      out << line;
    }
}

std::vector<Mat3> sample_orientations(int count, std::uint64_t seed) {
  // Shoemake's subgroup algorithm: uniform unit quaternions
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Mat3> out;
  out.reserve(std::size_t(std::max(count, 0)));
  for (int n = 0; n < count; ++n) {
    const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const Eigen::Quaterniond q(b * std::cos(2.0 * M_PI * u3), a * std::sin(2.0 * M_PI * u2),
                               a * std::cos(2.0 * M_PI * u2), b * std::sin(2.0 * M_PI * u3));
    out.push_back(q.normalized().toRotationMatrix());
  }
  return out;
}

ReachabilityMap build_map(const KinematicChain& chain, const Aabb& box, double resolution,
                          const BuildOptions& options) {
  if (options.orientations < 1) throw SchemaError("reachability.orientations: must be >= 1");
  if (options.restarts < 1) throw SchemaError("reachability.restarts: must be >= 1");
  if (box.empty()) throw SchemaError("reachability.box: must be non-empty");
  const GridSpec grid = GridSpec::covering(box, resolution);
  const auto orientations = sample_orientations(options.orientations, options.seed);
  const Vec3 base = chain.base.translation();
  const double reach = chain.reach();
  std::vector<double> scores(grid.cell_count(), 0.0);
  const auto score_cell = [&](std::size_t idx) {
    const auto [i, j, k] = grid.unindex(idx);
    const Vec3 center = grid.center(i, j, k);
    if ((center - base).norm() > reach) return;
    int hits = 0;
    for (int n = 0; n < options.orientations; ++n) {
      Iso3 pose = Iso3::Identity();
      pose.linear() = orientations[std::size_t(n)];
      pose.translation() = center;
      const std::uint64_t attempt_seed = options.seed ^ (0x9e3779b97f4a7c15ULL * (idx * 131 + std::uint64_t(n) + 1));
      if (ik_reachable(chain, Pose6::from_isometry(pose), attempt_seed, options.restarts, options.ik))
        ++hits;
    }
    scores[idx] = double(hits) / double(options.orientations);
  };
  const int threads = std::max(1, options.threads);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  const auto worker = [&] {
    for (std::size_t idx; (idx = next.fetch_add(1)) < scores.size();) {
      score_cell(idx);
      ++done;
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  if (options.progress) {
    // the calling thread also reports progress
    for (std::size_t idx; (idx = next.fetch_add(1)) < scores.size();) {
      score_cell(idx);
      if (++done % 1024 == 0) options.progress(done.load(), scores.size());
    }
  } else {
    worker();
  }
  for (auto& th : pool) th.join();
  if (options.progress) options.progress(scores.size(), scores.size());
  return ReachabilityMap(grid, std::move(scores),
                         {chain.hash(), options.orientations, options.seed, options.restarts});
}

}  // namespace vistrack
