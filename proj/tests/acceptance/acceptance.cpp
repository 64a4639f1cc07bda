// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include "vistrack/geometry.hpp"
#include "vistrack/sim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

using namespace vistrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

JointConfig random_q(const KinematicChain& chain, std::mt19937_64& rng) {
  JointConfig q;
  for (int i = 0; i < kNumJoints; ++i)
    q[i] = std::uniform_real_distribution<double>(chain.limits[i].min, chain.limits[i].max)(rng);
  return q;
}

// ---------------------------------------------------------------------------
// independent oracles

/// Forward kinematics by explicit 4x4 products with Rodrigues rotations.
Eigen::Matrix4d oracle_camera(const KinematicChain& chain, const JointConfig& q) {
  Eigen::Matrix4d t = chain.base.matrix();
  for (int i = 0; i < kNumJoints; ++i) {
    const Vec3 k = chain.joints[i].axis.normalized();
    Mat3 kx;
    kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    Eigen::Matrix4d r = Eigen::Matrix4d::Identity();
    r.topLeftCorner<3, 3>() = Mat3::Identity() + std::sin(q[i]) * kx + (1 - std::cos(q[i])) * kx * kx;
    t = t * r * chain.joints[i].link.matrix();
  }
  return t * chain.camera_offset.matrix();
}

/// Rotation angle of R via the trace.
double rotation_angle(const Mat3& r) { return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0)); }

double oracle_point_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

/// Signed distance to a solid finite cone, computed in its meridian half-plane:
/// distance to the triangle (0,0), (L,0), (L,R) in (axial, radial) coordinates.
double oracle_cone(const Vec3& p, const SightCone& c) {
  const Vec3 d = p - c.apex;
  const double x = d.dot(c.axis);
  const double y = (d - x * c.axis).norm();
  const double L = c.length, R = c.base_radius;
  const auto seg = [](double px, double py, double ax, double ay, double bx, double by) {
    const double ex = bx - ax, ey = by - ay;
    const double t = std::clamp(((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0);
    return std::hypot(px - ax - t * ex, py - ay - t * ey);
  };
  // edges of the meridian section: slant apex->rim, base rim->axis, axis
  const double slant = seg(x, y, 0, 0, L, R);
  const double base = seg(x, y, L, 0, L, R);
  const bool inside = x >= 0 && x <= L && y <= R * x / L;
  if (!inside) return std::min(slant, base);
  return -std::min(slant, L - x);
}

// ---------------------------------------------------------------------------
// criteria 1-6

Outcome threshold_continuity() {
  const PlannerParams p = PlannerParams::paper_table1();
  const double a = rescale(p.w_occlusion, p.occlusion_threshold);
  const double b = rescale(p.w_collision, p.collision_threshold);
  const double c = rescale(p.w_reach, p.reach_threshold);
  const double worst = std::max({std::abs(a), std::abs(b), std::abs(c)});
  return {worst <= 1e-12, fmt("occl %.3g col %.3g reach %.3g (tol 1e-12)", a, b, c)};
}

Outcome distance_oracles() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 64);
  int grids = 0, queries = 0, mismatched = 0;
  double worst_independent = 0.0;
  for (; grids < 200; ++grids) {
    GridSpec s;
    s.origin = random_vec(rng, -1, 1);
    s.resolution = std::uniform_real_distribution<double>(0.02, 0.1)(rng);
    s.dims = {dim(rng), dim(rng), dim(rng)};
    OccupancyGrid g(s);
    const double density = std::uniform_real_distribution<double>(0.0005, 0.02)(rng);
    std::bernoulli_distribution fill(density);
    for (int k = 0; k < s.dims[2]; ++k)
      for (int j = 0; j < s.dims[1]; ++j)
        for (int i = 0; i < s.dims[0]; ++i)
          if (fill(rng)) g.set(i, j, k);
    const Aabb box = s.bounds();
    for (int q = 0; q < 5; ++q, ++queries) {
      const Vec3 p = box.min + (box.max - box.min).cwiseProduct(random_vec(rng, -0.2, 1.2));
      const Vec3 target = box.min + (box.max - box.min).cwiseProduct(random_vec(rng, 0, 1));
      if ((target - p).norm() < 1e-3) continue;
      const SightCone cone = SightCone::between(p, target, std::uniform_real_distribution<double>(0.02, 0.2)(rng));
      // scan the bitmap, not the occupied-center list
      double point_scan = std::numeric_limits<double>::infinity();
      double cone_scan = point_scan, cone_indep = point_scan;
      for (int k = 0; k < s.dims[2]; ++k)
        for (int j = 0; j < s.dims[1]; ++j)
          for (int i = 0; i < s.dims[0]; ++i) {
            if (!g.occupied(i, j, k)) continue;
            const Vec3 c = s.center(i, j, k);
            point_scan = std::min(point_scan, (c - p).norm() - s.half_diagonal());
            cone_scan = std::min(cone_scan, geometry::point_cone_signed_distance(c, cone.apex, cone.axis, cone.length,
                                                                                 cone.base_radius) -
                                                s.half_diagonal());
            cone_indep = std::min(cone_indep, oracle_cone(c, cone) - s.half_diagonal());
          }
      if (std::isinf(point_scan)) point_scan = cone_scan = cone_indep = kNoObstacleDistance;
      const double pd = point_grid_distance(g, p);
      const double cd = cone_grid_distance(g, cone);
      if (pd != point_scan || cd != cone_scan) ++mismatched;
      worst_independent = std::max(worst_independent, std::abs(cd - cone_indep));
    }
  }
  const bool pass = mismatched == 0 && worst_independent <= 1e-9;
  return {pass, fmt("%d grids, %d queries, %d mismatches vs voxel scan; max |cone - meridian oracle| %.2g (tol 1e-9)",
                    grids, queries, mismatched, worst_independent)};
}

Outcome jacobian_fd(const KinematicChain& chain) {
  std::mt19937_64 rng(77);
  constexpr double h = 1e-6;
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const JointConfig q = random_q(chain, rng);
    const Jacobian jac = jacobian(chain, q);
    for (int i = 0; i < kNumJoints; ++i) {
      JointConfig qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const Eigen::Matrix4d tp = oracle_camera(chain, qp), tm = oracle_camera(chain, qm);
      const Vec3 dp = (tp.block<3, 1>(0, 3) - tm.block<3, 1>(0, 3)) / (2 * h);
      const Eigen::AngleAxisd aa(Mat3(tp.topLeftCorner<3, 3>() * tm.topLeftCorner<3, 3>().transpose()));
      const Vec3 dw = aa.axis() * aa.angle() / (2 * h);
      worst = std::max(worst, (jac.block<3, 1>(0, i) - dp).cwiseAbs().maxCoeff());
      worst = std::max(worst, (jac.block<3, 1>(3, i) - dw).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-5, fmt("100 configurations, max |J - FD| %.2g (tol 1e-5)", worst)};
}

Outcome ik_soundness(const SimConfig& config) {
  const KinematicChain& chain = config.chain;
  const IkParams& params = config.ik;
  std::mt19937_64 rng(4242);
  int targets = 0, successes = 0, unsound = 0;
  std::string first_violation;
  while (targets < 500) {
    const JointConfig q_goal = random_q(chain, rng);
    if (self_collision(chain, q_goal)) continue;
    JointConfig q_prev = q_goal;
    for (int i = 0; i < kNumJoints; ++i)
      q_prev[i] += std::uniform_real_distribution<double>(-0.8, 0.8)(rng) * params.joint_speed_cap;
    q_prev = chain.clamp_to_limits(q_prev);
    if (self_collision(chain, q_prev)) continue;
    // a few obstacle voxels kept clear of the goal configuration
    OccupancyGrid grid(config.grid);
    const auto goal_caps = world_capsules(chain, forward_kinematics(chain, q_goal));
    const Vec3 tip = forward_kinematics(chain, q_goal).camera.translation();
    for (int v = 0; v < 6; ++v) {
      const Vec3 p = tip + random_vec(rng, -0.6, 0.6);
      const auto cell = config.grid.locate(p);
      if (!cell) continue;
      const Vec3 c = config.grid.center((*cell)[0], (*cell)[1], (*cell)[2]);
      bool clear = true;
      for (const WorldCapsule& cap : goal_caps)
        clear = clear && oracle_point_segment(c, cap.a, cap.b) - cap.radius - config.grid.half_diagonal() >=
                             params.clearance_margin + 0.02;
      if (clear) grid.set((*cell)[0], (*cell)[1], (*cell)[2]);
    }
    ++targets;
    const Pose6 target = forward_kinematics(chain, q_goal).camera_pose();
    const IkResult r = ik_solve(chain, target, q_prev, grid, params);
    if (!r.success) continue;
    ++successes;
    // re-verify with the oracles
    const Eigen::Matrix4d t = oracle_camera(chain, r.q);
    const double pos = (t.block<3, 1>(0, 3) - target.p).norm();
    const double rot = rotation_angle(Mat3(t.topLeftCorner<3, 3>().transpose() * target.rotation()));
    bool ok = pos <= params.position_tolerance + 1e-12 && rot <= params.rotation_tolerance + 1e-12;
    ok = ok && chain.within_limits(r.q);
    ok = ok && (r.q - q_prev).cwiseAbs().maxCoeff() <= params.joint_speed_cap + 1e-12;
    ok = ok && !self_collision(chain, r.q);
    for (const WorldCapsule& cap : world_capsules(chain, forward_kinematics(chain, r.q)))
      for (const Vec3& c : grid.occupied_centers())
        ok = ok && oracle_point_segment(c, cap.a, cap.b) - cap.radius - config.grid.half_diagonal() >=
                       params.clearance_margin - 1e-12;
    if (!ok) {
      ++unsound;
      if (first_violation.empty()) first_violation = fmt("; first violation pos %.3g rot %.3g", pos, rot);
    }
  }
  const bool pass = unsound == 0 && successes >= targets * 8 / 10;
  return {pass, fmt("%d targets, %d successes (need >= 80%%), %d failed re-verification%s", targets, successes,
                    unsound, first_violation.c_str())};
}

Outcome planner_vs_grid_search() {
  std::mt19937_64 rng(555);
  const PlannerParams base = PlannerParams::paper_table1();
  constexpr int kPos = 11, kRot = 11;  // 0.01 m and 0.04 rad over the box
  int states = 0, worse = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  std::vector<double> values(std::size_t(kPos * kPos * kPos) * kRot * kRot * kRot);
  for (; states < 20; ++states) {
    PlannerParams params = base;
    // camera near a target; obstacles around the line of sight; smooth reachability field
    const Vec3 target = random_vec(rng, -0.3, 0.3) + Vec3(0, 0, 1.2);
    const Vec3 dir = random_vec(rng, -1, 1).normalized();
    const double dist = std::uniform_real_distribution<double>(0.6, 1.4)(rng);
    Pose6 camera;
    camera.p = target - dist * dir;
    // optical axis roughly at the target, with a random error
    const Vec3 z = (dir + random_vec(rng, -0.3, 0.3)).normalized();
    const Vec3 x = z.unitOrthogonal();
    Mat3 r;
    r.col(0) = x;
    r.col(1) = z.cross(x);
    r.col(2) = z;
    camera.r = matrix_to_euler_xyz(r);

    GridSpec gs = GridSpec::covering({camera.p - Vec3::Constant(1.0), camera.p + Vec3::Constant(1.0)}, 0.1);
    OccupancyGrid grid(gs);
    const int blocks = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int b = 0; b < blocks; ++b) {
      const Vec3 c = camera.p + std::uniform_real_distribution<double>(0.2, 0.8)(rng) * (target - camera.p) +
                     random_vec(rng, -0.25, 0.25);
      if (auto cell = gs.locate(c)) grid.set((*cell)[0], (*cell)[1], (*cell)[2]);
    }
    GridSpec ms = GridSpec::covering({camera.p - Vec3::Constant(0.5), camera.p + Vec3::Constant(0.5)}, 0.1);
    const Vec3 peak = camera.p + random_vec(rng, -0.4, 0.4);
    std::vector<double> scores(ms.cell_count());
    for (int k = 0; k < ms.dims[2]; ++k)
      for (int j = 0; j < ms.dims[1]; ++j)
        for (int i = 0; i < ms.dims[0]; ++i)
          scores[ms.index(i, j, k)] = std::clamp(0.85 - 0.8 * (ms.center(i, j, k) - peak).norm(), 0.0, 1.0);
    const ReachabilityMap reach(ms, std::move(scores), {});

    PlannerInput in;
    in.camera = camera;
    in.target.p = target;
    in.grid = &grid;
    in.reach = &reach;

    const PlanResult plan = plan_step(in, params);

    // exhaustive search
    const auto axis_value = [&](int a, int idx, int n) {
      return params.lower[a] + (params.upper[a] - params.lower[a]) * idx / (n - 1);
    };
    std::size_t best_index = 0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    int idx[6];
    for (idx[0] = 0; idx[0] < kPos; ++idx[0])
      for (idx[1] = 0; idx[1] < kPos; ++idx[1])
        for (idx[2] = 0; idx[2] < kPos; ++idx[2])
          for (idx[3] = 0; idx[3] < kRot; ++idx[3])
            for (idx[4] = 0; idx[4] < kRot; ++idx[4])
              for (idx[5] = 0; idx[5] < kRot; ++idx[5], ++n) {
                PoseDelta d;
                for (int a = 0; a < 6; ++a) d[a] = axis_value(a, idx[a], a < 3 ? kPos : kRot);
                values[n] = objective(params, in, d);
                if (values[n] < best) {
                  best = values[n];
                  best_index = n;
                }
              }
    // local Lipschitz estimate around the grid optimum: half the largest step to a neighbour, per axis
    const std::array<std::size_t, 6> stride = {std::size_t(kPos * kPos) * kRot * kRot * kRot,
                                               std::size_t(kPos) * kRot * kRot * kRot,
                                               std::size_t(kRot) * kRot * kRot,
                                               std::size_t(kRot) * kRot,
                                               std::size_t(kRot),
                                               1};
    std::array<int, 6> at{};
    {
      std::size_t rem = best_index;
      for (int a = 0; a < 6; ++a) {
        at[a] = int(rem / stride[a]);
        rem %= stride[a];
      }
    }
    double bound = 0.0;
    for (int a = 0; a < 6; ++a) {
      const int count = a < 3 ? kPos : kRot;
      double step = 0.0;
      if (at[a] > 0) step = std::max(step, std::abs(values[best_index - stride[a]] - best));
      if (at[a] + 1 < count) step = std::max(step, std::abs(values[best_index + stride[a]] - best));
      bound += 0.5 * step;
    }
    const double excess = plan.value - best;
    worst_excess = std::max(worst_excess, excess - bound);
    if (excess > bound + 1e-12) ++worse;
  }
  return {worse == 0, fmt("%d states, %d above grid optimum + bound; max (optimizer - grid - bound) %.3g", states,
                          worse, worst_excess)};
}

Outcome reach_interpolation() {
  std::mt19937_64 rng(99);
  GridSpec s;
  s.origin = Vec3(-0.4, 0.1, 0.3);
  s.resolution = 0.1;
  s.dims = {7, 5, 6};
  std::vector<double> scores(s.cell_count());
  for (double& v : scores) v = std::uniform_real_distribution<double>(0, 1)(rng);
  const ReachabilityMap map(s, scores, {});
  int center_bad = 0, corner_bad = 0;
  double worst_center = 0.0;
  for (int n = 0; n < 500; ++n) {
    const int i = std::uniform_int_distribution<int>(0, s.dims[0] - 1)(rng);
    const int j = std::uniform_int_distribution<int>(0, s.dims[1] - 1)(rng);
    const int k = std::uniform_int_distribution<int>(0, s.dims[2] - 1)(rng);
    const double err = std::abs(map.query(s.center(i, j, k)) - map.score(i, j, k));
    worst_center = std::max(worst_center, err);
    if (err > 1e-12) ++center_bad;
  }
  const Aabb box = s.bounds();
  for (int n = 0; n < 500; ++n) {
    const Vec3 p = box.min + (box.max - box.min).cwiseProduct(random_vec(rng, 0, 1));
    double lo = 1.0, hi = 0.0;
    int c0[3];
    for (int a = 0; a < 3; ++a)
      c0[a] = std::clamp(int(std::floor((p[a] - s.origin[a]) / s.resolution - 0.5)), 0, s.dims[a] - 1);
    for (int corner = 0; corner < 8; ++corner) {
      int c[3];
      for (int a = 0; a < 3; ++a) c[a] = std::min(c0[a] + ((corner >> a) & 1), s.dims[a] - 1);
      lo = std::min(lo, map.score(c[0], c[1], c[2]));
      hi = std::max(hi, map.score(c[0], c[1], c[2]));
    }
    const double v = map.query(p);
    if (v < lo - 1e-12 || v > hi + 1e-12) ++corner_bad;
  }
  return {center_bad == 0 && corner_bad == 0,
          fmt("1000 queries: %d center mismatches (max err %.2g, tol 1e-12), %d outside corner range", center_bad,
              worst_center, corner_bad)};
}

// ---------------------------------------------------------------------------
// criteria 7-12

struct Experiments {
  // s1-2obs rows by mask: track+occl, +col, +reach, full
  std::array<AggregateRow, 4> two{};
  std::array<AggregateRow, 4> zero{};
  AggregateRow s2_stop_base, s2_stop_full;
  std::vector<RunMetrics> pooled_full;
};

Experiments run_experiments(const SimConfig& config, const ReachabilityMap& map, int runs, int threads) {
  Experiments e;
  RunOptions options;
  options.threads = threads;
  const auto cases = ablation_cases(config.scenario);
  const auto masks = ablation_masks();
  const auto go = [&](ScenarioSpec spec, const TermMask& mask) {
    spec.runs = runs;
    spec.terms = mask;
    auto result = run(config, spec, &map, options);
    std::fprintf(stderr, "  ran %s %s\n", spec.case_name().c_str(), mask.name().c_str());
    return std::pair{aggregate(result, spec), result};
  };
  for (int m = 0; m < 4; ++m) {
    auto [row, runs2] = go(cases[2], masks[m]);
    e.two[std::size_t(m)] = row;
    if (m == 3) e.pooled_full.insert(e.pooled_full.end(), runs2.begin(), runs2.end());
    e.zero[std::size_t(m)] = go(cases[0], masks[m]).first;
  }
  auto [one_full, runs1] = go(cases[1], masks[3]);
  (void)one_full;
  e.pooled_full.insert(e.pooled_full.end(), runs1.begin(), runs1.end());
  e.s2_stop_base = go(cases[3], masks[0]).first;
  e.s2_stop_full = go(cases[3], masks[3]).first;
  return e;
}

ReachabilityMap obtain_map(const SimConfig& config, const fs::path& path, int threads) {
  if (fs::exists(path)) {
    try {
      ReachabilityMap map = ReachabilityMap::load(path, config.chain.hash());
      const GridSpec expected = GridSpec::covering(config.reachability.box, config.reachability.resolution);
      if (map.meta().orientations == config.reachability.orientations &&
          map.meta().restarts == config.reachability.restarts && map.meta().seed == config.reachability.seed &&
          map.grid().dims == expected.dims && map.grid().resolution == expected.resolution)
        return map;
      std::fprintf(stderr, "cached map %s has other settings; rebuilding\n", path.string().c_str());
    } catch (const Error& e) {
      std::fprintf(stderr, "cached map unusable (%s); rebuilding\n", e.what());
    }
  }
  BuildOptions options;
  options.orientations = config.reachability.orientations;
  options.restarts = config.reachability.restarts;
  options.seed = config.reachability.seed;
  options.threads = threads;
  std::fprintf(stderr, "building reachability map at %s (%d threads)\n", path.string().c_str(), threads);
  ReachabilityMap map = build_map(config.chain, config.reachability.box, config.reachability.resolution, options);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  map.save(path);
  return map;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vistrack acceptance suite"};
  std::string config_path, map_path = "acceptance/reach.map";
  int runs = 50;
  int bins = 4;
  int threads = int(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("-c,--config", config_path, "Config file (JSON); built-in defaults if omitted");
  app.add_option("--map", map_path, "Reachability map cache; built when missing or stale")->capture_default_str();
  app.add_option("--runs", runs, "Runs per configuration for the statistical criteria")->capture_default_str();
  app.add_option("--bins", bins, "Speed-histogram bins for criterion 11")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads")->capture_default_str();
  std::vector<int> known;
  app.add_option("--known-failures", known,
                 "Criteria whose failure does not fail the exit status; they still print FAIL")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const auto is_known = [&](int id) { return std::find(known.begin(), known.end(), id) != known.end(); };

  const SimConfig config = config_path.empty() ? SimConfig::defaults() : SimConfig::load(config_path);
  int failures = 0, unexpected = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    if (!o.pass && !is_known(id)) ++unexpected;
    const char* note = is_known(id) ? (o.pass ? " (listed as known failure, now passing)" : " (known failure)") : "";
    std::printf("criterion %2d %s %s: %s [%.1f s]%s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s,
                note);
    std::fflush(stdout);
  };

  report(1, "threshold-continuity", threshold_continuity);
  report(2, "distance-oracle-equivalence", distance_oracles);
  report(3, "jacobian-vs-finite-differences", [&] { return jacobian_fd(config.chain); });
  report(4, "ik-soundness", [&] { return ik_soundness(config); });
  report(5, "plan-step-vs-grid-search", planner_vs_grid_search);
  report(6, "reachability-interpolation", reach_interpolation);

  const auto t0 = std::chrono::steady_clock::now();
  const ReachabilityMap map = obtain_map(config, map_path, threads);
  const Experiments e = run_experiments(config, map, runs, threads);
  std::fprintf(stderr, "map + experiments: %.1f s\n",
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

  report(7, "collision-failures-full-vs-baseline", [&] {
    const int base = e.two[0].collision_failures, full = e.two[3].collision_failures;
    return Outcome{base >= 10 && 2 * full <= base,
                   fmt("s1-2obs, %d runs: full %d vs track+occl %d (need full <= 0.5 x baseline, baseline >= 10)",
                       e.two[0].runs, full, base)};
  });
  report(8, "ik-failure-with-reach", [&] {
    const double col = e.two[1].mean_ik_failure_rate, full = e.two[3].mean_ik_failure_rate;
    const double occl = e.two[0].mean_ik_failure_rate, reach = e.two[2].mean_ik_failure_rate;
    return Outcome{full <= 0.5 * col && reach <= 0.5 * occl,
                   fmt("s1-2obs: full %.3f vs track+occl+col %.3f (ratio %.2f); track+occl+reach %.3f vs track+occl "
                       "%.3f (ratio %.2f); need both <= 0.5",
                       full, col, col > 0 ? full / col : 0.0, reach, occl, occl > 0 ? reach / occl : 0.0)};
  });
  report(9, "free-space-with-reach", [&] {
    const AggregateRow& r = e.zero[2];
    const AggregateRow& f = e.zero[3];
    const bool pass = r.mean_tracking_rate >= 0.9 && f.mean_tracking_rate >= 0.9 && r.collision_failures == 0 &&
                      f.collision_failures == 0;
    return Outcome{pass, fmt("s1-0obs: track+occl+reach tracking %.3f, %d collisions; full tracking %.3f, %d "
                             "collisions (need >= 0.9, 0)",
                             r.mean_tracking_rate, r.collision_failures, f.mean_tracking_rate, f.collision_failures)};
  });
  report(10, "blocked-stationary-tracking", [&] {
    const double gap = e.s2_stop_full.mean_tracking_rate - e.s2_stop_base.mean_tracking_rate;
    return Outcome{gap >= 0.15, fmt("s2-stop: full %.3f vs track+occl %.3f, gap %.3f (need >= 0.15)",
                                    e.s2_stop_full.mean_tracking_rate, e.s2_stop_base.mean_tracking_rate, gap)};
  });
  report(11, "collision-failures-vs-obstacle-speed", [&] {
    const SpeedHistogram h =
        speed_histogram(e.pooled_full, config.scenario.speed_min, config.scenario.speed_max, bins);
    bool monotone = true;
    std::string counts;
    for (std::size_t b = 0; b < h.failures.size(); ++b) {
      if (b > 0 && h.failures[b] < h.failures[b - 1]) monotone = false;
      counts += (b ? "," : "") + std::to_string(h.failures[b]);
    }
    return Outcome{monotone && e.pooled_full.size() >= 100,
                   fmt("full, %zu pooled 1- and 2-obstacle runs, failures per speed bin [%s] (need non-decreasing)",
                       e.pooled_full.size(), counts.c_str())};
  });
  report(12, "stage-timing", [&] {
    const BenchReport b = benchmark(config, &map, 5);
    const bool pass = b.plan_step.median_ms <= 20.0 && b.ik_solve.median_ms <= 30.0 && b.rasterize.median_ms <= 50.0;
    return Outcome{pass, fmt("medians: plan_step %.2f ms (<= 20), ik_solve %.2f ms (<= 30), rasterize %.2f ms (<= 50)",
                             b.plan_step.median_ms, b.ik_solve.median_ms, b.rasterize.median_ms)};
  });

  std::printf("%s: %d of 12 criteria failed, %d of them listed as known failures\n",
              failures == 0 ? "ACCEPTED" : "REJECTED", failures, failures - unexpected);
  return unexpected == 0 ? 0 : 1;
}
