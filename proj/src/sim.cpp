#include "vistrack/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace vistrack {

void ScenarioSpec::validate() const {
  if (!(dt > 0.0)) throw SchemaError("scenario.dt: must be > 0");
  if (horizon < 1) throw SchemaError("scenario.horizon: must be >= 1");
  if (runs < 0) throw SchemaError("scenario.runs: must be >= 0");
  if (obstacle_count < 0 || obstacle_count > 2)
    throw SchemaError("scenario.obstacles: must be in [0, 2]");
  if (kind == ScenarioKind::Blocking && obstacle_count != 1)
    throw SchemaError("scenario.obstacles: the blocking scenario has exactly one obstacle");
  if (!(speed_min >= 0.0) || !(speed_min <= speed_max))
    throw SchemaError("scenario.speed_range: need 0 <= min <= max");
  if (!(camera.fov_half_angle > 0.0) || !(camera.min_range < camera.max_range))
    throw SchemaError("scenario.camera: invalid field of view or range");
}

std::string ScenarioSpec::case_name() const {
  if (kind == ScenarioKind::Crossing) return "s1-" + std::to_string(obstacle_count) + "obs";
  return target_motion == TargetMotion::Stationary ? "s2-stop" : "s2-move";
}

std::uint64_t run_seed(std::uint64_t seed, int index) {
  // splitmix64 of (seed, index)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (std::uint64_t(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 uniform_in(std::mt19937_64& rng, const Aabb& box) {
  Vec3 p;
  for (int a = 0; a < 3; ++a)
    p[a] = box.max[a] > box.min[a] ? uniform(rng, box.min[a], box.max[a]) : box.min[a];
  return p;
}

}  // namespace

Trajectory target_trajectory(TargetMotion motion, const Aabb& box, double speed, double duration,
                             std::mt19937_64& rng) {
  Trajectory t;
  t.waypoints.push_back(uniform_in(rng, box));
  if (motion == TargetMotion::Stationary || speed <= 0.0) return t;
  double length = 0.0;
  const double needed = speed * duration + 1.0;
  while (length < needed) {
    const Vec3 next = uniform_in(rng, box);
    const double seg = (next - t.waypoints.back()).norm();
    if (seg < 1e-3) continue;
    length += seg;
    t.waypoints.push_back(next);
    t.speeds.push_back(speed);
  }
  return t;
}

std::vector<ObstacleBody> obstacle_trajectory_gen(ScenarioKind kind, int count, double speed_min,
                                                  double speed_max, const SceneLayout& layout,
                                                  const Vec3& corridor_start, const Vec3& camera,
                                                  const Vec3& target, std::mt19937_64& rng) {
  std::vector<ObstacleBody> out;
  const Shape cube = Shape::cube(layout.obstacle_edge);
  if (kind == ScenarioKind::Crossing) {
    const Vec3 corridor_end = layout.target_box.center();
    for (int n = 0; n < count; ++n) {
      const double f = uniform(rng, layout.corridor_min, layout.corridor_max);
      Vec3 crossing = corridor_start + f * (corridor_end - corridor_start);
      crossing.z() += uniform(rng, -layout.corridor_jitter, layout.corridor_jitter);
      const double yaw = uniform(rng, -layout.crossing_yaw, layout.crossing_yaw);
      const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      const Vec3 dir(sign * std::cos(yaw), std::sin(yaw), 0.0);
      const double speed = uniform(rng, speed_min, speed_max);
      const double t_cross = uniform(rng, layout.crossing_time_min, layout.crossing_time_max);
      ObstacleBody body;
      body.id = n;
      body.shape = cube;
      body.trajectory.waypoints = {crossing - layout.crossing_half_length * dir,
                                   crossing + layout.crossing_half_length * dir};
      body.trajectory.speeds = {speed};
      body.trajectory.start_time = t_cross - layout.crossing_half_length / speed;
      out.push_back(std::move(body));
    }
  } else {
    const double f = uniform(rng, layout.block_min, layout.block_max);
    const Vec3 stop = camera + f * (target - camera);
    const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const double speed = uniform(rng, speed_min, speed_max);
    const double arrival = uniform(rng, layout.block_arrival_min, layout.block_arrival_max);
    const double approach = 2.0;
    ObstacleBody body;
    body.id = 0;
    body.shape = cube;
    body.trajectory.waypoints = {stop - approach * Vec3(sign, 0.0, 0.0), stop};
    body.trajectory.speeds = {speed};
    body.trajectory.start_time = arrival - approach / speed;
    out.push_back(std::move(body));
  }
  return out;
}

// ---------------------------------------------------------------------------

Simulation::Simulation(const SimConfig& config, const ScenarioSpec& spec, const ReachabilityMap* map,
                       int run_index)
    : config_(config), spec_(spec), map_(map), run_index_(run_index), grid_(config.grid) {
  spec_.validate();
  planner_ = config.planner;
  planner_.terms = spec.terms;
  std::mt19937_64 rng(run_seed(spec.seed, run_index));
  const double duration = spec.horizon * spec.dt;
  target_path_ = target_trajectory(spec.target_motion, config.layout.target_box,
                                   config.layout.target_speed, duration, rng);
  q_ = config.layout.home;
  const ForwardKinematics fk = forward_kinematics(config.chain, q_);
  const Vec3 shoulder = fk.joint_origin(1);
  const Vec3 target0 = target_path_.position(0.0);
  std::mt19937_64 obstacle_rng(run_seed(spec.seed ^ 0x5bd1e995ULL, run_index));
  obstacles_ = obstacle_trajectory_gen(spec.kind, spec.obstacle_count, spec.speed_min, spec.speed_max,
                                       config.layout, shoulder, fk.camera.translation(), target0,
                                       obstacle_rng);
  target_estimate_.p = target0;
}

SceneState Simulation::scene_at(double t) const {
  SceneState s;
  s.time = t;
  s.target = target_path_.position(t);
  s.target_radius = config_.layout.target_radius;
  for (const ObstacleBody& b : obstacles_) s.obstacles.push_back({b.id, b.shape, b.trajectory.position(t)});
  return s;
}

StepRecord Simulation::step() {
  using clock = std::chrono::steady_clock;
  const auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  if (terminated_) throw std::logic_error("simulation already terminated");
  StepRecord rec;
  rec.tick = tick_;
  // (1) advance the world
  const double t = (tick_ + 1) * spec_.dt;
  const SceneState scene = scene_at(t);
  rec.target = scene.target;

  // (2) sense the target
  const ForwardKinematics fk = forward_kinematics(config_.chain, q_);
  const Pose6 camera = fk.camera_pose();
  rec.camera = camera.p;
  const double range = (scene.target - camera.p).norm();
  rec.target_visible = view_angle(camera, scene.target) <= spec_.camera.fov_half_angle &&
                       range >= spec_.camera.min_range && range <= spec_.camera.max_range &&
                       segment_visibility(scene, camera.p, scene.target);
  if (rec.target_visible) target_estimate_.p = scene.target;

  // (3) occupancy grid without the arm and the target
  const auto t0 = clock::now();
  Exclusions ex;
  ex.capsules = world_capsules(config_.chain, fk);
  ex.target = scene.target;
  ex.target_radius = scene.target_radius;
  rasterize_into(grid_, scene, ex, config_.layout.workspace);
  const auto t1 = clock::now();

  // (4) plan the camera pose
  PlannerInput input;
  input.camera = camera;
  input.target = target_estimate_;
  input.grid = &grid_;
  input.reach = map_;
  const PlanResult plan = plan_step(input, planner_);
  const Pose6 desired = compose(camera, plan.delta);
  rec.objective = plan.value;
  rec.plan_degraded = plan.degraded;
  const auto t2 = clock::now();

  // (5) joint configuration; hold on failure
  const IkResult ik = ik_solve(config_.chain, desired, q_, grid_, config_.ik);
  const auto t3 = clock::now();
  rec.ik_failed = !ik.success;
  if (ik.success) q_ = ik.q;
  rec.raster_ms = ms(t0, t1);
  rec.plan_ms = ms(t1, t2);
  rec.ik_ms = ms(t2, t3);

  // (6) ground-truth collision
  const ForwardKinematics fk_new = forward_kinematics(config_.chain, q_);
  rec.reachability = map_ != nullptr ? map_->query(fk_new.camera.translation()) : 0.0;
  const auto caps = world_capsules(config_.chain, fk_new);
  int hit = -1;
  for (std::size_t b = 0; b < scene.obstacles.size(); ++b) {
    for (const WorldCapsule& cap : caps) {
      const double d = scene.obstacles[b].segment_distance(cap.a, cap.b) - cap.radius;
      rec.min_obstacle_distance = std::min(rec.min_obstacle_distance, d);
      if (d < 0.0 && hit < 0) hit = int(b);
    }
  }
  rec.collision = hit >= 0;

  // (7) bookkeeping
  ++tick_;
  if (rec.target_visible) ++visible_ticks_;
  if (rec.ik_failed) ++ik_failures_;
  if (rec.collision) {
    terminated_ = true;
    collision_speed_ = obstacles_[std::size_t(hit)].trajectory.max_speed();
  }
  if (tick_ >= spec_.horizon) terminated_ = true;
  return rec;
}

RunMetrics Simulation::run_to_end(std::vector<StepRecord>* trace) {
  while (!terminated_) {
    StepRecord rec = step();
    if (trace != nullptr) trace->push_back(rec);
  }
  RunMetrics m;
  m.run = run_index_;
  m.collided = collision_speed_.has_value();
  m.elapsed_ticks = tick_;
  m.ik_failure_rate = tick_ > 0 ? double(ik_failures_) / tick_ : 0.0;
  m.tracking_rate = tick_ > 0 ? double(visible_ticks_) / tick_ : 0.0;
  for (const ObstacleBody& b : obstacles_) m.obstacle_speeds.push_back(b.trajectory.max_speed());
  m.collision_speed = collision_speed_;
  return m;
}

// ---------------------------------------------------------------------------

std::vector<RunMetrics> run(const SimConfig& config, const ScenarioSpec& spec, const ReachabilityMap* map,
                            const RunOptions& options) {
  spec.validate();
  std::vector<RunMetrics> results(std::size_t(spec.runs));
  std::vector<std::vector<StepRecord>> traces(options.on_trace ? std::size_t(spec.runs) : 0);
  const auto one = [&](int i) {
    Simulation sim(config, spec, map, i);
    results[std::size_t(i)] = sim.run_to_end(options.on_trace ? &traces[std::size_t(i)] : nullptr);
  };
  const int threads = std::max(1, std::min(options.threads, spec.runs));
  if (threads == 1) {
    for (int i = 0; i < spec.runs; ++i) one(i);
  } else {
    std::mutex mu;
    int next = 0;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (;;) {
          int i;
          {
            std::lock_guard lock(mu);
            if (next >= spec.runs) return;
            i = next++;
          }
          one(i);
        }
      });
    for (auto& th : pool) th.join();
  }
  for (int i = 0; i < spec.runs; ++i) {
    if (options.on_run) options.on_run(results[std::size_t(i)]);
    if (options.on_trace) options.on_trace(i, traces[std::size_t(i)]);
  }
  return results;
}

AggregateRow aggregate(const std::vector<RunMetrics>& runs, const ScenarioSpec& spec) {
  AggregateRow row;
  row.case_name = spec.case_name();
  row.terms = spec.terms.name();
  row.runs = int(runs.size());
  if (runs.empty()) return row;
  for (const RunMetrics& m : runs) {
    row.collision_failures += m.collided ? 1 : 0;
    row.mean_elapsed_ticks += m.elapsed_ticks;
    row.mean_ik_failure_rate += m.ik_failure_rate;
    row.mean_tracking_rate += m.tracking_rate;
  }
  const double n = double(runs.size());
  row.mean_elapsed_ticks /= n;
  row.mean_ik_failure_rate /= n;
  row.mean_tracking_rate /= n;
  return row;
}

std::vector<ScenarioSpec> ablation_cases(const ScenarioSpec& base) {
  std::vector<ScenarioSpec> cases;
  for (int n = 0; n <= 2; ++n) {
    ScenarioSpec s = base;
    s.kind = ScenarioKind::Crossing;
    s.target_motion = TargetMotion::RandomWalk;
    s.obstacle_count = n;
    cases.push_back(s);
  }
  for (TargetMotion motion : {TargetMotion::Stationary, TargetMotion::RandomWalk}) {
    ScenarioSpec s = base;
    s.kind = ScenarioKind::Blocking;
    s.target_motion = motion;
    s.obstacle_count = 1;
    cases.push_back(s);
  }
  return cases;
}

std::vector<TermMask> ablation_masks() {
  return {TermMask{true, false, false}, TermMask{true, true, false}, TermMask{true, false, true},
          TermMask{true, true, true}};
}

SpeedHistogram speed_histogram(const std::vector<RunMetrics>& runs, double lo, double hi, int bins) {
  SpeedHistogram h;
  bins = std::max(bins, 1);
  for (int b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * b / bins);
  h.failures.assign(std::size_t(bins), 0);
  h.obstacles.assign(std::size_t(bins), 0);
  const auto bin_of = [&](double v) {
    const int b = int(std::floor((v - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1);
  };
  for (const RunMetrics& m : runs) {
    for (double v : m.obstacle_speeds) ++h.obstacles[std::size_t(bin_of(v))];
    if (m.collision_speed) ++h.failures[std::size_t(bin_of(*m.collision_speed))];
  }
  return h;
}

namespace {

StageStats stage_stats(std::vector<double> v) {
  StageStats s;
  s.samples = int(v.size());
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const auto at = [&](double q) {
    const double pos = q * double(v.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
  };
  s.median_ms = at(0.5);
  s.p95_ms = at(0.95);
  return s;
}

}  // namespace

BenchReport benchmark(const SimConfig& config, const ReachabilityMap* map, int runs) {
  ScenarioSpec spec = config.scenario;
  spec.kind = ScenarioKind::Crossing;
  spec.target_motion = TargetMotion::RandomWalk;
  spec.obstacle_count = 2;
  spec.terms = TermMask{};
  spec.runs = std::max(runs, 1);
  std::vector<double> raster, plan, ik;
  for (int i = 0; i < spec.runs; ++i) {
    Simulation sim(config, spec, map, i);
    std::vector<StepRecord> trace;
    sim.run_to_end(&trace);
    for (const StepRecord& r : trace) {
      raster.push_back(r.raster_ms);
      plan.push_back(r.plan_ms);
      ik.push_back(r.ik_ms);
    }
  }
  return {stage_stats(std::move(raster)), stage_stats(std::move(plan)), stage_stats(std::move(ik))};
}

nlohmann::json bench_json(const BenchReport& report) {
  const auto stage = [](const StageStats& s) {
    return nlohmann::json{{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"samples", s.samples}};
  };
  return {{"rasterize", stage(report.rasterize)},
          {"plan_step", stage(report.plan_step)},
          {"ik_solve", stage(report.ik_solve)}};
}

void write_trace_csv(std::ostream& out, const std::vector<StepRecord>& trace) {
  out << "tick,target_visible,ik_failed,collision,min_obstacle_distance,objective,reachability,"
         "plan_degraded,raster_ms,plan_ms,ik_ms,camera_x,camera_y,camera_z,target_x,target_y,target_z\n";
  char line[512];
  for (const StepRecord& r : trace) {
    std::snprintf(line, sizeof line, "%d,%d,%d,%d,%.6f,%.9g,%.6f,%d,%.4f,%.4f,%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  r.tick, int(r.target_visible), int(r.ik_failed), int(r.collision),
                  r.min_obstacle_distance, r.objective, r.reachability, int(r.plan_degraded), r.raster_ms,
                  r.plan_ms, r.ik_ms, r.camera[0], r.camera[1], r.camera[2], r.target[0], r.target[1],
                  r.target[2]);
    out << line;
  }
}

void write_runs_csv(std::ostream& out, const std::vector<RunMetrics>& runs) {
  out << "run,collided,elapsed_ticks,ik_failure_rate,tracking_rate,collision_speed\n";
  char line[256];
  for (const RunMetrics& m : runs) {
    std::snprintf(line, sizeof line, "%d,%d,%d,%.6f,%.6f,%s\n", m.run, int(m.collided), m.elapsed_ticks,
                  m.ik_failure_rate, m.tracking_rate,
                  m.collision_speed ? std::to_string(*m.collision_speed).c_str() : "");
    out << line;
  }
}

void write_table_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "case,terms,runs,collision_failures,mean_elapsed_ticks,mean_ik_failure_rate,mean_tracking_rate\n";
  char line[256];
  for (const AggregateRow& r : rows) {
    std::snprintf(line, sizeof line, "%s,%s,%d,%d,%.2f,%.4f,%.4f\n", r.case_name.c_str(), r.terms.c_str(),
                  r.runs, r.collision_failures, r.mean_elapsed_ticks, r.mean_ik_failure_rate,
                  r.mean_tracking_rate);
    out << line;
  }
}

nlohmann::json table_json(const std::vector<AggregateRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const AggregateRow& r : rows)
    j.push_back({{"case", r.case_name},
                 {"terms", r.terms},
                 {"runs", r.runs},
                 {"collision_failures", r.collision_failures},
                 {"mean_elapsed_ticks", r.mean_elapsed_ticks},
                 {"mean_ik_failure_rate", r.mean_ik_failure_rate},
                 {"mean_tracking_rate", r.mean_tracking_rate}});
  return j;
}

void write_histogram_csv(std::ostream& out, const SpeedHistogram& h) {
  out << "speed_lo,speed_hi,collision_failures,obstacles\n";
  char line[128];
  for (std::size_t b = 0; b < h.failures.size(); ++b) {
    std::snprintf(line, sizeof line, "%.3f,%.3f,%d,%d\n", h.edges[b], h.edges[b + 1], h.failures[b],
                  h.obstacles[b]);
    out << line;
  }
}

}  // namespace vistrack
