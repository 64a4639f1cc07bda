#pragma once

#include "vistrack/ik.hpp"
#include "vistrack/kinematics.hpp"
#include "vistrack/planner.hpp"
#include "vistrack/reachability.hpp"
#include "vistrack/world.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vistrack {

enum class ScenarioKind {
  Crossing = 1,  // obstacles cross between the arm and the target
  Blocking = 2,  // one obstacle stops on the initial line of sight
};

enum class TargetMotion { RandomWalk, Stationary };

struct CameraModel {
  double fov_half_angle = 0.6;  // rad
  double min_range = 0.3;       // m
  double max_range = 3.0;       // m
};

/// Declarative description of one experiment case.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Crossing;
  TargetMotion target_motion = TargetMotion::RandomWalk;
  int obstacle_count = 0;
  double speed_min = 0.8;   // m/s
  double speed_max = 1.2;   // m/s
  double dt = 0.05;         // s
  int horizon = 100;        // ticks
  int runs = 50;
  std::uint64_t seed = 1;
  TermMask terms;
  CameraModel camera;

  void validate() const;
  std::string case_name() const;
};

/// Scene geometry shared by every case.
struct SceneLayout {
  Aabb workspace{Vec3(-2.5, -0.5, 0.0), Vec3(0.5, 3.5, 3.0)};
  Aabb target_box{Vec3(-1.0, 1.6, 1.0), Vec3(-1.0, 2.2, 1.8)};
  double target_speed = 0.5;    // m/s
  double target_radius = 0.05;  // m
  double obstacle_edge = 0.25;  // m, cube obstacles
  /// Crossing paths pass the base->target corridor at this fraction range.
  double corridor_min = 0.2;
  double corridor_max = 0.5;
  double corridor_jitter = 0.25;     // m, vertical offset of the crossing point
  double crossing_yaw = 0.35;        // rad, max deviation from the x axis
  double crossing_half_length = 2.5; // m
  double crossing_time_min = 1.0;    // s
  double crossing_time_max = 4.0;    // s
  /// Blocking obstacle stops at this fraction of the initial camera->target segment.
  double block_min = 0.4;
  double block_max = 0.6;
  double block_arrival_min = 0.5;    // s
  double block_arrival_max = 1.0;    // s
  JointConfig home = JointConfig::Zero();
};

/// Everything one simulation needs besides the scenario and the map.
struct SimConfig {
  KinematicChain chain = KinematicChain::default_chain();
  GridSpec grid;
  SceneLayout layout;
  PlannerParams planner = PlannerParams::paper_table1();
  IkParams ik;
  ScenarioSpec scenario;
  struct Reachability {
    Aabb box{Vec3(-2.5, -0.5, 0.0), Vec3(0.5, 3.5, 3.0)};
    double resolution = 0.1;
    int orientations = 50;
    int restarts = 8;
    std::uint64_t seed = 7;
    std::string file = "reach.map";
  } reachability;
  std::string hash;  // of the source file, or of the defaults

  static SimConfig defaults();
  static SimConfig from_json(const nlohmann::json& j);
  static SimConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Per-tick record.
struct StepRecord {
  int tick = 0;
  bool target_visible = false;
  bool ik_failed = false;
  bool collision = false;
  double min_obstacle_distance = kNoObstacleDistance;
  double objective = 0.0;
  double reachability = 0.0;
  bool plan_degraded = false;
  double raster_ms = 0.0;
  double plan_ms = 0.0;
  double ik_ms = 0.0;
  Vec3 camera = Vec3::Zero();
  Vec3 target = Vec3::Zero();
};

struct RunMetrics {
  int run = 0;
  bool collided = false;
  int elapsed_ticks = 0;
  double ik_failure_rate = 0.0;
  double tracking_rate = 0.0;
  std::vector<double> obstacle_speeds;
  std::optional<double> collision_speed;  // speed of the obstacle that was hit
};

/// One row of an ablation table.
struct AggregateRow {
  std::string case_name;
  std::string terms;
  int runs = 0;
  int collision_failures = 0;
  double mean_elapsed_ticks = 0.0;
  double mean_ik_failure_rate = 0.0;
  double mean_tracking_rate = 0.0;
};

AggregateRow aggregate(const std::vector<RunMetrics>& runs, const ScenarioSpec& spec);

/// Seed of run `index` of a scenario; independent of the term mask so every
/// configuration faces identical scenes.
std::uint64_t run_seed(std::uint64_t seed, int index);

/// Random-waypoint walk inside `box` at constant speed, long enough for
/// `duration` seconds. Stationary targets get a single waypoint.
Trajectory target_trajectory(TargetMotion motion, const Aabb& box, double speed, double duration,
                             std::mt19937_64& rng);

/// Crossing obstacles (Crossing) or one blocker stopping on the segment
/// camera->target (Blocking). Speeds are uniform in [speed_min, speed_max].
std::vector<ObstacleBody> obstacle_trajectory_gen(ScenarioKind kind, int count, double speed_min,
                                                  double speed_max, const SceneLayout& layout,
                                                  const Vec3& corridor_start, const Vec3& camera,
                                                  const Vec3& target, std::mt19937_64& rng);

/// Closed-loop simulation of one run.
class Simulation {
 public:
  Simulation(const SimConfig& config, const ScenarioSpec& spec, const ReachabilityMap* map,
             int run_index);

  bool terminated() const { return terminated_; }
  int tick() const { return tick_; }
  const JointConfig& joints() const { return q_; }
  const std::vector<ObstacleBody>& obstacles() const { return obstacles_; }
  const Trajectory& target_path() const { return target_path_; }
  SceneState scene_at(double t) const;

  /// Advance one tick: move bodies, sense, rasterize, plan, solve IK, check
  /// ground-truth collision. Throws std::logic_error after termination.
  StepRecord step();

  /// Steps until the horizon or a collision.
  RunMetrics run_to_end(std::vector<StepRecord>* trace = nullptr);

  /// Replace the generated obstacles (scripted tests).
  void set_obstacles(std::vector<ObstacleBody> obstacles) { obstacles_ = std::move(obstacles); }

 private:
  const SimConfig& config_;
  ScenarioSpec spec_;
  const ReachabilityMap* map_;
  int run_index_;
  PlannerParams planner_;
  Trajectory target_path_;
  std::vector<ObstacleBody> obstacles_;
  OccupancyGrid grid_;
  JointConfig q_;
  Pose6 target_estimate_;
  int tick_ = 0;
  bool terminated_ = false;
  int visible_ticks_ = 0;
  int ik_failures_ = 0;
  std::optional<double> collision_speed_;
};

struct RunOptions {
  int threads = 1;
  std::function<void(const RunMetrics&)> on_run;  // called in run order
  std::function<void(int, const std::vector<StepRecord>&)> on_trace;
};

/// Execute `spec.runs` independent runs.
std::vector<RunMetrics> run(const SimConfig& config, const ScenarioSpec& spec,
                            const ReachabilityMap* map, const RunOptions& options = {});

/// The five cases: crossing with 0/1/2 obstacles, blocking with a stationary
/// or moving target.
std::vector<ScenarioSpec> ablation_cases(const ScenarioSpec& base);
/// {track,occl}, {track,occl,col}, {track,occl,reach}, full.
std::vector<TermMask> ablation_masks();

struct SpeedHistogram {
  std::vector<double> edges;        // bins [edges[i], edges[i+1])
  std::vector<int> failures;
  std::vector<int> obstacles;       // obstacles seen per bin
};

/// Collision failures binned by the speed of the obstacle that was hit.
SpeedHistogram speed_histogram(const std::vector<RunMetrics>& runs, double lo, double hi, int bins);

struct StageStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  int samples = 0;
};

struct BenchReport {
  StageStats rasterize;
  StageStats plan_step;
  StageStats ik_solve;
};

/// Stage wall times over every tick of `runs` single-threaded runs of the
/// two-obstacle crossing case with all terms enabled.
BenchReport benchmark(const SimConfig& config, const ReachabilityMap* map, int runs);
nlohmann::json bench_json(const BenchReport& report);

void write_trace_csv(std::ostream& out, const std::vector<StepRecord>& trace);
void write_runs_csv(std::ostream& out, const std::vector<RunMetrics>& runs);
void write_table_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
nlohmann::json table_json(const std::vector<AggregateRow>& rows);
void write_histogram_csv(std::ostream& out, const SpeedHistogram& histogram);

}  // namespace vistrack
