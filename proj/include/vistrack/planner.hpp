#pragma once

#include "vistrack/kinematics.hpp"
#include "vistrack/reachability.hpp"
#include "vistrack/world.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace vistrack {

/// Per-tick change of the camera pose: position (m) then Euler-XYZ (rad).
using PoseDelta = Eigen::Matrix<double, 6, 1>;

/// Coefficients of the cubic rescale w0 * (w1 * x + w2)^3.
struct RescaleWeights {
  double w0 = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
};

inline double rescale(const RescaleWeights& w, double x) {
  const double y = w.w1 * x + w.w2;
  return w.w0 * y * y * y;
}

/// Which avoidance terms participate; tracking is always on.
struct TermMask {
  bool occlusion = true;
  bool collision = true;
  bool reachability = true;

  /// Accepts '+'-separated names, e.g. "track+occl+reach"; "full" for all.
  static TermMask parse(const std::string& text);
  std::string name() const;
  bool operator==(const TermMask&) const = default;
};

struct PlannerParams {
  PoseDelta lower = PoseDelta::Zero();
  PoseDelta upper = PoseDelta::Zero();
  RescaleWeights w_distance;
  RescaleWeights w_angle;
  RescaleWeights w_occlusion;
  RescaleWeights w_collision;
  RescaleWeights w_reach;
  double desired_distance = 1.0;       // m
  double occlusion_threshold = 0.3;    // m
  double collision_threshold = 1.0;    // m
  double reach_threshold = 0.5;
  double cone_base_radius = 0.10;      // m, sight-cone radius at the target
  int max_evaluations = 1500;
  double step_tolerance = 1e-4;
  double gradient_step = 1e-6;
  /// Positions per axis of the coarse seed lattice over the box; < 2 disables it.
  int seed_lattice = 3;
  TermMask terms;

  /// Bounds, weights and thresholds of the "paper-table1" profile.
  static PlannerParams paper_table1();
  void validate() const;

  nlohmann::json to_json() const;
  /// Starts from `base` (defaults to paper-table1) and applies the keys present.
  static PlannerParams from_json(const nlohmann::json& j, const PlannerParams& base = paper_table1());
};

struct PlannerInput {
  Pose6 camera;                 // current camera pose x_ee
  Pose6 target;                 // latest target estimate x_T
  const OccupancyGrid* grid = nullptr;
  const ReachabilityMap* reach = nullptr;
};

/// x_ee ⊕ Δx: positions add, rotations compose in the world frame.
Pose6 compose(const Pose6& pose, const PoseDelta& delta);

/// Angle between the camera's optical axis (+z) and the direction to the
/// target, in [0, pi]; 0 when the target coincides with the camera.
double view_angle(const Pose6& camera, const Vec3& target);

double term_track(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate);
double term_occl(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate);
double term_col(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate);
double term_reach(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate);

struct TermValues {
  double track = 0.0;
  double occl = 0.0;
  double col = 0.0;
  double reach = 0.0;
  double total() const { return track + occl + col + reach; }
};

/// Terms at the candidate pose; masked-off terms are 0.
TermValues evaluate_terms(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate);
double objective(const PlannerParams& params, const PlannerInput& input, const PoseDelta& delta);

struct PlanResult {
  PoseDelta delta = PoseDelta::Zero();
  double value = 0.0;          // objective at delta
  double start_value = 0.0;    // objective at delta = 0
  int evaluations = 0;
  bool degraded = false;       // evaluation budget ran out
};

/// Box-constrained minimization of the objective over Δx, started at Δx = 0.
/// Projected quasi-Newton descent with central-difference gradients; a second
/// descent is started from the best point of a coarse position lattice when
/// that point beats the first descent's result. The result stays in the box
/// and is never worse than Δx = 0.
PlanResult plan_step(const PlannerInput& input, const PlannerParams& params);

/// Evaluation count that fits `budget_ms` of objective evaluations on this
/// machine for the given input.
int calibrate_evaluation_budget(const PlannerInput& input, const PlannerParams& params,
                                double budget_ms);

}  // namespace vistrack
