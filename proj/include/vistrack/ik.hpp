#pragma once

#include "vistrack/kinematics.hpp"
#include "vistrack/world.hpp"

#include <cstdint>

namespace vistrack {

/// Settings for the collision-aware, continuity-preserving IK solver.
struct IkParams {
  double position_tolerance = 1e-3;  // m
  double rotation_tolerance = 1e-2;  // rad
  int max_iterations = 60;
  double continuity_weight = 0.05;
  double collision_weight = 2.0;
  double clearance_margin = 0.03;    // m, over the grid's conservative distance
  double joint_speed_cap = 0.5;      // rad per tick; <= 0 disables the cap
  double damping = 0.02;
  double influence_distance = 0.15;  // clearance cost is active below this, m
  double max_joint_step = 0.3;       // rad per iteration

  void validate() const;
};

struct IkResult {
  bool success = false;
  JointConfig q = JointConfig::Zero();  // solution, or q_prev on failure
  int iterations = 0;
  double position_error = 0.0;
  double rotation_error = 0.0;

  explicit operator bool() const { return success; }
};

/// Damped least squares on the camera pose error, with joint-limit,
/// continuity and clearance costs descended in the Jacobian null space.
/// Seeded at q_prev; every iterate stays within the joint limits and within
/// the speed cap of q_prev. Success requires the pose tolerance, no self
/// collision, and every link capsule at least `clearance_margin` from the grid.
IkResult ik_solve(const KinematicChain& chain, const Pose6& target, const JointConfig& q_prev,
                  const OccupancyGrid& grid, const IkParams& params);

/// Verifies the success conditions of ik_solve for an arbitrary q.
bool ik_conditions_hold(const KinematicChain& chain, const Pose6& target, const JointConfig& q,
                        const JointConfig& q_prev, const OccupancyGrid& grid, const IkParams& params);

/// True iff one of `restarts` randomly seeded solves (empty grid, no speed cap
/// or continuity cost) succeeds. Deterministic in `seed`.
bool ik_reachable(const KinematicChain& chain, const Pose6& target, std::uint64_t seed,
                  int restarts, const IkParams& params = {});

}  // namespace vistrack
