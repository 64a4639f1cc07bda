#include "vistrack/ik.hpp"

#include "vistrack/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace vistrack {

void IkParams::validate() const {
  if (!(position_tolerance > 0.0) || !(rotation_tolerance > 0.0))
    throw SchemaError("ik: tolerances must be > 0");
  if (max_iterations < 0) throw SchemaError("ik.max_iterations: must be >= 0");
  if (continuity_weight < 0.0 || collision_weight < 0.0)
    throw SchemaError("ik: weights must be >= 0");
  if (clearance_margin < 0.0) throw SchemaError("ik.clearance_margin: must be >= 0");
}

namespace {

using JointMatrix = Eigen::Matrix<double, kNumJoints, kNumJoints>;

struct Clearance {
  double distance = kNoObstacleDistance;  // capsule surface to inflated voxel
  Vec3 on_capsule = Vec3::Zero();
  Vec3 away = Vec3::Zero();  // unit, voxel -> capsule
};

Clearance capsule_clearance(const OccupancyGrid& grid, const WorldCapsule& cap) {
  Clearance out;
  if (grid.empty()) return out;
  double best = std::numeric_limits<double>::infinity();
  Vec3 best_voxel = Vec3::Zero();
  Vec3 best_point = Vec3::Zero();
  for (const Vec3& c : grid.occupied_centers()) {
    const Vec3 p = geometry::closest_point_on_segment(c, cap.a, cap.b);
    const double d2 = (p - c).squaredNorm();
    if (d2 < best) {
      best = d2;
      best_voxel = c;
      best_point = p;
    }
  }
  const double d = std::sqrt(best);
  out.distance = d - cap.radius - grid.spec().half_diagonal();
  out.on_capsule = best_point;
  out.away = d > 1e-12 ? Vec3((best_point - best_voxel) / d) : Vec3::UnitZ();
  return out;
}

bool clearance_ok(const OccupancyGrid& grid, const std::vector<WorldCapsule>& caps, double margin) {
  if (grid.empty()) return true;
  for (const WorldCapsule& cap : caps)
    if (capsule_grid_distance(grid, cap) < margin) return false;
  return true;
}

/// Null-space cost gradient (to be descended): joint-limit proximity,
/// continuity to q_prev, grid clearance and self-clearance.
JointConfig secondary_gradient(const KinematicChain& chain, const ForwardKinematics& fk,
                               const std::vector<WorldCapsule>& caps, const JointConfig& q,
                               const JointConfig& q_prev, const OccupancyGrid& grid,
                               const IkParams& params) {
  JointConfig grad = params.continuity_weight * (q - q_prev);
  constexpr double kLimitBand = 0.25;
  for (int i = 0; i < kNumJoints; ++i) {
    const double to_min = q[i] - chain.limits[i].min;
    const double to_max = chain.limits[i].max - q[i];
    if (to_min < kLimitBand) grad[i] -= (kLimitBand - to_min);
    if (to_max < kLimitBand) grad[i] += (kLimitBand - to_max);
  }
  if (params.collision_weight > 0.0 && !grid.empty()) {
    for (const WorldCapsule& cap : caps) {
      const Clearance c = capsule_clearance(grid, cap);
      const double slack = params.influence_distance - c.distance;
      if (slack <= 0.0) continue;
      const auto jac = point_jacobian(chain, fk, cap.link, c.on_capsule);
      grad -= params.collision_weight * slack * (jac.transpose() * c.away);
    }
  }
  constexpr double kSelfBand = 0.04;
  for (std::size_t i = 0; i < caps.size(); ++i) {
    for (std::size_t j = i + 1; j < caps.size(); ++j) {
      if (std::abs(caps[i].link - caps[j].link) <= 1) continue;
      const auto pair = geometry::segment_segment(caps[i].a, caps[i].b, caps[j].a, caps[j].b);
      const double slack = caps[i].radius + caps[j].radius + kSelfBand - pair.distance;
      if (slack <= 0.0 || pair.distance < 1e-12) continue;
      const Vec3 n = (pair.on_first - pair.on_second) / pair.distance;
      const auto ji = point_jacobian(chain, fk, caps[i].link, pair.on_first);
      const auto jj = point_jacobian(chain, fk, caps[j].link, pair.on_second);
      grad -= 4.0 * slack * ((ji - jj).transpose() * n);
    }
  }
  return grad;
}

}  // namespace

bool ik_conditions_hold(const KinematicChain& chain, const Pose6& target, const JointConfig& q,
                        const JointConfig& q_prev, const OccupancyGrid& grid, const IkParams& params) {
  if (!chain.within_limits(q)) return false;
  if (params.joint_speed_cap > 0.0 &&
      (q - q_prev).cwiseAbs().maxCoeff() > params.joint_speed_cap + 1e-12)
    return false;
  const ForwardKinematics fk = forward_kinematics(chain, q);
  if ((target.p - fk.camera.translation()).norm() > params.position_tolerance) return false;
  if (rotation_log(target.rotation() * fk.camera.linear().transpose()).norm() >
      params.rotation_tolerance)
    return false;
  const auto caps = world_capsules(chain, fk);
  if (self_collision(caps)) return false;
  return clearance_ok(grid, caps, params.clearance_margin);
}

IkResult ik_solve(const KinematicChain& chain, const Pose6& target, const JointConfig& q_prev,
                  const OccupancyGrid& grid, const IkParams& params) {
  JointConfig lo, hi;
  for (int i = 0; i < kNumJoints; ++i) {
    lo[i] = chain.limits[i].min;
    hi[i] = chain.limits[i].max;
    if (params.joint_speed_cap > 0.0) {
      lo[i] = std::max(lo[i], q_prev[i] - params.joint_speed_cap);
      hi[i] = std::min(hi[i], q_prev[i] + params.joint_speed_cap);
    }
  }
  const Mat3 target_rot = target.rotation();

  struct State {
    JointConfig q;
    ForwardKinematics fk;
    std::vector<WorldCapsule> caps;
    Eigen::Matrix<double, 6, 1> err;
    double pos_err = 0.0;
    double rot_err = 0.0;
    bool within_tolerance = false;
    double merit = 0.0;
  };
  const auto evaluate = [&](const JointConfig& q) {
    State s;
    s.q = q;
    s.fk = forward_kinematics(chain, q);
    s.caps = world_capsules(chain, s.fk);
    s.err.head<3>() = target.p - s.fk.camera.translation();
    s.err.tail<3>() = rotation_log(target_rot * s.fk.camera.linear().transpose());
    s.pos_err = s.err.head<3>().norm();
    s.rot_err = s.err.tail<3>().norm();
    s.within_tolerance = s.pos_err <= params.position_tolerance && s.rot_err <= params.rotation_tolerance;
    s.merit = s.pos_err + 0.1 * s.rot_err;
    return s;
  };
  const auto feasible = [&](const State& s) {
    return s.within_tolerance && !self_collision(s.caps) && clearance_ok(grid, s.caps, params.clearance_margin);
  };

  IkResult result;
  State cur = evaluate(q_prev.cwiseMax(lo).cwiseMin(hi));
  double lambda = params.damping;
  int stalled = 0;
  int it = 0;
  for (;; ++it) {
    result.iterations = it;
    result.position_error = cur.pos_err;
    result.rotation_error = cur.rot_err;
    if (feasible(cur)) {
      result.success = true;
      result.q = cur.q;
      return result;
    }
    if (it == params.max_iterations || stalled >= 10) break;

    Eigen::Matrix<double, 6, 1> err = cur.err;
    constexpr double kMaxLinearStep = 0.1;
    if (cur.pos_err > kMaxLinearStep) err.head<3>() *= kMaxLinearStep / cur.pos_err;
    const Jacobian jac = jacobian(chain, cur.fk);
    const Eigen::Matrix<double, 6, 6> jjt =
        jac * jac.transpose() + lambda * lambda * Eigen::Matrix<double, 6, 6>::Identity();
    const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(jjt);
    JointConfig dq = jac.transpose() * ldlt.solve(err);
    // exact projector onto the kernel of the Jacobian
    const Eigen::JacobiSVD<Jacobian> svd(jac, Eigen::ComputeFullV);
    const JointConfig n = svd.matrixV().col(kNumJoints - 1);
    const JointMatrix null = n * n.transpose();
    dq -= null * secondary_gradient(chain, cur.fk, cur.caps, cur.q, q_prev, grid, params);

    const double step = dq.cwiseAbs().maxCoeff();
    if (step > params.max_joint_step) dq *= params.max_joint_step / step;
    State next = evaluate((cur.q + dq).cwiseMax(lo).cwiseMin(hi));
    // accept pose improvements, or any move once the pose is within tolerance
    if (next.merit < cur.merit - 1e-9 || (cur.within_tolerance && next.within_tolerance)) {
      cur = std::move(next);
      lambda = std::max(params.damping, 0.5 * lambda);
      stalled = 0;
    } else {
      lambda *= 4.0;
      ++stalled;
    }
  }
  result.success = false;
  result.q = q_prev;
  return result;
}

bool ik_reachable(const KinematicChain& chain, const Pose6& target, std::uint64_t seed, int restarts,
                  const IkParams& params) {
  const Vec3 base = chain.base.translation();
  if ((target.p - base).norm() > chain.reach()) return false;
  static const OccupancyGrid kEmpty(GridSpec{});
  IkParams free = params;
  free.joint_speed_cap = 0.0;
  free.continuity_weight = 0.0;
  std::mt19937_64 rng(seed);
  for (int r = 0; r < restarts; ++r) {
    JointConfig q0;
    for (int i = 0; i < kNumJoints; ++i) {
      std::uniform_real_distribution<double> u(chain.limits[i].min, chain.limits[i].max);
      q0[i] = u(rng);
    }
    if (ik_solve(chain, target, q0, kEmpty, free).success) return true;
  }
  return false;
}

}  // namespace vistrack
