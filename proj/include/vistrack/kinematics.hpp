#pragma once

#include "vistrack/common.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <vector>

namespace vistrack {

inline constexpr int kNumJoints = 7;

using JointConfig = Eigen::Matrix<double, kNumJoints, 1>;
using Jacobian = Eigen::Matrix<double, 6, kNumJoints>;

/// Intrinsic X-Y-Z Euler angles: R = Rx(r0) * Ry(r1) * Rz(r2).
Mat3 euler_xyz_to_matrix(const Vec3& r);
/// Inverse of euler_xyz_to_matrix with every angle in (-pi, pi].
Vec3 matrix_to_euler_xyz(const Mat3& m);
/// Rotation vector (axis * angle) of a rotation matrix, angle in [0, pi].
Vec3 rotation_log(const Mat3& m);
double wrap_angle(double a);

/// Position plus Euler-XYZ orientation of a frame.
struct Pose6 {
  Vec3 p = Vec3::Zero();
  Vec3 r = Vec3::Zero();

  Mat3 rotation() const { return euler_xyz_to_matrix(r); }
  Iso3 isometry() const;
  static Pose6 from_isometry(const Iso3& t);
};

struct RevoluteJoint {
  Vec3 axis = Vec3::UnitZ();       // unit, in the joint frame
  Iso3 link = Iso3::Identity();    // joint frame -> next joint frame
};

struct JointLimit {
  double min = -M_PI;
  double max = M_PI;
};

/// Capsule rigidly attached to link `link`: 0 is the base, i >= 1 is the
/// frame that moves with joint i.
struct Capsule {
  int link = 0;
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.05;
};

struct WorldCapsule {
  int link = 0;
  Vec3 a;
  Vec3 b;
  double radius;
};

/// Serial chain of seven revolute joints with a camera at the tip.
class KinematicChain {
 public:
  Iso3 base = Iso3::Identity();
  std::array<RevoluteJoint, kNumJoints> joints{};
  std::array<JointLimit, kNumJoints> limits{};
  std::vector<Capsule> capsules;
  Iso3 camera_offset = Iso3::Identity();

  /// Throws SchemaError on a violated invariant.
  void validate() const;

  bool within_limits(const JointConfig& q, double slack = 0.0) const;
  JointConfig clamp_to_limits(const JointConfig& q) const;
  /// Upper bound on the distance from joint 1 to the camera.
  double reach() const;
  /// Stable hash of the canonical JSON form.
  std::string hash() const;

  nlohmann::json to_json() const;
  static KinematicChain from_json(const nlohmann::json& j);
  static KinematicChain load(const std::filesystem::path& path);

  /// Anthropomorphic 7R arm, alternating z/y axes, 1.3 m of link offsets.
  static KinematicChain default_chain();
};

struct ForwardKinematics {
  Iso3 camera = Iso3::Identity();
  /// frames[0] is the base; frames[i] is the frame of link i (after joint i).
  std::array<Iso3, kNumJoints + 1> frames{};

  Pose6 camera_pose() const { return Pose6::from_isometry(camera); }
  Vec3 joint_origin(int i) const { return frames[i + 1].translation(); }
};

ForwardKinematics forward_kinematics(const KinematicChain& chain, const JointConfig& q);

/// Geometric Jacobian of the camera frame: rows 0-2 linear velocity of the
/// camera origin, rows 3-5 world angular velocity.
Jacobian jacobian(const KinematicChain& chain, const JointConfig& q);
Jacobian jacobian(const KinematicChain& chain, const ForwardKinematics& fk);

/// Linear-velocity Jacobian of a world point rigidly attached to `link`.
Eigen::Matrix<double, 3, kNumJoints> point_jacobian(const KinematicChain& chain,
                                                    const ForwardKinematics& fk, int link,
                                                    const Vec3& point);

std::vector<WorldCapsule> world_capsules(const KinematicChain& chain,
                                         const ForwardKinematics& fk);

/// True iff two capsules on non-adjacent links overlap.
bool self_collision(const KinematicChain& chain, const JointConfig& q);
bool self_collision(const std::vector<WorldCapsule>& capsules);

}  // namespace vistrack
