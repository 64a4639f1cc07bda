#include "support.hpp"
#include "vistrack/kinematics.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace vistrack;
using vistrack::testing::random_q;

namespace {

Eigen::Matrix4d homogeneous(const Mat3& r, const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

// Rodrigues formula, independent of Eigen::AngleAxis.
Mat3 rodrigues(const Vec3& axis, double angle) {
  Mat3 k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
}

Eigen::Matrix4d oracle_tip(const KinematicChain& chain, const JointConfig& q) {
  Eigen::Matrix4d t = chain.base.matrix();
  for (int i = 0; i < kNumJoints; ++i) {
    t = t * homogeneous(rodrigues(chain.joints[i].axis, q[i]), Vec3::Zero());
    t = t * chain.joints[i].link.matrix();
  }
  return t * chain.camera_offset.matrix();
}

}  // namespace

TEST(Euler, RoundTripReproducesRotation) {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 1000; ++n) {
    const Mat3 r = vistrack::testing::random_rotation(rng);
    const Vec3 e = matrix_to_euler_xyz(r);
    EXPECT_LT((euler_xyz_to_matrix(e) - r).norm(), 1e-9);
    for (int a = 0; a < 3; ++a) {
      EXPECT_GT(e[a], -M_PI);
      EXPECT_LE(e[a], M_PI);
    }
  }
}

TEST(Euler, GimbalLockStillRoundTrips) {
  for (double pitch : {M_PI / 2, -M_PI / 2}) {
    const Mat3 r = euler_xyz_to_matrix(Vec3(0.4, pitch, -0.7));
    EXPECT_LT((euler_xyz_to_matrix(matrix_to_euler_xyz(r)) - r).norm(), 1e-9);
  }
}

TEST(Euler, IntrinsicOrder) {
  const Vec3 r(0.3, -0.2, 0.9);
  const Mat3 expected = rodrigues(Vec3::UnitX(), r[0]) * rodrigues(Vec3::UnitY(), r[1]) *
                        rodrigues(Vec3::UnitZ(), r[2]);
  EXPECT_LT((euler_xyz_to_matrix(r) - expected).norm(), 1e-12);
}

TEST(RotationLog, MatchesAxisAngle) {
  const Vec3 axis = Vec3(1, 2, -1).normalized();
  EXPECT_LT((rotation_log(rodrigues(axis, 0.8)) - 0.8 * axis).norm(), 1e-12);
  EXPECT_LT(rotation_log(Mat3::Identity()).norm(), 1e-15);
  EXPECT_NEAR(rotation_log(rodrigues(axis, M_PI)).norm(), M_PI, 1e-9);
}

TEST(ForwardKinematics, ZeroConfigComposesFixedTransforms) {
  const KinematicChain chain = KinematicChain::default_chain();
  const auto fk = forward_kinematics(chain, JointConfig::Zero());
  Iso3 t = chain.base;
  for (const auto& j : chain.joints) t = t * j.link;
  t = t * chain.camera_offset;
  EXPECT_LT((fk.camera.matrix() - t.matrix()).norm(), 1e-15);
  EXPECT_NEAR(fk.camera.translation().z(), 1.30, 1e-12);
}

TEST(ForwardKinematics, BaseYawByPiNegatesXY) {
  const KinematicChain chain = KinematicChain::default_chain();
  std::mt19937_64 rng(5);
  JointConfig q = random_q(chain, rng);
  q[0] = 0.0;
  const Vec3 p0 = forward_kinematics(chain, q).camera.translation();
  q[0] = M_PI;
  const Vec3 p1 = forward_kinematics(chain, q).camera.translation();
  EXPECT_NEAR(p1.x(), -p0.x(), 1e-12);
  EXPECT_NEAR(p1.y(), -p0.y(), 1e-12);
  EXPECT_NEAR(p1.z(), p0.z(), 1e-12);
}

TEST(ForwardKinematics, MatchesMatrixProductOracle) {
  KinematicChain chain = KinematicChain::default_chain();
  chain.base.translation() = Vec3(-1.0, 0.6, 0.7);
  chain.base.linear() = rodrigues(Vec3::UnitZ(), 0.3);
  std::mt19937_64 rng(11);
  for (int n = 0; n < 200; ++n) {
    const JointConfig q = random_q(chain, rng);
    const auto fk = forward_kinematics(chain, q);
    const Eigen::Matrix4d expected = oracle_tip(chain, q);
    EXPECT_LT((fk.camera.translation() - expected.topRightCorner<3, 1>()).norm(), 1e-10);
    EXPECT_LT((fk.camera.linear() - expected.topLeftCorner<3, 3>()).norm(), 1e-10);
  }
}

TEST(ForwardKinematics, PerLinkFramesComposeToTip) {
  const KinematicChain chain = KinematicChain::default_chain();
  std::mt19937_64 rng(13);
  const JointConfig q = random_q(chain, rng);
  const auto fk = forward_kinematics(chain, q);
  const Iso3 tip = fk.frames[kNumJoints] * chain.joints[kNumJoints - 1].link * chain.camera_offset;
  EXPECT_LT((tip.matrix() - fk.camera.matrix()).norm(), 1e-10);
}

TEST(Jacobian, SingleJointColumnIsAxisCrossLever) {
  const KinematicChain chain = KinematicChain::default_chain();
  const Jacobian jac = jacobian(chain, JointConfig::Zero());
  // joint 2 rotates about y at height 0.30; camera at height 1.30
  EXPECT_LT((jac.col(1).head<3>() - Vec3::UnitY().cross(Vec3(0, 0, 1.0))).norm(), 1e-12);
  EXPECT_LT((jac.col(1).tail<3>() - Vec3::UnitY()).norm(), 1e-12);
  // joint 1 rotates about the z axis the tip lies on
  EXPECT_LT(jac.col(0).head<3>().norm(), 1e-12);
}

TEST(Jacobian, MatchesCentralDifferences) {
  const KinematicChain chain = KinematicChain::default_chain();
  std::mt19937_64 rng(17);
  const double h = 1e-6;
  for (int n = 0; n < 100; ++n) {
    const JointConfig q = random_q(chain, rng);
    const Jacobian jac = jacobian(chain, q);
    for (int i = 0; i < kNumJoints; ++i) {
      JointConfig qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const Iso3 tp = forward_kinematics(chain, qp).camera;
      const Iso3 tm = forward_kinematics(chain, qm).camera;
      const Vec3 v = (tp.translation() - tm.translation()) / (2 * h);
      const Vec3 w = rotation_log(tp.linear() * tm.linear().transpose()) / (2 * h);
      for (int r = 0; r < 3; ++r) {
        EXPECT_NEAR(jac(r, i), v[r], 1e-5);
        EXPECT_NEAR(jac(r + 3, i), w[r], 1e-5);
      }
    }
  }
}

TEST(Jacobian, Deterministic) {
  const KinematicChain chain = KinematicChain::default_chain();
  std::mt19937_64 rng(19);
  const JointConfig q = random_q(chain, rng);
  EXPECT_EQ(jacobian(chain, q), jacobian(chain, q));
}

TEST(Jacobian, PointJacobianAtCameraMatchesLinearRows) {
  const KinematicChain chain = KinematicChain::default_chain();
  std::mt19937_64 rng(23);
  const JointConfig q = random_q(chain, rng);
  const auto fk = forward_kinematics(chain, q);
  const auto jp = point_jacobian(chain, fk, kNumJoints, fk.camera.translation());
  EXPECT_LT((jp - jacobian(chain, fk).topRows<3>()).norm(), 1e-12);
}

TEST(SelfCollision, StretchedPoseIsFree) {
  const KinematicChain chain = KinematicChain::default_chain();
  EXPECT_FALSE(self_collision(chain, JointConfig::Zero()));
  // oracle: every non-adjacent capsule pair on the z axis is separated by a gap
  const auto caps = world_capsules(chain, forward_kinematics(chain, JointConfig::Zero()));
  for (std::size_t a = 0; a < caps.size(); ++a)
    for (std::size_t b = a + 2; b < caps.size(); ++b) {
      const double gap = std::max(caps[b].a.z() - caps[a].b.z(), caps[a].a.z() - caps[b].b.z());
      EXPECT_GT(gap, caps[a].radius + caps[b].radius);
    }
}

TEST(SelfCollision, CoincidentCapsulesCollide) {
  KinematicChain chain = KinematicChain::default_chain();
  // links 1 and 3 share the same segment in the zero pose
  chain.capsules[2].link = 3;
  chain.capsules[2].a = Vec3(0, 0, -0.5);
  chain.capsules[2].b = Vec3(0, 0, -0.3);
  EXPECT_TRUE(self_collision(chain, JointConfig::Zero()));
}

TEST(SelfCollision, AdjacentContactIsExempt) {
  KinematicChain chain = KinematicChain::default_chain();
  // capsule of link 2 reaches back into link 1's capsule only
  chain.capsules[1].a = Vec3(0, 0, -0.25);
  EXPECT_FALSE(self_collision(chain, JointConfig::Zero()));
}

TEST(SelfCollision, FoldedArmCollides) {
  const KinematicChain chain = KinematicChain::default_chain();
  JointConfig q = JointConfig::Zero();
  q[1] = 2.9;
  q[3] = 2.9;
  EXPECT_TRUE(self_collision(chain, q));
}

TEST(Chain, JsonRoundTripPreservesHash) {
  KinematicChain chain = KinematicChain::default_chain();
  chain.base.translation() = Vec3(0.1, 0.2, 0.3);
  const KinematicChain back = KinematicChain::from_json(chain.to_json());
  EXPECT_EQ(back.hash(), chain.hash());
  std::mt19937_64 rng(29);
  const JointConfig q = random_q(chain, rng);
  EXPECT_LT((forward_kinematics(back, q).camera.matrix() - forward_kinematics(chain, q).camera.matrix()).norm(),
            1e-12);
}

TEST(Chain, ValidationNamesTheField) {
  auto j = KinematicChain::default_chain().to_json();
  j["limits"][2] = {1.0, -1.0};
  try {
    KinematicChain::from_json(j);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("limits"), std::string::npos) << e.what();
  }
  j = KinematicChain::default_chain().to_json();
  j["capsules"][0]["radius"] = -0.1;
  EXPECT_THROW(KinematicChain::from_json(j), SchemaError);
  j = KinematicChain::default_chain().to_json();
  j["joints"].erase(0);
  EXPECT_THROW(KinematicChain::from_json(j), SchemaError);
}

TEST(Chain, LoadRejectsCorruptFile) {
  const auto path = std::filesystem::temp_directory_path() / "vistrack_corrupt_chain.json";
  std::ofstream(path) << "{\"schema_version\": 1, \"joints\": [";
  EXPECT_THROW(KinematicChain::load(path), SchemaError);
  EXPECT_THROW(KinematicChain::load("/nonexistent/chain.json"), IoError);
}

TEST(Chain, LimitsAndReach) {
  const KinematicChain chain = KinematicChain::default_chain();
  JointConfig q = JointConfig::Constant(3.5);
  EXPECT_FALSE(chain.within_limits(q));
  EXPECT_TRUE(chain.within_limits(chain.clamp_to_limits(q)));
  EXPECT_NEAR(chain.reach(), 1.30, 1e-12);
}
