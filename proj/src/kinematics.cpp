#include "vistrack/kinematics.hpp"

#include "vistrack/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace vistrack {

using nlohmann::json;

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);  // [-pi, pi]
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

Mat3 euler_xyz_to_matrix(const Vec3& r) {
  return (Eigen::AngleAxisd(r[0], Vec3::UnitX()) * Eigen::AngleAxisd(r[1], Vec3::UnitY()) *
          Eigen::AngleAxisd(r[2], Vec3::UnitZ()))
      .toRotationMatrix();
}

Vec3 matrix_to_euler_xyz(const Mat3& m) {
  const double cb = std::hypot(m(0, 0), m(0, 1));
  const double b = std::atan2(m(0, 2), cb);
  double a, c;
  if (cb > 1e-10) {
    a = std::atan2(-m(1, 2), m(2, 2));
    c = std::atan2(-m(0, 1), m(0, 0));
  } else {
    // gimbal lock: only a +/- c is determined; put it all on a
    a = std::atan2(m(2, 1), m(1, 1));
    c = 0.0;
  }
  return {wrap_angle(a), wrap_angle(b), wrap_angle(c)};
}

Vec3 rotation_log(const Mat3& m) {
  const Eigen::AngleAxisd aa(m);
  return aa.axis() * aa.angle();
}

Iso3 Pose6::isometry() const {
  Iso3 t = Iso3::Identity();
  t.linear() = rotation();
  t.translation() = p;
  return t;
}

Pose6 Pose6::from_isometry(const Iso3& t) {
  return {t.translation(), matrix_to_euler_xyz(t.linear())};
}

// ---------------------------------------------------------------------------
// serialization helpers

namespace {

Vec3 vec3_field(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(where + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw SchemaError(where + ": expected an array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Iso3 transform_field(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  Iso3 t = Iso3::Identity();
  if (j.contains("position")) t.translation() = vec3_field(j["position"], where + ".position");
  if (j.contains("rotation_matrix")) {
    const json& m = j["rotation_matrix"];
    if (!m.is_array() || m.size() != 3)
      throw SchemaError(where + ".rotation_matrix: expected 3 rows");
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      r.row(i) = vec3_field(m[i], where + ".rotation_matrix[" + std::to_string(i) + "]");
    if ((r * r.transpose() - Mat3::Identity()).norm() > 1e-9 || r.determinant() < 0.0)
      throw SchemaError(where + ".rotation_matrix: not a rotation (orthonormality > 1e-9)");
    t.linear() = r;
  } else if (j.contains("rotation_xyz")) {
    t.linear() = euler_xyz_to_matrix(vec3_field(j["rotation_xyz"], where + ".rotation_xyz"));
  }
  return t;
}

json transform_json(const Iso3& t) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(vec3_json(t.linear().row(i).transpose()));
  return {{"position", vec3_json(t.translation())}, {"rotation_matrix", rows}};
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + key + ": missing field");
  return j[key];
}

}  // namespace

void KinematicChain::validate() const {
  for (int i = 0; i < kNumJoints; ++i) {
    const std::string w = "joints[" + std::to_string(i) + "]";
    if (std::abs(joints[i].axis.norm() - 1.0) > 1e-9) throw SchemaError(w + ".axis: not a unit vector");
    if (!(limits[i].min < limits[i].max))
      throw SchemaError("limits[" + std::to_string(i) + "]: min must be < max");
  }
  for (std::size_t c = 0; c < capsules.size(); ++c) {
    const std::string w = "capsules[" + std::to_string(c) + "]";
    if (!(capsules[c].radius > 0.0)) throw SchemaError(w + ".radius: must be > 0");
    if (capsules[c].link < 0 || capsules[c].link > kNumJoints)
      throw SchemaError(w + ".link: must be in [0, 7]");
  }
  const Mat3 r = camera_offset.linear();
  if ((r * r.transpose() - Mat3::Identity()).norm() > 1e-9)
    throw SchemaError("camera_offset: rotation part not orthonormal");
}

bool KinematicChain::within_limits(const JointConfig& q, double slack) const {
  for (int i = 0; i < kNumJoints; ++i)
    if (q[i] < limits[i].min - slack || q[i] > limits[i].max + slack) return false;
  return true;
}

JointConfig KinematicChain::clamp_to_limits(const JointConfig& q) const {
  JointConfig out;
  for (int i = 0; i < kNumJoints; ++i) out[i] = std::clamp(q[i], limits[i].min, limits[i].max);
  return out;
}

double KinematicChain::reach() const {
  double total = camera_offset.translation().norm();
  for (const RevoluteJoint& j : joints) total += j.link.translation().norm();
  return total;
}

std::string KinematicChain::hash() const { return hex64(fnv1a64(to_json().dump())); }

json KinematicChain::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["base"] = transform_json(base);
  j["joints"] = json::array();
  j["limits"] = json::array();
  for (int i = 0; i < kNumJoints; ++i) {
    j["joints"].push_back({{"axis", vec3_json(joints[i].axis)}, {"link", transform_json(joints[i].link)}});
    j["limits"].push_back(json::array({limits[i].min, limits[i].max}));
  }
  j["capsules"] = json::array();
  for (const Capsule& c : capsules)
    j["capsules"].push_back(
        {{"link", c.link}, {"a", vec3_json(c.a)}, {"b", vec3_json(c.b)}, {"radius", c.radius}});
  j["camera_offset"] = transform_json(camera_offset);
  return j;
}

KinematicChain KinematicChain::from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("chain: expected an object");
  const json& version = require(j, "schema_version", "");
  if (!version.is_number_integer() || version.get<int>() != 1)
    throw SchemaError("schema_version: unsupported (expected 1)");
  KinematicChain chain;
  if (j.contains("base")) chain.base = transform_field(j["base"], "base");
  const json& joints = require(j, "joints", "");
  if (!joints.is_array() || joints.size() != kNumJoints)
    throw SchemaError("joints: expected exactly 7 revolute joints");
  const json& limits = require(j, "limits", "");
  if (!limits.is_array() || limits.size() != kNumJoints)
    throw SchemaError("limits: expected 7 [min, max] pairs");
  for (int i = 0; i < kNumJoints; ++i) {
    const std::string w = "joints[" + std::to_string(i) + "]";
    chain.joints[i].axis = vec3_field(require(joints[i], "axis", w + "."), w + ".axis");
    chain.joints[i].link = transform_field(require(joints[i], "link", w + "."), w + ".link");
    const json& lim = limits[i];
    if (!lim.is_array() || lim.size() != 2 || !lim[0].is_number() || !lim[1].is_number())
      throw SchemaError("limits[" + std::to_string(i) + "]: expected [min, max]");
    chain.limits[i] = {lim[0].get<double>(), lim[1].get<double>()};
  }
  const json& caps = require(j, "capsules", "");
  if (!caps.is_array()) throw SchemaError("capsules: expected an array");
  for (std::size_t c = 0; c < caps.size(); ++c) {
    const std::string w = "capsules[" + std::to_string(c) + "]";
    Capsule cap;
    const json& link = require(caps[c], "link", w + ".");
    if (!link.is_number_integer()) throw SchemaError(w + ".link: expected an integer");
    cap.link = link.get<int>();
    cap.a = vec3_field(require(caps[c], "a", w + "."), w + ".a");
    cap.b = vec3_field(require(caps[c], "b", w + "."), w + ".b");
    const json& radius = require(caps[c], "radius", w + ".");
    if (!radius.is_number()) throw SchemaError(w + ".radius: expected a number");
    cap.radius = radius.get<double>();
    chain.capsules.push_back(cap);
  }
  chain.camera_offset = transform_field(require(j, "camera_offset", ""), "camera_offset");
  chain.validate();
  return chain;
}

KinematicChain KinematicChain::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open chain file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

KinematicChain KinematicChain::default_chain() {
  KinematicChain chain;
  // joint axes alternate z / y; link offsets along the local z axis
  constexpr std::array<double, kNumJoints> kLength = {0.30, 0.20, 0.20, 0.20, 0.20, 0.10, 0.05};
  constexpr std::array<double, kNumJoints> kRadius = {0.08, 0.065, 0.06, 0.055, 0.05, 0.045, 0.04};
  for (int i = 0; i < kNumJoints; ++i) {
    chain.joints[i].axis = (i % 2 == 0) ? Vec3::UnitZ() : Vec3::UnitY();
    chain.joints[i].link = Iso3::Identity();
    chain.joints[i].link.translation() = Vec3(0, 0, kLength[i]);
    chain.limits[i] = {-2.9, 2.9};
    // the last capsule also covers the camera body
    const double len = i == kNumJoints - 1 ? 0.10 : kLength[i];
    chain.capsules.push_back({i + 1, Vec3::Zero(), Vec3(0, 0, len), kRadius[i]});
  }
  chain.camera_offset.translation() = Vec3(0, 0, 0.05);
  return chain;
}

// ---------------------------------------------------------------------------

ForwardKinematics forward_kinematics(const KinematicChain& chain, const JointConfig& q) {
  ForwardKinematics fk;
  Iso3 t = chain.base;
  fk.frames[0] = t;
  for (int i = 0; i < kNumJoints; ++i) {
    t.linear() = t.linear() * Eigen::AngleAxisd(q[i], chain.joints[i].axis).toRotationMatrix();
    fk.frames[i + 1] = t;
    t = t * chain.joints[i].link;
  }
  fk.camera = t * chain.camera_offset;
  return fk;
}

Jacobian jacobian(const KinematicChain& chain, const ForwardKinematics& fk) {
  Jacobian jac;
  const Vec3 tip = fk.camera.translation();
  for (int i = 0; i < kNumJoints; ++i) {
    const Vec3 w = fk.frames[i + 1].linear() * chain.joints[i].axis;
    jac.block<3, 1>(0, i) = w.cross(tip - fk.joint_origin(i));
    jac.block<3, 1>(3, i) = w;
  }
  return jac;
}

Jacobian jacobian(const KinematicChain& chain, const JointConfig& q) {
  return jacobian(chain, forward_kinematics(chain, q));
}

Eigen::Matrix<double, 3, kNumJoints> point_jacobian(const KinematicChain& chain,
                                                    const ForwardKinematics& fk, int link,
                                                    const Vec3& point) {
  Eigen::Matrix<double, 3, kNumJoints> jac = Eigen::Matrix<double, 3, kNumJoints>::Zero();
  for (int i = 0; i < std::min(link, kNumJoints); ++i) {
    const Vec3 w = fk.frames[i + 1].linear() * chain.joints[i].axis;
    jac.col(i) = w.cross(point - fk.joint_origin(i));
  }
  return jac;
}

std::vector<WorldCapsule> world_capsules(const KinematicChain& chain,
                                         const ForwardKinematics& fk) {
  std::vector<WorldCapsule> out;
  out.reserve(chain.capsules.size());
  for (const Capsule& c : chain.capsules) {
    const Iso3& f = fk.frames[c.link];
    out.push_back({c.link, f * c.a, f * c.b, c.radius});
  }
  return out;
}

bool self_collision(const std::vector<WorldCapsule>& caps) {
  for (std::size_t i = 0; i < caps.size(); ++i) {
    for (std::size_t j = i + 1; j < caps.size(); ++j) {
      if (std::abs(caps[i].link - caps[j].link) <= 1) continue;
      const auto pair = geometry::segment_segment(caps[i].a, caps[i].b, caps[j].a, caps[j].b);
      if (pair.distance < caps[i].radius + caps[j].radius) return true;
    }
  }
  return false;
}

bool self_collision(const KinematicChain& chain, const JointConfig& q) {
  return self_collision(world_capsules(chain, forward_kinematics(chain, q)));
}

}  // namespace vistrack
