#include "vistrack/sim.hpp"

#include <fstream>
#include <sstream>

namespace vistrack {
namespace {

using nlohmann::json;

Vec3 vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(field + ": expected an array of 3 numbers");
  Vec3 v;
  for (int a = 0; a < 3; ++a) {
    if (!j[std::size_t(a)].is_number()) throw SchemaError(field + ": expected numbers");
    v[a] = j[std::size_t(a)].get<double>();
  }
  return v;
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Aabb aabb(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("min") || !j.contains("max"))
    throw SchemaError(field + ": expected {min, max}");
  return {vec3(j["min"], field + ".min"), vec3(j["max"], field + ".max")};
}

json aabb_json(const Aabb& b) { return {{"min", vec3_json(b.min)}, {"max", vec3_json(b.max)}}; }

template <class T>
void read(const json& j, const char* key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(prefix + key + ": wrong type");
  }
}

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw SchemaError(where + "." + k + ": unknown field");
  }
}

JointConfig home_default() {
  JointConfig q;
  q << 1.5119, -0.7847, 0.0167, 2.0587, 0.1601, 0.2998, -1.7121;
  return q;
}

ScenarioSpec scenario_from_json(const json& j, ScenarioSpec s) {
  check_keys(j, {"kind", "target_motion", "obstacles", "speed_range", "dt", "horizon", "runs", "seed",
                 "terms", "camera"},
             "scenario");
  if (j.contains("kind")) {
    const int kind = j["kind"].is_number_integer() ? j["kind"].get<int>() : 0;
    if (kind != 1 && kind != 2) throw SchemaError("scenario.kind: must be 1 or 2");
    s.kind = ScenarioKind(kind);
  }
  if (j.contains("target_motion")) {
    const std::string m = j["target_motion"].is_string() ? j["target_motion"].get<std::string>() : "";
    if (m == "random-walk") s.target_motion = TargetMotion::RandomWalk;
    else if (m == "stationary") s.target_motion = TargetMotion::Stationary;
    else throw SchemaError("scenario.target_motion: expected \"random-walk\" or \"stationary\"");
  }
  read(j, "obstacles", s.obstacle_count, "scenario.");
  if (j.contains("speed_range")) {
    const json& r = j["speed_range"];
    if (!r.is_array() || r.size() != 2) throw SchemaError("scenario.speed_range: expected [min, max]");
    s.speed_min = r[0].get<double>();
    s.speed_max = r[1].get<double>();
  }
  read(j, "dt", s.dt, "scenario.");
  read(j, "horizon", s.horizon, "scenario.");
  read(j, "runs", s.runs, "scenario.");
  read(j, "seed", s.seed, "scenario.");
  if (j.contains("terms")) {
    try {
      s.terms = TermMask::parse(j["terms"].get<std::string>());
    } catch (const SchemaError& e) {
      throw SchemaError(std::string("scenario.terms: ") + e.what());
    }
  }
  if (j.contains("camera")) {
    const json& c = j["camera"];
    check_keys(c, {"fov_half_angle", "min_range", "max_range"}, "scenario.camera");
    read(c, "fov_half_angle", s.camera.fov_half_angle, "scenario.camera.");
    read(c, "min_range", s.camera.min_range, "scenario.camera.");
    read(c, "max_range", s.camera.max_range, "scenario.camera.");
  }
  return s;
}

json scenario_json(const ScenarioSpec& s) {
  return {{"kind", int(s.kind)},
          {"target_motion", s.target_motion == TargetMotion::Stationary ? "stationary" : "random-walk"},
          {"obstacles", s.obstacle_count},
          {"speed_range", {s.speed_min, s.speed_max}},
          {"dt", s.dt},
          {"horizon", s.horizon},
          {"runs", s.runs},
          {"seed", s.seed},
          {"terms", s.terms.name()},
          {"camera",
           {{"fov_half_angle", s.camera.fov_half_angle},
            {"min_range", s.camera.min_range},
            {"max_range", s.camera.max_range}}}};
}

SceneLayout layout_from_json(const json& j, SceneLayout l) {
  check_keys(j, {"workspace", "target_box", "target_speed", "target_radius", "obstacle_edge", "corridor",
                 "corridor_jitter", "crossing_yaw", "crossing_half_length", "crossing_time", "block_fraction",
                 "block_arrival", "home"},
             "layout");
  const auto pair = [&](const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const json& r = j[key];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number() ||
        r[0].get<double>() > r[1].get<double>())
      throw SchemaError(std::string("layout.") + key + ": expected [lo, hi] with lo <= hi");
    lo = r[0].get<double>();
    hi = r[1].get<double>();
  };
  if (j.contains("workspace")) l.workspace = aabb(j["workspace"], "layout.workspace");
  if (j.contains("target_box")) l.target_box = aabb(j["target_box"], "layout.target_box");
  read(j, "target_speed", l.target_speed, "layout.");
  read(j, "target_radius", l.target_radius, "layout.");
  read(j, "obstacle_edge", l.obstacle_edge, "layout.");
  pair("corridor", l.corridor_min, l.corridor_max);
  read(j, "corridor_jitter", l.corridor_jitter, "layout.");
  read(j, "crossing_yaw", l.crossing_yaw, "layout.");
  read(j, "crossing_half_length", l.crossing_half_length, "layout.");
  pair("crossing_time", l.crossing_time_min, l.crossing_time_max);
  pair("block_fraction", l.block_min, l.block_max);
  pair("block_arrival", l.block_arrival_min, l.block_arrival_max);
  if (j.contains("home")) {
    const json& h = j["home"];
    if (!h.is_array() || h.size() != kNumJoints) throw SchemaError("layout.home: expected 7 joint angles");
    for (int i = 0; i < kNumJoints; ++i) l.home[i] = h[std::size_t(i)].get<double>();
  }
  return l;
}

json layout_json(const SceneLayout& l) {
  json home = json::array();
  for (int i = 0; i < kNumJoints; ++i) home.push_back(l.home[i]);
  return {{"workspace", aabb_json(l.workspace)},
          {"target_box", aabb_json(l.target_box)},
          {"target_speed", l.target_speed},
          {"target_radius", l.target_radius},
          {"obstacle_edge", l.obstacle_edge},
          {"corridor", {l.corridor_min, l.corridor_max}},
          {"corridor_jitter", l.corridor_jitter},
          {"crossing_yaw", l.crossing_yaw},
          {"crossing_half_length", l.crossing_half_length},
          {"crossing_time", {l.crossing_time_min, l.crossing_time_max}},
          {"block_fraction", {l.block_min, l.block_max}},
          {"block_arrival", {l.block_arrival_min, l.block_arrival_max}},
          {"home", home}};
}

IkParams ik_from_json(const json& j, IkParams p) {
  check_keys(j, {"position_tolerance", "rotation_tolerance", "max_iterations", "continuity_weight",
                 "collision_weight", "clearance_margin", "joint_speed_cap", "damping", "influence_distance",
                 "max_joint_step"},
             "ik");
  read(j, "position_tolerance", p.position_tolerance, "ik.");
  read(j, "rotation_tolerance", p.rotation_tolerance, "ik.");
  read(j, "max_iterations", p.max_iterations, "ik.");
  read(j, "continuity_weight", p.continuity_weight, "ik.");
  read(j, "collision_weight", p.collision_weight, "ik.");
  read(j, "clearance_margin", p.clearance_margin, "ik.");
  read(j, "joint_speed_cap", p.joint_speed_cap, "ik.");
  read(j, "damping", p.damping, "ik.");
  read(j, "influence_distance", p.influence_distance, "ik.");
  read(j, "max_joint_step", p.max_joint_step, "ik.");
  return p;
}

json ik_json(const IkParams& p) {
  return {{"position_tolerance", p.position_tolerance}, {"rotation_tolerance", p.rotation_tolerance},
          {"max_iterations", p.max_iterations},         {"continuity_weight", p.continuity_weight},
          {"collision_weight", p.collision_weight},     {"clearance_margin", p.clearance_margin},
          {"joint_speed_cap", p.joint_speed_cap},       {"damping", p.damping},
          {"influence_distance", p.influence_distance}, {"max_joint_step", p.max_joint_step}};
}

}  // namespace

SimConfig SimConfig::defaults() {
  SimConfig c;
  c.chain.base.translation() = Vec3(-1.0, 0.6, 0.7);
  c.layout.home = home_default();
  c.grid = GridSpec::covering(c.layout.workspace, 0.05);
  c.reachability.box = c.layout.workspace;
  c.hash = hex64(fnv1a64(c.to_json().dump()));
  return c;
}

SimConfig SimConfig::from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("config: expected a JSON object");
  check_keys(j, {"schema_version", "chain", "grid_resolution", "layout", "planner", "ik", "scenario",
                 "reachability"},
             "config");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != 1)
    throw SchemaError("config.schema_version: expected 1");
  SimConfig c = defaults();
  if (j.contains("chain")) c.chain = KinematicChain::from_json(j["chain"]);
  if (j.contains("layout")) c.layout = layout_from_json(j["layout"], c.layout);
  double resolution = 0.05;
  read(j, "grid_resolution", resolution, "config.");
  if (!(resolution > 0.0)) throw SchemaError("config.grid_resolution: must be > 0");
  c.grid = GridSpec::covering(c.layout.workspace, resolution);
  c.reachability.box = c.layout.workspace;
  if (j.contains("planner")) {
    try {
      c.planner = PlannerParams::from_json(j["planner"]);
    } catch (const SchemaError& e) {
      throw SchemaError(std::string("planner.") + e.what());
    }
  }
  if (j.contains("ik")) c.ik = ik_from_json(j["ik"], c.ik);
  if (j.contains("scenario")) c.scenario = scenario_from_json(j["scenario"], c.scenario);
  if (j.contains("reachability")) {
    const json& r = j["reachability"];
    check_keys(r, {"box", "resolution", "orientations", "restarts", "seed", "file"}, "reachability");
    if (r.contains("box")) c.reachability.box = aabb(r["box"], "reachability.box");
    read(r, "resolution", c.reachability.resolution, "reachability.");
    read(r, "orientations", c.reachability.orientations, "reachability.");
    read(r, "restarts", c.reachability.restarts, "reachability.");
    read(r, "seed", c.reachability.seed, "reachability.");
    read(r, "file", c.reachability.file, "reachability.");
  }
  c.validate();
  c.hash = hex64(fnv1a64(c.to_json().dump()));
  return c;
}

SimConfig SimConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json SimConfig::to_json() const {
  return {{"schema_version", 1},
          {"chain", chain.to_json()},
          {"grid_resolution", grid.resolution},
          {"layout", layout_json(layout)},
          {"planner", planner.to_json()},
          {"ik", ik_json(ik)},
          {"scenario", scenario_json(scenario)},
          {"reachability",
           {{"box", aabb_json(reachability.box)},
            {"resolution", reachability.resolution},
            {"orientations", reachability.orientations},
            {"restarts", reachability.restarts},
            {"seed", reachability.seed},
            {"file", reachability.file}}}};
}

void SimConfig::validate() const {
  chain.validate();
  grid.validate();
  planner.validate();
  ik.validate();
  scenario.validate();
  if (layout.workspace.empty()) throw SchemaError("layout.workspace: must be non-empty");
  if (!layout.workspace.contains(layout.target_box.min) || !layout.workspace.contains(layout.target_box.max))
    throw SchemaError("layout.target_box: must lie inside the workspace");
  if (!(layout.target_speed >= 0.0)) throw SchemaError("layout.target_speed: must be >= 0");
  if (!(layout.target_radius > 0.0)) throw SchemaError("layout.target_radius: must be > 0");
  if (!(layout.obstacle_edge > 0.0)) throw SchemaError("layout.obstacle_edge: must be > 0");
  if (!chain.within_limits(layout.home)) throw SchemaError("layout.home: outside the joint limits");
  if (!(reachability.resolution > 0.0)) throw SchemaError("reachability.resolution: must be > 0");
  if (reachability.orientations < 1) throw SchemaError("reachability.orientations: must be >= 1");
  if (reachability.restarts < 1) throw SchemaError("reachability.restarts: must be >= 1");
}

}  // namespace vistrack
