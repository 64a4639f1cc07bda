#include "vistrack/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace vistrack;

namespace {

Pose6 make_pose(const Vec3& p, const Vec3& r) { return {p, r}; }

py::dict run_dict(const RunMetrics& m) {
  py::dict d;
  d["run"] = m.run;
  d["collided"] = m.collided;
  d["elapsed_ticks"] = m.elapsed_ticks;
  d["ik_failure_rate"] = m.ik_failure_rate;
  d["tracking_rate"] = m.tracking_rate;
  d["obstacle_speeds"] = m.obstacle_speeds;
  d["collision_speed"] = m.collision_speed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_vistrack, m) {
  m.doc() = "Occlusion- and collision-aware camera tracking for a 7-DoF arm.";

  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<GridError>(m, "GridError", PyExc_ValueError);

  m.def("euler_xyz_to_matrix", &euler_xyz_to_matrix, py::arg("r"));
  m.def("matrix_to_euler_xyz", &matrix_to_euler_xyz, py::arg("m"));
  m.def("rescale", [](double w0, double w1, double w2, double x) { return rescale({w0, w1, w2}, x); },
        py::arg("w0"), py::arg("w1"), py::arg("w2"), py::arg("x"));

  py::class_<Pose6>(m, "Pose6")
      .def(py::init(&make_pose), py::arg("p") = Vec3::Zero(), py::arg("r") = Vec3::Zero())
      .def_readwrite("p", &Pose6::p)
      .def_readwrite("r", &Pose6::r)
      .def("rotation", &Pose6::rotation)
      .def("__repr__", [](const Pose6& p) {
        return "Pose6(p=[" + std::to_string(p.p.x()) + ", " + std::to_string(p.p.y()) + ", " +
               std::to_string(p.p.z()) + "])";
      });

  py::class_<KinematicChain>(m, "KinematicChain")
      .def_static("default", &KinematicChain::default_chain)
      .def_static("load", &KinematicChain::load, py::arg("path"))
      .def_static("from_json", [](const std::string& text) {
        return KinematicChain::from_json(nlohmann::json::parse(text));
      })
      .def("to_json", [](const KinematicChain& c) { return c.to_json().dump(); })
      .def("hash", &KinematicChain::hash)
      .def("reach", &KinematicChain::reach)
      .def("within_limits", &KinematicChain::within_limits, py::arg("q"), py::arg("slack") = 0.0)
      .def("limits", [](const KinematicChain& c) {
        std::vector<std::pair<double, double>> out;
        for (const JointLimit& l : c.limits) out.emplace_back(l.min, l.max);
        return out;
      });

  m.def("camera_pose", [](const KinematicChain& c, const JointConfig& q) {
        return forward_kinematics(c, q).camera_pose();
      }, py::arg("chain"), py::arg("q"));
  m.def("camera_transform", [](const KinematicChain& c, const JointConfig& q) {
        return Eigen::Matrix4d(forward_kinematics(c, q).camera.matrix());
      }, py::arg("chain"), py::arg("q"), "4x4 homogeneous camera transform.");
  m.def("jacobian", py::overload_cast<const KinematicChain&, const JointConfig&>(&jacobian),
        py::arg("chain"), py::arg("q"));
  m.def("self_collision", py::overload_cast<const KinematicChain&, const JointConfig&>(&self_collision),
        py::arg("chain"), py::arg("q"));

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init([](const Vec3& origin, double resolution, std::array<int, 3> dims) {
             GridSpec s{origin, resolution, dims};
             s.validate();
             return s;
           }),
           py::arg("origin"), py::arg("resolution"), py::arg("dims"))
      .def_readonly("origin", &GridSpec::origin)
      .def_readonly("resolution", &GridSpec::resolution)
      .def_readonly("dims", &GridSpec::dims)
      .def("center", &GridSpec::center)
      .def("cell_count", &GridSpec::cell_count);

  py::class_<OccupancyGrid>(m, "OccupancyGrid")
      .def(py::init<const GridSpec&>(), py::arg("spec"))
      .def_property_readonly("spec", &OccupancyGrid::spec)
      .def("set", &OccupancyGrid::set, py::arg("i"), py::arg("j"), py::arg("k"), py::arg("value") = true)
      .def("occupied", &OccupancyGrid::occupied)
      .def("occupied_count", &OccupancyGrid::occupied_count)
      .def("clear", &OccupancyGrid::clear);

  m.def("point_grid_distance", &point_grid_distance, py::arg("grid"), py::arg("p"));
  m.def("cone_grid_distance", [](const OccupancyGrid& g, const Vec3& camera, const Vec3& target,
                                 double base_radius) {
        return cone_grid_distance(g, SightCone::between(camera, target, base_radius));
      }, py::arg("grid"), py::arg("camera"), py::arg("target"), py::arg("base_radius") = 0.10);

  py::class_<ReachabilityMap>(m, "ReachabilityMap")
      .def_static("load", &ReachabilityMap::load, py::arg("path"), py::arg("expected_chain_hash") = "")
      .def("save", &ReachabilityMap::save, py::arg("path"))
      .def("query", py::overload_cast<const Vec3&>(&ReachabilityMap::query, py::const_), py::arg("p"))
      .def_property_readonly("grid", &ReachabilityMap::grid)
      .def_property_readonly("scores", &ReachabilityMap::scores);

  m.def("build_map", [](const KinematicChain& chain, const Vec3& lo, const Vec3& hi, double resolution,
                        int orientations, int restarts, std::uint64_t seed, int threads) {
        BuildOptions o;
        o.orientations = orientations;
        o.restarts = restarts;
        o.seed = seed;
        o.threads = threads;
        py::gil_scoped_release release;
        return build_map(chain, Aabb{lo, hi}, resolution, o);
      }, py::arg("chain"), py::arg("lo"), py::arg("hi"), py::arg("resolution"),
      py::arg("orientations") = 50, py::arg("restarts") = 8, py::arg("seed") = 1, py::arg("threads") = 1);

  py::class_<IkParams>(m, "IkParams")
      .def(py::init<>())
      .def_readwrite("position_tolerance", &IkParams::position_tolerance)
      .def_readwrite("rotation_tolerance", &IkParams::rotation_tolerance)
      .def_readwrite("max_iterations", &IkParams::max_iterations)
      .def_readwrite("clearance_margin", &IkParams::clearance_margin)
      .def_readwrite("joint_speed_cap", &IkParams::joint_speed_cap);

  m.def("ik_solve", [](const KinematicChain& chain, const Pose6& target, const JointConfig& q_prev,
                       const OccupancyGrid* grid, const IkParams& params) {
        const OccupancyGrid empty;
        const IkResult r = ik_solve(chain, target, q_prev, grid != nullptr ? *grid : empty, params);
        py::dict d;
        d["success"] = r.success;
        d["q"] = r.q;
        d["iterations"] = r.iterations;
        d["position_error"] = r.position_error;
        d["rotation_error"] = r.rotation_error;
        return d;
      }, py::arg("chain"), py::arg("target"), py::arg("q_prev"), py::arg("grid") = nullptr,
      py::arg("params") = IkParams{});

  m.def("plan_step", [](const Pose6& camera, const Vec3& target, const OccupancyGrid* grid,
                        const ReachabilityMap* reach, const std::string& terms) {
        PlannerParams params = PlannerParams::paper_table1();
        params.terms = TermMask::parse(terms);
        const OccupancyGrid empty;
        PlannerInput in;
        in.camera = camera;
        in.target.p = target;
        in.grid = grid != nullptr ? grid : &empty;
        in.reach = reach;
        const PlanResult r = plan_step(in, params);
        py::dict d;
        d["delta"] = r.delta;
        d["value"] = r.value;
        d["start_value"] = r.start_value;
        d["evaluations"] = r.evaluations;
        d["degraded"] = r.degraded;
        d["pose"] = compose(camera, r.delta);
        return d;
      }, py::arg("camera"), py::arg("target"), py::arg("grid") = nullptr, py::arg("reach") = nullptr,
      py::arg("terms") = "full");

  py::class_<SimConfig>(m, "SimConfig")
      .def_static("defaults", &SimConfig::defaults)
      .def_static("load", &SimConfig::load, py::arg("path"))
      .def_static("from_json", [](const std::string& text) {
        return SimConfig::from_json(nlohmann::json::parse(text));
      })
      .def("to_json", [](const SimConfig& c) { return c.to_json().dump(); })
      .def_readonly("hash", &SimConfig::hash)
      .def_readonly("chain", &SimConfig::chain);

  m.def("run", [](const SimConfig& config, const ReachabilityMap* map, int kind, int obstacles, int runs,
                  const std::string& terms, bool stationary, std::uint64_t seed, int threads) {
        ScenarioSpec spec = config.scenario;
        spec.kind = ScenarioKind(kind);
        spec.obstacle_count = obstacles;
        spec.runs = runs;
        spec.terms = TermMask::parse(terms);
        spec.target_motion = stationary ? TargetMotion::Stationary : TargetMotion::RandomWalk;
        spec.seed = seed;
        RunOptions options;
        options.threads = threads;
        std::vector<RunMetrics> out;
        {
          py::gil_scoped_release release;
          out = run(config, spec, map, options);
        }
        py::list rows;
        for (const RunMetrics& r : out) rows.append(run_dict(r));
        return rows;
      }, py::arg("config"), py::arg("map") = nullptr, py::arg("kind") = 1, py::arg("obstacles") = 0,
      py::arg("runs") = 1, py::arg("terms") = "full", py::arg("stationary") = false, py::arg("seed") = 1,
      py::arg("threads") = 1);
}
