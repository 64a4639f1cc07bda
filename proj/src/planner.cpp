#include "vistrack/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace vistrack {

using nlohmann::json;

TermMask TermMask::parse(const std::string& text) {
  TermMask mask{false, false, false};
  if (text == "full" || text == "all") return TermMask{};
  std::stringstream ss(text);
  std::string part;
  bool has_track = false;
  while (std::getline(ss, part, '+')) {
    if (part == "track") {
      has_track = true;
    } else if (part == "occl") {
      mask.occlusion = true;
    } else if (part == "col") {
      mask.collision = true;
    } else if (part == "reach") {
      mask.reachability = true;
    } else {
      throw SchemaError("ablation mask: unknown term '" + part + "'");
    }
  }
  if (!has_track) throw SchemaError("ablation mask: the tracking term cannot be disabled");
  return mask;
}

std::string TermMask::name() const {
  std::string out = "track";
  if (occlusion) out += "+occl";
  if (collision) out += "+col";
  if (reachability) out += "+reach";
  return out;
}

PlannerParams PlannerParams::paper_table1() {
  PlannerParams p;
  p.lower << -0.05, -0.05, -0.05, -0.2, -0.2, -0.2;
  p.upper << 0.05, 0.05, 0.05, 0.2, 0.2, 0.2;
  p.w_distance = {0.5, 1.0, 0.0};
  p.w_angle = {7.5, 1.5, 0.0};
  p.desired_distance = 1.0;
  p.w_occlusion = {-1.0, 5.0, -1.5};
  p.occlusion_threshold = 0.3;
  p.w_collision = {-1.0, 1.5, -1.5};
  p.collision_threshold = 1.0;
  p.w_reach = {-5.0, 100.0, -50.0};
  p.reach_threshold = 0.5;
  return p;
}

void PlannerParams::validate() const {
  for (int i = 0; i < 6; ++i)
    if (!(lower[i] < upper[i])) throw SchemaError("planner: delta_lower must be < delta_upper");
  if (!(desired_distance > 0.0)) throw SchemaError("planner.d_des: must be > 0");
  if (!(occlusion_threshold > 0.0) || !(collision_threshold > 0.0) || !(reach_threshold > 0.0))
    throw SchemaError("planner: deactivation thresholds must be > 0");
  if (!(cone_base_radius > 0.0)) throw SchemaError("planner.cone_base_radius: must be > 0");
  if (max_evaluations < 1) throw SchemaError("planner.max_evaluations: must be >= 1");
  if (!(step_tolerance > 0.0) || !(gradient_step > 0.0))
    throw SchemaError("planner: step_tolerance and gradient_step must be > 0");
}

namespace {

json weights_json(const RescaleWeights& w) { return json::array({w.w0, w.w1, w.w2}); }

RescaleWeights weights_field(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
    throw SchemaError("planner." + key + ": expected [w0, w1, w2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

PoseDelta delta_field(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 6) throw SchemaError("planner." + key + ": expected 6 numbers");
  PoseDelta d;
  for (int i = 0; i < 6; ++i) {
    if (!j[i].is_number()) throw SchemaError("planner." + key + ": expected 6 numbers");
    d[i] = j[i].get<double>();
  }
  return d;
}

double number_field(const json& j, const std::string& key) {
  if (!j.is_number()) throw SchemaError("planner." + key + ": expected a number");
  return j.get<double>();
}

}  // namespace

json PlannerParams::to_json() const {
  return {{"delta_lower", std::vector<double>(lower.data(), lower.data() + 6)},
          {"delta_upper", std::vector<double>(upper.data(), upper.data() + 6)},
          {"w_d", weights_json(w_distance)},
          {"w_theta", weights_json(w_angle)},
          {"w_occl", weights_json(w_occlusion)},
          {"w_col", weights_json(w_collision)},
          {"w_reach", weights_json(w_reach)},
          {"d_des", desired_distance},
          {"u_occl", occlusion_threshold},
          {"u_col", collision_threshold},
          {"u_reach", reach_threshold},
          {"cone_base_radius", cone_base_radius},
          {"max_evaluations", max_evaluations},
          {"step_tolerance", step_tolerance},
          {"gradient_step", gradient_step},
          {"seed_lattice", seed_lattice},
          {"terms", terms.name()}};
}

PlannerParams PlannerParams::from_json(const json& j, const PlannerParams& base) {
  if (!j.is_object()) throw SchemaError("planner: expected an object");
  PlannerParams p = base;
  if (j.contains("profile")) {
    if (j["profile"] != "paper-table1")
      throw SchemaError("planner.profile: unknown profile (supported: paper-table1)");
    p = paper_table1();
  }
  if (j.contains("delta_lower")) p.lower = delta_field(j["delta_lower"], "delta_lower");
  if (j.contains("delta_upper")) p.upper = delta_field(j["delta_upper"], "delta_upper");
  if (j.contains("w_d")) p.w_distance = weights_field(j["w_d"], "w_d");
  if (j.contains("w_theta")) p.w_angle = weights_field(j["w_theta"], "w_theta");
  if (j.contains("w_occl")) p.w_occlusion = weights_field(j["w_occl"], "w_occl");
  if (j.contains("w_col")) p.w_collision = weights_field(j["w_col"], "w_col");
  if (j.contains("w_reach")) p.w_reach = weights_field(j["w_reach"], "w_reach");
  if (j.contains("d_des")) p.desired_distance = number_field(j["d_des"], "d_des");
  if (j.contains("u_occl")) p.occlusion_threshold = number_field(j["u_occl"], "u_occl");
  if (j.contains("u_col")) p.collision_threshold = number_field(j["u_col"], "u_col");
  if (j.contains("u_reach")) p.reach_threshold = number_field(j["u_reach"], "u_reach");
  if (j.contains("cone_base_radius")) p.cone_base_radius = number_field(j["cone_base_radius"], "cone_base_radius");
  if (j.contains("max_evaluations")) p.max_evaluations = int(number_field(j["max_evaluations"], "max_evaluations"));
  if (j.contains("step_tolerance")) p.step_tolerance = number_field(j["step_tolerance"], "step_tolerance");
  if (j.contains("gradient_step")) p.gradient_step = number_field(j["gradient_step"], "gradient_step");
  if (j.contains("seed_lattice")) p.seed_lattice = int(number_field(j["seed_lattice"], "seed_lattice"));
  if (j.contains("terms")) {
    if (!j["terms"].is_string()) throw SchemaError("planner.terms: expected a string");
    p.terms = TermMask::parse(j["terms"].get<std::string>());
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------

Pose6 compose(const Pose6& pose, const PoseDelta& delta) {
  Pose6 out;
  out.p = pose.p + delta.head<3>();
  out.r = matrix_to_euler_xyz(euler_xyz_to_matrix(delta.tail<3>()) * pose.rotation());
  return out;
}

double view_angle(const Pose6& camera, const Vec3& target) {
  const Vec3 to_target = target - camera.p;
  if (to_target.norm() <= 0.0) return 0.0;
  const Vec3 axis = camera.rotation().col(2);
  return std::atan2(axis.cross(to_target).norm(), axis.dot(to_target));
}

double term_track(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate) {
  const double distance = (input.target.p - candidate.p).norm();
  return rescale(params.w_distance, std::abs(params.desired_distance - distance)) +
         rescale(params.w_angle, view_angle(candidate, input.target.p));
}

double term_occl(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate) {
  if (input.grid == nullptr) return 0.0;
  const SightCone cone = SightCone::between(candidate.p, input.target.p, params.cone_base_radius);
  if (!(cone.length > 0.0)) return 0.0;
  const double d = cone_grid_distance(*input.grid, cone);
  return d < params.occlusion_threshold ? rescale(params.w_occlusion, d) : 0.0;
}

double term_col(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate) {
  if (input.grid == nullptr) return 0.0;
  const double d = point_grid_distance(*input.grid, candidate.p);
  return d < params.collision_threshold ? rescale(params.w_collision, d) : 0.0;
}

double term_reach(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate) {
  if (input.reach == nullptr) return 0.0;
  const double v = input.reach->query(candidate);
  return v < params.reach_threshold ? rescale(params.w_reach, v) : 0.0;
}

TermValues evaluate_terms(const PlannerParams& params, const PlannerInput& input, const Pose6& candidate) {
  TermValues t;
  t.track = term_track(params, input, candidate);
  if (params.terms.occlusion) t.occl = term_occl(params, input, candidate);
  if (params.terms.collision) t.col = term_col(params, input, candidate);
  if (params.terms.reachability) t.reach = term_reach(params, input, candidate);
  return t;
}

double objective(const PlannerParams& params, const PlannerInput& input, const PoseDelta& delta) {
  return evaluate_terms(params, input, compose(input.camera, delta)).total();
}

// ---------------------------------------------------------------------------

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;

class BoxMinimizer {
 public:
  BoxMinimizer(const PlannerInput& input, const PlannerParams& params)
      : input_(input), params_(params) {
    for (int i = 0; i < 6; ++i) scale_[i] = 0.5 * (params.upper[i] - params.lower[i]);
  }

  bool exhausted() const { return out_of_budget_ || evaluations_ >= params_.max_evaluations; }
  bool affordable(int n) const { return evaluations_ + n <= params_.max_evaluations; }
  int evaluations() const { return evaluations_; }

  double eval(const PoseDelta& x) {
    ++evaluations_;
    return objective(params_, input_, x);
  }

  PoseDelta clamp(const PoseDelta& x) const { return x.cwiseMax(params_.lower).cwiseMin(params_.upper); }

  /// Gradient with respect to the scaled variables x_i / scale_i.
  PoseDelta gradient(const PoseDelta& x) {
    PoseDelta g;
    const double h = params_.gradient_step;
    for (int i = 0; i < 6; ++i) {
      PoseDelta xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      g[i] = (eval(xp) - eval(xm)) / (2.0 * h) * scale_[i];
    }
    return g;
  }

  /// Projected BFGS from x0; returns the best point found.
  std::pair<PoseDelta, double> descend(PoseDelta x, double f) {
    Mat6 h_inv = Mat6::Identity();
    bool steepest = true;
    if (!affordable(12)) {
      out_of_budget_ = true;
      return {x, f};
    }
    PoseDelta g = gradient(x);
    for (int iter = 0; iter < 500 && !exhausted(); ++iter) {
      PoseDelta free = PoseDelta::Ones();
      for (int i = 0; i < 6; ++i) {
        const bool at_lo = x[i] <= params_.lower[i] && g[i] > 0.0;
        const bool at_hi = x[i] >= params_.upper[i] && g[i] < 0.0;
        if (at_lo || at_hi) free[i] = 0.0;
      }
      const PoseDelta pg = g.cwiseProduct(free);
      if (pg.norm() < 1e-14) break;
      PoseDelta dz = -(free.asDiagonal() * h_inv * free.asDiagonal()) * g;
      if (steepest || dz.dot(pg) >= 0.0) {
        h_inv.setIdentity();
        steepest = true;
        dz = -pg / pg.cwiseAbs().maxCoeff();  // half the box along the steepest axis
      }
      // backtracking on the projected path
      double alpha = 1.0;
      bool accepted = false;
      PoseDelta x_new;
      double f_new = f;
      for (int ls = 0; ls < 40 && !exhausted(); ++ls) {
        x_new = clamp(x + alpha * dz.cwiseProduct(scale_));
        const PoseDelta step = x_new - x;
        if (step.cwiseAbs().maxCoeff() < 0.1 * params_.step_tolerance) break;
        f_new = eval(x_new);
        const double predicted = g.dot(step.cwiseQuotient(scale_));
        if (f_new <= f + 1e-4 * std::min(predicted, 0.0) && f_new < f) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        if (steepest) break;
        steepest = true;
        continue;
      }
      const PoseDelta step = x_new - x;
      if (!affordable(12)) {
        out_of_budget_ = true;
        return {x_new, f_new};
      }
      const PoseDelta g_new = gradient(x_new);
      const PoseDelta s = step.cwiseQuotient(scale_);
      const PoseDelta y = g_new - g;
      const double sy = s.dot(y);
      if (sy > 1e-12) {
        if (steepest) h_inv = (sy / y.squaredNorm()) * Mat6::Identity();
        const double rho = 1.0 / sy;
        const Mat6 v = Mat6::Identity() - rho * y * s.transpose();
        h_inv = v.transpose() * h_inv * v + rho * s * s.transpose();
        steepest = false;
      } else {
        steepest = true;
      }
      x = x_new;
      f = f_new;
      g = g_new;
      if (step.cwiseAbs().maxCoeff() < params_.step_tolerance) break;
    }
    return {x, f};
  }

 private:
  const PlannerInput& input_;
  const PlannerParams& params_;
  PoseDelta scale_;
  int evaluations_ = 0;
  bool out_of_budget_ = false;
};

}  // namespace

PlanResult plan_step(const PlannerInput& input, const PlannerParams& params) {
  BoxMinimizer opt(input, params);
  PlanResult result;
  const PoseDelta zero = opt.clamp(PoseDelta::Zero());
  result.start_value = opt.eval(zero);
  auto [best_x, best_f] = opt.descend(zero, result.start_value);

  if (params.seed_lattice >= 2 && !opt.exhausted()) {
    const int n = params.seed_lattice;
    PoseDelta seed_x = zero;
    double seed_f = result.start_value;
    for (int a = 0; a < n && !opt.exhausted(); ++a)
      for (int b = 0; b < n && !opt.exhausted(); ++b)
        for (int c = 0; c < n && !opt.exhausted(); ++c) {
          PoseDelta x = PoseDelta::Zero();
          const int idx[3] = {a, b, c};
          for (int i = 0; i < 3; ++i)
            x[i] = params.lower[i] + (params.upper[i] - params.lower[i]) * idx[i] / double(n - 1);
          const double f = opt.eval(x);
          if (f < seed_f) {
            seed_f = f;
            seed_x = x;
          }
        }
    if (seed_f < best_f && !opt.exhausted()) {
      auto [x2, f2] = opt.descend(seed_x, seed_f);
      if (f2 < best_f) {
        best_x = x2;
        best_f = f2;
      }
    }
  }
  if (!(best_f <= result.start_value)) {
    best_x = zero;
    best_f = result.start_value;
  }
  result.delta = best_x;
  result.value = best_f;
  result.evaluations = opt.evaluations();
  result.degraded = opt.exhausted();
  return result;
}

int calibrate_evaluation_budget(const PlannerInput& input, const PlannerParams& params,
                                double budget_ms) {
  using clock = std::chrono::steady_clock;
  constexpr int kSamples = 200;
  PoseDelta x = PoseDelta::Zero();
  double sink = 0.0;
  const auto t0 = clock::now();
  for (int i = 0; i < kSamples; ++i) {
    x[i % 6] = params.lower[i % 6] + (params.upper[i % 6] - params.lower[i % 6]) * ((i * 37) % 101) / 100.0;
    sink += objective(params, input, x);
  }
  const double per_eval_ms =
      std::chrono::duration<double, std::milli>(clock::now() - t0).count() / kSamples;
  (void)sink;
  return std::max(1, int(budget_ms / std::max(per_eval_ms, 1e-6)));
}

}  // namespace vistrack
