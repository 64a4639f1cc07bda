// vistrack: reachability maps, scenario runs, ablations and stage benchmarks.

#include "vistrack/sim.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using namespace vistrack;

namespace {

struct Manifest {
  std::string config;
  std::string out = ".";
  std::string map;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> terms;
  int threads = int(std::max(1u, std::thread::hardware_concurrency()));
};

SimConfig load_config(const Manifest& m) {
  SimConfig c = m.config.empty() ? SimConfig::defaults() : SimConfig::load(m.config);
  if (m.seed) c.scenario.seed = *m.seed;
  if (m.runs) {
    if (*m.runs < 0) throw SchemaError("--runs: must be >= 0");
    c.scenario.runs = *m.runs;
  }
  if (m.terms) c.scenario.terms = TermMask::parse(*m.terms);
  return c;
}

fs::path output_dir(const Manifest& m) {
  const fs::path dir(m.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

fs::path map_path(const Manifest& m, const SimConfig& c) {
  return m.map.empty() ? fs::path(m.out) / c.reachability.file : fs::path(m.map);
}

ReachabilityMap load_map(const Manifest& m, const SimConfig& c) {
  const fs::path path = map_path(m, c);
  if (!fs::exists(path)) {
    std::string hint = "vistrack build-map";
    if (!m.config.empty()) hint += " --config " + m.config;
    hint += " --out " + path.parent_path().string();
    throw IoError("reachability map " + path.string() + " not found; build it first with `" + hint + "`");
  }
  return ReachabilityMap::load(path, c.chain.hash());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// CSV outputs start with a provenance comment line.
std::ofstream open_csv(const fs::path& path, const SimConfig& c) {
  std::ofstream out = open_out(path);
  out << "# config_hash " << c.hash << "\n";
  return out;
}

void write_json(const fs::path& path, nlohmann::json j, const SimConfig& c) {
  j["config_hash"] = c.hash;
  open_out(path) << j.dump(2) << "\n";
}

int cmd_build_map(const Manifest& m) {
  const SimConfig c = load_config(m);
  output_dir(m);
  BuildOptions options;
  options.orientations = c.reachability.orientations;
  options.restarts = c.reachability.restarts;
  options.seed = m.seed.value_or(c.reachability.seed);
  options.threads = m.threads;
  options.progress = [](std::size_t done, std::size_t total) {
    std::fprintf(stderr, "\rcells %zu/%zu", done, total);
    if (done == total) std::fprintf(stderr, "\n");
  };
  const auto t0 = std::chrono::steady_clock::now();
  const ReachabilityMap map = build_map(c.chain, c.reachability.box, c.reachability.resolution, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path path = map_path(m, c);
  map.save(path);
  const nlohmann::json report = {{"map", path.string()},
                                 {"cells", map.scores().size()},
                                 {"orientations", options.orientations},
                                 {"restarts", options.restarts},
                                 {"seed", options.seed},
                                 {"chain_hash", map.meta().chain_hash},
                                 {"wall_seconds", seconds}};
  write_json(path.string() + ".report.json", report, c);
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_run(const Manifest& m, bool traces) {
  const SimConfig c = load_config(m);
  const fs::path dir = output_dir(m);
  const ReachabilityMap map = load_map(m, c);
  RunOptions options;
  options.threads = m.threads;
  if (traces) {
    fs::create_directories(dir / "traces");
    options.on_trace = [&](int run, const std::vector<StepRecord>& trace) {
      char name[32];
      std::snprintf(name, sizeof name, "run%03d.csv", run);
      auto out = open_csv(dir / "traces" / name, c);
      write_trace_csv(out, trace);
    };
  }
  const auto runs = run(c, c.scenario, &map, options);
  const AggregateRow row = aggregate(runs, c.scenario);
  auto runs_out = open_csv(dir / "runs.csv", c);
  write_runs_csv(runs_out, runs);
  auto table_out = open_csv(dir / "table.csv", c);
  write_table_csv(table_out, {row});
  write_json(dir / "table.json", {{"rows", table_json({row})}}, c);
  write_table_csv(std::cout, {row});
  return 0;
}

int cmd_ablate(const Manifest& m, int bins) {
  const SimConfig c = load_config(m);
  const fs::path dir = output_dir(m);
  const ReachabilityMap map = load_map(m, c);
  RunOptions options;
  options.threads = m.threads;
  std::vector<AggregateRow> rows;
  std::vector<RunMetrics> pooled_full;
  for (const ScenarioSpec& base : ablation_cases(c.scenario)) {
    for (const TermMask& mask : ablation_masks()) {
      ScenarioSpec spec = base;
      spec.terms = mask;
      const auto runs = run(c, spec, &map, options);
      rows.push_back(aggregate(runs, spec));
      auto out = open_csv(dir / ("runs_" + spec.case_name() + "_" + mask.name() + ".csv"), c);
      write_runs_csv(out, runs);
      if (mask == TermMask{} && spec.kind == ScenarioKind::Crossing && spec.obstacle_count > 0)
        pooled_full.insert(pooled_full.end(), runs.begin(), runs.end());
      std::fprintf(stderr, "%s %s done\n", spec.case_name().c_str(), mask.name().c_str());
    }
  }
  auto table_out = open_csv(dir / "ablation.csv", c);
  write_table_csv(table_out, rows);
  write_json(dir / "ablation.json", {{"rows", table_json(rows)}}, c);
  const SpeedHistogram h = speed_histogram(pooled_full, c.scenario.speed_min, c.scenario.speed_max, bins);
  auto hist_out = open_csv(dir / "speed_histogram.csv", c);
  write_histogram_csv(hist_out, h);
  write_table_csv(std::cout, rows);
  return 0;
}

int cmd_bench(const Manifest& m, int runs) {
  const SimConfig c = load_config(m);
  const fs::path dir = output_dir(m);
  const ReachabilityMap map = load_map(m, c);
  const BenchReport report = benchmark(c, &map, runs);
  write_json(dir / "bench.json", bench_json(report), c);
  std::printf("stage,median_ms,p95_ms,samples\n");
  for (const auto& [name, s] : {std::pair{"rasterize", report.rasterize}, std::pair{"plan_step", report.plan_step},
                                std::pair{"ik_solve", report.ik_solve}})
    std::printf("%s,%.3f,%.3f,%d\n", name, s.median_ms, s.p95_ms, s.samples);
  return 0;
}

int cmd_export_slice(const Manifest& m, double z) {
  const SimConfig c = load_config(m);
  const fs::path dir = output_dir(m);
  const ReachabilityMap map = load_map(m, c);
  auto out = open_csv(dir / "reach_slice.csv", c);
  map.write_slice_csv(out, z);
  return 0;
}

int exit_code(const std::string& kind) {
  if (kind == "schema") return 3;
  if (kind == "io") return 4;
  if (kind == "grid") return 5;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vistrack: occlusion- and collision-aware visual tracking for a 7-DoF arm"};
  app.require_subcommand(1);
  Manifest m;
  const auto common = [&](CLI::App* sub, bool with_map) {
    sub->add_option("-c,--config", m.config, "Config file (JSON); built-in defaults if omitted")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", m.out, "Output directory")->capture_default_str();
    if (with_map)
      sub->add_option("--map", m.map, "Reachability map file (default: <out>/<reachability.file>)");
    sub->add_option("--threads", m.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  };
  const auto overrides = [&](CLI::App* sub) {
    sub->add_option("--seed", m.seed, "Override the scenario seed");
    sub->add_option("--runs", m.runs, "Override the number of runs");
    sub->add_option("--terms", m.terms, "Objective terms, e.g. track+occl or full");
  };

  auto* build = app.add_subcommand("build-map", "Build the reachability map offline");
  common(build, true);
  build->add_option("--seed", m.seed, "Override the orientation-sampling seed");

  bool traces = false;
  auto* run_cmd = app.add_subcommand("run", "Run the configured scenario");
  common(run_cmd, true);
  overrides(run_cmd);
  run_cmd->add_flag("--traces", traces, "Write per-tick traces to <out>/traces/");

  int bins = 4;
  auto* ablate = app.add_subcommand("ablate", "Four objective configurations across the five cases");
  common(ablate, true);
  ablate->add_option("--seed", m.seed, "Override the scenario seed");
  ablate->add_option("--runs", m.runs, "Override runs per case");
  ablate->add_option("--bins", bins, "Speed-histogram bins")->capture_default_str()->check(CLI::PositiveNumber);

  int bench_runs = 5;
  auto* bench = app.add_subcommand("bench", "Median and 95th-percentile stage wall times");
  common(bench, true);
  bench->add_option("--runs", bench_runs, "Simulated runs to sample")->capture_default_str();

  double z = 1.5;
  auto* slice = app.add_subcommand("export-slice", "Horizontal slice of the reachability map as CSV");
  common(slice, true);
  slice->add_option("--z", z, "Slice height (m)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*build) return cmd_build_map(m);
    if (*run_cmd) return cmd_run(m, traces);
    if (*ablate) return cmd_ablate(m, bins);
    if (*bench) return cmd_bench(m, bench_runs);
    if (*slice) return cmd_export_slice(m, z);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
