#include "mapcover/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mapcover/coverage.hpp"
#include "mapcover/field_io.hpp"
#include "mapcover/lawnmower.hpp"
#include "mapcover/mapping.hpp"
#include "mapcover/microscopic.hpp"
#include "mapcover/version.hpp"

namespace mapcover {

namespace {

namespace fs = std::filesystem;

std::string timestamp_utc() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Collects artifacts and their checksums as they are written.
struct RunDir {
  fs::path dir;
  Manifest* manifest = nullptr;

  fs::path path(const std::string& name) const { return dir / name; }

  void record(const std::string& name) {
    manifest->checksums[name] = file_checksum(dir / name);
  }

  void text(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot create " + (dir / name).string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw std::runtime_error("short write on " + (dir / name).string());
    manifest->checksums[name] = fnv1a_hex(content);
  }

  void field(const std::string& name, const ScalarField& f) {
    write_field_csv(dir / name, f);
    record(name);
  }

  void series(const std::string& name, const ObservationSeries& s,
              const std::string& value_name) {
    write_series_csv(dir / name, s, value_name);
    record(name);
  }
};

void write_events_csv(const fs::path& path, const EventLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  out << "agent_id,t,x,y,kind\n";
  for (const Event& e : log.events)
    out << e.agent << ',' << format_double(e.t) << ',' << format_double(e.x)
        << ',' << format_double(e.y) << ',' << static_cast<int>(e.kind) << '\n';
}

void write_trajectories_csv(const fs::path& path,
                            const std::vector<TrajectorySample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  out << "agent_id,t,x,y\n";
  for (const TrajectorySample& s : samples)
    out << s.agent << ',' << format_double(s.t) << ',' << format_double(s.x)
        << ',' << format_double(s.y) << '\n';
}

std::string history_csv(const std::vector<double>& J) {
  std::ostringstream out;
  out << "iter,J\n";
  for (std::size_t i = 0; i < J.size(); ++i)
    out << i << ',' << format_double(J[i]) << '\n';
  return out.str();
}

double default_micro_dt(double max_rate, double T) {
  const double dt = max_rate > 0.0 ? 0.1 / max_rate : T / 1000.0;
  return std::min(dt, T);
}

int trajectory_stride(bool dump, double T, double dt) {
  if (!dump) return 0;
  const auto n_steps = static_cast<std::int64_t>(std::ceil(T / dt));
  return static_cast<int>(std::max<std::int64_t>(1, n_steps / 200));
}

std::vector<double> mapping_snapshot_times(const ScenarioConfig& cfg,
                                           const ControlSignal& sweep) {
  if (cfg.mapping->snapshots <= 0) return sweep.times();
  const int s = cfg.mapping->snapshots;
  std::vector<double> times(static_cast<std::size_t>(s) + 1);
  for (int j = 0; j <= s; ++j) times[j] = sweep.duration() * j / s;
  times.back() = sweep.duration();
  return times;
}

struct StageIO {
  const ScenarioConfig& cfg;
  Grid grid;
  RunDir out;
  std::uint64_t seed;
  int threads;
};

ScalarField initial_density(const ScenarioConfig& cfg, const Grid& grid) {
  return gaussian_density(grid, cfg.physics.start_x, cfg.physics.start_y,
                          cfg.physics.sigma);
}

InitialDistribution initial_ensemble(const ScenarioConfig& cfg) {
  InitialDistribution init;
  init.kind = InitialDistribution::Kind::gaussian;
  init.cx = cfg.physics.start_x;
  init.cy = cfg.physics.start_y;
  init.sigma = cfg.physics.sigma;
  return init;
}

// Mapping stage: lawnmower sweep, observation data (simulated counts or the
// macroscopic series), then the regularized inverse solve and threshold.
IndicatorField run_mapping_stage(StageIO& io) {
  const auto& m = *io.cfg.mapping;
  const IndicatorField H_true = truth_indicator(m.truth, io.grid);
  const VelocitySchedule sched = make_lawnmower(
      io.grid.extent(), m.lanes, m.speed,
      lawnmower_path_length(io.grid.extent(), m.lanes) / m.speed);
  const ControlSignal sweep = to_control(sched);
  const double T = sweep.duration();

  PhysicalParams params{io.cfg.mapping_D(), io.cfg.physics.k_o,
                        io.cfg.physics.k_f};
  const ScalarField y0 = initial_density(io.cfg, io.grid);
  const std::vector<double> times = mapping_snapshot_times(io.cfg, sweep);

  SolverOptions sopts;
  sopts.threads = io.threads;
  sopts.store_y2 = false;
  sopts.store_y3 = false;
  ForwardResult fwd =
      solve_mapping_model(H_true, sweep, params, y0, T, times, sopts);

  ObservationSeries data;
  if (m.data == "micro") {
    SimConfig sc;
    sc.n_agents = io.cfg.micro->N;
    sc.T = T;
    sc.mode = SimMode::mapping;
    sc.seed = io.seed;
    sc.threads = io.threads;
    sc.init = initial_ensemble(io.cfg);
    sc.sample_times = times;
    sc.dt = io.cfg.micro->dt > 0.0 ? io.cfg.micro->dt
                                   : default_micro_dt(params.k_o, T);
    sc.trajectory_stride =
        trajectory_stride(io.cfg.output.dump_trajectories, T, sc.dt);
    sc.validate(params, sweep);
    SimResult sim = simulate_ensemble(sc, params, sweep, H_true);

    data = sim.g_hat;
    io.out.series("g_hat.csv", sim.g_hat, "g_hat");
    io.out.series("g_model.csv", fwd.observations, "g");
    write_events_csv(io.out.path("events_mapping.csv"), sim.log);
    io.out.record("events_mapping.csv");
    if (!sim.trajectories.empty()) {
      write_trajectories_csv(io.out.path("trajectories_mapping.csv"),
                             sim.trajectories);
      io.out.record("trajectories_mapping.csv");
    }
  } else {
    data = fwd.observations;
    io.out.series("g.csv", data, "g");
  }

  MappingProblem prob;
  prob.basis = SnapshotBasis::from_trajectory(fwd.trajectory);
  prob.rate = rate_data(data);
  prob.k_o = params.k_o;
  prob.lambda =
      m.lambda > 0.0 ? m.lambda : default_lambda(prob.basis, prob.k_o);

  InverseOptions iopts;
  iopts.max_iters = m.max_iters;
  MappingResult res = solve_inverse(prob, iopts);

  io.out.field("H_true.csv", H_true.field());
  io.out.field("H_hat.csv", res.H_hat);
  io.out.field("H_thresh.csv", res.H_thresh.field());
  io.out.text("objective_history.csv", history_csv(res.objective_history));
  return res.H_thresh;
}

ScalarField half_plane_mask(const Grid& grid, double y_min) {
  return map_field(grid, [y_min](double, double y) {
    return y >= y_min ? 1.0 : 0.0;
  });
}

std::string z_targets_csv(const CellPartition& part) {
  std::ostringstream out;
  out << "m,n,z\n";
  for (int n = 0; n < part.p; ++n)
    for (int m = 0; m < part.p; ++m)
      out << m << ',' << n << ',' << format_double(part.target(m, n)) << '\n';
  return out.str();
}

std::string controls_csv(const ControlSignal& u) {
  std::ostringstream out;
  out << "t,vx,vy,k\n";
  for (std::size_t m = 0; m < u.intervals(); ++m)
    out << format_double(u.times()[m]) << ',' << format_double(u.values()[m].vx)
        << ',' << format_double(u.values()[m].vy) << ','
        << format_double(u.values()[m].k) << '\n';
  return out.str();
}

std::string breakdown_csv(const std::vector<ObjectiveBreakdown>& hist) {
  std::ostringstream out;
  out << "iter,J,terminal,penalty\n";
  for (std::size_t i = 0; i < hist.size(); ++i)
    out << i << ',' << format_double(hist[i].J) << ','
        << format_double(hist[i].terminal) << ','
        << format_double(hist[i].penalty) << '\n';
  return out.str();
}

// Coverage stage: build the block targets from the region map, optimize the
// broadcast control, then (with [micro]) validate it on the agent ensemble.
void run_coverage_stage(StageIO& io, const IndicatorField* mapped) {
  const auto& c = *io.cfg.coverage;

  IndicatorField H = IndicatorField::zeros(io.grid);
  if (!c.map_file.empty()) {
    const ScalarField stored = read_field_csv(c.map_file);
    if (!(stored.grid() == io.grid))
      throw std::runtime_error("map_file grid does not match [grid]");
    H = threshold(stored);
  } else if (mapped) {
    H = *mapped;
  } else {
    throw std::runtime_error("no region map available");
  }

  PhysicalParams params{io.cfg.coverage_D(), io.cfg.physics.k_o,
                        io.cfg.physics.k_f};

  std::optional<ScalarField> mask;
  if (c.mask_y_min > -1e299) mask = half_plane_mask(io.grid, c.mask_y_min);
  const PartitionTargets targets =
      partition_targets(H, c.P, c.C, mask ? &*mask : nullptr);

  CoverageProblem prob(H, params, initial_density(io.cfg, io.grid), c.T,
                       TargetFields{ScalarField(io.grid), ScalarField(io.grid),
                                    targets.target_field});
  prob.lambda = c.lambda;
  prob.bounds = ControlBounds{{-c.vmax, c.vmax}, {-c.vmax, c.vmax}, {0.0, c.kmax}};
  prob.intervals = c.M;
  prob.solver.threads = io.threads;

  // Seed the k channel so the adjoint pair (p1, p2) is nonzero from the first
  // iteration; at u = 0 the velocity gradient vanishes identically.
  ControlSignal u0 = prob.zero_control();
  for (ControlValues& v : u0.values()) v.k = std::min(0.1, c.kmax);

  OptimizeOptions oopts;
  oopts.max_iters = c.max_iters;
  OptimizeResult res = optimize_coverage(u0, prob, oopts);
  ReducedObjective last = reduced_objective(res.u, prob);

  io.out.field("coverage_map.csv", H.field());
  io.out.text("z_targets.csv", z_targets_csv(targets.partition));
  io.out.field("y3_target.csv", targets.target_field);
  io.out.text("controls.csv", controls_csv(res.u));
  io.out.text("J_history.csv", breakdown_csv(res.breakdown_history));
  const std::string suffix = "_t" + format_double(c.T) + ".csv";
  io.out.field("y1" + suffix, last.forward.final_state.y1);
  io.out.field("y2" + suffix, last.forward.final_state.y2);
  io.out.field("y3" + suffix, last.forward.final_state.y3);

  if (io.cfg.micro) {
    SimConfig sc;
    sc.n_agents = io.cfg.micro->N;
    sc.T = c.T;
    sc.mode = SimMode::coverage;
    sc.seed = io.seed;
    sc.threads = io.threads;
    sc.init = initial_ensemble(io.cfg);
    sc.sample_times = {c.T};
    const double max_rate = std::max(res.u.max_k(), params.k_f);
    sc.dt = io.cfg.micro->dt > 0.0 ? io.cfg.micro->dt
                                   : default_micro_dt(max_rate, c.T);
    sc.trajectory_stride =
        trajectory_stride(io.cfg.output.dump_trajectories, c.T, sc.dt);
    sc.validate(params, res.u);
    SimResult sim = simulate_ensemble(sc, params, res.u, H);

    write_events_csv(io.out.path("events_coverage.csv"), sim.log);
    io.out.record("events_coverage.csv");
    io.out.field("y3_micro.csv",
                 empirical_density(sim.log, EventKind::activity_start, io.grid,
                                   sc.n_agents));
    if (!sim.trajectories.empty()) {
      write_trajectories_csv(io.out.path("trajectories_coverage.csv"),
                             sim.trajectories);
      io.out.record("trajectories_coverage.csv");
    }
  }
}

fs::path resolve_run_dir(const ScenarioConfig& cfg, const RunOptions& opts,
                         const std::string& config_hash) {
  if (opts.out) {
    const fs::path dir = *opts.out;
    if (fs::exists(dir) && !fs::is_empty(dir))
      throw std::runtime_error("output directory " + dir.string() +
                               " already contains files");
    fs::create_directories(dir);
    return dir;
  }
  const fs::path base = cfg.output.dir.empty() ? fs::path("runs")
                                               : fs::path(cfg.output.dir);
  const std::string stem = "run-" + config_hash + "-" + timestamp_utc();
  fs::path dir = base / stem;
  for (int k = 2; fs::exists(dir); ++k)
    dir = base / (stem + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

std::pair<fs::path, Manifest> begin_run(const ScenarioConfig& cfg,
                                        const RunOptions& opts) {
  const std::string text = render_config(cfg);
  const std::string hash = fnv1a_hex(text);

  Manifest man;
  man.version = kVersion;
  man.format = kManifestFormat;
  man.seed = opts.seed.value_or(cfg.micro ? cfg.micro->seed : 1);
  man.config_hash = hash;

  const fs::path dir = resolve_run_dir(cfg, opts, hash);
  return {dir, man};
}

PipelineResult finish_run(fs::path dir, Manifest man) {
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot create " + (dir / "manifest.json").string());
  out << man.to_json();
  out.close();
  if (!out)
    throw std::runtime_error("short write on " + (dir / "manifest.json").string());
  return {std::move(dir), std::move(man)};
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a_hex(buf.str());
}

std::string Manifest::to_json() const {
  nlohmann::json j;
  j["version"] = version;
  j["format"] = format;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["checksums"] = checksums;
  return j.dump(2) + "\n";
}

PipelineResult run_pipeline(const ScenarioConfig& cfg, const RunOptions& opts) {
  auto [dir, man] = begin_run(cfg, opts);
  StageIO io{cfg, cfg.make_grid(), RunDir{dir, &man}, man.seed, opts.threads};
  io.out.text("config.txt", render_config(cfg));

  std::optional<IndicatorField> mapped;
  if (cfg.mapping) {
    try {
      mapped = run_mapping_stage(io);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("mapping stage: ") + e.what());
    }
  }
  if (cfg.coverage) {
    try {
      run_coverage_stage(io, mapped ? &*mapped : nullptr);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("coverage stage: ") + e.what());
    }
  }
  return finish_run(std::move(dir), std::move(man));
}

PipelineResult run_simulate(const ScenarioConfig& cfg, const RunOptions& opts) {
  if (!cfg.mapping || !cfg.micro)
    throw std::runtime_error("simulate needs [mapping] and [micro] sections");

  auto [dir, man] = begin_run(cfg, opts);
  StageIO io{cfg, cfg.make_grid(), RunDir{dir, &man}, man.seed, opts.threads};
  io.out.text("config.txt", render_config(cfg));

  try {
    const auto& m = *cfg.mapping;
    const IndicatorField H = truth_indicator(m.truth, io.grid);
    const ControlSignal sweep = to_control(make_lawnmower(
        io.grid.extent(), m.lanes, m.speed,
        lawnmower_path_length(io.grid.extent(), m.lanes) / m.speed));
    PhysicalParams params{cfg.mapping_D(), cfg.physics.k_o, cfg.physics.k_f};

    SimConfig sc;
    sc.n_agents = cfg.micro->N;
    sc.T = sweep.duration();
    sc.mode = SimMode::mapping;
    sc.seed = man.seed;
    sc.threads = opts.threads;
    sc.init = initial_ensemble(cfg);
    sc.sample_times = mapping_snapshot_times(cfg, sweep);
    sc.dt = cfg.micro->dt > 0.0 ? cfg.micro->dt
                                : default_micro_dt(params.k_o, sc.T);
    sc.trajectory_stride =
        trajectory_stride(cfg.output.dump_trajectories, sc.T, sc.dt);
    sc.validate(params, sweep);
    SimResult sim = simulate_ensemble(sc, params, sweep, H);

    io.out.series("g_hat.csv", sim.g_hat, "g_hat");
    write_events_csv(io.out.path("events.csv"), sim.log);
    io.out.record("events.csv");
    std::vector<std::pair<double, double>> final_pos;
    final_pos.reserve(sim.final_states.size());
    for (const AgentState& a : sim.final_states) final_pos.emplace_back(a.x, a.y);
    io.out.field("y1_micro_t" + format_double(sc.T) + ".csv",
                 empirical_density(final_pos, io.grid, sc.n_agents));
    if (!sim.trajectories.empty()) {
      write_trajectories_csv(io.out.path("trajectories.csv"), sim.trajectories);
      io.out.record("trajectories.csv");
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("simulate stage: ") + e.what());
  }
  return finish_run(std::move(dir), std::move(man));
}

}  // namespace mapcover
