// Command-line front end: scenario configs in, CSV artifacts out.
//
// Subcommands:
//   make-config     print or save a bundled scenario preset
//   pipeline        run every stage enabled in the config
//   map             mapping stage only (sweep, data, inverse solve)
//   coverage        coverage optimization from a stored region map
//   simulate        microscopic ensemble under the mapping sweep
//   check-gradient  adjoint vs finite-difference gradient diagnostic

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mapcover/coverage.hpp"
#include "mapcover/mapping.hpp"
#include "mapcover/pipeline.hpp"
#include "mapcover/rng.hpp"
#include "mapcover/version.hpp"

namespace {

using namespace mapcover;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 1;
};

void add_common(CLI::App* sub, CommonArgs& args, bool needs_config = true) {
  auto* opt = sub->add_option("--config", args.config, "scenario config file");
  if (needs_config) opt->required();
  opt->check(CLI::ExistingFile);
  sub->add_option("--seed", [&args](const CLI::results_t& r) {
    args.seed = std::stoull(r[0]);
    return true;
  }, "override [micro] seed");
  sub->add_option("--out", [&args](const CLI::results_t& r) {
    args.out = r[0];
    return true;
  }, "exact run directory (must be empty)");
  sub->add_option("--threads", args.threads, "worker threads")
      ->check(CLI::PositiveNumber);
}

RunOptions to_run_options(const CommonArgs& args) {
  RunOptions opts;
  opts.seed = args.seed;
  if (args.out) opts.out = std::filesystem::path(*args.out);
  opts.threads = args.threads;
  return opts;
}

int report(const PipelineResult& res) {
  std::cout << "run directory: " << res.run_dir.string() << "\n"
            << "artifacts: " << res.manifest.checksums.size()
            << " (checksums in manifest.json)\n";
  return 0;
}

int cmd_make_config(const std::string& name, const std::string& out) {
  const std::string text = render_config(make_case_config(name));
  if (out.empty()) {
    std::cout << text;
    return 0;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot create " + out);
  f << text;
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_pipeline(const CommonArgs& args) {
  return report(run_pipeline(load_config(args.config), to_run_options(args)));
}

int cmd_map(const CommonArgs& args) {
  ScenarioConfig cfg = load_config(args.config);
  if (!cfg.mapping)
    throw std::runtime_error("map: config has no [mapping] section");
  cfg.coverage.reset();
  return report(run_pipeline(cfg, to_run_options(args)));
}

int cmd_coverage(const CommonArgs& args) {
  ScenarioConfig cfg = load_config(args.config);
  if (!cfg.coverage)
    throw std::runtime_error("coverage: config has no [coverage] section");
  if (cfg.coverage->map_file.empty())
    throw std::runtime_error(
        "coverage: set coverage.map_file (use `pipeline` for the two-stage run)");
  cfg.mapping.reset();
  return report(run_pipeline(cfg, to_run_options(args)));
}

int cmd_simulate(const CommonArgs& args) {
  return report(run_simulate(load_config(args.config), to_run_options(args)));
}

// Builds the coverage problem exactly like the pipeline does, but takes the
// region from mapping.truth (or map_file) instead of running the inverse
// solve; a gradient diagnostic should not depend on reconstruction quality.
CoverageProblem problem_from_config(const ScenarioConfig& cfg) {
  if (!cfg.coverage)
    throw std::runtime_error("check-gradient: config has no [coverage] section");
  const Grid grid = cfg.make_grid();
  const auto& c = *cfg.coverage;

  IndicatorField H = IndicatorField::zeros(grid);
  if (!c.map_file.empty()) {
    H = threshold(read_field_csv(c.map_file));
  } else if (cfg.mapping) {
    H = truth_indicator(cfg.mapping->truth, grid);
  } else {
    throw std::runtime_error(
        "check-gradient: need coverage.map_file or a [mapping] truth region");
  }

  PhysicalParams params{cfg.coverage_D(), cfg.physics.k_o, cfg.physics.k_f};
  std::optional<ScalarField> mask;
  if (c.mask_y_min > -1e299)
    mask = map_field(grid, [&](double, double y) {
      return y >= c.mask_y_min ? 1.0 : 0.0;
    });
  PartitionTargets targets =
      partition_targets(H, c.P, c.C, mask ? &*mask : nullptr);

  ScalarField y0 = gaussian_density(grid, cfg.physics.start_x,
                                    cfg.physics.start_y, cfg.physics.sigma);
  CoverageProblem prob(std::move(H), params, std::move(y0), c.T,
                       TargetFields{ScalarField(grid), ScalarField(grid),
                                    std::move(targets.target_field)});
  prob.lambda = c.lambda;
  prob.bounds = ControlBounds{{-c.vmax, c.vmax}, {-c.vmax, c.vmax}, {0.0, c.kmax}};
  prob.intervals = c.M;
  return prob;
}

int cmd_check_gradient(const CommonArgs& args, int directions, double eps) {
  const CoverageProblem prob = problem_from_config(load_config(args.config));
  CounterRng rng(args.seed.value_or(1), 0xC0FFEE);

  // Interior base point so +/- eps perturbations cannot hit the bounds.
  ControlSignal u = prob.zero_control();
  for (ControlValues& v : u.values()) {
    v.vx = 0.5 * (rng.uniform() - 0.5) * (prob.bounds.vx.hi - prob.bounds.vx.lo);
    v.vy = 0.5 * (rng.uniform() - 0.5) * (prob.bounds.vy.hi - prob.bounds.vy.lo);
    v.k = 0.25 * (prob.bounds.k.hi - prob.bounds.k.lo) * (1.0 + rng.uniform());
  }

  const GradientReport rep = coverage_gradient(u, prob);
  std::printf("assembly form gap: %.3e (relative %.3e)\n", rep.form_gap,
              rep.form_gap / std::max(1e-300, norm(rep.gradient)));

  double worst = 0.0;
  for (int d = 0; d < directions; ++d) {
    std::vector<ControlValues> dir(u.intervals());
    double len = 0.0;
    for (ControlValues& v : dir) {
      v.vx = rng.normal();
      v.vy = rng.normal();
      v.k = rng.normal();
      len += v.vx * v.vx + v.vy * v.vy + v.k * v.k;
    }
    len = std::sqrt(len);
    for (ControlValues& v : dir) {
      v.vx /= len;
      v.vy /= len;
      v.k /= len;
    }

    auto shifted = [&](double s) {
      ControlSignal w = u;
      for (std::size_t m = 0; m < w.intervals(); ++m) {
        w.values()[m].vx += s * dir[m].vx;
        w.values()[m].vy += s * dir[m].vy;
        w.values()[m].k += s * dir[m].k;
      }
      return reduced_objective(w, prob).objective.J;
    };
    const double fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
    const double ad = dot(rep.gradient, dir);
    const double rel = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-300});
    worst = std::max(worst, rel);
    std::printf("direction %2d: adjoint % .9e  fd % .9e  rel %.3e\n", d, ad, fd,
                rel);
  }
  std::printf("max relative error over %d directions: %.3e\n", directions, worst);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"region mapping and coverage control for diffusing ensembles"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string preset_name;
  std::string preset_out;
  auto* make_cfg = app.add_subcommand("make-config", "print a scenario preset");
  make_cfg->add_option("name", preset_name, "case1a | case1b | case3 | mapping-demo")
      ->required();
  make_cfg->add_option("--out", preset_out, "write to file instead of stdout");

  CommonArgs pipeline_args, map_args, coverage_args, simulate_args, grad_args;
  auto* pipeline = app.add_subcommand("pipeline", "run all configured stages");
  add_common(pipeline, pipeline_args);
  auto* map = app.add_subcommand("map", "mapping stage only");
  add_common(map, map_args);
  auto* coverage = app.add_subcommand("coverage", "coverage from a stored map");
  add_common(coverage, coverage_args);
  auto* simulate = app.add_subcommand("simulate", "microscopic mapping ensemble");
  add_common(simulate, simulate_args);

  int grad_directions = 5;
  double grad_eps = 1e-3;
  auto* grad = app.add_subcommand("check-gradient",
                                  "adjoint vs finite-difference gradient");
  add_common(grad, grad_args);
  grad->add_option("--directions", grad_directions, "random directions")
      ->check(CLI::PositiveNumber);
  grad->add_option("--eps", grad_eps, "finite-difference step")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (make_cfg->parsed()) return cmd_make_config(preset_name, preset_out);
    if (pipeline->parsed()) return cmd_pipeline(pipeline_args);
    if (map->parsed()) return cmd_map(map_args);
    if (coverage->parsed()) return cmd_coverage(coverage_args);
    if (simulate->parsed()) return cmd_simulate(simulate_args);
    if (grad->parsed()) return cmd_check_gradient(grad_args, grad_directions, grad_eps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
