// End-to-end acceptance checks for the map-then-cover toolkit. Each criterion
// is self-contained, uses fixed seeds, and prints exactly one line:
//
//   [PASS] <n>. <what it verifies>: <measured quantities> (<elapsed>s)
//
// The exit code is the number of failed criteria. Tolerances are pinned next
// to the checks they guard; the calibration notes say why each bound is
// attainable rather than aspirational.
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mapcover/config.hpp"
#include "mapcover/coverage.hpp"
#include "mapcover/lawnmower.hpp"
#include "mapcover/mapping.hpp"
#include "mapcover/microscopic.hpp"
#include "mapcover/pipeline.hpp"
#include "mapcover/rng.hpp"

namespace fs = std::filesystem;
using namespace mapcover;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Mass accounting. The forward schemes move mass in flux form and the
// trap/release reactions only exchange y1 and y2, so the total should hold to
// round-off accumulation, far inside the 1e-8 budget, across a long run with
// rough piecewise-constant controls.
Outcome mass_conservation() {
  const Grid g(Extent{0, 100, 0, 100}, 50, 50);
  const IndicatorField H = disk_indicator(g, 50, 50, 20);
  const PhysicalParams params{5e-4, 100.0, 0.1};
  const ScalarField y0 = gaussian_density(g, 50, 50, 8.0);

  // Random admissible control: 10 intervals, |v| <= 2 m/s, k in [0, 5] /s.
  // With dt capped at 0.05 s this integrates T = 100 s in 2000 uniform steps
  // (the stability bounds stay above the cap for these ranges).
  CounterRng rng(101);
  ControlSignal u = ControlSignal::zeros(100.0, 10);
  for (auto& v : u.values()) {
    v.vx = 4.0 * (rng.uniform() - 0.5);
    v.vy = 4.0 * (rng.uniform() - 0.5);
    v.k = 5.0 * rng.uniform();
  }

  SolverOptions opts;
  opts.dt_max = 0.05;
  std::vector<double> snaps;
  for (int j = 0; j <= 20; ++j) snaps.push_back(5.0 * j);

  const double tol = 1e-8;
  ForwardResult cov =
      solve_coverage_model(H, u, params, y0, 100.0, snaps, opts);
  double cov_drift = 0.0;
  for (std::size_t j = 0; j < cov.trajectory.size(); ++j)
    cov_drift = std::max(cov_drift,
                         std::abs(integrate(cov.trajectory.y1[j]) +
                                  integrate(cov.trajectory.y2[j]) - 1.0));

  ForwardResult map =
      solve_mapping_model(H, u, params, y0, 100.0, snaps, opts);
  double map_drift = 0.0;
  for (const ScalarField& y1 : map.trajectory.y1)
    map_drift = std::max(map_drift, std::abs(integrate(y1) - 1.0));

  return {cov_drift <= tol && map_drift <= tol,
          fmt("coverage |int(y1+y2)-1| <= %.2e, mapping |int(y1)-1| <= %.2e "
              "over 21 snapshots, 2000 steps (tol 1e-8)",
              cov_drift, map_drift)};
}

// ---------------------------------------------------------------------------
// 2. With the region covering the whole domain and unit mass, the expected
// cumulative observation count must grow as k_o * t for any motion.
Outcome linear_growth() {
  const Grid g(Extent{0, 100, 0, 100}, 25, 25);
  const IndicatorField H = IndicatorField::ones(g);
  const PhysicalParams params{5e-4, 100.0, 0.1};
  const ScalarField y0 = gaussian_density(g, 30, 30, 6.0);

  const double T = 100.0;
  const ControlSignal sweep =
      to_control(make_lawnmower(g.extent(), 6, 7.0, T));
  std::vector<double> snaps{0, 1, 2, 3, 4};
  for (int j = 1; j <= 20; ++j) snaps.push_back(5.0 * j);

  ForwardResult fwd = solve_mapping_model(H, sweep, params, y0, T, snaps);
  const double tol = 5e-3;
  double worst = 0.0;
  for (std::size_t j = 0; j < fwd.observations.size(); ++j) {
    const double t = fwd.observations.t[j];
    if (t < 1.0) continue;
    worst = std::max(worst,
                     std::abs(fwd.observations.value[j] - 100.0 * t) /
                         (100.0 * t));
  }
  return {worst <= tol,
          fmt("max |g(t) - 100t| / 100t = %.2e on t in [1, 100] (tol 5e-3)",
              worst)};
}

// Shared helper: lawnmower sweep forward pass that the mapping stage uses at
// full desk scale (50x50, 20 lanes, the speed that makes the sweep last
// exactly 800 s).
ForwardResult desk_mapping_forward(const Grid& g, const IndicatorField& H,
                                   const PhysicalParams& params, int S,
                                   std::vector<double>* times_out) {
  const ScalarField y0 =
      gaussian_density(g, 10, 10, 2.0);
  const double speed = 2.61875;
  const double T = lawnmower_path_length(g.extent(), 20) / speed;
  const ControlSignal sweep = to_control(make_lawnmower(g.extent(), 20, speed, T));
  std::vector<double> times(S + 1);
  for (int j = 0; j <= S; ++j) times[j] = T * j / S;
  times.back() = T;
  if (times_out) *times_out = times;
  SolverOptions opts;
  opts.store_y2 = false;
  opts.store_y3 = false;
  return solve_mapping_model(H, sweep, params, y0, T, times, opts);
}

// ---------------------------------------------------------------------------
// 3. The discrete observation operator and its adjoint satisfy the pairing
// identity <K h, G>_time = <h, K* G>_space exactly (same quadrature weights on
// both sides), so the normalized gap must sit at round-off, not just 1e-10.
Outcome adjoint_identity() {
  const Grid g(Extent{0, 100, 0, 100}, 50, 50);
  const IndicatorField H_true = disk_indicator(g, 50, 50, 20);
  const PhysicalParams params{1e-4, 100.0, 0.1};
  ForwardResult fwd = desk_mapping_forward(g, H_true, params, 200, nullptr);
  const SnapshotBasis basis = SnapshotBasis::from_trajectory(fwd.trajectory);

  auto wdot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
      s += basis.weights[j] * a[j] * b[j];
    return s;
  };

  const double tol = 1e-10;
  double worst = 0.0;
  CounterRng rng(7);
  for (int pair = 0; pair < 100; ++pair) {
    ScalarField h(g);
    for (auto& v : h) v = rng.uniform();
    std::vector<double> G(basis.size());
    for (auto& v : G) v = 2.0 * rng.uniform() - 1.0;

    const std::vector<double> Kh = apply_K(h, basis, params.k_o);
    const ScalarField KsG = apply_K_adjoint(G, basis, params.k_o);
    const double lhs = wdot(Kh, G);
    const double rhs = inner(h, KsG);
    const double den =
        std::sqrt(wdot(Kh, Kh)) * std::sqrt(wdot(G, G));
    worst = std::max(worst, std::abs(lhs - rhs) / den);
  }
  return {worst <= tol,
          fmt("max normalized pairing gap %.2e over 100 random pairs "
              "(tol 1e-10)",
              worst)};
}

// ---------------------------------------------------------------------------
// 4. The inverse objective is quadratic, so its analytic gradient and central
// finite differences agree to round-off; 1e-6 per direction has orders of
// magnitude of headroom.
Outcome inverse_gradient_check() {
  const Grid g(Extent{0, 100, 0, 100}, 25, 25);
  const IndicatorField H_true = disk_indicator(g, 50, 50, 20);
  const PhysicalParams params{1e-4, 100.0, 0.1};

  const double speed = 4.0;
  const double T = lawnmower_path_length(g.extent(), 8) / speed;
  const ControlSignal sweep = to_control(make_lawnmower(g.extent(), 8, speed, T));
  const int S = 80;
  std::vector<double> times(S + 1);
  for (int j = 0; j <= S; ++j) times[j] = T * j / S;
  times.back() = T;
  SolverOptions opts;
  opts.store_y2 = false;
  opts.store_y3 = false;
  const ScalarField y0 = gaussian_density(g, 10, 10, 2.0);
  ForwardResult fwd =
      solve_mapping_model(H_true, sweep, params, y0, T, times, opts);

  MappingProblem prob;
  prob.basis = SnapshotBasis::from_trajectory(fwd.trajectory);
  prob.rate = rate_data(fwd.observations);
  prob.k_o = params.k_o;
  prob.lambda = default_lambda(prob.basis, prob.k_o);

  CounterRng rng(11);
  ScalarField h(g);
  for (auto& v : h) v = 0.2 + 0.6 * rng.uniform();
  const ObjectiveGradient og = objective_and_gradient(h, prob);

  const double tol = 1e-6;
  const double eps = 1e-3;
  double worst = 0.0;
  for (int d = 0; d < 20; ++d) {
    ScalarField dir(g);
    for (auto& v : dir) v = 2.0 * rng.uniform() - 1.0;
    ScalarField hp = h, hm = h;
    for (std::size_t c = 0; c < g.size(); ++c) {
      hp[c] += eps * dir[c];
      hm[c] -= eps * dir[c];
    }
    const double jp = objective_and_gradient(hp, prob).J;
    const double jm = objective_and_gradient(hm, prob).J;
    const double fd = (jp - jm) / (2.0 * eps);
    const double ad = inner(og.gradient, dir);
    worst = std::max(worst, std::abs(fd - ad) /
                                std::max(std::abs(fd), std::abs(ad)));
  }
  return {worst <= tol,
          fmt("max relative error %.2e over 20 directions (tol 1e-6)", worst)};
}

// ---------------------------------------------------------------------------
// 5. Desk-scale reconstruction of a disk from synthetic sweep data with the
// spectral default regularizer. Strict convexity implies a unique minimum, so
// two different starts must land on the same objective: with the descent
// stopping rule at 1e-12 the measured gap is ~3e-8, inside an absolute 1e-6.
Outcome disk_reconstruction() {
  const Grid g(Extent{0, 100, 0, 100}, 50, 50);
  const IndicatorField H_true = disk_indicator(g, 50, 50, 20);
  const PhysicalParams params{1e-4, 100.0, 0.1};
  ForwardResult fwd = desk_mapping_forward(g, H_true, params, 200, nullptr);

  MappingProblem prob;
  prob.basis = SnapshotBasis::from_trajectory(fwd.trajectory);
  prob.rate = rate_data(fwd.observations);
  prob.k_o = params.k_o;
  prob.lambda = default_lambda(prob.basis, prob.k_o);

  InverseOptions opts;
  opts.max_iters = 400000;
  opts.tol = 1e-12;

  const MappingResult A = solve_inverse(prob, opts);
  const ScalarField ones(g, 1.0);
  const MappingResult B = solve_inverse(prob, opts, &ones);

  int wrong = 0;
  for (std::size_t c = 0; c < H_true.size(); ++c)
    if (A.H_thresh[c] != H_true[c]) ++wrong;

  const double JA = A.objective_history.back();
  const double JB = B.objective_history.back();
  const double gap = std::abs(JA - JB);
  const int max_wrong = static_cast<int>(0.10 * g.size());
  const double obj_tol = 1e-6;
  return {wrong <= max_wrong && gap <= obj_tol,
          fmt("misclassified %d/%zu cells (limit %d); |J_zero - J_ones| = "
              "%.2e after %d/%d iterations (tol 1e-6 absolute)",
              wrong, g.size(), max_wrong, gap, A.iterations, B.iterations)};
}

// ---------------------------------------------------------------------------
// 6. Control gradient vs finite differences. The adjoint is the continuous
// one rediscretized, so agreement is limited by spatial truncation (first
// order in h where the advection limiter engages; grid studies at 10/20/40
// cells show the error halving with h). In a resolved, diffusion-tempered
// configuration the l2 error over a direction set sits near 2.5e-3, giving
// the pinned 1e-2 a ~4x margin. Per-direction ratios are also reported, but
// the aggregate is the assertion: a random direction can land nearly
// orthogonal to the gradient, where a ratio of truncation-level absolute
// errors measures luck instead of correctness. The two assembly forms of the
// velocity gradient (integration by parts moved or not) agree near round-off.
Outcome control_gradient_check() {
  const double W = 40.0;
  const Grid g(Extent{0, W, 0, W}, 25, 25);
  IndicatorField H = disk_indicator(g, 0.6 * W, 0.45 * W, 0.2 * W);
  const PhysicalParams params{3.0, 0.0, 0.1};
  ScalarField y0 = gaussian_density(g, 0.45 * W, 0.55 * W, 0.16 * W);
  TargetFields targets(g);
  for (std::size_t c = 0; c < targets.y3.size(); ++c)
    targets.y3[c] = 0.3 * H[c];
  CoverageProblem prob(std::move(H), params, std::move(y0), 8.0,
                       std::move(targets));
  prob.lambda = 1e-3;
  prob.intervals = 10;

  CounterRng rng(4242);
  ControlSignal u = prob.zero_control();
  for (auto& v : u.values()) {
    v.vx = 0.8 * (rng.uniform() - 0.5);
    v.vy = 0.8 * (rng.uniform() - 0.5);
    v.k = 0.1 + 0.2 * rng.uniform();
  }

  const GradientReport rep = coverage_gradient(u, prob);
  const double eps = 1e-3;
  double num2 = 0.0, den2 = 0.0, worst_dir = 0.0;
  for (int d = 0; d < 10; ++d) {
    std::vector<ControlValues> dir(u.intervals());
    double len = 0.0;
    for (auto& v : dir) {
      v.vx = rng.normal();
      v.vy = rng.normal();
      v.k = rng.normal();
      len += v.vx * v.vx + v.vy * v.vy + v.k * v.k;
    }
    len = std::sqrt(len);
    auto J_at = [&](double s) {
      ControlSignal w = u;
      for (std::size_t m = 0; m < w.intervals(); ++m) {
        w.values()[m].vx += s * dir[m].vx / len;
        w.values()[m].vy += s * dir[m].vy / len;
        w.values()[m].k += s * dir[m].k / len;
      }
      return reduced_objective(w, prob).objective.J;
    };
    const double fd = (J_at(eps) - J_at(-eps)) / (2.0 * eps);
    double ad = 0.0;
    for (std::size_t m = 0; m < dir.size(); ++m)
      ad += (rep.gradient[m].vx * dir[m].vx + rep.gradient[m].vy * dir[m].vy +
             rep.gradient[m].k * dir[m].k) / len;
    num2 += (fd - ad) * (fd - ad);
    den2 += fd * fd;
    worst_dir = std::max(worst_dir, std::abs(fd - ad) /
                                        std::max(std::abs(fd), std::abs(ad)));
  }
  const double agg = std::sqrt(num2 / den2);
  const double form_rel =
      rep.form_gap / std::max(1.0, norm(rep.gradient));

  const double grad_tol = 1e-2;
  const double form_tol = 1e-6;
  return {agg <= grad_tol && form_rel <= form_tol,
          fmt("l2 error over 10 directions %.2e (tol 1e-2; worst single "
              "direction %.2e), assembly-form gap %.2e relative (tol 1e-6)",
              agg, worst_dir, form_rel)};
}

// ---------------------------------------------------------------------------
// 7. Full two-stage desk scenario: sweep the domain, reconstruct the disk,
// threshold it, build block-scaled activity targets from the thresholded map,
// then run the projected descent from zero control for T = 100 s with M = 40
// intervals. The accepted-step history must never increase, and the final
// objective must reach at most half of the do-nothing objective J(0).
// Calibration: C = 0.5 with the crowd seeded against the disk edge descends
// to ~0.29 J(0) in under 150 accepted steps.
Outcome coverage_descent() {
  const Grid g(Extent{0, 100, 0, 100}, 25, 25);
  const IndicatorField H_true = disk_indicator(g, 50, 50, 20);
  const PhysicalParams map_params{5e-4, 100.0, 0.1};
  ForwardResult fwd = desk_mapping_forward(g, H_true, map_params, 120, nullptr);

  MappingProblem mp;
  mp.basis = SnapshotBasis::from_trajectory(fwd.trajectory);
  mp.rate = rate_data(fwd.observations);
  mp.k_o = map_params.k_o;
  mp.lambda = default_lambda(mp.basis, mp.k_o);
  InverseOptions iopts;
  iopts.max_iters = 200000;
  iopts.tol = 1e-8;
  const MappingResult mr = solve_inverse(mp, iopts);
  int map_wrong = 0;
  for (std::size_t c = 0; c < H_true.size(); ++c)
    if (mr.H_thresh[c] != H_true[c]) ++map_wrong;

  IndicatorField H = mr.H_thresh;
  const PhysicalParams params{5e-4, 0.0, 0.1};
  ScalarField y0 = gaussian_density(g, 35, 35, 6.0);
  PartitionTargets targets = partition_targets(H, 20, 0.5);
  CoverageProblem prob(std::move(H), params, std::move(y0), 100.0,
                       TargetFields{ScalarField(g), ScalarField(g),
                                    std::move(targets.target_field)});
  prob.lambda = 1e-6;
  prob.intervals = 40;

  OptimizeOptions oopts;
  oopts.max_iters = 150;
  oopts.tol = 0.0;
  const OptimizeResult res = optimize_coverage(prob.zero_control(), prob, oopts);

  bool monotone = true;
  for (std::size_t i = 1; i < res.J_history.size(); ++i)
    if (res.J_history[i] > res.J_history[i - 1]) monotone = false;
  const double J0 = res.J_history.front();
  const double Jf = res.J_history.back();
  const double ratio_limit = 0.5;
  return {monotone && Jf <= ratio_limit * J0,
          fmt("map stage %d cells off; J %.3e -> %.3e, ratio %.3f (limit "
              "0.50), history nonincreasing over %d accepted steps",
              map_wrong, J0, Jf, Jf / J0, res.iterations)};
}

// ---------------------------------------------------------------------------
// 8. Agent ensembles against the density model under the same drift-diffusion
// dynamics. The empirical terminal density must approach the PDE solution as
// the ensemble grows: mean L1 gap over 5 seeds <= 0.15 at N = 2000 and
// strictly below the N = 200 value. Calibration: 0.138 vs 0.420 for this
// configuration (the seeds are fixed, so these are exact reproducible values).
Outcome ensemble_convergence() {
  const Grid g(Extent{0, 100, 0, 100}, 25, 25);
  const IndicatorField none = IndicatorField::zeros(g);
  const PhysicalParams params{0.25, 0.0, 0.0};
  const double T = 20.0;
  const ControlSignal u = ControlSignal::constant(T, {0.3, 0.15, 0.0});
  const ScalarField y0 = gaussian_density(g, 30, 40, 5.0);

  SolverOptions sopts;
  sopts.dt_max = 0.05;
  sopts.store_y2 = false;
  sopts.store_y3 = false;
  const std::vector<double> snap{T};
  ForwardResult fwd = solve_mapping_model(none, u, params, y0, T, snap, sopts);
  const ScalarField& y1T = fwd.final_state.y1;

  auto mean_l1 = [&](int N) {
    double total = 0.0;
    for (std::uint64_t seed = 101; seed <= 105; ++seed) {
      SimConfig sc;
      sc.n_agents = N;
      sc.dt = 0.05;
      sc.T = T;
      sc.mode = SimMode::mapping;
      sc.seed = seed;
      sc.init = {InitialDistribution::Kind::gaussian, 30, 40, 5.0};
      sc.sample_times = {T};
      sc.validate(params, u);
      const SimResult sim = simulate_ensemble(sc, params, u, none);
      std::vector<std::pair<double, double>> pts;
      pts.reserve(sim.final_states.size());
      for (const AgentState& a : sim.final_states) pts.emplace_back(a.x, a.y);
      total += l1_distance(empirical_density(pts, g, N), y1T);
    }
    return total / 5.0;
  };

  const double coarse = mean_l1(200);
  const double fine = mean_l1(2000);
  const double tol = 0.15;
  return {fine <= tol && fine < coarse,
          fmt("mean L1 over 5 seeds: %.3f at N=200, %.3f at N=2000 "
              "(limit 0.15, must decrease)",
              coarse, fine)};
}

// ---------------------------------------------------------------------------
// 9. Raw stochastic kinematics and switching statistics. Drift-free variance
// must grow at 2D per axis (slope within 10%), and the one-step state-switch
// and observation fractions must sit within 3 binomial standard errors of
// k*dt and k_o*dt.
Outcome ensemble_statistics() {
  const Grid g(Extent{-100, 100, -100, 100}, 10, 10);
  const IndicatorField none = IndicatorField::zeros(g);
  const PhysicalParams params{0.5, 0.0, 0.0};
  const double T = 4.0;
  const ControlSignal still = ControlSignal::constant(T, {0, 0, 0});

  SimConfig sc;
  sc.n_agents = 10000;
  sc.dt = 0.01;
  sc.T = T;
  sc.mode = SimMode::mapping;
  sc.seed = 2024;
  sc.init = {InitialDistribution::Kind::gaussian, 0, 0, 1.0};
  sc.sample_times = {T};
  sc.trajectory_stride = 25;
  sc.validate(params, still);
  const SimResult sim = simulate_ensemble(sc, params, still, none);

  std::vector<double> ts;
  for (const auto& s : sim.trajectories)
    if (s.agent == 0) ts.push_back(s.t);
  const std::size_t K = ts.size();
  std::vector<double> mx(K, 0), my(K, 0), vxx(K, 0), vyy(K, 0);
  for (std::size_t i = 0; i < sim.trajectories.size(); ++i) {
    const auto& s = sim.trajectories[i];
    mx[i % K] += s.x;
    my[i % K] += s.y;
  }
  for (auto& v : mx) v /= sc.n_agents;
  for (auto& v : my) v /= sc.n_agents;
  for (std::size_t i = 0; i < sim.trajectories.size(); ++i) {
    const auto& s = sim.trajectories[i];
    vxx[i % K] += (s.x - mx[i % K]) * (s.x - mx[i % K]);
    vyy[i % K] += (s.y - my[i % K]) * (s.y - my[i % K]);
  }
  auto slope = [&](const std::vector<double>& var) {
    double st = 0, sv = 0, stt = 0, stv = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const double v = var[k] / sc.n_agents;
      st += ts[k];
      sv += v;
      stt += ts[k] * ts[k];
      stv += ts[k] * v;
    }
    return (K * stv - st * sv) / (K * stt - st * st);
  };
  const double sx = slope(vxx), sy = slope(vyy);
  const double want = 2.0 * params.D;
  const bool slopes_ok = std::abs(sx - want) <= 0.1 * want &&
                         std::abs(sy - want) <= 0.1 * want;

  // One-step switch fraction in coverage mode with the region everywhere.
  const IndicatorField all = IndicatorField::ones(g);
  const PhysicalParams trap_params{0.5, 0.0, 0.5};
  const double kstop = 4.0, dt1 = 0.01;
  const ControlSignal stopping = ControlSignal::constant(dt1, {0, 0, kstop});
  SimConfig s2;
  s2.n_agents = 20000;
  s2.dt = dt1;
  s2.T = dt1;
  s2.mode = SimMode::coverage;
  s2.seed = 99;
  s2.init = {InitialDistribution::Kind::gaussian, 0, 0, 5.0};
  s2.sample_times = {dt1};
  s2.validate(trap_params, stopping);
  const SimResult r2 = simulate_ensemble(s2, trap_params, stopping, all);
  int stops = 0;
  for (const Event& e : r2.log.events)
    if (e.kind == EventKind::activity_start) ++stops;
  const double p_stop = kstop * dt1;
  const double z_stop =
      (double(stops) / s2.n_agents - p_stop) /
      std::sqrt(p_stop * (1 - p_stop) / s2.n_agents);

  // One-step observation fraction in mapping mode.
  const PhysicalParams obs_params{0.5, 5.0, 0.0};
  const ControlSignal idle = ControlSignal::constant(dt1, {0, 0, 0});
  SimConfig s3 = s2;
  s3.mode = SimMode::mapping;
  s3.seed = 1234;
  s3.validate(obs_params, idle);
  const SimResult r3 = simulate_ensemble(s3, obs_params, idle, all);
  int obs = 0;
  for (const Event& e : r3.log.events)
    if (e.kind == EventKind::observation) ++obs;
  const double p_obs = obs_params.k_o * dt1;
  const double z_obs =
      (double(obs) / s3.n_agents - p_obs) /
      std::sqrt(p_obs * (1 - p_obs) / s3.n_agents);

  const bool rates_ok = std::abs(z_stop) <= 3.0 && std::abs(z_obs) <= 3.0;
  return {slopes_ok && rates_ok,
          fmt("variance slopes %.4f/%.4f vs 2D=%.1f (tol 10%%); switch z=%.2f,"
              " observation z=%.2f (|z| <= 3)",
              sx, sy, want, z_stop, z_obs)};
}

// ---------------------------------------------------------------------------
// 10. Determinism of the whole pipeline: a fixed seed must give byte-identical
// artifact checksums on a rerun and under a different thread count.
Outcome pipeline_determinism() {
  ScenarioConfig c;
  c.domain = {0.0, 20.0, 0.0, 20.0};
  c.grid = {10, 10};
  c.physics.D = 1e-3;
  c.physics.k_o = 5.0;
  c.physics.k_f = 0.1;
  c.physics.start_x = 4.0;
  c.physics.start_y = 4.0;
  c.physics.sigma = 1.2;
  ScenarioConfig::Mapping m;
  m.lanes = 4;
  m.speed = 2.0;
  m.truth = "disk:12,12,5";
  m.max_iters = 40;
  m.snapshots = 16;
  c.mapping = m;
  ScenarioConfig::Coverage v;
  v.T = 8.0;
  v.M = 4;
  v.lambda = 1e-3;
  v.C = 20.0;
  v.P = 5;
  v.vmax = 1.0;
  v.kmax = 2.0;
  v.max_iters = 3;
  v.D = 5e-3;
  c.coverage = v;
  c.micro = {40, 0.0, 7};
  c.output.dump_trajectories = true;

  const fs::path base =
      fs::temp_directory_path() /
      ("mapcover_accept_" + std::to_string(::getpid()));
  fs::remove_all(base);

  auto run = [&](const char* tag, int threads) {
    RunOptions opts;
    opts.seed = 42;
    opts.threads = threads;
    opts.out = base / tag;
    return run_pipeline(c, opts);
  };
  const PipelineResult a = run("a", 1);
  const PipelineResult b = run("b", 1);
  const PipelineResult d = run("d", 4);

  const bool rerun_same = a.manifest.checksums == b.manifest.checksums;
  const bool threads_same = a.manifest.checksums == d.manifest.checksums;
  const bool config_same = a.manifest.config_hash == b.manifest.config_hash &&
                           a.manifest.config_hash == d.manifest.config_hash;
  const std::size_t nfiles = a.manifest.checksums.size();
  fs::remove_all(base);
  return {rerun_same && threads_same && config_same && nfiles > 0,
          fmt("%zu artifacts; rerun checksums %s, 4-thread checksums %s",
              nfiles, rerun_same ? "identical" : "DIFFER",
              threads_same ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {"mass conservation under rough controls", mass_conservation},
      {"uniform-region observation growth", linear_growth},
      {"observation operator adjoint identity", adjoint_identity},
      {"inverse gradient vs finite differences", inverse_gradient_check},
      {"disk reconstruction and unique minimum", disk_reconstruction},
      {"control gradient vs finite differences", control_gradient_check},
      {"two-stage coverage descent", coverage_descent},
      {"ensemble converges to density model", ensemble_convergence},
      {"ensemble diffusion and switching statistics", ensemble_statistics},
      {"pipeline checksum determinism", pipeline_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    Outcome out;
    try {
      out = criteria[i].fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(clock::now() - t0).count();
    std::printf("[%s] %zu. %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL",
                i + 1, criteria[i].name, out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures,
              criteria.size());
  return failures;
}
