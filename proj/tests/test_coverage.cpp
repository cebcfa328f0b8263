// Optimal-control layer checks: checkpoint bookkeeping, objective assembly,
// adjoint gradients against finite differences, the integration-by-parts
// cross-check, and the descent loop's contracts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mapcover/coverage.hpp"
#include "mapcover/grid.hpp"
#include "mapcover/rng.hpp"

using namespace mapcover;

namespace {

// Small coverage instance: gaussian crowd, disk region, mild diffusion.
CoverageProblem small_problem(int intervals = 4, double lambda = 1e-3) {
  Grid g(Extent{0.0, 20.0, 0.0, 20.0}, 10, 10);
  IndicatorField H = disk_indicator(g, 13.0, 12.0, 5.0);
  PhysicalParams params{0.01, 0.0, 0.1};
  ScalarField y0 = gaussian_density(g, 6.0, 7.0, 2.5);
  TargetFields targets(g);
  for (std::size_t c = 0; c < targets.y3.size(); ++c)
    targets.y3[c] = 0.4 * H[c];
  CoverageProblem prob(std::move(H), params, std::move(y0), 4.0,
                       std::move(targets));
  prob.intervals = intervals;
  prob.lambda = lambda;
  return prob;
}

// Configuration for finite-difference gradient checks. The adjoint is the
// continuous one rediscretized, so its agreement with finite differences is
// limited by spatial truncation: first order in h where the advection limiter
// is active (grid studies at 10/20/40 cells show the error halving with h).
// Checks therefore run in a resolved, diffusion-tempered regime: the blob
// spans ~4 cells, cell Peclet |v|h/D ~ 0.2, and the trap rates stay small so
// the kinked coefficient k*H contributes little. In this regime the gradient
// matches finite differences to a few 1e-3 in the l2 sense over a direction
// set, which is what the assertions below pin down.
CoverageProblem resolved_problem(int intervals = 10) {
  const double W = 40.0;
  Grid g(Extent{0.0, W, 0.0, W}, 25, 25);
  IndicatorField H = disk_indicator(g, 0.6 * W, 0.45 * W, 0.2 * W);
  PhysicalParams params{3.0, 0.0, 0.1};
  ScalarField y0 = gaussian_density(g, 0.45 * W, 0.55 * W, 0.16 * W);
  TargetFields targets(g);
  for (std::size_t c = 0; c < targets.y3.size(); ++c)
    targets.y3[c] = 0.3 * H[c];
  CoverageProblem prob(std::move(H), params, std::move(y0), 8.0,
                       std::move(targets));
  prob.intervals = intervals;
  prob.lambda = 1e-3;
  return prob;
}

ControlSignal gentle_control(const CoverageProblem& prob, std::uint64_t seed) {
  CounterRng rng(seed);
  ControlSignal u = prob.zero_control();
  for (auto& v : u.values()) {
    v.vx = 0.8 * (rng.uniform() - 0.5);
    v.vy = 0.8 * (rng.uniform() - 0.5);
    v.k = 0.1 + 0.2 * rng.uniform();
  }
  return u;
}

ControlSignal interior_control(const CoverageProblem& prob, std::uint64_t seed) {
  CounterRng rng(seed);
  ControlSignal u = prob.zero_control();
  for (auto& v : u.values()) {
    v.vx = 1.0 * rng.uniform() - 0.5;
    v.vy = 1.0 * rng.uniform() - 0.5;
    v.k = 0.2 + 0.6 * rng.uniform();
  }
  return u;
}

ControlSignal shifted(const ControlSignal& u,
                      const std::vector<ControlValues>& d, double eps) {
  ControlSignal out = u;
  for (std::size_t m = 0; m < out.values().size(); ++m) {
    out.values()[m].vx += eps * d[m].vx;
    out.values()[m].vy += eps * d[m].vy;
    out.values()[m].k += eps * d[m].k;
  }
  return out;
}

}  // namespace

TEST_CASE("checkpoints are the interval boundaries plus quadrature panels") {
  CoverageProblem prob = small_problem(3);
  prob.T = 3.0;
  prob.quad_panels = 2;
  std::vector<double> t = prob.checkpoint_times();
  std::vector<double> want{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  REQUIRE(t.size() == want.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    CHECK(t[i] == doctest::Approx(want[i]).epsilon(1e-15));
}

TEST_CASE("objective splits into terminal misfit and control penalty") {
  CoverageProblem prob = small_problem(2, 0.05);
  const Grid& g = prob.y0.grid();

  StateDensities yT(g);
  CounterRng rng(8);
  for (std::size_t c = 0; c < g.size(); ++c) yT.y3[c] = rng.uniform();

  ControlSignal u = prob.zero_control();
  u.values()[0] = {0.5, -0.25, 0.3};
  u.values()[1] = {-1.0, 0.0, 0.7};

  ObjectiveBreakdown ob = objective_from_state(yT, u, prob);

  double terminal = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double r = yT.y3[c] - prob.targets.y3[c];  // w3 = 1
    terminal += r * r * g.cell_area();
  }
  terminal *= 0.5;
  const double half = prob.T / 2.0;
  double penalty = 0.0;
  for (const auto& v : u.values())
    penalty += half * (v.vx * v.vx + v.vy * v.vy + v.k * v.k);
  penalty *= 0.5 * prob.lambda;

  CHECK(ob.terminal == doctest::Approx(terminal).epsilon(1e-12));
  CHECK(ob.penalty == doctest::Approx(penalty).epsilon(1e-12));
  CHECK(ob.J == doctest::Approx(terminal + penalty).epsilon(1e-12));
}

TEST_CASE("reduced objective stores every gradient checkpoint") {
  CoverageProblem prob = small_problem();
  ControlSignal u = interior_control(prob, 14);
  ReducedObjective ro = reduced_objective(u, prob);

  std::vector<double> cps = prob.checkpoint_times();
  for (double t : cps) {
    bool found = false;
    for (double s : ro.forward.trajectory.times)
      found = found || std::abs(s - t) <= 1e-9;
    CHECK(found);
  }
  // The recomputed objective matches the stored breakdown.
  ObjectiveBreakdown again =
      objective_from_state(ro.forward.final_state, u, prob);
  CHECK(again.J == doctest::Approx(ro.objective.J).epsilon(1e-14));
}

TEST_CASE("with all terminal weights zero the gradient is purely the penalty") {
  CoverageProblem prob = small_problem(3, 0.07);
  prob.W = TerminalWeights{0.0, 0.0, 0.0};
  ControlSignal u = interior_control(prob, 21);
  GradientReport rep = coverage_gradient(u, prob);
  const double len = prob.T / 3.0;
  REQUIRE(rep.gradient.size() == 3);
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(rep.gradient[m].vx ==
          doctest::Approx(prob.lambda * u.values()[m].vx * len).epsilon(1e-12));
    CHECK(rep.gradient[m].vy ==
          doctest::Approx(prob.lambda * u.values()[m].vy * len).epsilon(1e-12));
    CHECK(rep.gradient[m].k ==
          doctest::Approx(prob.lambda * u.values()[m].k * len).epsilon(1e-12));
    CHECK(rep.boundary_form[m].vx ==
          doctest::Approx(rep.gradient[m].vx).epsilon(1e-12));
  }
  CHECK(rep.form_gap <= 1e-14);
}

TEST_CASE("adjoint gradient matches central finite differences") {
  CoverageProblem prob = resolved_problem();
  ControlSignal u = gentle_control(prob, 33);

  GradientReport rep = coverage_gradient(u, prob);
  const double gnorm = norm(rep.gradient);
  REQUIRE(gnorm > 0.0);

  // Relative l2 error over the whole direction set; per-direction relative
  // error is ill-conditioned whenever a random direction lands nearly
  // orthogonal to the gradient, so it only gets a loose bound.
  double num2 = 0.0, den2 = 0.0;
  CounterRng drng(40);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ControlValues> d(u.intervals());
    for (auto& v : d) {
      v.vx = drng.normal();
      v.vy = drng.normal();
      v.k = drng.normal();
    }
    const double eps = 1e-3;
    const double jp = reduced_objective(shifted(u, d, +eps), prob).objective.J;
    const double jm = reduced_objective(shifted(u, d, -eps), prob).objective.J;
    const double fd = (jp - jm) / (2.0 * eps);
    const double an = dot(rep.gradient, d);
    CHECK(std::abs(an - fd) <= 5e-2 * std::max(std::abs(fd), std::abs(an)));
    num2 += (an - fd) * (an - fd);
    den2 += fd * fd;
  }
  REQUIRE(den2 > 0.0);
  CHECK(std::sqrt(num2 / den2) <= 1e-2);
}

TEST_CASE("gradient check still holds with a terminal y1 tracking term") {
  CoverageProblem prob = resolved_problem(6);
  prob.W = TerminalWeights{1.0, 0.0, 1.0};
  prob.targets.y1 = gaussian_density(prob.y0.grid(), 28.0, 26.0, 6.0);
  ControlSignal u = gentle_control(prob, 55);

  GradientReport rep = coverage_gradient(u, prob);
  double num2 = 0.0, den2 = 0.0;
  CounterRng drng(56);
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<ControlValues> d(u.intervals());
    for (auto& v : d) {
      v.vx = drng.normal();
      v.vy = drng.normal();
      v.k = drng.normal();
    }
    const double eps = 1e-3;
    const double jp = reduced_objective(shifted(u, d, +eps), prob).objective.J;
    const double jm = reduced_objective(shifted(u, d, -eps), prob).objective.J;
    const double fd = (jp - jm) / (2.0 * eps);
    const double an = dot(rep.gradient, d);
    num2 += (an - fd) * (an - fd);
    den2 += fd * fd;
  }
  REQUIRE(den2 > 0.0);
  CHECK(std::sqrt(num2 / den2) <= 2e-2);
}

TEST_CASE("both velocity-gradient assemblies agree to round-off") {
  CoverageProblem prob = small_problem(4, 1e-3);
  ControlSignal u = interior_control(prob, 61);
  GradientReport rep = coverage_gradient(u, prob);
  const double scale = std::max(1.0, norm(rep.gradient));
  CHECK(rep.form_gap <= 1e-10 * scale);
  for (std::size_t m = 0; m < rep.gradient.size(); ++m) {
    CHECK(std::abs(rep.boundary_form[m].vx - rep.gradient[m].vx) <=
          1e-10 * scale);
    CHECK(std::abs(rep.boundary_form[m].vy - rep.gradient[m].vy) <=
          1e-10 * scale);
  }
}

TEST_CASE("gradient assembly insists on the checkpoint times") {
  CoverageProblem prob = small_problem();
  ControlSignal u = interior_control(prob, 70);
  ReducedObjective ro = reduced_objective(u, prob);

  DensityTrajectory sparse;
  sparse.times = {0.0, prob.T};
  sparse.y1 = {ro.forward.trajectory.y1.front(), ro.forward.trajectory.y1.back()};
  CHECK_THROWS_WITH_AS(
      coverage_gradient(u, prob, sparse, ro.forward.final_state),
      doctest::Contains("missing an interval checkpoint"),
      std::invalid_argument);
}

TEST_CASE("gradient is insensitive to extra stored snapshots") {
  CoverageProblem prob = small_problem(3, 1e-3);
  ControlSignal u = interior_control(prob, 75);

  GradientReport base = coverage_gradient(u, prob);

  // Same control, but the forward pass also records off-checkpoint times,
  // which changes the integrator's sub-interval chunking slightly.
  std::vector<double> snaps = prob.checkpoint_times();
  snaps.push_back(0.37 * prob.T);
  snaps.push_back(0.81 * prob.T);
  std::sort(snaps.begin(), snaps.end());
  SolverOptions opts = prob.solver;
  opts.dt_bounds = &prob.bounds;
  opts.store_y2 = false;
  opts.store_y3 = false;
  ForwardResult fwd = solve_coverage_model(prob.H, u, prob.params, prob.y0,
                                           prob.T, snaps, opts);
  GradientReport dense = coverage_gradient(u, prob, fwd.trajectory,
                                           fwd.final_state);

  for (std::size_t m = 0; m < base.gradient.size(); ++m) {
    CHECK(dense.gradient[m].vx ==
          doctest::Approx(base.gradient[m].vx).epsilon(1e-4));
    CHECK(dense.gradient[m].vy ==
          doctest::Approx(base.gradient[m].vy).epsilon(1e-4));
    CHECK(dense.gradient[m].k ==
          doctest::Approx(base.gradient[m].k).epsilon(1e-4));
  }
}

TEST_CASE("descent loop: monotone objective, feasible iterates, real progress") {
  CoverageProblem prob = small_problem(4, 1e-4);
  // Start from rest except a little trapping so the velocity gradient wakes up.
  ControlSignal u0 = prob.zero_control();
  for (auto& v : u0.values()) v.k = 0.1;

  OptimizeOptions opts;
  opts.max_iters = 8;
  OptimizeResult res = optimize_coverage(u0, prob, opts);

  REQUIRE(res.J_history.size() >= 2);
  for (std::size_t i = 1; i < res.J_history.size(); ++i)
    CHECK(res.J_history[i] <= res.J_history[i - 1] + 1e-15);
  CHECK(res.J_history.back() < res.J_history.front());
  CHECK(res.u.within(prob.bounds, 1e-12));
  CHECK(res.iterations == static_cast<int>(res.J_history.size()) - 1);
  CHECK(res.breakdown_history.size() == res.J_history.size());
  for (std::size_t i = 0; i < res.J_history.size(); ++i)
    CHECK(res.breakdown_history[i].J == doctest::Approx(res.J_history[i]));
}

TEST_CASE("optimizer clamps iterates into a tight admissible box") {
  CoverageProblem prob = small_problem(3, 0.0);
  prob.bounds.vx = {-0.3, 0.3};
  prob.bounds.vy = {-0.3, 0.3};
  prob.bounds.k = {0.0, 0.5};
  ControlSignal u0 = prob.zero_control();
  for (auto& v : u0.values()) v.k = 0.25;

  OptimizeOptions opts;
  opts.max_iters = 5;
  OptimizeResult res = optimize_coverage(u0, prob, opts);
  CHECK(res.u.within(prob.bounds, 1e-12));
  CHECK(res.u.max_k() <= 0.5 + 1e-12);
}

TEST_CASE("a perfectly satisfied objective is a fixed point") {
  CoverageProblem prob = small_problem(2, 0.0);
  for (auto& v : prob.targets.y3) v = 0.0;  // y3(T) = 0 when nothing traps
  ControlSignal u0 = prob.zero_control();
  OptimizeResult res = optimize_coverage(u0, prob, OptimizeOptions{});
  CHECK(res.J_history.front() == doctest::Approx(0.0));
  CHECK(res.J_history.back() == doctest::Approx(0.0));
  for (const auto& v : res.u.values()) {
    CHECK(v.vx == 0.0);
    CHECK(v.vy == 0.0);
    CHECK(v.k == 0.0);
  }
}

TEST_CASE("control vector dot and norm") {
  std::vector<ControlValues> a{{1.0, 2.0, 3.0}, {0.0, -1.0, 1.0}};
  std::vector<ControlValues> b{{0.5, 0.0, 1.0}, {2.0, 2.0, 2.0}};
  CHECK(dot(a, b) == doctest::Approx(0.5 + 3.0 - 2.0 + 2.0));
  CHECK(norm(a) == doctest::Approx(std::sqrt(1.0 + 4.0 + 9.0 + 1.0 + 1.0)));
}
