#include "mapcover/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mapcover {

namespace {

void check_problem(const CoverageProblem& prob) {
  prob.params.validate();
  if (!(prob.T > 0.0)) throw std::invalid_argument("CoverageProblem: T <= 0");
  if (prob.intervals < 1)
    throw std::invalid_argument("CoverageProblem: intervals < 1");
  if (prob.quad_panels < 1)
    throw std::invalid_argument("CoverageProblem: quad_panels < 1");
  if (prob.lambda < 0.0)
    throw std::invalid_argument("CoverageProblem: lambda < 0");
  if (!(prob.y0.grid() == prob.H.grid()) ||
      !(prob.targets.y1.grid() == prob.H.grid()))
    throw std::invalid_argument("CoverageProblem: grid mismatch");
}

std::vector<double> checkpoints_for(const ControlSignal& u, int panels) {
  std::vector<double> out;
  out.reserve(u.intervals() * panels + 1);
  out.push_back(0.0);
  for (std::size_t m = 0; m < u.intervals(); ++m) {
    const double ta = u.times()[m], tb = u.times()[m + 1];
    for (int q = 1; q <= panels; ++q)
      out.push_back(ta + (tb - ta) * q / panels);
  }
  return out;
}

SolverOptions forward_opts(const CoverageProblem& prob) {
  SolverOptions o = prob.solver;
  o.dt_bounds = &prob.bounds;  // dt independent of the iterate
  o.store_y2 = false;
  o.store_y3 = false;
  return o;
}

// y1 snapshot at time t: exact match if stored, else linear interpolation
// between the bracketing snapshots.
ScalarField sample_y1(const DensityTrajectory& traj, double t) {
  const auto& ts = traj.times;
  auto it = std::lower_bound(ts.begin(), ts.end(), t - 1e-9);
  if (it != ts.end() && std::abs(*it - t) <= 1e-9)
    return traj.y1[static_cast<std::size_t>(it - ts.begin())];
  if (it == ts.begin() || it == ts.end())
    throw std::invalid_argument("coverage_gradient: time outside stored range");
  const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
  ScalarField out = traj.y1[lo];
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] += w * (traj.y1[hi][c] - traj.y1[lo][c]);
  return out;
}

// Centered x-derivative with mirrored ghosts, as a functional ingredient of
// the pairing integrals (matches the discrete integration-by-parts identity
// used to cross-check the two gradient assemblies).
double pair_with_dx(const ScalarField& a, const ScalarField& b) {
  // sum a * db/dx * area
  const Grid& g = a.grid();
  double s = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double bp = b.at(std::min(i + 1, g.nx() - 1), j);
      const double bm = b.at(std::max(i - 1, 0), j);
      s += a.at(i, j) * (bp - bm);
    }
  return s * 0.5 / g.hx() * g.cell_area();
}

double pair_with_dy(const ScalarField& a, const ScalarField& b) {
  const Grid& g = a.grid();
  double s = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double bp = b.at(i, std::min(j + 1, g.ny() - 1));
      const double bm = b.at(i, std::max(j - 1, 0));
      s += a.at(i, j) * (bp - bm);
    }
  return s * 0.5 / g.hy() * g.cell_area();
}

// Wall integral of n_x p y (resp. n_y p y) with cell-center traces.
double wall_term_x(const ScalarField& p, const ScalarField& y) {
  const Grid& g = p.grid();
  double s = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    s += p.at(g.nx() - 1, j) * y.at(g.nx() - 1, j) - p.at(0, j) * y.at(0, j);
  return s * g.hy();
}

double wall_term_y(const ScalarField& p, const ScalarField& y) {
  const Grid& g = p.grid();
  double s = 0.0;
  for (int i = 0; i < g.nx(); ++i)
    s += p.at(i, g.ny() - 1) * y.at(i, g.ny() - 1) - p.at(i, 0) * y.at(i, 0);
  return s * g.hx();
}

struct Integrands {
  double vx_parts;  // <y1, dp1/dx>
  double vy_parts;
  double vx_wall;   // wall term - <p1, dy1/dx>
  double vy_wall;
  double k_pair;    // <H y1, -p1 + p2 + p3>
};

Integrands integrands_at(const ScalarField& y1, const AdjointState& p,
                         const IndicatorField& H) {
  Integrands r{};
  r.vx_parts = pair_with_dx(y1, p.p1);
  r.vy_parts = pair_with_dy(y1, p.p1);
  r.vx_wall = wall_term_x(p.p1, y1) - pair_with_dx(p.p1, y1);
  r.vy_wall = wall_term_y(p.p1, y1) - pair_with_dy(p.p1, y1);
  const Grid& g = y1.grid();
  double s = 0.0;
  for (std::size_t c = 0; c < y1.size(); ++c)
    s += H[c] * y1[c] * (-p.p1[c] + p.p2[c] + p.p3[c]);
  r.k_pair = s * g.cell_area();
  return r;
}

}  // namespace

std::vector<double> CoverageProblem::checkpoint_times() const {
  return checkpoints_for(zero_control(), quad_panels);
}

ObjectiveBreakdown objective_from_state(const StateDensities& y_T,
                                        const ControlSignal& u,
                                        const CoverageProblem& prob) {
  ObjectiveBreakdown out;
  auto term = [](double w, const ScalarField& y, const ScalarField& t) {
    ScalarField r = y;
    r *= w;
    r -= t;
    return inner(r, r);
  };
  out.terminal = 0.5 * (term(prob.W.w1, y_T.y1, prob.targets.y1) +
                        term(prob.W.w2, y_T.y2, prob.targets.y2) +
                        term(prob.W.w3, y_T.y3, prob.targets.y3));
  double pen = 0.0;
  for (std::size_t m = 0; m < u.intervals(); ++m) {
    const ControlValues& c = u.values()[m];
    pen += u.interval_length(m) * (c.vx * c.vx + c.vy * c.vy + c.k * c.k);
  }
  out.penalty = 0.5 * prob.lambda * pen;
  out.J = out.terminal + out.penalty;
  return out;
}

ReducedObjective reduced_objective(const ControlSignal& u,
                                   const CoverageProblem& prob) {
  check_problem(prob);
  const std::vector<double> checkpoints = checkpoints_for(u, prob.quad_panels);
  ForwardResult fwd = solve_coverage_model(prob.H, u, prob.params, prob.y0,
                                           prob.T, checkpoints,
                                           forward_opts(prob));
  ObjectiveBreakdown obj = objective_from_state(fwd.final_state, u, prob);
  return {obj, std::move(fwd)};
}

GradientReport coverage_gradient(const ControlSignal& u,
                                 const CoverageProblem& prob,
                                 const DensityTrajectory& forward,
                                 const StateDensities& y_T) {
  check_problem(prob);
  if (std::abs(u.duration() - prob.T) > 1e-9 * std::max(1.0, prob.T))
    throw std::invalid_argument("coverage_gradient: control horizon != T");
  // Interval boundaries must be checkpointed; panel times may interpolate.
  for (double t : u.times()) {
    auto it = std::lower_bound(forward.times.begin(), forward.times.end(),
                               t - 1e-9);
    if (it == forward.times.end() || std::abs(*it - t) > 1e-9)
      throw std::invalid_argument(
          "coverage_gradient: forward trajectory is missing an interval "
          "checkpoint");
  }

  const std::vector<double> quad = checkpoints_for(u, prob.quad_panels);
  AdjointTrajectory adj =
      solve_adjoint(y_T, u, prob.H, prob.params, prob.W, prob.targets, quad,
                    forward_opts(prob));
  if (adj.size() != quad.size())
    throw std::invalid_argument("coverage_gradient: adjoint sampling failed");

  // Integrand samples at every quadrature node.
  std::vector<Integrands> nodes(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const ScalarField y1q = sample_y1(forward, quad[q]);
    nodes[q] = integrands_at(y1q, adj.states[q], prob.H);
  }

  GradientReport rep;
  rep.gradient.resize(u.intervals());
  rep.boundary_form.resize(u.intervals());
  const int qp = prob.quad_panels;
  for (std::size_t m = 0; m < u.intervals(); ++m) {
    const double len = u.interval_length(m);
    const double dt = len / qp;
    Integrands acc{};
    // composite trapezoid over this interval's panel nodes
    for (int q = 0; q <= qp; ++q) {
      const std::size_t idx = m * qp + q;
      const double w = (q == 0 || q == qp) ? 0.5 * dt : dt;
      acc.vx_parts += w * nodes[idx].vx_parts;
      acc.vy_parts += w * nodes[idx].vy_parts;
      acc.vx_wall += w * nodes[idx].vx_wall;
      acc.vy_wall += w * nodes[idx].vy_wall;
      acc.k_pair += w * nodes[idx].k_pair;
    }
    const ControlValues& uv = u.values()[m];
    rep.gradient[m] = {acc.vx_parts + prob.lambda * uv.vx * len,
                       acc.vy_parts + prob.lambda * uv.vy * len,
                       acc.k_pair + prob.lambda * uv.k * len};
    rep.boundary_form[m] = {acc.vx_wall + prob.lambda * uv.vx * len,
                            acc.vy_wall + prob.lambda * uv.vy * len,
                            rep.gradient[m].k};
    rep.form_gap = std::max(
        {rep.form_gap, std::abs(rep.gradient[m].vx - rep.boundary_form[m].vx),
         std::abs(rep.gradient[m].vy - rep.boundary_form[m].vy)});
  }
  return rep;
}

GradientReport coverage_gradient(const ControlSignal& u,
                                 const CoverageProblem& prob) {
  ReducedObjective ro = reduced_objective(u, prob);
  return coverage_gradient(u, prob, ro.forward.trajectory,
                           ro.forward.final_state);
}

double dot(const std::vector<ControlValues>& a,
           const std::vector<ControlValues>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m)
    s += a[m].vx * b[m].vx + a[m].vy * b[m].vy + a[m].k * b[m].k;
  return s;
}

double norm(const std::vector<ControlValues>& g) { return std::sqrt(dot(g, g)); }

OptimizeResult optimize_coverage(const ControlSignal& u0,
                                 const CoverageProblem& prob,
                                 const OptimizeOptions& opts) {
  check_problem(prob);
  ControlSignal u = project_controls(u0, prob.bounds);

  ReducedObjective cur = reduced_objective(u, prob);
  OptimizeResult res{u, {cur.objective.J}, {cur.objective}, 0};

  double alpha = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    GradientReport grad =
        coverage_gradient(u, prob, cur.forward.trajectory,
                          cur.forward.final_state);
    const double gnorm = norm(grad.gradient);
    if (gnorm == 0.0) break;
    if (it == 0) alpha = 1.0 / gnorm;

    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      std::vector<ControlValues> vals = u.values();
      for (std::size_t m = 0; m < vals.size(); ++m) {
        vals[m].vx -= alpha * grad.gradient[m].vx;
        vals[m].vy -= alpha * grad.gradient[m].vy;
        vals[m].k -= alpha * grad.gradient[m].k;
      }
      ControlSignal cand =
          project_controls(ControlSignal(u.times(), std::move(vals)), prob.bounds);

      std::vector<ControlValues> step(u.intervals());
      for (std::size_t m = 0; m < step.size(); ++m) {
        step[m].vx = cand.values()[m].vx - u.values()[m].vx;
        step[m].vy = cand.values()[m].vy - u.values()[m].vy;
        step[m].k = cand.values()[m].k - u.values()[m].k;
      }
      const double slope = dot(grad.gradient, step);

      ReducedObjective trial = reduced_objective(cand, prob);
      if (trial.objective.J <= cur.objective.J + opts.armijo_c * slope) {
        const double dJ = cur.objective.J - trial.objective.J;
        u = std::move(cand);
        cur = std::move(trial);
        res.J_history.push_back(cur.objective.J);
        res.breakdown_history.push_back(cur.objective);
        ++res.iterations;
        accepted = true;
        alpha *= 2.0;  // optimistic warm start for the next iteration
        if (dJ <= opts.tol * std::max(1.0, cur.objective.J)) it = opts.max_iters;
        break;
      }
      alpha *= opts.backtrack;
    }
    if (!accepted) break;
  }

  res.u = u;
  return res;
}

}  // namespace mapcover
