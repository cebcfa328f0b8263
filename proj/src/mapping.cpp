#include "mapcover/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mapcover {

SnapshotBasis SnapshotBasis::from_trajectory(const DensityTrajectory& traj) {
  SnapshotBasis b;
  b.times = traj.times;
  b.y1 = traj.y1;
  b.weights.resize(b.times.size(), 0.0);
  if (b.times.size() < 2)
    throw std::invalid_argument("SnapshotBasis: need at least 2 snapshots");
  for (std::size_t j = 0; j + 1 < b.times.size(); ++j) {
    const double half = 0.5 * (b.times[j + 1] - b.times[j]);
    if (!(half > 0.0))
      throw std::invalid_argument("SnapshotBasis: times must be increasing");
    b.weights[j] += half;
    b.weights[j + 1] += half;
  }
  return b;
}

void SnapshotBasis::validate() const {
  if (times.size() < 2 || times.size() != y1.size() ||
      times.size() != weights.size())
    throw std::invalid_argument("SnapshotBasis: inconsistent sizes");
  for (std::size_t j = 0; j < y1.size(); ++j)
    if (!(y1[j].grid() == y1[0].grid()))
      throw std::invalid_argument("SnapshotBasis: snapshot grid mismatch");
}

std::vector<double> rate_data(const ObservationSeries& cumulative) {
  const std::size_t n = cumulative.size();
  if (n < 2) throw std::invalid_argument("rate_data: need >= 2 samples");
  std::vector<double> r(n, 0.0);
  const auto& t = cumulative.t;
  const auto& g = cumulative.value;
  r[0] = (g[1] - g[0]) / (t[1] - t[0]);
  for (std::size_t j = 1; j + 1 < n; ++j)
    r[j] = (g[j + 1] - g[j - 1]) / (t[j + 1] - t[j - 1]);
  r[n - 1] = (g[n - 1] - g[n - 2]) / (t[n - 1] - t[n - 2]);
  return r;
}

std::vector<double> apply_K(const ScalarField& h, const SnapshotBasis& basis,
                            double k_o) {
  std::vector<double> out(basis.size(), 0.0);
  for (std::size_t j = 0; j < basis.size(); ++j)
    out[j] = k_o * inner(h, basis.y1[j]);
  return out;
}

ScalarField apply_K_adjoint(std::span<const double> G,
                            const SnapshotBasis& basis, double k_o) {
  if (G.size() != basis.size())
    throw std::invalid_argument("apply_K_adjoint: sample count mismatch");
  ScalarField out(basis.grid());
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const double w = k_o * basis.weights[j] * G[j];
    if (w == 0.0) continue;
    const ScalarField& snap = basis.y1[j];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * snap[c];
  }
  return out;
}

namespace {

double misfit_norm2(std::span<const double> r, const SnapshotBasis& basis) {
  double s = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) s += basis.weights[j] * r[j] * r[j];
  return s;
}

struct Evaluation {
  std::vector<double> residual;  // K h - rate
  double J = 0.0;
  double misfit = 0.0;
  double penalty = 0.0;
};

Evaluation evaluate(const ScalarField& h, const MappingProblem& prob) {
  Evaluation ev;
  ev.residual = apply_K(h, prob.basis, prob.k_o);
  for (std::size_t j = 0; j < ev.residual.size(); ++j)
    ev.residual[j] -= prob.rate[j];
  ev.misfit = 0.5 * misfit_norm2(ev.residual, prob.basis);
  ev.penalty = 0.5 * prob.lambda * inner(h, h);
  ev.J = ev.misfit + ev.penalty;
  return ev;
}

void check_problem(const MappingProblem& prob) {
  prob.basis.validate();
  if (prob.rate.size() != prob.basis.size())
    throw std::invalid_argument("MappingProblem: rate/basis size mismatch");
  if (!(prob.k_o > 0.0))
    throw std::invalid_argument("MappingProblem: k_o must be positive");
  if (prob.lambda < 0.0)
    throw std::invalid_argument("MappingProblem: lambda must be >= 0");
}

ScalarField clip01(ScalarField f) {
  for (double& v : f) v = std::clamp(v, 0.0, 1.0);
  return f;
}

}  // namespace

ObjectiveGradient objective_and_gradient(const ScalarField& h,
                                         const MappingProblem& prob) {
  check_problem(prob);
  Evaluation ev = evaluate(h, prob);
  ObjectiveGradient out{ev.J, ev.misfit, ev.penalty,
                        apply_K_adjoint(ev.residual, prob.basis, prob.k_o)};
  if (prob.lambda != 0.0)
    for (std::size_t c = 0; c < h.size(); ++c)
      out.gradient[c] += prob.lambda * h[c];
  return out;
}

double estimate_lipschitz(const MappingProblem& prob, int iters) {
  check_problem(prob);
  ScalarField z(prob.basis.grid(), 1.0);
  double eig = prob.lambda;
  for (int it = 0; it < iters; ++it) {
    const double nz = l2_norm(z);
    if (nz == 0.0) break;
    z *= 1.0 / nz;
    ScalarField az = apply_K_adjoint(apply_K(z, prob.basis, prob.k_o),
                                     prob.basis, prob.k_o);
    if (prob.lambda != 0.0)
      for (std::size_t c = 0; c < z.size(); ++c) az[c] += prob.lambda * z[c];
    eig = inner(z, az);  // Rayleigh quotient, ||z|| = 1
    z = std::move(az);
  }
  return std::max(eig, prob.lambda);
}

double default_lambda(const SnapshotBasis& basis, double k_o) {
  MappingProblem probe{basis, std::vector<double>(basis.size(), 0.0), k_o, 0.0};
  return 1e-4 * estimate_lipschitz(probe);
}

MappingResult solve_inverse(const MappingProblem& prob,
                            const InverseOptions& opts,
                            const ScalarField* init) {
  check_problem(prob);
  const Grid& grid = prob.basis.grid();
  ScalarField h = init ? clip01(*init) : ScalarField(grid, 0.0);
  if (init && !(init->grid() == grid))
    throw std::invalid_argument("solve_inverse: init grid mismatch");

  const double L = estimate_lipschitz(prob, opts.power_iters);
  const double alpha0 = L > 0.0 ? 1.0 / L : 1.0;

  Evaluation cur = evaluate(h, prob);
  MappingResult res{h, threshold(h), {cur.J}, 0, alpha0};

  for (int it = 0; it < opts.max_iters; ++it) {
    // grad = K*(residual) + lambda h
    ScalarField grad = apply_K_adjoint(cur.residual, prob.basis, prob.k_o);
    if (prob.lambda != 0.0)
      for (std::size_t c = 0; c < h.size(); ++c) grad[c] += prob.lambda * h[c];

    double alpha = alpha0;
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      ScalarField cand(grid);
      for (std::size_t c = 0; c < h.size(); ++c)
        cand[c] = std::clamp(h[c] - alpha * grad[c], 0.0, 1.0);
      Evaluation ev = evaluate(cand, prob);
      ScalarField step = cand;
      step -= h;
      const double slope = inner(grad, step);  // <= 0 for a descent step
      if (ev.J <= cur.J + opts.armijo_c * slope) {
        const double dJ = cur.J - ev.J;
        h = std::move(cand);
        cur = std::move(ev);
        accepted = true;
        res.objective_history.push_back(cur.J);
        ++res.iterations;
        if (dJ <= opts.tol * std::max(1.0, cur.J)) it = opts.max_iters;
        break;
      }
      alpha *= opts.backtrack;
    }
    if (!accepted) break;  // no admissible decrease left at machine precision
  }

  res.H_hat = h;
  res.H_thresh = threshold(h);
  return res;
}

}  // namespace mapcover
