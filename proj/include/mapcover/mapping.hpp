#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mapcover/field_io.hpp"
#include "mapcover/grid.hpp"
#include "mapcover/macroscopic.hpp"

namespace mapcover {

// Stored y1 snapshots that discretize the observation operator
// (K h)(t_j) = k_o * integral of h(x) y1(x, t_j) dx.
// `weights` are trapezoid quadrature weights over the snapshot times; they
// define the L2(0,T) inner product used by the misfit and the adjoint.
struct SnapshotBasis {
  std::vector<double> times;
  std::vector<ScalarField> y1;
  std::vector<double> weights;

  static SnapshotBasis from_trajectory(const DensityTrajectory& traj);

  const Grid& grid() const { return y1.front().grid(); }
  std::size_t size() const { return times.size(); }
  void validate() const;
};

// Tikhonov-regularized estimation of the region indicator from observation
// data. `rate` holds the observation rate at the snapshot times; use
// rate_data() to derive it from a cumulative count series.
struct MappingProblem {
  SnapshotBasis basis;
  std::vector<double> rate;
  double k_o = 0.0;
  double lambda = 0.0;
};

// Observation rate d/dt g at the snapshot times, by centered differences of
// the cumulative series (one-sided at the ends). The series must be sampled
// exactly at basis.times.
std::vector<double> rate_data(const ObservationSeries& cumulative);

std::vector<double> apply_K(const ScalarField& h, const SnapshotBasis& basis,
                            double k_o);
ScalarField apply_K_adjoint(std::span<const double> G,
                            const SnapshotBasis& basis, double k_o);

struct ObjectiveGradient {
  double J = 0.0;
  double misfit = 0.0;   // 0.5 ||K h - rate||^2
  double penalty = 0.0;  // 0.5 lambda ||h||^2
  ScalarField gradient;
};

// J(h) = 0.5 ||K h - rate||^2_{L2(0,T)} + 0.5 lambda ||h||^2_{L2(Omega)} and
// grad J = K*(K h - rate) + lambda h.
ObjectiveGradient objective_and_gradient(const ScalarField& h,
                                         const MappingProblem& prob);

// Largest eigenvalue estimate of K*K + lambda I by power iteration; also the
// Lipschitz constant of grad J.
double estimate_lipschitz(const MappingProblem& prob, int iters = 10);

// lambda = 1e-4 * ||K||^2 (spectral estimate). Scaling the regularizer by the
// data operator keeps the shrinkage of well-observed modes mild regardless of
// units; the CLI exposes an explicit override.
double default_lambda(const SnapshotBasis& basis, double k_o);

struct InverseOptions {
  int max_iters = 5000;
  double tol = 0.0;          // stop when |J_prev - J| <= tol * max(1, J)
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int power_iters = 10;
  int max_backtracks = 60;
};

struct MappingResult {
  ScalarField H_hat;               // minimizer, values in [0, 1]
  IndicatorField H_thresh;         // H_hat thresholded at 0.5
  std::vector<double> objective_history;  // J per accepted iterate, J0 first
  int iterations = 0;
  double initial_step = 0.0;       // 1 / Lipschitz estimate
};

// Projected gradient descent on the box 0 <= h <= 1 with Armijo backtracking.
// The objective is strictly convex for lambda > 0, so any start converges to
// the same minimizer. `init` defaults to the zero field.
MappingResult solve_inverse(const MappingProblem& prob,
                            const InverseOptions& opts = {},
                            const ScalarField* init = nullptr);

}  // namespace mapcover
