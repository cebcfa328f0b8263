#pragma once

#include <vector>

#include "mapcover/control.hpp"
#include "mapcover/grid.hpp"
#include "mapcover/macroscopic.hpp"

namespace mapcover {

// Terminal-tracking optimal control of the coverage model over
// piecewise-constant (vx, vy, k) on `intervals` uniform subintervals of
// [0, T]:
//   J(u) = 0.5 ||W y(T) - y_target||^2 + 0.5 lambda ||u||^2_{L2(0,T)}.
struct CoverageProblem {
  IndicatorField H;
  PhysicalParams params;
  ScalarField y0;
  double T = 0.0;
  TargetFields targets;
  TerminalWeights W;
  double lambda = 0.0;
  ControlBounds bounds;
  int intervals = 40;
  SolverOptions solver;
  // Gradient time-quadrature panels per control interval; forward and adjoint
  // states are checkpointed at the panel boundaries.
  int quad_panels = 4;

  CoverageProblem(IndicatorField H_, PhysicalParams params_, ScalarField y0_,
                  double T_, TargetFields targets_)
      : H(std::move(H_)), params(params_), y0(std::move(y0_)), T(T_),
        targets(std::move(targets_)) {}

  std::vector<double> checkpoint_times() const;  // interval + panel boundaries
  ControlSignal zero_control() const { return ControlSignal::zeros(T, intervals); }
};

struct ObjectiveBreakdown {
  double J = 0.0;
  double terminal = 0.0;
  double penalty = 0.0;
};

ObjectiveBreakdown objective_from_state(const StateDensities& y_T,
                                        const ControlSignal& u,
                                        const CoverageProblem& prob);

// Forward solve + objective; trajectory checkpoints are stored at
// checkpoint_times() so a gradient can be assembled from the same run.
struct ReducedObjective {
  ObjectiveBreakdown objective;
  ForwardResult forward;
};
ReducedObjective reduced_objective(const ControlSignal& u,
                                   const CoverageProblem& prob);

// One gradient entry per interval and channel:
//   dJ/du_i,m = integral over I_m of the pairing integrand + lambda u_i,m |I_m|
// with integrand_vx = <y1, dp1/dx>, integrand_vy = <y1, dp1/dy>,
// integrand_k = <H y1, -p1 + p2 + p3>. `boundary_form` re-assembles the
// velocity entries from the wall term plus <-p1, dy1/dx>; the two agree by a
// discrete integration-by-parts identity and the gap is reported.
struct GradientReport {
  std::vector<ControlValues> gradient;
  std::vector<ControlValues> boundary_form;
  double form_gap = 0.0;  // max abs difference between the two assemblies
};

// Assembles the gradient from an existing forward trajectory (must contain
// every checkpoint time; throws std::invalid_argument on missing
// checkpoints). The overload without a trajectory runs the forward solve.
GradientReport coverage_gradient(const ControlSignal& u,
                                 const CoverageProblem& prob,
                                 const DensityTrajectory& forward,
                                 const StateDensities& y_T);
GradientReport coverage_gradient(const ControlSignal& u,
                                 const CoverageProblem& prob);

double dot(const std::vector<ControlValues>& a,
           const std::vector<ControlValues>& b);
double norm(const std::vector<ControlValues>& g);

struct OptimizeOptions {
  int max_iters = 60;
  double tol = 1e-8;        // stop on relative objective decrease below tol
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
};

struct OptimizeResult {
  ControlSignal u;
  std::vector<double> J_history;  // accepted objective values, J(u0) first
  std::vector<ObjectiveBreakdown> breakdown_history;
  int iterations = 0;
};

// Projected gradient descent with Armijo backtracking; the first trial step
// is 1/||grad J(u0)||. J_history is nonincreasing by construction.
OptimizeResult optimize_coverage(const ControlSignal& u0,
                                 const CoverageProblem& prob,
                                 const OptimizeOptions& opts = {});

}  // namespace mapcover
