#pragma once

#include <span>
#include <vector>

#include "mapcover/control.hpp"
#include "mapcover/field_io.hpp"
#include "mapcover/grid.hpp"

namespace mapcover {

// Ensemble densities: y1 moving agents, y2 stationary agents (coverage) or
// accumulated observations (mapping), y3 accumulated coverage activity.
struct StateDensities {
  ScalarField y1, y2, y3;

  explicit StateDensities(const Grid& g)
      : y1(g, 0.0), y2(g, 0.0), y3(g, 0.0) {}
  StateDensities(ScalarField a, ScalarField b, ScalarField c);
};

// Adjoint state p = (p1, p2, p3) paired with (y1, y2, y3).
struct AdjointState {
  ScalarField p1, p2, p3;

  explicit AdjointState(const Grid& g) : p1(g, 0.0), p2(g, 0.0), p3(g, 0.0) {}
  AdjointState(ScalarField a, ScalarField b, ScalarField c);
};

enum class Model {
  mapping,   // dy1 = div(D grad y1 - v y1);            dy2 = k_o H y1
  coverage,  // dy1 = div(...) - k H y1 + k_f y2;       dy2 = k H y1 - k_f y2;
             // dy3 = k H y1
  adjoint,   // time-transformed adjoint: dp1 = div(D grad p1) + v.grad p1
             //   + k H (-p1 + p2 + p3);  dp2 = k_f (p1 - p2);  dp3 = 0
};

// Semi-discrete right-hand side on the shared mesh. Diffusion: 5-point stencil
// with zero-normal-flux ghost closure. Advection: dimension-split MUSCL with
// the van Leer slope limiter; wall faces carry exactly zero advective flux in
// the forward models, so total mass flux through the boundary is identically
// zero. The adjoint variant advects with -v and mirror-ghost wall fluxes,
// which is the transpose-consistent treatment of the same kernel.
void adr_rhs(const StateDensities& y, const ControlValues& u,
             const IndicatorField& H, const PhysicalParams& p, Model model,
             StateDensities& dydt, int threads = 1);
void adjoint_rhs(const AdjointState& p, const ControlValues& u,
                 const IndicatorField& H, const PhysicalParams& params,
                 AdjointState& dpdt, int threads = 1);

// 0.5 * min(hx/|vx|max, hy/|vy|max, diffusion bound, 1/kmax, 1/k_f), skipping
// infinite entries, capped at dt_max. The steppers below additionally bound dt
// by the combined-process rate so simultaneous worst-case advection, reaction
// and diffusion cannot push cells negative.
double stable_dt(double max_abs_vx, double max_abs_vy, double max_k,
                 const PhysicalParams& p, const Grid& grid,
                 double dt_max = 1.0);
double stable_dt(const ControlSignal& u, const PhysicalParams& p,
                 const Grid& grid, double dt_max = 1.0);

struct SolverOptions {
  double dt_max = 1.0;
  int threads = 1;
  bool store_y2 = true;
  bool store_y3 = true;
  // When set, dt is additionally derived from these bounds rather than the
  // actual signal, keeping the step size independent of the control iterate
  // (required for a differentiable control -> objective map).
  const ControlBounds* dt_bounds = nullptr;
};

struct DensityTrajectory {
  std::vector<double> times;
  std::vector<ScalarField> y1;
  std::vector<ScalarField> y2;  // empty when store_y2 is off
  std::vector<ScalarField> y3;  // empty when store_y3 is off

  std::size_t size() const { return times.size(); }
};

struct AdjointTrajectory {
  std::vector<double> times;  // forward time, ascending
  std::vector<AdjointState> states;

  std::size_t size() const { return times.size(); }
};

struct ForwardResult {
  DensityTrajectory trajectory;
  ObservationSeries observations;  // mapping: cumulative g(t) at snapshots
  StateDensities final_state;
  int clip_warnings = 0;  // cells clipped from below -1e-10; see stderr note
};

// SSP-RK2 time integration of the mapping model. Snapshot times, control
// boundaries and T are all hit exactly. y0 must integrate to 1 within 1e-6.
ForwardResult solve_mapping_model(const IndicatorField& H,
                                  const ControlSignal& v,
                                  const PhysicalParams& params,
                                  const ScalarField& y0, double T,
                                  std::span<const double> snapshot_times,
                                  const SolverOptions& opts = {});

// Same stepper for the coverage model (y2 starts at zero, y3 accumulates).
ForwardResult solve_coverage_model(const IndicatorField& H,
                                   const ControlSignal& u,
                                   const PhysicalParams& params,
                                   const ScalarField& y0, double T,
                                   std::span<const double> snapshot_times,
                                   const SolverOptions& opts = {});

// Diagonal terminal weights of the tracking objective.
struct TerminalWeights {
  double w1 = 0.0, w2 = 0.0, w3 = 1.0;
};

struct TargetFields {
  ScalarField y1, y2, y3;

  explicit TargetFields(const Grid& g) : y1(g, 0.0), y2(g, 0.0), y3(g, 0.0) {}
  TargetFields(ScalarField a, ScalarField b, ScalarField c)
      : y1(std::move(a)), y2(std::move(b)), y3(std::move(c)) {}
};

// Solves the adjoint of the coverage model backwards from
// p_i(T) = w_i (w_i y_i(T) - y_target_i) by integrating the transformed
// system forward with the time-reversed control, and reports p at the given
// forward times. Scheme matches the forward discretization (continuous
// adjoint, not the discrete transpose).
AdjointTrajectory solve_adjoint(const StateDensities& y_T,
                                const ControlSignal& u,
                                const IndicatorField& H,
                                const PhysicalParams& params,
                                const TerminalWeights& W,
                                const TargetFields& targets,
                                std::span<const double> snapshot_times,
                                const SolverOptions& opts = {});

}  // namespace mapcover
