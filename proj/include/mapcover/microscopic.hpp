#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mapcover/control.hpp"
#include "mapcover/field_io.hpp"
#include "mapcover/grid.hpp"

namespace mapcover {

struct AgentState {
  double x = 0.0;
  double y = 0.0;
  bool moving = true;
};

enum class SimMode { mapping, coverage };

enum class EventKind : int {
  observation = 0,     // mapping: sensor hit inside the region
  activity_start = 1,  // coverage: moving -> stationary switch
  activity_end = 2,    // coverage: stationary -> moving switch
};

struct Event {
  int agent = 0;
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  EventKind kind = EventKind::observation;
};

// Events sorted by (agent, time); times are nondecreasing per agent by
// construction, the merge across agents keeps the order thread-independent.
struct EventLog {
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
};

struct InitialDistribution {
  enum class Kind { gaussian, uniform } kind = Kind::gaussian;
  double cx = 0.0, cy = 0.0, sigma = 1.0;  // gaussian parameters
};

struct SimConfig {
  int n_agents = 0;
  double dt = 0.0;
  double T = 0.0;
  SimMode mode = SimMode::coverage;
  std::uint64_t seed = 0;
  int threads = 1;
  // Sample the switching/observation waiting time as 1 - exp(-k dt) instead
  // of the first-order probability k dt.
  bool exact_rates = false;
  InitialDistribution init;
  std::vector<double> sample_times;  // where the empirical g-hat is reported
  int trajectory_stride = 0;         // 0 = keep no trajectories

  // Requires dt > 0, n_agents > 0 and dt * max(k, k_f, k_o) <= 0.1 for the
  // rates active in `mode` (first-order switching probabilities stay honest).
  void validate(const PhysicalParams& p, const ControlSignal& u) const;
};

struct TrajectorySample {
  int agent;
  double t, x, y;
};

struct SimResult {
  EventLog log;
  ObservationSeries g_hat;  // cumulative events / N at sample_times
  std::vector<AgentState> final_states;
  std::vector<TrajectorySample> trajectories;
};

// One Langevin increment x += v dt + sqrt(2 D dt) z applied to a moving
// agent; (z1, z2) are standard normals.
std::pair<double, double> langevin_step(double x, double y, double vx,
                                        double vy, double D, double dt,
                                        double z1, double z2);

// Fold a point back into the rectangle by mirror reflection, per axis
// independently (corner exits fold both axes).
std::pair<double, double> specular_reflect(double x, double y,
                                           const Extent& domain);

struct TransitionOutcome {
  bool moving;
  bool observed;  // mapping mode only
};

// One switching/observation draw. Coverage: moving agents stop with
// probability H k dt, stationary ones resume with probability k_f dt.
// Mapping: agents never stop; on H = 1 an observation fires at rate k_o.
// `u` is a single uniform variate in [0,1).
TransitionOutcome transition_step(bool moving, SimMode mode, double H_at_x,
                                  double k, double k_f, double k_o, double dt,
                                  double u, bool exact_rates = false);

// Ensemble simulation: every agent follows the shared broadcast control with
// its own Philox stream. H supplies region membership at agent positions
// (nearest-cell lookup).
SimResult simulate_ensemble(const SimConfig& cfg, const PhysicalParams& params,
                            const ControlSignal& u, const IndicatorField& H);

// Histogram density: count points per cell / (N * cell area), so the result
// integrates to (points counted) / N.
ScalarField empirical_density(std::span<const std::pair<double, double>> pts,
                              const Grid& grid, int n_agents);
ScalarField empirical_density(const EventLog& log, EventKind kind,
                              const Grid& grid, int n_agents);

}  // namespace mapcover
