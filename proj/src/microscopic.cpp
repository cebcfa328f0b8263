#include "mapcover/microscopic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mapcover/parallel.hpp"
#include "mapcover/rng.hpp"

namespace mapcover {

void SimConfig::validate(const PhysicalParams& p, const ControlSignal& u) const {
  p.validate();
  if (n_agents <= 0) throw std::invalid_argument("SimConfig: n_agents <= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt <= 0");
  if (!(T > 0.0)) throw std::invalid_argument("SimConfig: T <= 0");
  const double rate =
      mode == SimMode::mapping ? p.k_o : std::max(u.max_k(), p.k_f);
  if (dt * rate > 0.1 + 1e-12)
    throw std::invalid_argument(
        "SimConfig: dt * max rate exceeds 0.1; first-order switching "
        "probabilities would be inaccurate");
  if (init.kind == InitialDistribution::Kind::gaussian && !(init.sigma > 0.0))
    throw std::invalid_argument("SimConfig: gaussian sigma <= 0");
}

std::pair<double, double> langevin_step(double x, double y, double vx,
                                        double vy, double D, double dt,
                                        double z1, double z2) {
  const double noise = std::sqrt(2.0 * D * dt);
  return {x + vx * dt + noise * z1, y + vy * dt + noise * z2};
}

namespace {

// Mirror-fold a coordinate into [lo, hi].
double fold(double v, double lo, double hi) {
  const double w = hi - lo;
  if (v >= lo && v <= hi) return v;
  double r = std::fmod(v - lo, 2.0 * w);
  if (r < 0.0) r += 2.0 * w;
  return lo + (r <= w ? r : 2.0 * w - r);
}

}  // namespace

std::pair<double, double> specular_reflect(double x, double y,
                                           const Extent& domain) {
  return {fold(x, domain.x_lo, domain.x_hi), fold(y, domain.y_lo, domain.y_hi)};
}

TransitionOutcome transition_step(bool moving, SimMode mode, double H_at_x,
                                  double k, double k_f, double k_o, double dt,
                                  double u, bool exact_rates) {
  auto prob = [exact_rates, dt](double rate) {
    return exact_rates ? -std::expm1(-rate * dt) : rate * dt;
  };
  if (mode == SimMode::mapping) {
    // Observers never stop; a sensor hit fires only inside the region.
    return {true, u < prob(k_o * H_at_x)};
  }
  if (moving) return {!(u < prob(k * H_at_x)), false};
  return {u < prob(k_f), false};
}

namespace {

struct AgentRun {
  std::vector<Event> events;
  AgentState final_state;
  std::vector<TrajectorySample> trajectory;
};

AgentRun run_agent(int agent, const SimConfig& cfg, const PhysicalParams& p,
                   const ControlSignal& u, const IndicatorField& H,
                   const Extent& domain, std::int64_t n_steps) {
  AgentRun out;
  const std::uint32_t stream = static_cast<std::uint32_t>(agent);

  // Counter 0 seeds the initial position; step s uses counter s+1.
  AgentState st;
  {
    const RandomBlock b = draw_block(cfg.seed, stream, 0);
    if (cfg.init.kind == InitialDistribution::Kind::gaussian) {
      st.x = cfg.init.cx + cfg.init.sigma * b.z1;
      st.y = cfg.init.cy + cfg.init.sigma * b.z2;
    } else {
      st.x = domain.x_lo + domain.width() * b.u1;
      st.y = domain.y_lo + domain.height() * b.u2;
    }
    std::tie(st.x, st.y) = specular_reflect(st.x, st.y, domain);
    st.moving = true;
  }
  if (cfg.trajectory_stride > 0)
    out.trajectory.push_back({agent, 0.0, st.x, st.y});

  const Grid& g = H.grid();
  for (std::int64_t s = 0; s < n_steps; ++s) {
    const double t = s * cfg.dt;
    const double t_next = (s + 1 == n_steps) ? cfg.T : (s + 1) * cfg.dt;
    const double dt = t_next - t;
    const ControlValues& uc = u.value_at(t);
    const RandomBlock b = draw_block(cfg.seed, stream, static_cast<std::uint64_t>(s) + 1);

    if (st.moving) {
      auto [nx, ny] = langevin_step(st.x, st.y, uc.vx, uc.vy, p.D, dt, b.z1, b.z2);
      std::tie(st.x, st.y) = specular_reflect(nx, ny, domain);
    }

    const auto [ci, cj] = g.cell_of(st.x, st.y);
    const double h = H.at(ci, cj);
    const TransitionOutcome tr =
        transition_step(st.moving, cfg.mode, h, uc.k, p.k_f, p.k_o, dt, b.u1,
                        cfg.exact_rates);
    if (cfg.mode == SimMode::mapping) {
      if (tr.observed)
        out.events.push_back({agent, t_next, st.x, st.y, EventKind::observation});
    } else if (tr.moving != st.moving) {
      out.events.push_back({agent, t_next, st.x, st.y,
                            st.moving ? EventKind::activity_start
                                      : EventKind::activity_end});
    }
    st.moving = tr.moving;

    if (cfg.trajectory_stride > 0 &&
        ((s + 1) % cfg.trajectory_stride == 0 || s + 1 == n_steps))
      out.trajectory.push_back({agent, t_next, st.x, st.y});
  }
  out.final_state = st;
  return out;
}

}  // namespace

SimResult simulate_ensemble(const SimConfig& cfg, const PhysicalParams& params,
                            const ControlSignal& u, const IndicatorField& H) {
  cfg.validate(params, u);
  if (std::abs(u.duration() - cfg.T) > 1e-9 * std::max(1.0, cfg.T))
    throw std::invalid_argument("simulate_ensemble: control horizon != T");
  const Extent domain = H.grid().extent();
  const std::int64_t n_steps =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(cfg.T / cfg.dt - 1e-12)));

  std::vector<AgentRun> runs(static_cast<std::size_t>(cfg.n_agents));
  parallel_for(cfg.n_agents, cfg.threads, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t a = b; a < e; ++a)
      runs[static_cast<std::size_t>(a)] =
          run_agent(static_cast<int>(a), cfg, params, u, H, domain, n_steps);
  });

  SimResult res;
  res.final_states.reserve(runs.size());
  // Deterministic merge: agent order, then per-agent time order (already
  // nondecreasing by construction).
  for (auto& r : runs) {
    res.log.events.insert(res.log.events.end(), r.events.begin(), r.events.end());
    res.trajectories.insert(res.trajectories.end(), r.trajectory.begin(),
                            r.trajectory.end());
    res.final_states.push_back(r.final_state);
  }

  if (!cfg.sample_times.empty()) {
    // Cumulative event count / N at the sample times.
    std::vector<double> ev_times;
    ev_times.reserve(res.log.size());
    for (const Event& ev : res.log.events) ev_times.push_back(ev.t);
    std::sort(ev_times.begin(), ev_times.end());
    std::vector<double> st = cfg.sample_times;
    std::sort(st.begin(), st.end());
    for (double t : st) {
      const auto n = std::upper_bound(ev_times.begin(), ev_times.end(), t) -
                     ev_times.begin();
      res.g_hat.t.push_back(t);
      res.g_hat.value.push_back(static_cast<double>(n) / cfg.n_agents);
    }
  }
  return res;
}

ScalarField empirical_density(std::span<const std::pair<double, double>> pts,
                              const Grid& grid, int n_agents) {
  if (n_agents <= 0) throw std::invalid_argument("empirical_density: N <= 0");
  ScalarField out(grid);
  const double w = 1.0 / (n_agents * grid.cell_area());
  for (const auto& [x, y] : pts) {
    const auto [i, j] = grid.cell_of(x, y);
    out.at(i, j) += w;
  }
  return out;
}

ScalarField empirical_density(const EventLog& log, EventKind kind,
                              const Grid& grid, int n_agents) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(log.size());
  for (const Event& ev : log.events)
    if (ev.kind == kind) pts.emplace_back(ev.x, ev.y);
  return empirical_density(pts, grid, n_agents);
}

}  // namespace mapcover
