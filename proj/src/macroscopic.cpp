#include "mapcover/macroscopic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>

#include "mapcover/parallel.hpp"

namespace mapcover {

StateDensities::StateDensities(ScalarField a, ScalarField b, ScalarField c)
    : y1(std::move(a)), y2(std::move(b)), y3(std::move(c)) {
  if (!(y1.grid() == y2.grid()) || !(y1.grid() == y3.grid()))
    throw std::invalid_argument("StateDensities: grid mismatch");
}

AdjointState::AdjointState(ScalarField a, ScalarField b, ScalarField c)
    : p1(std::move(a)), p2(std::move(b)), p3(std::move(c)) {
  if (!(p1.grid() == p2.grid()) || !(p1.grid() == p3.grid()))
    throw std::invalid_argument("AdjointState: grid mismatch");
}

namespace {

enum class WallFlux { zero, mirror };

// Harmonic-mean (van Leer) slope limiter; zero at extrema.
inline double van_leer(double a, double b) {
  const double ab = a * b;
  return ab > 0.0 ? 2.0 * ab / (a + b) : 0.0;
}

// MUSCL flux difference in x added to `out`: out -= d(c*f)/dx with donor-cell
// upwinding and limited linear reconstruction. Wall cells see mirrored ghosts,
// so their limited slope vanishes and wall-face donor values reduce to the
// adjacent cell average.
void add_advection_x(const ScalarField& f, double c, WallFlux wall,
                     ScalarField& out, int threads) {
  if (c == 0.0) return;
  const Grid& g = f.grid();
  const int nx = g.nx();
  const double inv_hx = 1.0 / g.hx();
  parallel_for(g.ny(), threads, [&](std::int64_t jb, std::int64_t je) {
    std::vector<double> flux(static_cast<std::size_t>(nx) + 1);
    for (std::int64_t j = jb; j < je; ++j) {
      const double* row = f.data() + g.index(0, static_cast<int>(j));
      for (int i = 1; i < nx; ++i) {
        // Donor cell and its limited slope (one-sided differences; mirrored
        // ghost values make the outermost difference zero).
        const int d = c > 0.0 ? i - 1 : i;
        const double dl = d > 0 ? (row[d] - row[d - 1]) * inv_hx : 0.0;
        const double dr = d < nx - 1 ? (row[d + 1] - row[d]) * inv_hx : 0.0;
        const double sigma = van_leer(dl, dr);
        const double val =
            c > 0.0 ? row[d] + 0.5 * g.hx() * sigma : row[d] - 0.5 * g.hx() * sigma;
        flux[i] = c * val;
      }
      if (wall == WallFlux::zero) {
        flux[0] = 0.0;
        flux[nx] = 0.0;
      } else {
        flux[0] = c * row[0];
        flux[nx] = c * row[nx - 1];
      }
      double* o = out.data() + g.index(0, static_cast<int>(j));
      for (int i = 0; i < nx; ++i) o[i] -= (flux[i + 1] - flux[i]) * inv_hx;
    }
  });
}

void add_advection_y(const ScalarField& f, double c, WallFlux wall,
                     ScalarField& out, int threads) {
  if (c == 0.0) return;
  const Grid& g = f.grid();
  const int nx = g.nx();
  const int ny = g.ny();
  const double inv_hy = 1.0 / g.hy();
  parallel_for(nx, threads, [&](std::int64_t ib, std::int64_t ie) {
    std::vector<double> flux(static_cast<std::size_t>(ny) + 1);
    for (std::int64_t i = ib; i < ie; ++i) {
      auto val_at = [&](int j) { return f[g.index(static_cast<int>(i), j)]; };
      for (int j = 1; j < ny; ++j) {
        const int d = c > 0.0 ? j - 1 : j;
        const double dl = d > 0 ? (val_at(d) - val_at(d - 1)) * inv_hy : 0.0;
        const double dr = d < ny - 1 ? (val_at(d + 1) - val_at(d)) * inv_hy : 0.0;
        const double sigma = van_leer(dl, dr);
        const double v =
            c > 0.0 ? val_at(d) + 0.5 * g.hy() * sigma : val_at(d) - 0.5 * g.hy() * sigma;
        flux[j] = c * v;
      }
      if (wall == WallFlux::zero) {
        flux[0] = 0.0;
        flux[ny] = 0.0;
      } else {
        flux[0] = c * val_at(0);
        flux[ny] = c * val_at(ny - 1);
      }
      for (int j = 0; j < ny; ++j)
        out[g.index(static_cast<int>(i), j)] -= (flux[j + 1] - flux[j]) * inv_hy;
    }
  });
}

// 5-point Laplacian with zero-normal-flux closure (wall-face gradients are
// simply omitted, which is the mirrored-ghost form).
void add_diffusion(const ScalarField& f, double D, ScalarField& out,
                   int threads) {
  if (D == 0.0) return;
  const Grid& g = f.grid();
  const int nx = g.nx();
  const int ny = g.ny();
  const double cx = D / (g.hx() * g.hx());
  const double cy = D / (g.hy() * g.hy());
  parallel_for(ny, threads, [&](std::int64_t jb, std::int64_t je) {
    for (std::int64_t j = jb; j < je; ++j) {
      const std::size_t base = g.index(0, static_cast<int>(j));
      for (int i = 0; i < nx; ++i) {
        const std::size_t c = base + i;
        double acc = 0.0;
        if (i > 0) acc += cx * (f[c - 1] - f[c]);
        if (i < nx - 1) acc += cx * (f[c + 1] - f[c]);
        if (j > 0) acc += cy * (f[c - nx] - f[c]);
        if (j < ny - 1) acc += cy * (f[c + nx] - f[c]);
        out[c] += acc;
      }
    }
  });
}

void require_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

void rhs_core(const ScalarField& f1, const ScalarField& f2,
              const ScalarField& f3, const ControlValues& u,
              const IndicatorField& H, const PhysicalParams& p, Model model,
              ScalarField& d1, ScalarField& d2, ScalarField& d3, int threads) {
  const Grid& g = f1.grid();
  require_grid(g, H.grid(), "adr_rhs");
  require_grid(g, d1.grid(), "adr_rhs");

  std::fill(d1.begin(), d1.end(), 0.0);
  add_diffusion(f1, p.D, d1, threads);
  if (model == Model::adjoint) {
    // v . grad p1 written as -div((-v) p1) with mirror-ghost wall fluxes: the
    // transpose-consistent counterpart of the forward zero-flux advection.
    add_advection_x(f1, -u.vx, WallFlux::mirror, d1, threads);
    add_advection_y(f1, -u.vy, WallFlux::mirror, d1, threads);
  } else {
    add_advection_x(f1, u.vx, WallFlux::zero, d1, threads);
    add_advection_y(f1, u.vy, WallFlux::zero, d1, threads);
  }

  parallel_for(static_cast<std::int64_t>(g.size()), threads,
               [&](std::int64_t b, std::int64_t e) {
                 switch (model) {
                   case Model::mapping:
                     for (std::int64_t c = b; c < e; ++c) {
                       d2[c] = p.k_o * H[c] * f1[c];
                       d3[c] = 0.0;
                     }
                     break;
                   case Model::coverage:
                     for (std::int64_t c = b; c < e; ++c) {
                       const double trap = u.k * H[c] * f1[c];
                       const double release = p.k_f * f2[c];
                       d1[c] += release - trap;
                       d2[c] = trap - release;
                       d3[c] = trap;
                     }
                     break;
                   case Model::adjoint:
                     for (std::int64_t c = b; c < e; ++c) {
                       d1[c] += u.k * H[c] * (-f1[c] + f2[c] + f3[c]);
                       d2[c] = p.k_f * (f1[c] - f2[c]);
                       d3[c] = 0.0;
                     }
                     break;
                 }
               });
}

}  // namespace

void adr_rhs(const StateDensities& y, const ControlValues& u,
             const IndicatorField& H, const PhysicalParams& p, Model model,
             StateDensities& dydt, int threads) {
  rhs_core(y.y1, y.y2, y.y3, u, H, p, model, dydt.y1, dydt.y2, dydt.y3,
           threads);
}

void adjoint_rhs(const AdjointState& ps, const ControlValues& u,
                 const IndicatorField& H, const PhysicalParams& params,
                 AdjointState& dpdt, int threads) {
  rhs_core(ps.p1, ps.p2, ps.p3, u, H, params, Model::adjoint, dpdt.p1, dpdt.p2,
           dpdt.p3, threads);
}

double stable_dt(double max_abs_vx, double max_abs_vy, double max_k,
                 const PhysicalParams& p, const Grid& grid, double dt_max) {
  if (dt_max <= 0.0) throw std::invalid_argument("stable_dt: dt_max <= 0");
  double dt = std::numeric_limits<double>::infinity();
  if (max_abs_vx > 0.0) dt = std::min(dt, grid.hx() / max_abs_vx);
  if (max_abs_vy > 0.0) dt = std::min(dt, grid.hy() / max_abs_vy);
  if (p.D > 0.0) {
    const double hx2 = grid.hx() * grid.hx();
    const double hy2 = grid.hy() * grid.hy();
    dt = std::min(dt, 1.0 / (2.0 * p.D * (1.0 / hx2 + 1.0 / hy2)));
  }
  if (max_k > 0.0) dt = std::min(dt, 1.0 / max_k);
  if (p.k_f > 0.0) dt = std::min(dt, 1.0 / p.k_f);
  return std::min(0.5 * dt, dt_max);
}

double stable_dt(const ControlSignal& u, const PhysicalParams& p,
                 const Grid& grid, double dt_max) {
  return stable_dt(u.max_abs_vx(), u.max_abs_vy(), u.max_k(), p, grid, dt_max);
}

namespace {

// Step bound that also covers simultaneous worst-case processes: the Euler
// out-rate of a cell is at most |vx|/hx + |vy|/hy + 2D(1/hx^2+1/hy^2) + k +
// k_f, and dt * rate <= 0.5 keeps every stage update nonnegative.
double combined_dt(double vx, double vy, double k, const PhysicalParams& p,
                   const Grid& g, double dt_max) {
  const double rate = vx / g.hx() + vy / g.hy() +
                      2.0 * p.D * (1.0 / (g.hx() * g.hx()) + 1.0 / (g.hy() * g.hy())) +
                      k + p.k_f;
  return rate > 0.0 ? std::min(dt_max, 0.5 / rate) : dt_max;
}

struct RateBounds {
  double vx, vy, k;
};

RateBounds dt_rates(const ControlSignal& u, const SolverOptions& opts) {
  if (opts.dt_bounds) {
    const ControlBounds& b = *opts.dt_bounds;
    return {std::max(std::abs(b.vx.lo), std::abs(b.vx.hi)),
            std::max(std::abs(b.vy.lo), std::abs(b.vy.hi)),
            std::max(std::abs(b.k.lo), std::abs(b.k.hi))};
  }
  return {u.max_abs_vx(), u.max_abs_vy(), u.max_k()};
}

std::vector<double> merge_times(double T, const ControlSignal& u,
                                std::span<const double> snapshots) {
  std::set<double> pts{0.0, T};
  for (double t : u.times())
    if (t > 0.0 && t < T) pts.insert(t);
  for (double t : snapshots) {
    if (t < -1e-12 || t > T * (1.0 + 1e-12) + 1e-12)
      throw std::invalid_argument("snapshot time outside [0, T]");
    pts.insert(std::clamp(t, 0.0, T));
  }
  return {pts.begin(), pts.end()};
}

struct Integrator {
  const IndicatorField& H;
  const PhysicalParams& params;
  Model model;
  int threads;

  StateDensities k1, k2, ytmp;

  explicit Integrator(const Grid& g, const IndicatorField& H_,
                      const PhysicalParams& p_, Model m, int th)
      : H(H_), params(p_), model(m), threads(th), k1(g), k2(g), ytmp(g) {}

  int clip(ScalarField& f) {
    int clipped = 0;
    for (double& v : f) {
      if (v < -1e-10) {
        v = 0.0;
        ++clipped;
      }
    }
    return clipped;
  }

  // Heun / SSP-RK2 step in place; returns clipped-cell count.
  int step(StateDensities& y, const ControlValues& u, double dt) {
    adr_rhs(y, u, H, params, model, k1, threads);
    axpy(ytmp, y, k1, dt);
    adr_rhs(ytmp, u, H, params, model, k2, threads);
    combine(y, ytmp, k2, dt);
    int clipped = clip(y.y1) + clip(y.y2) + clip(y.y3);
    return clipped;
  }

  static void axpy(StateDensities& out, const StateDensities& y,
                   const StateDensities& k, double dt) {
    for (std::size_t c = 0; c < y.y1.size(); ++c) {
      out.y1[c] = y.y1[c] + dt * k.y1[c];
      out.y2[c] = y.y2[c] + dt * k.y2[c];
      out.y3[c] = y.y3[c] + dt * k.y3[c];
    }
  }

  static void combine(StateDensities& y, const StateDensities& ystar,
                      const StateDensities& k, double dt) {
    for (std::size_t c = 0; c < y.y1.size(); ++c) {
      y.y1[c] = 0.5 * (y.y1[c] + ystar.y1[c] + dt * k.y1[c]);
      y.y2[c] = 0.5 * (y.y2[c] + ystar.y2[c] + dt * k.y2[c]);
      y.y3[c] = 0.5 * (y.y3[c] + ystar.y3[c] + dt * k.y3[c]);
    }
  }
};

ForwardResult integrate_forward(Model model, const IndicatorField& H,
                                const ControlSignal& u,
                                const PhysicalParams& params,
                                const ScalarField& y0, double T,
                                std::span<const double> snapshot_times,
                                const SolverOptions& opts) {
  params.validate();
  const Grid& g = y0.grid();
  require_grid(g, H.grid(), "forward solve");
  if (!(T > 0.0)) throw std::invalid_argument("forward solve: T must be > 0");
  if (std::abs(u.duration() - T) > 1e-9 * std::max(1.0, T))
    throw std::invalid_argument("forward solve: control horizon != T");
  if (std::abs(integrate(y0) - 1.0) > 1e-6)
    throw std::invalid_argument("forward solve: y0 must integrate to 1");

  const RateBounds rates = dt_rates(u, opts);
  const double dt_cfl =
      std::min(stable_dt(rates.vx, rates.vy, rates.k, params, g, opts.dt_max),
               combined_dt(rates.vx, rates.vy, rates.k, params, g, opts.dt_max));

  const std::vector<double> events = merge_times(T, u, snapshot_times);
  std::set<double> snaps(snapshot_times.begin(), snapshot_times.end());
  auto is_snap = [&](double t) {
    auto it = snaps.lower_bound(t - 1e-9);
    return it != snaps.end() && std::abs(std::clamp(*it, 0.0, T) - t) <= 1e-9;
  };

  ForwardResult res{DensityTrajectory{}, ObservationSeries{},
                    StateDensities(g), 0};
  res.final_state.y1 = y0;

  Integrator integ(g, H, params, model, opts.threads);
  StateDensities& y = res.final_state;

  auto record = [&](double t) {
    res.trajectory.times.push_back(t);
    res.trajectory.y1.push_back(y.y1);
    if (opts.store_y2) res.trajectory.y2.push_back(y.y2);
    if (opts.store_y3) res.trajectory.y3.push_back(y.y3);
    if (model == Model::mapping) {
      res.observations.t.push_back(t);
      res.observations.value.push_back(integrate(y.y2));
    }
  };

  if (is_snap(0.0)) record(0.0);
  for (std::size_t e = 0; e + 1 < events.size(); ++e) {
    const double ta = events[e], tb = events[e + 1];
    const ControlValues& uval = u.value_at(0.5 * (ta + tb));
    const int n = std::max(1, static_cast<int>(std::ceil((tb - ta) / dt_cfl - 1e-12)));
    const double dt = (tb - ta) / n;
    for (int s = 0; s < n; ++s) res.clip_warnings += integ.step(y, uval, dt);
    if (is_snap(tb)) record(tb);
  }

  if (res.clip_warnings > 0)
    std::fprintf(stderr,
                 "[macroscopic] warning: clipped %d cell undershoots below "
                 "-1e-10 to zero\n",
                 res.clip_warnings);
  return res;
}

}  // namespace

ForwardResult solve_mapping_model(const IndicatorField& H,
                                  const ControlSignal& v,
                                  const PhysicalParams& params,
                                  const ScalarField& y0, double T,
                                  std::span<const double> snapshot_times,
                                  const SolverOptions& opts) {
  return integrate_forward(Model::mapping, H, v, params, y0, T, snapshot_times,
                           opts);
}

ForwardResult solve_coverage_model(const IndicatorField& H,
                                   const ControlSignal& u,
                                   const PhysicalParams& params,
                                   const ScalarField& y0, double T,
                                   std::span<const double> snapshot_times,
                                   const SolverOptions& opts) {
  return integrate_forward(Model::coverage, H, u, params, y0, T, snapshot_times,
                           opts);
}

AdjointTrajectory solve_adjoint(const StateDensities& y_T,
                                const ControlSignal& u,
                                const IndicatorField& H,
                                const PhysicalParams& params,
                                const TerminalWeights& W,
                                const TargetFields& targets,
                                std::span<const double> snapshot_times,
                                const SolverOptions& opts) {
  params.validate();
  const Grid& g = y_T.y1.grid();
  require_grid(g, H.grid(), "solve_adjoint");
  require_grid(g, targets.y1.grid(), "solve_adjoint");
  const double T = u.duration();

  // p_i(T) = w_i (w_i y_i(T) - target_i); integrate tau = T - t forward.
  AdjointState p(g);
  for (std::size_t c = 0; c < g.size(); ++c) {
    p.p1[c] = W.w1 * (W.w1 * y_T.y1[c] - targets.y1[c]);
    p.p2[c] = W.w2 * (W.w2 * y_T.y2[c] - targets.y2[c]);
    p.p3[c] = W.w3 * (W.w3 * y_T.y3[c] - targets.y3[c]);
  }

  const ControlSignal ur = u.reversed();
  std::vector<double> taus;
  taus.reserve(snapshot_times.size());
  for (double t : snapshot_times) {
    if (t < -1e-12 || t > T * (1.0 + 1e-12) + 1e-12)
      throw std::invalid_argument("solve_adjoint: snapshot outside [0, T]");
    taus.push_back(std::clamp(T - t, 0.0, T));
  }
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             taus.end());

  const RateBounds rates = dt_rates(ur, opts);
  const double dt_cfl =
      std::min(stable_dt(rates.vx, rates.vy, rates.k, params, g, opts.dt_max),
               combined_dt(rates.vx, rates.vy, rates.k, params, g, opts.dt_max));
  const std::vector<double> events = merge_times(T, ur, taus);

  Integrator integ(g, H, params, Model::adjoint, opts.threads);
  StateDensities state(p.p1, p.p2, p.p3);

  AdjointTrajectory out;
  auto is_snap = [&](double tau) {
    auto it = std::lower_bound(taus.begin(), taus.end(), tau - 1e-9);
    return it != taus.end() && std::abs(*it - tau) <= 1e-9;
  };
  auto record = [&](double tau) {
    out.times.push_back(T - tau);
    out.states.emplace_back(state.y1, state.y2, state.y3);
  };

  if (is_snap(0.0)) record(0.0);
  for (std::size_t e = 0; e + 1 < events.size(); ++e) {
    const double ta = events[e], tb = events[e + 1];
    const ControlValues& uval = ur.value_at(0.5 * (ta + tb));
    const int n = std::max(1, static_cast<int>(std::ceil((tb - ta) / dt_cfl - 1e-12)));
    const double dt = (tb - ta) / n;
    for (int s = 0; s < n; ++s) {
      // Adjoint fields are signed; no nonnegativity clipping here.
      adr_rhs(state, uval, H, params, Model::adjoint, integ.k1, opts.threads);
      Integrator::axpy(integ.ytmp, state, integ.k1, dt);
      adr_rhs(integ.ytmp, uval, H, params, Model::adjoint, integ.k2, opts.threads);
      Integrator::combine(state, integ.ytmp, integ.k2, dt);
    }
    if (is_snap(tb)) record(tb);
  }

  // Recorded in tau order; report ascending in forward time.
  std::reverse(out.times.begin(), out.times.end());
  std::reverse(out.states.begin(), out.states.end());
  return out;
}

}  // namespace mapcover
