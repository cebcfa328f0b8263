#pragma once

#include <cstddef>
#include <vector>

namespace mapcover {

struct PhysicalParams {
  double D = 0.0;    // diffusion coefficient, m^2/s
  double k_o = 0.0;  // observation rate inside the region, 1/s
  double k_f = 0.0;  // stationary -> moving recovery rate, 1/s

  void validate() const;  // throws std::invalid_argument on negatives
};

// One control sample: commanded velocity and moving -> stationary rate.
struct ControlValues {
  double vx = 0.0;
  double vy = 0.0;
  double k = 0.0;
};

struct ChannelBounds {
  double lo = 0.0;
  double hi = 0.0;
};

struct ControlBounds {
  ChannelBounds vx{-2.0, 2.0};
  ChannelBounds vy{-2.0, 2.0};
  ChannelBounds k{0.0, 10.0};
};

// Piecewise-constant control on [0, T]: M intervals [t_m, t_{m+1}) with one
// (vx, vy, k) triple each. The last interval is closed at T.
class ControlSignal {
 public:
  ControlSignal(std::vector<double> times, std::vector<ControlValues> values);

  static ControlSignal constant(double T, const ControlValues& u,
                                int intervals = 1);
  static ControlSignal zeros(double T, int intervals);

  std::size_t intervals() const { return u_.size(); }
  double duration() const { return t_.back(); }
  const std::vector<double>& times() const { return t_; }
  const std::vector<ControlValues>& values() const { return u_; }
  std::vector<ControlValues>& values() { return u_; }

  double interval_length(std::size_t m) const { return t_[m + 1] - t_[m]; }
  std::size_t interval_of(double t) const;
  const ControlValues& value_at(double t) const { return u_[interval_of(t)]; }

  // Same grid traversed backwards: value on [t_m, t_{m+1}) becomes the value
  // on [T - t_{m+1}, T - t_m). Used to integrate the adjoint forward in time.
  ControlSignal reversed() const;

  double max_abs_vx() const;
  double max_abs_vy() const;
  double max_k() const;

  bool within(const ControlBounds& b, double tol = 0.0) const;

 private:
  std::vector<double> t_;          // size M+1, t_[0] = 0
  std::vector<ControlValues> u_;   // size M
};

// Componentwise clamp of every interval value into the admissible box.
ControlSignal project_controls(const ControlSignal& u, const ControlBounds& b);

}  // namespace mapcover
