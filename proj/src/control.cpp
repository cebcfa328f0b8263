#include "mapcover/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mapcover {

void PhysicalParams::validate() const {
  if (D < 0.0 || k_o < 0.0 || k_f < 0.0)
    throw std::invalid_argument("PhysicalParams: rates must be nonnegative");
}

ControlSignal::ControlSignal(std::vector<double> times,
                             std::vector<ControlValues> values)
    : t_(std::move(times)), u_(std::move(values)) {
  if (t_.size() < 2 || u_.size() + 1 != t_.size())
    throw std::invalid_argument("ControlSignal: need M+1 times for M intervals");
  if (t_.front() != 0.0)
    throw std::invalid_argument("ControlSignal: time grid must start at 0");
  for (std::size_t i = 1; i < t_.size(); ++i)
    if (!(t_[i] > t_[i - 1]))
      throw std::invalid_argument("ControlSignal: times must be increasing");
}

ControlSignal ControlSignal::constant(double T, const ControlValues& u,
                                      int intervals) {
  if (T <= 0.0 || intervals < 1)
    throw std::invalid_argument("ControlSignal::constant: bad arguments");
  std::vector<double> t(intervals + 1);
  for (int m = 0; m <= intervals; ++m) t[m] = T * m / intervals;
  t.back() = T;
  return ControlSignal(std::move(t), std::vector<ControlValues>(intervals, u));
}

ControlSignal ControlSignal::zeros(double T, int intervals) {
  return constant(T, ControlValues{}, intervals);
}

std::size_t ControlSignal::interval_of(double t) const {
  if (t <= t_.front()) return 0;
  if (t >= t_.back()) return u_.size() - 1;
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  return static_cast<std::size_t>(it - t_.begin()) - 1;
}

ControlSignal ControlSignal::reversed() const {
  const double T = duration();
  std::vector<double> t(t_.size());
  for (std::size_t i = 0; i < t_.size(); ++i) t[i] = T - t_[t_.size() - 1 - i];
  t.front() = 0.0;
  t.back() = T;
  std::vector<ControlValues> u(u_.rbegin(), u_.rend());
  return ControlSignal(std::move(t), std::move(u));
}

double ControlSignal::max_abs_vx() const {
  double m = 0.0;
  for (const auto& u : u_) m = std::max(m, std::abs(u.vx));
  return m;
}

double ControlSignal::max_abs_vy() const {
  double m = 0.0;
  for (const auto& u : u_) m = std::max(m, std::abs(u.vy));
  return m;
}

double ControlSignal::max_k() const {
  double m = 0.0;
  for (const auto& u : u_) m = std::max(m, u.k);
  return m;
}

bool ControlSignal::within(const ControlBounds& b, double tol) const {
  for (const auto& u : u_) {
    if (u.vx < b.vx.lo - tol || u.vx > b.vx.hi + tol) return false;
    if (u.vy < b.vy.lo - tol || u.vy > b.vy.hi + tol) return false;
    if (u.k < b.k.lo - tol || u.k > b.k.hi + tol) return false;
  }
  return true;
}

ControlSignal project_controls(const ControlSignal& u, const ControlBounds& b) {
  if (b.vx.lo > b.vx.hi || b.vy.lo > b.vy.hi || b.k.lo > b.k.hi)
    throw std::invalid_argument("project_controls: empty bounds box");
  std::vector<ControlValues> v = u.values();
  for (auto& c : v) {
    c.vx = std::clamp(c.vx, b.vx.lo, b.vx.hi);
    c.vy = std::clamp(c.vy, b.vy.lo, b.vy.hi);
    c.k = std::clamp(c.k, b.k.lo, b.k.hi);
  }
  return ControlSignal(u.times(), std::move(v));
}

}  // namespace mapcover
