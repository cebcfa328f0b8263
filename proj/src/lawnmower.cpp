#include "mapcover/lawnmower.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mapcover {

double VelocitySchedule::total_duration() const {
  double t = 0.0;
  for (const Segment& s : segments) t += s.duration;
  return t;
}

double VelocitySchedule::path_length() const {
  double len = 0.0;
  for (const Segment& s : segments)
    len += s.duration * std::hypot(s.vx, s.vy);
  return len;
}

double lawnmower_path_length(const Extent& domain, int lanes) {
  return lanes * domain.width() + (lanes - 1) * domain.height() / lanes;
}

VelocitySchedule make_lawnmower(const Extent& domain, int lanes, double speed,
                                double T) {
  if (lanes < 1) throw std::invalid_argument("make_lawnmower: lanes < 1");
  if (!(T > 0.0)) throw std::invalid_argument("make_lawnmower: T <= 0");
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
    throw std::invalid_argument("make_lawnmower: degenerate domain");

  const double length = lawnmower_path_length(domain, lanes);
  const double realized = length / T;
  if (realized > speed * (1.0 + 1e-12))
    throw std::invalid_argument(
        "make_lawnmower: sweep needs speed >= " + std::to_string(realized) +
        " to finish in T = " + std::to_string(T));

  const double hop = domain.height() / lanes;
  VelocitySchedule sched;
  sched.segments.reserve(static_cast<std::size_t>(2 * lanes - 1));
  for (int l = 0; l < lanes; ++l) {
    const double dir = (l % 2 == 0) ? 1.0 : -1.0;
    sched.segments.push_back(
        {domain.width() / realized, dir * realized, 0.0});
    if (l + 1 < lanes)
      sched.segments.push_back({hop / realized, 0.0, realized});
  }
  // Absorb accumulated round-off so the schedule ends exactly at T.
  sched.segments.back().duration += T - sched.total_duration();
  return sched;
}

ControlSignal to_control(const VelocitySchedule& s, double k) {
  if (s.segments.empty())
    throw std::invalid_argument("to_control: empty schedule");
  std::vector<double> times{0.0};
  std::vector<ControlValues> values;
  for (const auto& seg : s.segments) {
    if (!(seg.duration > 0.0)) continue;
    times.push_back(times.back() + seg.duration);
    values.push_back({seg.vx, seg.vy, k});
  }
  return ControlSignal(std::move(times), std::move(values));
}

}  // namespace mapcover
