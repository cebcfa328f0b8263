#pragma once

#include <vector>

#include "mapcover/control.hpp"
#include "mapcover/grid.hpp"

namespace mapcover {

// Boustrophedon sweep: `lanes` horizontal passes across the full width,
// joined by vertical hops of height/lanes, starting at the lower-left corner.
struct VelocitySchedule {
  struct Segment {
    double duration = 0.0;
    double vx = 0.0;
    double vy = 0.0;
  };
  std::vector<Segment> segments;

  double total_duration() const;
  double path_length() const;
};

// Builds the schedule so the full sweep finishes exactly at time T; the
// realized speed is path_length / T. Throws std::invalid_argument if that
// exceeds `speed` (message reports the minimum feasible speed) or if the
// geometry is degenerate.
VelocitySchedule make_lawnmower(const Extent& domain, int lanes, double speed,
                                double T);

double lawnmower_path_length(const Extent& domain, int lanes);

// Schedule as a control signal (k frozen at the given value).
ControlSignal to_control(const VelocitySchedule& s, double k = 0.0);

}  // namespace mapcover
