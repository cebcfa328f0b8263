#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mapcover/grid.hpp"

namespace mapcover {

// Scenario description parsed from sectioned key=value text. Parsing is
// strict: unknown keys, duplicate keys, missing required keys and malformed
// values are all errors that carry the offending line number. The [mapping],
// [coverage] and [micro] sections are optional; their presence enables the
// corresponding pipeline stages.
struct ScenarioConfig {
  struct Domain {
    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    friend bool operator==(const Domain&, const Domain&) = default;
  } domain;

  struct GridSpec {
    int nx = 0, ny = 0;
    friend bool operator==(const GridSpec&, const GridSpec&) = default;
  } grid;

  struct Physics {
    double D = 0.0, k_o = 0.0, k_f = 0.0;
    double start_x = 10.0, start_y = 10.0, sigma = 0.02;
    friend bool operator==(const Physics&, const Physics&) = default;
  } physics;

  struct Mapping {
    int lanes = 0;
    double speed = 0.0;
    std::string truth;        // region primitives, e.g. "disk:50,50,20;rect:..."
    double lambda = 0.0;      // <= 0: spectral default
    int max_iters = 5000;
    int snapshots = 0;        // 0: one snapshot per sweep segment
    double D = -1.0;          // < 0: use physics.D
    std::string data = "micro";  // micro | macro
    friend bool operator==(const Mapping&, const Mapping&) = default;
  };
  std::optional<Mapping> mapping;

  struct Coverage {
    double T = 0.0;
    int M = 40;
    double lambda = 0.0;
    double C = 0.0;
    int P = 20;
    double vmax = 2.0;
    double kmax = 10.0;
    int max_iters = 60;
    double D = -1.0;              // < 0: use physics.D
    double mask_y_min = -1e300;   // target mask x2 >= value; unset = no mask
    std::string map_file;         // run from a stored thresholded map
    friend bool operator==(const Coverage&, const Coverage&) = default;
  };
  std::optional<Coverage> coverage;

  struct Micro {
    int N = 0;
    double dt = 0.0;  // 0: derived from stability and rate limits
    std::uint64_t seed = 1;
    friend bool operator==(const Micro&, const Micro&) = default;
  };
  std::optional<Micro> micro;

  struct Output {
    std::string dir;
    bool dump_trajectories = false;
    friend bool operator==(const Output&, const Output&) = default;
  } output;

  Extent extent() const { return {domain.x_lo, domain.x_hi, domain.y_lo, domain.y_hi}; }
  Grid make_grid() const;
  double mapping_D() const;
  double coverage_D() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

// Canonical text form; parse_config(render_config(c)) == c.
std::string render_config(const ScenarioConfig& c);

// Ground-truth region from a primitive list: semicolon-separated
// "disk:cx,cy,r" and "rect:x_lo,x_hi,y_lo,y_hi" terms, unioned.
IndicatorField truth_indicator(const std::string& spec, const Grid& grid);

// Bundled presets: "case1a", "case1b", "case3", "mapping-demo".
ScenarioConfig make_case_config(const std::string& name);

}  // namespace mapcover
