#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mapcover/grid.hpp"

namespace mapcover {

// Time series of a cumulative scalar observable (e.g. sensor counts).
struct ObservationSeries {
  std::vector<double> t;
  std::vector<double> value;

  std::size_t size() const { return t.size(); }
};

// Field CSV layout: one header line "nx,ny,x_lo,x_hi,y_lo,y_hi" (values, not
// names), then ny rows of nx comma-separated values, bottom row first.
void write_field_csv(const std::filesystem::path& path, const ScalarField& f);
ScalarField read_field_csv(const std::filesystem::path& path);

// Series CSV layout: header "t,<name>", one row per sample.
void write_series_csv(const std::filesystem::path& path,
                      const ObservationSeries& s,
                      const std::string& value_name = "g");
ObservationSeries read_series_csv(const std::filesystem::path& path);

// Shortest decimal round-trip formatting; used for every numeric CSV cell so
// byte-level output is reproducible.
std::string format_double(double v);

}  // namespace mapcover
