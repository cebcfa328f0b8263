#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace mapcover {

struct Extent {
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;

  double width() const { return x_hi - x_lo; }
  double height() const { return y_hi - y_lo; }
  double area() const { return width() * height(); }
  bool contains(double x, double y) const {
    return x >= x_lo && x <= x_hi && y >= y_lo && y <= y_hi;
  }
  friend bool operator==(const Extent&, const Extent&) = default;
};

// Uniform cell-centered mesh on a rectangle. Cells are indexed row-major with
// x fastest: cell (i, j) lives at linear index j*nx + i, j = 0 is the bottom
// row. All integrals in this project use the midpoint rule on these cells.
class Grid {
 public:
  Grid(const Extent& extent, int nx, int ny);

  const Extent& extent() const { return extent_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double cell_area() const { return hx_ * hy_; }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * nx_ + i;
  }
  double cell_x(int i) const { return extent_.x_lo + (i + 0.5) * hx_; }
  double cell_y(int j) const { return extent_.y_lo + (j + 0.5) * hy_; }

  // Cell containing (x, y); points on the hi edges map to the last cell.
  std::pair<int, int> cell_of(double x, double y) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Extent extent_;
  int nx_, ny_;
  double hx_, hy_;
};

class ScalarField {
 public:
  explicit ScalarField(const Grid& grid, double fill = 0.0)
      : grid_(grid), v_(grid.size(), fill) {}
  ScalarField(const Grid& grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }

  double& operator[](std::size_t c) { return v_[c]; }
  double operator[](std::size_t c) const { return v_[c]; }
  double& at(int i, int j) { return v_[grid_.index(i, j)]; }
  double at(int i, int j) const { return v_[grid_.index(i, j)]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  double min() const;
  double max() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  Grid grid_;
  std::vector<double> v_;
};

// Midpoint-rule integral over the domain: sum(v)*cell_area.
double integrate(const ScalarField& f);
// L2(Omega) inner product and norm with the same quadrature.
double inner(const ScalarField& a, const ScalarField& b);
double l2_norm(const ScalarField& f);
// integral of |a - b|.
double l1_distance(const ScalarField& a, const ScalarField& b);

ScalarField map_field(const Grid& grid,
                      const std::function<double(double, double)>& f);

// Gaussian bump centered at (cx, cy), normalized so the discrete integral is
// exactly 1 (a sub-cell sigma degenerates gracefully to a one-cell spike).
ScalarField gaussian_density(const Grid& grid, double cx, double cy,
                             double sigma);

// Region membership weight per cell, values in [0, 1].
class IndicatorField {
 public:
  explicit IndicatorField(ScalarField f);

  static IndicatorField zeros(const Grid& g);
  static IndicatorField ones(const Grid& g);

  const Grid& grid() const { return f_.grid(); }
  const ScalarField& field() const { return f_; }
  double operator[](std::size_t c) const { return f_[c]; }
  double at(int i, int j) const { return f_.at(i, j); }
  std::size_t size() const { return f_.size(); }

  bool is_binary() const;

 private:
  ScalarField f_;
};

// 1 where f >= 0.5, else 0.
IndicatorField threshold(const ScalarField& f);
inline IndicatorField threshold(const IndicatorField& f) {
  return threshold(f.field());
}

IndicatorField disk_indicator(const Grid& g, double cx, double cy, double r);
IndicatorField rect_indicator(const Grid& g, const Extent& box);

// Coarse p-by-p partition of the domain with one coverage target per block.
struct CellPartition {
  int p = 0;                    // blocks per axis
  std::vector<double> targets;  // p*p values, row-major, bottom row first

  double& target(int m, int n) { return targets[static_cast<std::size_t>(n) * p + m]; }
  double target(int m, int n) const { return targets[static_cast<std::size_t>(n) * p + m]; }
};

struct PartitionTargets {
  CellPartition partition;  // per-block z*: C * (masked area of H in block) / (block area)
  ScalarField target_field; // per-cell y3*: (C/50) * H * mask
};

// Block targets and the cellwise terminal activity target derived from a
// thresholded region map. `mask` (0/1 field, optional) restricts the target
// support, e.g. to a half-plane.
PartitionTargets partition_targets(const IndicatorField& map, int p, double C,
                                   const ScalarField* mask = nullptr);

}  // namespace mapcover
