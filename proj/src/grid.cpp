#include "mapcover/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mapcover {

Grid::Grid(const Extent& extent, int nx, int ny) : extent_(extent), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("Grid: nx and ny must be positive");
  if (!(extent.x_hi > extent.x_lo) || !(extent.y_hi > extent.y_lo))
    throw std::invalid_argument("Grid: empty extent");
  hx_ = extent.width() / nx;
  hy_ = extent.height() / ny;
}

std::pair<int, int> Grid::cell_of(double x, double y) const {
  int i = static_cast<int>(std::floor((x - extent_.x_lo) / hx_));
  int j = static_cast<int>(std::floor((y - extent_.y_lo) / hy_));
  i = std::clamp(i, 0, nx_ - 1);
  j = std::clamp(j, 0, ny_ - 1);
  return {i, j};
}

ScalarField::ScalarField(const Grid& grid, std::vector<double> values)
    : grid_(grid), v_(std::move(values)) {
  if (v_.size() != grid.size())
    throw std::invalid_argument("ScalarField: value count does not match grid");
}

double ScalarField::min() const { return *std::min_element(v_.begin(), v_.end()); }
double ScalarField::max() const { return *std::max_element(v_.begin(), v_.end()); }

namespace {
void require_same_grid(const ScalarField& a, const ScalarField& b) {
  if (!(a.grid() == b.grid()))
    throw std::invalid_argument("field operation on mismatched grids");
}
}  // namespace

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(*this, o);
  for (std::size_t c = 0; c < v_.size(); ++c) v_[c] += o.v_[c];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(*this, o);
  for (std::size_t c = 0; c < v_.size(); ++c) v_[c] -= o.v_[c];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : v_) v *= s;
  return *this;
}

double integrate(const ScalarField& f) {
  double s = 0.0;
  for (double v : f) s += v;
  return s * f.grid().cell_area();
}

double inner(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a, b);
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
  return s * a.grid().cell_area();
}

double l2_norm(const ScalarField& f) { return std::sqrt(inner(f, f)); }

double l1_distance(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a, b);
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += std::abs(a[c] - b[c]);
  return s * a.grid().cell_area();
}

ScalarField map_field(const Grid& grid,
                      const std::function<double(double, double)>& f) {
  ScalarField out(grid);
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i)
      out.at(i, j) = f(grid.cell_x(i), grid.cell_y(j));
  return out;
}

ScalarField gaussian_density(const Grid& grid, double cx, double cy,
                             double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_density: sigma <= 0");
  ScalarField out(grid);
  double total = 0.0;
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      const double dx = grid.cell_x(i) - cx;
      const double dy = grid.cell_y(j) - cy;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      out.at(i, j) = v;
      total += v;
    }
  }
  if (total <= 0.0) {
    // Sigma far below cell size: collapse onto the nearest cell.
    auto [i, j] = grid.cell_of(cx, cy);
    out.at(i, j) = 1.0;
    total = 1.0;
  }
  const double scale = 1.0 / (total * grid.cell_area());
  out *= scale;
  return out;
}

IndicatorField::IndicatorField(ScalarField f) : f_(std::move(f)) {
  for (double v : f_)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("IndicatorField: values must lie in [0, 1]");
}

IndicatorField IndicatorField::zeros(const Grid& g) {
  return IndicatorField(ScalarField(g, 0.0));
}

IndicatorField IndicatorField::ones(const Grid& g) {
  return IndicatorField(ScalarField(g, 1.0));
}

bool IndicatorField::is_binary() const {
  for (double v : f_)
    if (v != 0.0 && v != 1.0) return false;
  return true;
}

IndicatorField threshold(const ScalarField& f) {
  ScalarField out(f.grid());
  for (std::size_t c = 0; c < f.size(); ++c) out[c] = f[c] >= 0.5 ? 1.0 : 0.0;
  return IndicatorField(std::move(out));
}

IndicatorField disk_indicator(const Grid& g, double cx, double cy, double r) {
  ScalarField out(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double dx = g.cell_x(i) - cx;
      const double dy = g.cell_y(j) - cy;
      out.at(i, j) = dx * dx + dy * dy <= r * r ? 1.0 : 0.0;
    }
  return IndicatorField(std::move(out));
}

IndicatorField rect_indicator(const Grid& g, const Extent& box) {
  ScalarField out(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      out.at(i, j) = box.contains(g.cell_x(i), g.cell_y(j)) ? 1.0 : 0.0;
  return IndicatorField(std::move(out));
}

PartitionTargets partition_targets(const IndicatorField& map, int p, double C,
                                   const ScalarField* mask) {
  const Grid& g = map.grid();
  if (p < 1) throw std::invalid_argument("partition_targets: p must be >= 1");
  if (C < 0.0) throw std::invalid_argument("partition_targets: C must be >= 0");
  if (mask && !(mask->grid() == g))
    throw std::invalid_argument("partition_targets: mask grid mismatch");

  PartitionTargets out{CellPartition{p, std::vector<double>(
                                            static_cast<std::size_t>(p) * p, 0.0)},
                       ScalarField(g)};

  // Masked member area of the region per partition block, from the grid
  // cells whose centers fall in the block (midpoint rule again).
  std::vector<double> member(out.partition.targets.size(), 0.0);
  std::vector<double> block_area(out.partition.targets.size(), 0.0);
  const double bw = g.extent().width() / p;
  const double bh = g.extent().height() / p;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      int m = std::min(static_cast<int>((g.cell_x(i) - g.extent().x_lo) / bw), p - 1);
      int n = std::min(static_cast<int>((g.cell_y(j) - g.extent().y_lo) / bh), p - 1);
      const std::size_t b = static_cast<std::size_t>(n) * p + m;
      const double w = mask ? (*mask)[g.index(i, j)] : 1.0;
      member[b] += map.at(i, j) * w * g.cell_area();
      block_area[b] += g.cell_area();
      out.target_field[g.index(i, j)] = (C / 50.0) * map.at(i, j) * w;
    }
  }
  for (std::size_t b = 0; b < member.size(); ++b)
    out.partition.targets[b] = block_area[b] > 0.0 ? C * member[b] / block_area[b] : 0.0;
  return out;
}

}  // namespace mapcover
