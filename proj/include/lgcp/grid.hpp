#ifndef LGCP_GRID_HPP
#define LGCP_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lgcp/error.hpp"

namespace lgcp {

/// Axis-aligned rectangle in window length units.
struct Window {
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool operator==(const Window&) const = default;
};

/// Smallest power of two >= n.
inline int next_pow2(long n) {
  long p = 1;
  while (p < n) p <<= 1;
  return static_cast<int>(p);
}

/// Regular lattice over a window plus its toroidal extension.
///
/// Storage on both grids is row-major with x fastest: cell (ix, iy) sits at
/// iy * ncols + ix. The observation grid occupies the lower-left nx-by-ny
/// corner of the extended grid, so the observation cell (ix, iy) is the
/// extended cell (ix, iy).
class GridSpec {
 public:
  GridSpec() = default;

  static GridSpec build(const Window& window, int nx, int ny,
                        double extension_factor = 2.0) {
    if (nx < 1 || ny < 1)
      throw InvalidInput("grid: nx and ny must be >= 1");
    if (!(extension_factor >= 2.0) || !std::isfinite(extension_factor))
      throw InvalidInput("grid: extension_factor must be >= 2");
    if (!(window.width() > 0.0) || !(window.height() > 0.0) ||
        !std::isfinite(window.area()))
      throw InvalidInput("grid: degenerate window (zero area)");
    GridSpec g;
    g.window_ = window;
    g.nx_ = nx;
    g.ny_ = ny;
    g.extension_ = extension_factor;
    g.ext_nx_ = next_pow2(static_cast<long>(std::ceil(extension_factor * nx)));
    g.ext_ny_ = next_pow2(static_cast<long>(std::ceil(extension_factor * ny)));
    return g;
  }

  const Window& window() const { return window_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int ext_nx() const { return ext_nx_; }
  int ext_ny() const { return ext_ny_; }
  double extension_factor() const { return extension_; }
  double cell_width() const { return window_.width() / nx_; }
  double cell_height() const { return window_.height() / ny_; }
  double cell_area() const { return cell_width() * cell_height(); }
  std::size_t n_obs() const { return static_cast<std::size_t>(nx_) * ny_; }
  std::size_t n_ext() const {
    return static_cast<std::size_t>(ext_nx_) * ext_ny_;
  }

  std::size_t obs_index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * nx_ + ix;
  }
  std::size_t ext_index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * ext_nx_ + ix;
  }
  std::size_t ext_of_obs(std::size_t k) const {
    return ext_index(static_cast<int>(k % nx_), static_cast<int>(k / nx_));
  }
  std::pair<int, int> obs_coords(std::size_t k) const {
    return {static_cast<int>(k % nx_), static_cast<int>(k / nx_)};
  }
  std::pair<int, int> ext_coords(std::size_t k) const {
    return {static_cast<int>(k % ext_nx_), static_cast<int>(k / ext_nx_)};
  }

  std::pair<double, double> centroid(int ix, int iy) const {
    return {window_.xmin + (ix + 0.5) * cell_width(),
            window_.ymin + (iy + 0.5) * cell_height()};
  }

  /// Euclidean distance between cell centres measured on the torus.
  double torus_distance(std::size_t a_ext, std::size_t b_ext) const {
    auto [ax, ay] = ext_coords(a_ext);
    auto [bx, by] = ext_coords(b_ext);
    int dx = std::abs(ax - bx);
    int dy = std::abs(ay - by);
    dx = std::min(dx, ext_nx_ - dx);
    dy = std::min(dy, ext_ny_ - dy);
    return std::hypot(dx * cell_width(), dy * cell_height());
  }

  /// Cell holding (x, y), or nullopt when outside the window. Intervals are
  /// left/bottom-closed and right/top-open; points on the max edge (within
  /// 1e-9 of the window extent) snap inward.
  std::optional<std::size_t> locate(double x, double y) const {
    const double ex = 1e-9 * window_.width();
    const double ey = 1e-9 * window_.height();
    if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
    if (x < window_.xmin || y < window_.ymin) return std::nullopt;
    if (x > window_.xmax + ex || y > window_.ymax + ey) return std::nullopt;
    if (x >= window_.xmax) x = window_.xmax - ex;
    if (y >= window_.ymax) y = window_.ymax - ey;
    int ix = static_cast<int>(std::floor((x - window_.xmin) / cell_width()));
    int iy = static_cast<int>(std::floor((y - window_.ymin) / cell_height()));
    ix = std::clamp(ix, 0, nx_ - 1);
    iy = std::clamp(iy, 0, ny_ - 1);
    return obs_index(ix, iy);
  }

 private:
  Window window_;
  int nx_ = 1, ny_ = 1;
  int ext_nx_ = 2, ext_ny_ = 2;
  double extension_ = 2.0;
};

inline GridSpec build_grid(const Window& window, int nx, int ny,
                           double extension_factor = 2.0) {
  return GridSpec::build(window, nx, ny, extension_factor);
}

/// Observed event locations, optionally typed (1..m) and/or timed.
struct PointPattern {
  Window window;
  std::vector<double> x, y;
  std::vector<int> marks;     // empty, or one label per point
  std::vector<double> times;  // empty, or one time per point

  std::size_t size() const { return x.size(); }
  bool marked() const { return !marks.empty(); }
  bool timed() const { return !times.empty(); }

  int n_types() const {
    return marks.empty() ? 1 : *std::max_element(marks.begin(), marks.end());
  }

  void add(double px, double py) {
    x.push_back(px);
    y.push_back(py);
  }

  /// Throws InvalidInput naming the first offending point.
  void validate() const {
    if (y.size() != x.size())
      throw InvalidInput("pattern: x and y have different lengths");
    if (!marks.empty() && marks.size() != x.size())
      throw InvalidInput("pattern: marks length differs from point count");
    if (!times.empty() && times.size() != x.size())
      throw InvalidInput("pattern: times length differs from point count");
    const double ex = 1e-9 * window.width();
    const double ey = 1e-9 * window.height();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] >= window.xmin && x[i] <= window.xmax + ex &&
            y[i] >= window.ymin && y[i] <= window.ymax + ey))
        throw InvalidInput("pattern: point " + std::to_string(i) +
                           " lies outside the window");
      if (!marks.empty() && marks[i] < 1)
        throw InvalidInput("pattern: point " + std::to_string(i) +
                           " has a type label below 1");
      if (!times.empty() && !(times[i] >= 0.0))
        throw InvalidInput("pattern: point " + std::to_string(i) +
                           " has a negative or non-finite time");
    }
    if (!marks.empty() && n_types() < 2)
      throw InvalidInput("pattern: a marked pattern needs at least 2 types");
  }
};

/// Per-cell counts over the extended grid. Extended-only cells are flagged
/// unobserved and always hold zero.
struct CellCounts {
  std::vector<int> counts;
  std::vector<std::uint8_t> observed;

  long total() const {
    long s = 0;
    for (int c : counts) s += c;
    return s;
  }
};

/// Bin every point to its observation cell.
inline CellCounts bin_points(const PointPattern& pattern, const GridSpec& grid) {
  if (!(pattern.window == grid.window()))
    throw InvalidInput("bin_points: pattern window differs from grid window");
  if (pattern.y.size() != pattern.x.size())
    throw InvalidInput("bin_points: x and y have different lengths");
  CellCounts out;
  out.counts.assign(grid.n_ext(), 0);
  out.observed.assign(grid.n_ext(), 0);
  for (std::size_t k = 0; k < grid.n_obs(); ++k)
    out.observed[grid.ext_of_obs(k)] = 1;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    auto cell = grid.locate(pattern.x[i], pattern.y[i]);
    if (!cell)
      throw InvalidInput("bin_points: point " + std::to_string(i) +
                         " lies outside the window");
    ++out.counts[grid.ext_of_obs(*cell)];
  }
  return out;
}

/// Counts restricted to observation cells, in observation-grid order.
inline std::vector<double> observation_counts(const CellCounts& c,
                                              const GridSpec& grid) {
  std::vector<double> out(grid.n_obs());
  for (std::size_t k = 0; k < grid.n_obs(); ++k)
    out[k] = c.counts[grid.ext_of_obs(k)];
  return out;
}

/// Aggregated counts: cells assigned to regions 1..m (0 = outside).
struct RegionPartition {
  std::vector<int> region_of_cell;   // per observation cell
  std::vector<long> region_totals;   // index r-1 holds Y_r
  std::vector<double> offsets;       // per observation cell, d(x) >= 0

  int n_regions() const { return static_cast<int>(region_totals.size()); }
};

struct RegionMask {
  std::vector<std::vector<std::size_t>> cells;  // index r-1: cells of region r
  std::vector<std::size_t> outside;
};

inline RegionMask region_mask(const RegionPartition& part, const GridSpec& grid) {
  if (part.region_of_cell.size() != grid.n_obs())
    throw InvalidInput("region_mask: region map size differs from grid");
  const bool have_offsets = !part.offsets.empty();
  if (have_offsets && part.offsets.size() != grid.n_obs())
    throw InvalidInput("region_mask: offset raster size differs from grid");
  RegionMask mask;
  mask.cells.resize(part.region_totals.size());
  for (std::size_t k = 0; k < grid.n_obs(); ++k) {
    const int r = part.region_of_cell[k];
    if (r == 0) {
      mask.outside.push_back(k);
      continue;
    }
    if (r < 0 || r > part.n_regions())
      throw InvalidInput("region_mask: cell " + std::to_string(k) +
                         " has unknown region id " + std::to_string(r));
    mask.cells[r - 1].push_back(k);
  }
  for (int r = 1; r <= part.n_regions(); ++r) {
    const long total = part.region_totals[r - 1];
    if (total < 0)
      throw InvalidInput("region_mask: region " + std::to_string(r) +
                         " has a negative total");
    if (total == 0) continue;
    const auto& cells = mask.cells[r - 1];
    if (cells.empty())
      throw InvalidInput("region_mask: region " + std::to_string(r) +
                         " has a positive total but no cells");
    if (have_offsets) {
      bool positive = false;
      for (std::size_t k : cells) {
        if (part.offsets[k] < 0.0)
          throw InvalidInput("region_mask: negative offset in cell " +
                             std::to_string(k));
        positive = positive || part.offsets[k] > 0.0;
      }
      if (!positive)
        throw InvalidInput("region_mask: region " + std::to_string(r) +
                           " has a positive total but zero offset everywhere");
    }
  }
  return mask;
}

}  // namespace lgcp

#endif  // LGCP_GRID_HPP
