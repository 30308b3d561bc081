#ifndef LGCP_RASTER_HPP
#define LGCP_RASTER_HPP

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lgcp/error.hpp"
#include "lgcp/grid.hpp"

namespace lgcp {

inline constexpr double kNoData = -9999.0;

/// Values on the observation cells of a grid, row-major from the south-west
/// corner (index iy * nx + ix). NaN marks cells without a value.
struct Raster {
  int nx = 0, ny = 0;
  Window window;
  std::vector<double> values;

  static Raster on(const GridSpec& g, double fill = 0.0) {
    Raster r;
    r.nx = g.nx();
    r.ny = g.ny();
    r.window = g.window();
    r.values.assign(g.n_obs(), fill);
    return r;
  }

  std::size_t size() const { return values.size(); }
  double cell_width() const { return window.width() / nx; }
  double cell_height() const { return window.height() / ny; }
  double& operator()(int ix, int iy) { return values[static_cast<std::size_t>(iy) * nx + ix]; }
  double operator()(int ix, int iy) const {
    return values[static_cast<std::size_t>(iy) * nx + ix];
  }
};

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// ESRI ASCII grid; the first data row is the northernmost. Non-square
/// cells are written with dx/dy in place of cellsize.
inline std::string to_esri_ascii(const Raster& r) {
  std::ostringstream os;
  os << "ncols " << r.nx << "\n";
  os << "nrows " << r.ny << "\n";
  os << "xllcorner " << detail::fmt17(r.window.xmin) << "\n";
  os << "yllcorner " << detail::fmt17(r.window.ymin) << "\n";
  const double dx = r.cell_width(), dy = r.cell_height();
  if (std::abs(dx - dy) <= 1e-12 * std::max(dx, dy)) {
    os << "cellsize " << detail::fmt17(dx) << "\n";
  } else {
    os << "dx " << detail::fmt17(dx) << "\n";
    os << "dy " << detail::fmt17(dy) << "\n";
  }
  os << "NODATA_value " << detail::fmt17(kNoData) << "\n";
  for (int iy = r.ny - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < r.nx; ++ix) {
      const double v = r(ix, iy);
      if (ix) os << ' ';
      os << (std::isfinite(v) ? detail::fmt17(v) : detail::fmt17(kNoData));
    }
    os << "\n";
  }
  return os.str();
}

/// CSV with header ix,iy,value; missing cells are written as NA.
inline std::string to_csv(const Raster& r) {
  std::ostringstream os;
  os << "ix,iy,value\n";
  for (int iy = 0; iy < r.ny; ++iy)
    for (int ix = 0; ix < r.nx; ++ix) {
      const double v = r(ix, iy);
      os << ix << ',' << iy << ',' << (std::isfinite(v) ? detail::fmt17(v) : "NA") << "\n";
    }
  return os.str();
}

/// Parse an ESRI ASCII grid. NODATA cells become NaN.
inline Raster parse_esri_ascii(const std::string& text, const std::string& source = "raster") {
  std::istringstream is(text);
  int ncols = -1, nrows = -1;
  double xll = NAN, yll = NAN, cell = NAN, dx = NAN, dy = NAN, nodata = kNoData;
  bool center = false;
  std::string key;
  std::streampos data_start = 0;
  int line = 0;
  while (true) {
    data_start = is.tellg();
    if (!(is >> key)) throw InvalidInput(source + ": truncated header");
    std::string lower;
    for (char ch : key) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const bool is_key = !lower.empty() && std::isalpha(static_cast<unsigned char>(lower[0]));
    if (!is_key) {
      is.clear();
      is.seekg(data_start);
      break;
    }
    ++line;
    double v;
    if (!(is >> v)) throw InvalidInput(source + ": header line " + std::to_string(line) + " has no value");
    if (lower == "ncols") ncols = static_cast<int>(v);
    else if (lower == "nrows") nrows = static_cast<int>(v);
    else if (lower == "xllcorner") xll = v;
    else if (lower == "yllcorner") yll = v;
    else if (lower == "xllcenter") { xll = v; center = true; }
    else if (lower == "yllcenter") { yll = v; center = true; }
    else if (lower == "cellsize") cell = v;
    else if (lower == "dx") dx = v;
    else if (lower == "dy") dy = v;
    else if (lower == "nodata_value") nodata = v;
    else throw InvalidInput(source + ": unknown header key '" + key + "'");
  }
  if (std::isnan(dx)) dx = cell;
  if (std::isnan(dy)) dy = cell;
  if (ncols < 1 || nrows < 1 || std::isnan(xll) || std::isnan(yll) || !(dx > 0) || !(dy > 0))
    throw InvalidInput(source + ": incomplete or invalid header");
  if (center) {
    xll -= 0.5 * dx;
    yll -= 0.5 * dy;
  }
  Raster r;
  r.nx = ncols;
  r.ny = nrows;
  r.window = Window{xll, yll, xll + ncols * dx, yll + nrows * dy};
  r.values.assign(static_cast<std::size_t>(ncols) * nrows, NAN);
  for (int row = 0; row < nrows; ++row)
    for (int ix = 0; ix < ncols; ++ix) {
      std::string tok;
      if (!(is >> tok))
        throw InvalidInput(source + ": expected " + std::to_string(ncols * nrows) +
                           " values, data ends in row " + std::to_string(row + 1));
      double v;
      try {
        std::size_t used = 0;
        v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw InvalidInput(source + ": bad value '" + tok + "' in data row " +
                           std::to_string(row + 1));
      }
      r(ix, nrows - 1 - row) = v == nodata ? NAN : v;
    }
  std::string extra;
  if (is >> extra) throw InvalidInput(source + ": more values than ncols * nrows");
  return r;
}

inline Raster read_esri_ascii(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open raster '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_esri_ascii(ss.str(), path);
}

/// Check a raster lines up with the grid's observation cells.
inline void check_conforms(const Raster& r, const GridSpec& g, const std::string& what) {
  const double tol = 1e-9 * std::max(g.window().width(), g.window().height());
  if (r.nx != g.nx() || r.ny != g.ny())
    throw InvalidInput(what + ": raster is " + std::to_string(r.nx) + "x" + std::to_string(r.ny) +
                       " but the grid is " + std::to_string(g.nx()) + "x" + std::to_string(g.ny()));
  const Window& a = r.window;
  const Window& b = g.window();
  if (std::abs(a.xmin - b.xmin) > tol || std::abs(a.ymin - b.ymin) > tol ||
      std::abs(a.xmax - b.xmax) > tol || std::abs(a.ymax - b.ymax) > tol)
    throw InvalidInput(what + ": raster extent differs from the grid window");
}

}  // namespace lgcp

#endif  // LGCP_RASTER_HPP
