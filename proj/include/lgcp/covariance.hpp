#ifndef LGCP_COVARIANCE_HPP
#define LGCP_COVARIANCE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lgcp/error.hpp"
#include "lgcp/fft.hpp"
#include "lgcp/grid.hpp"

namespace lgcp {

enum class Family { exponential, matern };

inline std::string to_string(Family f) {
  return f == Family::exponential ? "exponential" : "matern";
}

inline Family parse_family(const std::string& s) {
  if (s == "exponential") return Family::exponential;
  if (s == "matern") return Family::matern;
  throw InvalidInput("unknown covariance family '" + s + "'");
}

/// Stationary covariance C(u) = sigma2 * r(u; phi, kappa).
struct CovarianceModel {
  Family family = Family::exponential;
  double sigma2 = 1.0;
  double phi = 1.0;
  double kappa = 0.5;  // matern only

  /// Shapes searched by default; any kappa > 0 is accepted.
  static constexpr double preset_kappas[] = {0.5, 1.5, 2.5};

  static CovarianceModel exponential(double sigma2, double phi) {
    return {Family::exponential, sigma2, phi, 0.5};
  }
  static CovarianceModel matern(double sigma2, double phi, double kappa) {
    return {Family::matern, sigma2, phi, kappa};
  }

  double sigma() const { return std::sqrt(sigma2); }

  /// sigma2 = 0 is allowed as the degenerate (Poisson) limit.
  void validate() const {
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
      throw InvalidInput("covariance: sigma2 must be finite and >= 0");
    if (!(phi > 0.0) || !std::isfinite(phi))
      throw InvalidInput("covariance: phi must be > 0");
    if (family == Family::matern && (!(kappa > 0.0) || !std::isfinite(kappa)))
      throw InvalidInput("covariance: kappa must be > 0");
  }
};

namespace detail {

inline bool is_half_integer(double kappa) {
  const double twice = 2.0 * kappa;
  return std::abs(twice - std::round(twice)) < 1e-12 &&
         static_cast<long>(std::round(twice)) % 2 == 1;
}

// x^kappa K_kappa(x) / (2^(kappa-1) Gamma(kappa)) for kappa = n + 1/2, by
// upward recurrence on k_v(x) = e^x sqrt(2x/pi) K_v(x), which starts at
// k_{1/2} = k_{-1/2} = 1 and obeys k_{v+1} = k_{v-1} + (2v/x) k_v.
inline double matern_half_integer(double x, double kappa) {
  const int n = static_cast<int>(std::lround(kappa - 0.5));
  double prev = 1.0;  // k_{-1/2}
  double cur = 1.0;   // k_{1/2}
  for (int j = 0; j < n; ++j) {
    const double v = 0.5 + j;
    const double next = prev + (2.0 * v / x) * cur;
    prev = cur;
    cur = next;
  }
  // K_kappa(x) = sqrt(pi/(2x)) e^{-x} k_kappa(x)
  const double log_scale = kappa * std::log(x) - x +
                           0.5 * std::log(std::numbers::pi / (2.0 * x)) -
                           (kappa - 1.0) * std::numbers::ln2 - std::lgamma(kappa);
  return std::exp(log_scale) * cur;
}

inline double matern_general(double x, double kappa) {
  if (x < 1e-10) return 1.0;
  if (x > 700.0) return 0.0;
  const double k = std::cyl_bessel_k(kappa, x);
  const double log_r = kappa * std::log(x) + std::log(k) -
                       (kappa - 1.0) * std::numbers::ln2 - std::lgamma(kappa);
  return std::min(1.0, std::exp(log_r));
}

}  // namespace detail

/// Correlation r(u) in (0, 1]; r(0) = 1.
inline double correlation(const CovarianceModel& m, double u) {
  if (!(u >= 0.0)) throw InvalidInput("correlation: distance must be >= 0");
  if (u == 0.0) return 1.0;
  const double x = u / m.phi;
  if (m.family == Family::exponential) return std::exp(-x);
  if (detail::is_half_integer(m.kappa)) {
    if (x > 745.0) return 0.0;
    return std::min(1.0, detail::matern_half_integer(x, m.kappa));
  }
  return detail::matern_general(x, m.kappa);
}

inline double covariance(const CovarianceModel& m, double u) {
  return m.sigma2 * correlation(m, u);
}

/// Space-time correlation r1(u) * rho^|v| at integer time lags.
struct SeparableSTCovariance {
  CovarianceModel spatial;
  double temporal_rho = 0.0;

  void validate() const {
    spatial.validate();
    if (!(std::abs(temporal_rho) < 1.0))
      throw InvalidInput("covariance: |temporal_rho| must be < 1");
  }

  double temporal_correlation(long v) const {
    return std::pow(temporal_rho, static_cast<double>(std::labs(v)));
  }
  double correlation(double u, long v) const {
    return lgcp::correlation(spatial, u) * temporal_correlation(v);
  }
};

/// Base row of the block-circulant covariance on the extended torus:
/// entry k is C(torus distance from cell k to cell 0).
inline std::vector<double> circulant_base(const CovarianceModel& model,
                                          const GridSpec& grid) {
  model.validate();
  const int nx = grid.ext_nx(), ny = grid.ext_ny();
  const double cw = grid.cell_width(), ch = grid.cell_height();
  std::vector<double> base(grid.n_ext());
  for (int iy = 0; iy < ny; ++iy) {
    const double dy = std::min(iy, ny - iy) * ch;
    for (int ix = 0; ix < nx; ++ix) {
      const double dx = std::min(ix, nx - ix) * cw;
      base[static_cast<std::size_t>(iy) * nx + ix] =
          model.sigma2 * correlation(model, std::hypot(dx, dy));
    }
  }
  return base;
}

/// Eigenvalues of a symmetric block-circulant matrix, stored as the half
/// spectrum (rows x (cols/2 + 1)) of the 2-D DFT of its base row.
struct Spectrum {
  int rows = 0, cols = 0;
  std::vector<double> half;  // real parts
  double min_eigenvalue = 0.0;
  std::size_t n_negative = 0;
  double max_abs_imag = 0.0;
  double clamp_tolerance = 0.0;

  /// All rows*cols eigenvalues, expanded by Hermitian symmetry.
  std::vector<double> full() const {
    const int hc = cols / 2 + 1;
    std::vector<double> out(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double v;
        if (c < hc)
          v = half[static_cast<std::size_t>(r) * hc + c];
        else
          v = half[static_cast<std::size_t>((rows - r) % rows) * hc + (cols - c)];
        out[static_cast<std::size_t>(r) * cols + c] = v;
      }
    return out;
  }
};

/// Relative size of a negative eigenvalue tolerated (and clamped to zero).
inline constexpr double kClampRelTol = 1e-8;

/// Eigenvalues of the circulant with this base row. Negative eigenvalues
/// within 1e-8 * C(0) are reported but tolerated; larger deficits throw
/// EmbeddingFailure.
inline Spectrum spectral_check(std::span<const double> base_row, int rows,
                               int cols, FftWorkspace& ws) {
  if (base_row.size() != static_cast<std::size_t>(rows) * cols ||
      ws.rows() != rows || ws.cols() != cols)
    throw InvalidInput("spectral_check: base row does not match workspace");
  std::copy(base_row.begin(), base_row.end(), ws.real().begin());
  ws.forward();
  Spectrum s;
  s.rows = rows;
  s.cols = cols;
  auto spec = ws.spectrum();
  s.half.resize(spec.size());
  s.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    s.half[i] = spec[i].real();
    s.max_abs_imag = std::max(s.max_abs_imag, std::abs(spec[i].imag()));
    s.min_eigenvalue = std::min(s.min_eigenvalue, s.half[i]);
  }
  const double scale = std::abs(base_row.empty() ? 0.0 : base_row[0]);
  s.clamp_tolerance = kClampRelTol * scale;
  // Round-off floor: FFT error grows with the sum of |entries|.
  double l1 = 0.0;
  for (double b : base_row) l1 += std::abs(b);
  const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * l1;
  for (double v : s.full())
    if (v < -roundoff) ++s.n_negative;
  if (s.min_eigenvalue < -std::max(s.clamp_tolerance, roundoff))
    throw EmbeddingFailure(
        "circulant embedding failed: minimum eigenvalue " +
            std::to_string(s.min_eigenvalue) +
            "; increase grid.extension",
        -s.min_eigenvalue);
  return s;
}

inline Spectrum spectral_check(std::span<const double> base_row,
                               const GridSpec& grid) {
  FftWorkspace ws(grid.ext_ny(), grid.ext_nx());
  return spectral_check(base_row, grid.ext_ny(), grid.ext_nx(), ws);
}

}  // namespace lgcp

#endif  // LGCP_COVARIANCE_HPP
