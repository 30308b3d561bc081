#ifndef LGCP_SUMMARY_STATS_HPP
#define LGCP_SUMMARY_STATS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "lgcp/covariance.hpp"
#include "lgcp/error.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/models.hpp"
#include "lgcp/optim.hpp"

namespace lgcp {

struct KEstimate {
  std::vector<double> u;      // 0 = u[0] < u[1] < ... = u_max
  std::vector<double> k_hat;  // K-hat at each u
  std::size_t n = 0;
  double area = 0.0;
};

/// Translation edge-correction weight |A intersect (A + d)| / |A| for a
/// rectangle and displacement d.
inline double translation_weight(const Window& w, double dx, double dy) {
  return (w.width() - std::abs(dx)) * (w.height() - std::abs(dy)) / w.area();
}

/// Ripley's K with translation edge correction,
/// K(u) = |A| / (n (n-1)) * sum_{i != j} 1(d_ij <= u) / w_ij,
/// on n_bins equal steps from 0 to u_max.
inline KEstimate estimate_K(const PointPattern& pattern, double u_max, int n_bins) {
  const std::size_t n = pattern.size();
  if (n < 2) throw InsufficientData("estimate_K: at least 2 points required");
  const Window& w = pattern.window;
  if (!(u_max > 0.0) || u_max > 0.5 * std::min(w.width(), w.height()) * (1 + 1e-12))
    throw InvalidInput("estimate_K: u_max must lie in (0, half the shorter window side]");
  if (n_bins < 1) throw InvalidInput("estimate_K: n_bins must be >= 1");
  KEstimate out;
  out.n = n;
  out.area = w.area();
  out.u.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int b = 0; b <= n_bins; ++b) out.u[static_cast<std::size_t>(b)] = u_max * b / n_bins;
  out.u.back() = u_max;

  // Each unordered pair contributes twice.
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = pattern.x[i] - pattern.x[j], dy = pattern.y[i] - pattern.y[j];
      const double d = std::hypot(dx, dy);
      if (d <= u_max) pairs.emplace_back(d, 2.0 / translation_weight(w, dx, dy));
    }
  std::sort(pairs.begin(), pairs.end());
  const double scale = w.area() / (static_cast<double>(n) * static_cast<double>(n - 1));
  out.k_hat.assign(out.u.size(), 0.0);
  double acc = 0.0;
  std::size_t p = 0;
  for (std::size_t b = 0; b < out.u.size(); ++b) {
    while (p < pairs.size() && pairs[p].first <= out.u[b]) acc += pairs[p++].second;
    out.k_hat[b] = scale * acc;
  }
  return out;
}

/// Weight function w(u) = u^power in the discrepancy criterion; power 0 is
/// the constant weight.
struct PowerWeight {
  double power = 0.0;
  double operator()(double u) const {
    return power == 0.0 ? 1.0 : std::pow(u, power);
  }
};

using WeightFn = std::function<double(double)>;

namespace detail {
// Grid points of the estimate up to u0, with u0 itself appended (K-hat
// interpolated linearly) when it is not a grid point.
inline std::pair<std::vector<double>, std::vector<double>> truncate_at(const KEstimate& est,
                                                                       double u0) {
  if (!(u0 > 0.0) || u0 > est.u.back() * (1 + 1e-12))
    throw InvalidInput("moment_discrepancy: u0 must lie in (0, u_max]");
  std::vector<double> u, k;
  for (std::size_t i = 0; i < est.u.size() && est.u[i] <= u0; ++i) {
    u.push_back(est.u[i]);
    k.push_back(est.k_hat[i]);
  }
  if (u.back() < u0) {
    const std::size_t i = u.size();
    const double t = (u0 - est.u[i - 1]) / (est.u[i] - est.u[i - 1]);
    u.push_back(u0);
    k.push_back(est.k_hat[i - 1] + t * (est.k_hat[i] - est.k_hat[i - 1]));
  }
  return {std::move(u), std::move(k)};
}
}  // namespace detail

/// D(theta) = int_0^u0 w(u) {K-hat(u)^c - K(u; theta)^c}^2 du, trapezoid rule
/// on the estimate's grid.
inline double moment_discrepancy(const KEstimate& est, const CovarianceModel& cov, double u0,
                                 double c, const WeightFn& w = PowerWeight{}) {
  if (!(c > 0.0)) throw InvalidInput("moment_discrepancy: c must be > 0");
  const auto [u, k] = detail::truncate_at(est, u0);
  const std::vector<double> km = theoretical_K_curve(cov, u);
  std::vector<double> f(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double diff = std::pow(std::max(k[i], 0.0), c) - std::pow(km[i], c);
    f[i] = w(u[i]) * diff * diff;
  }
  double d = 0.0;
  for (std::size_t i = 1; i < u.size(); ++i) d += 0.5 * (u[i] - u[i - 1]) * (f[i] + f[i - 1]);
  return d;
}

struct MomentFitOptions {
  double u0 = 0.0;  // 0 means a quarter of the shorter window side
  double c = 0.25;
  WeightFn weight = PowerWeight{};
  double kappa = 0.5;
  double sigma_min = 1e-3, sigma_max = 10.0;
  double phi_min = 0.0, phi_max = 0.0;  // 0 means u0/100 and 10 u0
};

struct MomentFit {
  double sigma = 0.0;
  double phi = 0.0;
  double d_min = std::numeric_limits<double>::infinity();
  std::vector<double> start_values;  // D at each of the 25 starts
  std::vector<double> end_values;    // D after refinement from each start
};

/// Minimise D over (log sigma, log phi) by Nelder-Mead from a 5 x 5 grid of
/// starts spread log-uniformly over the search box.
inline MomentFit fit_moments(const KEstimate& est, Family family, MomentFitOptions opt,
                             double window_short_side) {
  if (opt.u0 <= 0.0) opt.u0 = 0.25 * window_short_side;
  if (opt.phi_min <= 0.0) opt.phi_min = opt.u0 / 100.0;
  if (opt.phi_max <= 0.0) opt.phi_max = 10.0 * opt.u0;
  const double ls0 = std::log(opt.sigma_min), ls1 = std::log(opt.sigma_max);
  const double lp0 = std::log(opt.phi_min), lp1 = std::log(opt.phi_max);
  auto model = [&](double ls, double lp) {
    CovarianceModel m;
    m.family = family;
    m.kappa = family == Family::exponential ? 0.5 : opt.kappa;
    m.sigma2 = std::exp(2.0 * ls);
    m.phi = std::exp(lp);
    return m;
  };
  auto objective = [&](const std::vector<double>& x) {
    if (x[0] < ls0 || x[0] > ls1 || x[1] < lp0 || x[1] > lp1)
      return std::numeric_limits<double>::infinity();
    try {
      return moment_discrepancy(est, model(x[0], x[1]), opt.u0, opt.c, opt.weight);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  MomentFit best;
  std::vector<double> best_x;
  NelderMeadOptions nm;
  nm.initial_step = 0.3;
  nm.size_tol = 1e-10;
  // Starts at the interior points of a 6-interval split of each log range.
  const double ss0 = std::log(0.05), ss1 = std::log(2.0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const std::vector<double> x0{
          std::clamp(ss0 + (ss1 - ss0) * i / 4.0, ls0, ls1),
          lp0 + (lp1 - lp0) * (j + 1) / 6.0};
      const double f0 = objective(x0);
      best.start_values.push_back(f0);
      const MinimizeResult r = nelder_mead(objective, x0, nm);
      best.end_values.push_back(r.value);
      if (std::isfinite(r.value) && r.value < best.d_min) {
        best.d_min = r.value;
        best_x = r.x;
      }
    }
  if (best_x.empty())
    throw OptimizationFailure("fit_moments: no start produced a finite discrepancy");
  // Polish from the winner.
  const MinimizeResult r = nelder_mead(objective, best_x, nm);
  if (r.value < best.d_min) {
    best.d_min = r.value;
    best_x = r.x;
  }
  best.sigma = std::exp(best_x[0]);
  best.phi = std::exp(best_x[1]);
  return best;
}

inline MomentFit fit_moments(const KEstimate& est, Family family, const MomentFitOptions& opt,
                             const Window& window) {
  return fit_moments(est, family, opt, std::min(window.width(), window.height()));
}

/// Area of the intersection of a disc with a rectangle.
inline double disc_window_area(const Window& w, double cx, double cy, double h) {
  if (!(h > 0.0)) return 0.0;
  const double a = std::max(w.xmin, cx - h), b = std::min(w.xmax, cx + h);
  if (!(b > a)) return 0.0;
  if (cx - h >= w.xmin && cx + h <= w.xmax && cy - h >= w.ymin && cy + h <= w.ymax)
    return std::numbers::pi * h * h;
  auto chord = [&](double x) {
    const double r2 = h * h - (x - cx) * (x - cx);
    if (r2 <= 0.0) return 0.0;
    const double r = std::sqrt(r2);
    return std::max(0.0, std::min(w.ymax, cy + r) - std::max(w.ymin, cy - r));
  };
  return integrate(chord, a, b, 1e-10 * h * h, 1e-10);
}

/// Uniform-kernel intensity estimate: events within h of x divided by the
/// area of the disc of radius h about x inside the window.
inline double kernel_intensity(const PointPattern& pattern, double x, double y, double h) {
  if (!(h > 0.0)) throw InvalidInput("kernel_intensity: bandwidth must be > 0");
  const double area = disc_window_area(pattern.window, x, y, h);
  if (!(area > 0.0)) throw InvalidInput("kernel_intensity: disc misses the window");
  std::size_t count = 0;
  for (std::size_t i = 0; i < pattern.size(); ++i)
    if (std::hypot(pattern.x[i] - x, pattern.y[i] - y) <= h) ++count;
  return static_cast<double>(count) / area;
}

/// Kernel estimate at every cell centroid, row-major over observation cells.
inline std::vector<double> kernel_intensity_surface(const PointPattern& pattern,
                                                    const GridSpec& grid, double h) {
  std::vector<double> out(grid.n_obs());
  for (std::size_t k = 0; k < grid.n_obs(); ++k) {
    const auto [ix, iy] = grid.obs_coords(k);
    const auto [x, y] = grid.centroid(ix, iy);
    out[k] = kernel_intensity(pattern, x, y, h);
  }
  return out;
}

}  // namespace lgcp

#endif  // LGCP_SUMMARY_STATS_HPP
