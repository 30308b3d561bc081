#ifndef LGCP_MODELS_HPP
#define LGCP_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lgcp/covariance.hpp"
#include "lgcp/error.hpp"
#include "lgcp/gaussian_field.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/optim.hpp"
#include "lgcp/rng.hpp"

namespace lgcp {

using Matrix = Eigen::MatrixXd;

/// Largest linear predictor (log cell mean) accepted before exp overflows.
inline constexpr double kMaxLogMean = 700.0;

// ---------------------------------------------------------------------------
// Unitype (optionally with covariates and offset)

/// Lambda(x) = d(x) exp{z(x)'beta + S(x)}, piecewise constant on cells.
struct UnitypeModel {
  GridSpec grid;
  CovarianceModel cov;
  Vector beta;                         // p coefficients, beta[0] the intercept
  Matrix design;                       // n_obs x p, column 0 all ones
  Vector offset;                       // n_obs, d(x) >= 0
  std::vector<std::uint8_t> observed;  // n_obs; 0 drops a cell from the data
  bool field = true;                   // false: pure Poisson, S = 0
  bool mean_offset = true;             // S has mean -sigma2/2

  static UnitypeModel intercept_only(const GridSpec& grid,
                                     const CovarianceModel& cov, double beta0) {
    UnitypeModel m;
    m.grid = grid;
    m.cov = cov;
    m.beta = Vector::Constant(1, beta0);
    m.design = Matrix::Ones(static_cast<Eigen::Index>(grid.n_obs()), 1);
    m.offset = Vector::Ones(static_cast<Eigen::Index>(grid.n_obs()));
    m.observed.assign(grid.n_obs(), 1);
    return m;
  }

  Eigen::Index n_obs() const { return static_cast<Eigen::Index>(grid.n_obs()); }

  void validate() const {
    cov.validate();
    if (beta.size() < 1) throw InvalidInput("model: beta must be non-empty");
    if (design.rows() != n_obs() || design.cols() != beta.size())
      throw InvalidInput("model: design matrix must be n_cells x n_beta");
    if (offset.size() != n_obs())
      throw InvalidInput("model: offset must have one value per cell");
    if ((offset.array() < 0.0).any() || !offset.allFinite())
      throw InvalidInput("model: offsets must be finite and >= 0");
    if (observed.size() != grid.n_obs())
      throw InvalidInput("model: observed mask must have one entry per cell");
  }

  double mean() const { return field && mean_offset ? field_mean(cov) : 0.0; }
};

/// Log-likelihood with its analytic gradients.
struct LogLik {
  double value = 0.0;
  Vector d_field;  // d/dS over the extended grid (zero off the data cells)
  Vector d_beta;
  Vector mu;       // cell means on observation cells
};

namespace detail {

inline void check_counts(std::span<const double> counts, std::size_t n) {
  if (counts.size() != n)
    throw InvalidInput("counts must have one entry per observation cell");
}

// Adds sum_k [y_k log mu_k - mu_k] for one field/predictor pair and writes
// y_k - mu_k into resid. log_mu(k) must return log of the cell mean.
template <class LogMu>
double poisson_cells(std::size_t n, std::span<const double> counts,
                     const std::vector<std::uint8_t>* observed, LogMu&& log_mu,
                     Vector& mu, Vector& resid) {
  double value = 0.0;
  double max_pred = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    if (observed && !(*observed)[k]) {
      mu[i] = 0.0;
      resid[i] = 0.0;
      continue;
    }
    const double lm = log_mu(k);
    const double y = counts[k];
    if (lm == -std::numeric_limits<double>::infinity()) {
      mu[i] = 0.0;
      resid[i] = y;
      if (y > 0) value = -std::numeric_limits<double>::infinity();
      continue;
    }
    max_pred = std::max(max_pred, lm);
    if (!(lm <= kMaxLogMean))
      throw NumericalOverflow(
          "cell mean overflow: linear predictor " + std::to_string(lm),
          lm);
    const double m = std::exp(lm);
    mu[i] = m;
    resid[i] = y - m;
    value += (y > 0 ? y * lm : 0.0) - m;
  }
  return value;
}

}  // namespace detail

/// Poisson cell log-likelihood (up to -sum log y!) given the field S on the
/// extended grid.
inline LogLik cell_loglik_field(const UnitypeModel& model, const Vector& s_ext,
                                std::span<const double> counts) {
  const GridSpec& g = model.grid;
  const std::size_t n = g.n_obs();
  detail::check_counts(counts, n);
  if (model.field && s_ext.size() != static_cast<Eigen::Index>(g.n_ext()))
    throw InvalidInput("cell_loglik: field must cover the extended grid");
  const Vector eta = model.design * model.beta;
  const double log_area = std::log(g.cell_area());
  LogLik out;
  out.mu.resize(static_cast<Eigen::Index>(n));
  Vector resid(static_cast<Eigen::Index>(n));
  out.value = detail::poisson_cells(
      n, counts, &model.observed,
      [&](std::size_t k) {
        const double d = model.offset[static_cast<Eigen::Index>(k)];
        if (d <= 0.0) return -std::numeric_limits<double>::infinity();
        const double s = model.field
                             ? s_ext[static_cast<Eigen::Index>(g.ext_of_obs(k))]
                             : 0.0;
        return log_area + std::log(d) + eta[static_cast<Eigen::Index>(k)] + s;
      },
      out.mu, resid);
  out.d_beta = model.design.transpose() * resid;
  if (model.field) {
    out.d_field = Vector::Zero(static_cast<Eigen::Index>(g.n_ext()));
    for (std::size_t k = 0; k < n; ++k)
      out.d_field[static_cast<Eigen::Index>(g.ext_of_obs(k))] =
          resid[static_cast<Eigen::Index>(k)];
  } else {
    out.d_field = Vector::Zero(0);
  }
  return out;
}

/// S = mean + Sigma^{1/2} gamma over the extended grid.
inline Vector field_from_whitened(const SpectralSqrt& root, const Vector& gamma,
                                  double mean, FftWorkspace& ws) {
  Vector s = apply_sqrt_cov(root, gamma, ws);
  s.array() += mean;
  return s;
}

/// Cell log-likelihood at whitened coefficients gamma, with gradients with
/// respect to S (d_field) and beta.
inline LogLik cell_loglik(const UnitypeModel& model, const Vector& gamma,
                          std::span<const double> counts, FftWorkspace& ws) {
  if (!model.field) return cell_loglik_field(model, Vector(), counts);
  const SpectralSqrt root = make_spectral_sqrt(model.cov, model.grid, ws);
  return cell_loglik_field(model, field_from_whitened(root, gamma, model.mean(), ws),
                           counts);
}

/// Forward simulation output: the pattern and the truth that generated it.
struct Simulation {
  PointPattern pattern;
  std::vector<Vector> fields;  // per type or per time step, extended grid
  std::vector<Vector> mu;      // matching cell means on observation cells
};

namespace detail {

// Poisson count per cell, then uniform locations within each cell.
inline void scatter_cell(const GridSpec& g, std::size_t k, long count, Rng& rng,
                         PointPattern& out, int mark, double t0, bool timed) {
  auto [ix, iy] = g.obs_coords(k);
  const Window& w = g.window();
  for (long j = 0; j < count; ++j) {
    const double u = uniform01(rng), v = uniform01(rng);
    double x = w.xmin + (ix + u) * g.cell_width();
    double y = w.ymin + (iy + v) * g.cell_height();
    x = std::min(x, w.xmax);
    y = std::min(y, w.ymax);
    out.add(x, y);
    if (mark > 0) out.marks.push_back(mark);
    if (timed) out.times.push_back(t0 + uniform01(rng));
  }
}

inline long poisson_draw(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<long>(mean)(rng);
}

}  // namespace detail

/// Draw the field, then Poisson cell counts, then uniform points in cells.
inline Simulation simulate(const UnitypeModel& model, Rng& rng, FftWorkspace& ws) {
  model.validate();
  Simulation sim;
  sim.pattern.window = model.grid.window();
  const GridSpec& g = model.grid;
  Vector s;
  if (model.field) {
    const SpectralSqrt root = make_spectral_sqrt(model.cov, g, ws);
    const Vector gamma = standard_normal(static_cast<Eigen::Index>(g.n_ext()), rng);
    s = field_from_whitened(root, gamma, model.mean(), ws);
  } else {
    s = Vector::Zero(static_cast<Eigen::Index>(g.n_ext()));
  }
  const Vector eta = model.design * model.beta;
  Vector mu(static_cast<Eigen::Index>(g.n_obs()));
  for (std::size_t k = 0; k < g.n_obs(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double lm = eta[i] + s[static_cast<Eigen::Index>(g.ext_of_obs(k))];
    if (lm > kMaxLogMean)
      throw NumericalOverflow("simulate: cell mean overflow", lm);
    mu[i] = model.observed[k] ? g.cell_area() * model.offset[i] * std::exp(lm) : 0.0;
    detail::scatter_cell(g, k, detail::poisson_draw(mu[i], rng), rng, sim.pattern,
                         0, 0.0, false);
  }
  sim.fields.push_back(std::move(s));
  sim.mu.push_back(std::move(mu));
  return sim;
}

inline Simulation simulate(const UnitypeModel& model, Rng& rng) {
  FftWorkspace ws(model.grid.ext_ny(), model.grid.ext_nx());
  return simulate(model, rng, ws);
}

// ---------------------------------------------------------------------------
// Moment functions

/// K(u) = pi u^2 + 2 pi int_0^u (exp{sigma2 r(v)} - 1) v dv. The intensity
/// cancels, so beta does not enter.
inline double theoretical_K(const CovarianceModel& cov, double u) {
  if (!(u >= 0.0)) throw InvalidInput("theoretical_K: u must be >= 0");
  const double poisson = std::numbers::pi * u * u;
  if (u == 0.0 || cov.sigma2 == 0.0) return poisson;
  auto integrand = [&](double v) {
    return std::expm1(cov.sigma2 * correlation(cov, v)) * v;
  };
  return poisson + 2.0 * std::numbers::pi * integrate(integrand, 0.0, u, 1e-8, 1e-12);
}

/// K at each of an increasing list of distances, integrating segment by
/// segment.
inline std::vector<double> theoretical_K_curve(const CovarianceModel& cov,
                                               std::span<const double> u) {
  std::vector<double> out(u.size());
  double acc = 0.0, prev = 0.0;
  auto integrand = [&](double v) {
    return std::expm1(cov.sigma2 * correlation(cov, v)) * v;
  };
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] >= prev)) throw InvalidInput("theoretical_K_curve: u must increase");
    if (cov.sigma2 != 0.0) acc += integrate(integrand, prev, u[i], 1e-10, 1e-12);
    prev = u[i];
    out[i] = std::numbers::pi * u[i] * u[i] + 2.0 * std::numbers::pi * acc;
  }
  return out;
}

/// g12(u) = lambda1 lambda2 [exp{sigma1 sigma2 r12(u)} - 1].
template <class Corr>
double cross_covariance_density(double lambda1, double lambda2, double sigma1,
                                double sigma2, Corr&& r12, double u) {
  if (!(u >= 0.0)) throw InvalidInput("cross_covariance_density: u must be >= 0");
  return lambda1 * lambda2 * std::expm1(sigma1 * sigma2 * r12(u));
}

// ---------------------------------------------------------------------------
// Multitype

/// Lambda_k(x) = exp(beta_k + S_0(x) + S_k(x)), with S_0 fixed at zero.
struct MultitypeModel {
  GridSpec grid;
  std::vector<CovarianceModel> covs;  // one shared, or one per type
  Vector beta;                        // m intercepts
  bool mean_offset = true;

  int m() const { return static_cast<int>(beta.size()); }
  bool per_type_cov() const { return covs.size() > 1; }
  const CovarianceModel& cov(int k) const {
    return covs.size() == 1 ? covs[0] : covs[static_cast<std::size_t>(k)];
  }

  void validate() const {
    if (m() < 2) throw InvalidInput("multitype model needs at least 2 types");
    if (covs.empty() || (covs.size() != 1 && static_cast<int>(covs.size()) != m()))
      throw InvalidInput("multitype model: need 1 or m covariance models");
    for (const auto& c : covs) c.validate();
  }
};

struct MultiLogLik {
  double value = 0.0;
  std::vector<Vector> d_field;  // per type, extended grid
  Vector d_beta;
  std::vector<Vector> mu;
};

inline MultiLogLik multitype_loglik_fields(
    const MultitypeModel& model, const std::vector<Vector>& fields,
    const std::vector<std::vector<double>>& typed_counts) {
  const int m = model.m();
  const GridSpec& g = model.grid;
  if (static_cast<int>(fields.size()) != m || static_cast<int>(typed_counts.size()) != m)
    throw InvalidInput("multitype_loglik: need one field and one count vector per type");
  const double log_area = std::log(g.cell_area());
  MultiLogLik out;
  out.d_beta.resize(m);
  for (int k = 0; k < m; ++k) {
    detail::check_counts(typed_counts[k], g.n_obs());
    Vector mu(static_cast<Eigen::Index>(g.n_obs()));
    Vector resid(static_cast<Eigen::Index>(g.n_obs()));
    const Vector& s = fields[k];
    out.value += detail::poisson_cells(
        g.n_obs(), typed_counts[k], nullptr,
        [&](std::size_t c) {
          return log_area + model.beta[k] + s[static_cast<Eigen::Index>(g.ext_of_obs(c))];
        },
        mu, resid);
    out.d_beta[k] = resid.sum();
    Vector d = Vector::Zero(static_cast<Eigen::Index>(g.n_ext()));
    for (std::size_t c = 0; c < g.n_obs(); ++c)
      d[static_cast<Eigen::Index>(g.ext_of_obs(c))] = resid[static_cast<Eigen::Index>(c)];
    out.d_field.push_back(std::move(d));
    out.mu.push_back(std::move(mu));
  }
  return out;
}

/// Per-type fields from stacked whitened coefficients (m blocks of n_ext).
inline std::vector<Vector> multitype_fields(const MultitypeModel& model,
                                            const Vector& gammas, FftWorkspace& ws) {
  const auto n = static_cast<Eigen::Index>(model.grid.n_ext());
  if (gammas.size() != n * model.m())
    throw InvalidInput("multitype: gamma must stack m extended-grid blocks");
  std::vector<Vector> fields;
  std::vector<SpectralSqrt> roots;
  for (const auto& c : model.covs) roots.push_back(make_spectral_sqrt(c, model.grid, ws));
  for (int k = 0; k < model.m(); ++k) {
    const auto& root = roots.size() == 1 ? roots[0] : roots[static_cast<std::size_t>(k)];
    const double mean = model.mean_offset ? field_mean(model.cov(k)) : 0.0;
    fields.push_back(field_from_whitened(root, gammas.segment(k * n, n), mean, ws));
  }
  return fields;
}

inline MultiLogLik multitype_loglik(const MultitypeModel& model, const Vector& gammas,
                                    const std::vector<std::vector<double>>& typed_counts,
                                    FftWorkspace& ws) {
  return multitype_loglik_fields(model, multitype_fields(model, gammas, ws), typed_counts);
}

/// p_k = Lambda_k / sum_j Lambda_j at one cell, from log intensities.
inline std::vector<double> type_probabilities(std::span<const double> log_intensity) {
  const double mx = *std::max_element(log_intensity.begin(), log_intensity.end());
  std::vector<double> p(log_intensity.size());
  double z = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) z += p[k] = std::exp(log_intensity[k] - mx);
  for (double& v : p) v /= z;
  return p;
}

/// Per-type counts on observation cells from a marked pattern.
inline std::vector<std::vector<double>> bin_marked(const PointPattern& pattern,
                                                   const GridSpec& grid, int m) {
  if (!(pattern.window == grid.window()))
    throw InvalidInput("bin_marked: pattern window differs from grid window");
  if (!pattern.marked()) throw InvalidInput("bin_marked: pattern has no marks");
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m),
                                       std::vector<double>(grid.n_obs(), 0.0));
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const int k = pattern.marks[i];
    if (k < 1 || k > m)
      throw InvalidInput("bin_marked: point " + std::to_string(i) + " has type " +
                         std::to_string(k) + " outside 1.." + std::to_string(m));
    auto cell = grid.locate(pattern.x[i], pattern.y[i]);
    if (!cell)
      throw InvalidInput("bin_marked: point " + std::to_string(i) +
                         " lies outside the window");
    out[static_cast<std::size_t>(k - 1)][*cell] += 1.0;
  }
  return out;
}

inline Simulation simulate_multitype(const MultitypeModel& model, Rng& rng,
                                     FftWorkspace& ws) {
  model.validate();
  const GridSpec& g = model.grid;
  const Vector gammas =
      standard_normal(static_cast<Eigen::Index>(g.n_ext()) * model.m(), rng);
  Simulation sim;
  sim.pattern.window = g.window();
  sim.fields = multitype_fields(model, gammas, ws);
  for (int k = 0; k < model.m(); ++k) {
    Vector mu(static_cast<Eigen::Index>(g.n_obs()));
    for (std::size_t c = 0; c < g.n_obs(); ++c) {
      const double lm = model.beta[k] + sim.fields[k][static_cast<Eigen::Index>(g.ext_of_obs(c))];
      if (lm > kMaxLogMean) throw NumericalOverflow("simulate: cell mean overflow", lm);
      mu[static_cast<Eigen::Index>(c)] = g.cell_area() * std::exp(lm);
      detail::scatter_cell(g, c, detail::poisson_draw(mu[static_cast<Eigen::Index>(c)], rng),
                           rng, sim.pattern, k + 1, 0.0, false);
    }
    sim.mu.push_back(std::move(mu));
  }
  return sim;
}

// ---------------------------------------------------------------------------
// Separable spatio-temporal

/// Lambda(x, t) = lambda0(x) mu0(t) exp{S(x, t)} at integer steps t = 0..T-1,
/// with S(., t) = m + rho (S(., t-1) - m) + sqrt(1 - rho^2) W_t.
struct STModel {
  GridSpec grid;
  int steps = 1;
  SeparableSTCovariance cov;
  Vector baseline_space;  // n_obs, lambda0 >= 0
  Vector baseline_time;   // steps, mu0 >= 0
  bool mean_offset = true;

  static STModel uniform(const GridSpec& grid, int steps,
                         const SeparableSTCovariance& cov, double rate) {
    STModel m;
    m.grid = grid;
    m.steps = steps;
    m.cov = cov;
    m.baseline_space = Vector::Constant(static_cast<Eigen::Index>(grid.n_obs()), rate);
    m.baseline_time = Vector::Ones(steps);
    return m;
  }

  double mean() const { return mean_offset ? field_mean(cov.spatial) : 0.0; }

  void validate() const {
    cov.validate();
    if (steps < 1) throw InvalidInput("spacetime model needs at least one step");
    if (baseline_space.size() != static_cast<Eigen::Index>(grid.n_obs()) ||
        baseline_time.size() != steps)
      throw InvalidInput("spacetime model: baseline sizes do not match grid/steps");
    if ((baseline_space.array() < 0).any() || (baseline_time.array() < 0).any())
      throw InvalidInput("spacetime model: baselines must be >= 0");
  }
};

/// Field sequence from whitened innovations (steps blocks of n_ext). The
/// first block is the stationary initial field.
inline std::vector<Vector> st_evolve(const STModel& model, const SpectralSqrt& root,
                                     const Vector& innovations, FftWorkspace& ws) {
  if (!(std::abs(model.cov.temporal_rho) < 1.0))
    throw InvalidInput("st_evolve: |rho| must be < 1");
  if (model.steps < 1) throw InvalidInput("st_evolve: steps must be >= 1");
  const auto n = static_cast<Eigen::Index>(model.grid.n_ext());
  if (innovations.size() != n * model.steps)
    throw InvalidInput("st_evolve: innovations must stack one block per step");
  const double rho = model.cov.temporal_rho;
  const double scale = std::sqrt(1.0 - rho * rho);
  const double mean = model.mean();
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(model.steps));
  out.push_back(field_from_whitened(root, innovations.segment(0, n), mean, ws));
  for (int t = 1; t < model.steps; ++t) {
    Vector w = apply_sqrt_cov(root, Vector(innovations.segment(t * n, n)), ws);
    Vector s = (out.back().array() - mean) * rho + scale * w.array() + mean;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Vector> st_evolve(const STModel& model, const Vector& innovations,
                                     FftWorkspace& ws) {
  const SpectralSqrt root = make_spectral_sqrt(model.cov.spatial, model.grid, ws);
  return st_evolve(model, root, innovations, ws);
}

/// Adjoint of st_evolve: gradients with respect to the innovations given
/// gradients with respect to each S(., t).
inline Vector st_adjoint(const STModel& model, const SpectralSqrt& root,
                         const std::vector<Vector>& d_fields, FftWorkspace& ws) {
  const auto n = static_cast<Eigen::Index>(model.grid.n_ext());
  const double rho = model.cov.temporal_rho;
  const double scale = std::sqrt(1.0 - rho * rho);
  Vector out(n * model.steps);
  Vector carry = Vector::Zero(n);
  for (int t = model.steps - 1; t >= 0; --t) {
    carry = d_fields[static_cast<std::size_t>(t)] + rho * carry;
    Vector g = grad_transport(root, carry, ws);
    out.segment(t * n, n) = t == 0 ? g : Vector(scale * g);
  }
  return out;
}

struct STLogLik {
  double value = 0.0;
  std::vector<Vector> d_field;
  std::vector<Vector> mu;
};

inline STLogLik st_loglik_fields(const STModel& model, const std::vector<Vector>& fields,
                                 const std::vector<std::vector<double>>& counts) {
  const GridSpec& g = model.grid;
  if (static_cast<int>(fields.size()) != model.steps ||
      static_cast<int>(counts.size()) != model.steps)
    throw InvalidInput("st_loglik: need one field and one count vector per step");
  const double log_area = std::log(g.cell_area());
  STLogLik out;
  for (int t = 0; t < model.steps; ++t) {
    detail::check_counts(counts[t], g.n_obs());
    Vector mu(static_cast<Eigen::Index>(g.n_obs()));
    Vector resid(static_cast<Eigen::Index>(g.n_obs()));
    const double mt = model.baseline_time[t];
    out.value += detail::poisson_cells(
        g.n_obs(), counts[t], nullptr,
        [&](std::size_t c) {
          const double l0 = model.baseline_space[static_cast<Eigen::Index>(c)];
          if (l0 <= 0.0 || mt <= 0.0) return -std::numeric_limits<double>::infinity();
          return log_area + std::log(l0) + std::log(mt) +
                 fields[t][static_cast<Eigen::Index>(g.ext_of_obs(c))];
        },
        mu, resid);
    Vector d = Vector::Zero(static_cast<Eigen::Index>(g.n_ext()));
    for (std::size_t c = 0; c < g.n_obs(); ++c)
      d[static_cast<Eigen::Index>(g.ext_of_obs(c))] = resid[static_cast<Eigen::Index>(c)];
    out.d_field.push_back(std::move(d));
    out.mu.push_back(std::move(mu));
  }
  return out;
}

/// Per-step counts; event time t falls in step floor(t).
inline std::vector<std::vector<double>> bin_timed(const PointPattern& pattern,
                                                  const GridSpec& grid, int steps) {
  if (!(pattern.window == grid.window()))
    throw InvalidInput("bin_timed: pattern window differs from grid window");
  if (!pattern.timed()) throw InvalidInput("bin_timed: pattern has no times");
  std::vector<std::vector<double>> out(static_cast<std::size_t>(steps),
                                       std::vector<double>(grid.n_obs(), 0.0));
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const long t = static_cast<long>(std::floor(pattern.times[i]));
    if (t < 0 || t >= steps)
      throw InvalidInput("bin_timed: point " + std::to_string(i) + " has time outside [0, " +
                         std::to_string(steps) + ")");
    auto cell = grid.locate(pattern.x[i], pattern.y[i]);
    if (!cell)
      throw InvalidInput("bin_timed: point " + std::to_string(i) + " lies outside the window");
    out[static_cast<std::size_t>(t)][*cell] += 1.0;
  }
  return out;
}

inline Simulation simulate_st(const STModel& model, Rng& rng, FftWorkspace& ws) {
  model.validate();
  const GridSpec& g = model.grid;
  const Vector innov =
      standard_normal(static_cast<Eigen::Index>(g.n_ext()) * model.steps, rng);
  Simulation sim;
  sim.pattern.window = g.window();
  sim.fields = st_evolve(model, innov, ws);
  for (int t = 0; t < model.steps; ++t) {
    Vector mu(static_cast<Eigen::Index>(g.n_obs()));
    for (std::size_t c = 0; c < g.n_obs(); ++c) {
      const double lm = sim.fields[t][static_cast<Eigen::Index>(g.ext_of_obs(c))];
      if (lm > kMaxLogMean) throw NumericalOverflow("simulate: cell mean overflow", lm);
      mu[static_cast<Eigen::Index>(c)] = g.cell_area() *
                                         model.baseline_space[static_cast<Eigen::Index>(c)] *
                                         model.baseline_time[t] * std::exp(lm);
      detail::scatter_cell(g, c, detail::poisson_draw(mu[static_cast<Eigen::Index>(c)], rng),
                           rng, sim.pattern, 0, static_cast<double>(t), true);
    }
    sim.mu.push_back(std::move(mu));
  }
  return sim;
}

}  // namespace lgcp

#endif  // LGCP_MODELS_HPP
