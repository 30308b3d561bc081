#ifndef LGCP_PREDICTION_HPP
#define LGCP_PREDICTION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lgcp/error.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/mcmc.hpp"
#include "lgcp/models.hpp"
#include "lgcp/raster.hpp"

namespace lgcp {

enum class Functional { intensity, exp_s, relative_risk };

inline std::string to_string(Functional f) {
  switch (f) {
    case Functional::intensity: return "intensity";
    case Functional::exp_s: return "exp_s";
    case Functional::relative_risk: return "relative_risk";
  }
  return "?";
}

inline Functional parse_functional(const std::string& s) {
  if (s == "intensity") return Functional::intensity;
  if (s == "exp_s") return Functional::exp_s;
  if (s == "relative_risk") return Functional::relative_risk;
  throw InvalidInput("unknown functional '" + s + "' (intensity, exp_s, relative_risk)");
}

enum class Direction { above, below };

/// What a draw needs to be turned into intensities: the grid, the design
/// (column 0 the intercept), the offset d(x), an optional per-step time
/// multiplier, and which cells carry data.
struct PredictionContext {
  GridSpec grid;
  Matrix design;                       // n_obs x p; may be empty (intercept only)
  Vector offset;                       // n_obs; empty means 1
  Vector time_scale;                   // per field index; empty means 1
  std::vector<std::uint8_t> observed;  // n_obs; empty means all

  static PredictionContext of(const GridSpec& g) {
    PredictionContext c;
    c.grid = g;
    return c;
  }

  bool cell_observed(std::size_t k) const { return observed.empty() || observed[k]; }
};

/// Functional of one draw on every observation cell; NaN on cells without
/// data. field selects the type or time step.
inline Vector evaluate_functional(const Draw& d, const PredictionContext& ctx, Functional f,
                                  std::size_t field = 0) {
  if (field >= d.fields.size()) throw InvalidInput("prediction: draw has no field " + std::to_string(field));
  const Vector& s = d.fields[field];
  const auto n = static_cast<Eigen::Index>(ctx.grid.n_obs());
  if (s.size() != n) throw InvalidInput("prediction: stored field does not match the grid");
  Vector eta = Vector::Zero(n);
  Vector covariate_part = Vector::Zero(n);
  if (ctx.design.size() > 0) {
    if (ctx.design.rows() != n || ctx.design.cols() != d.beta.size())
      throw InvalidInput("prediction: design matrix does not match the draws");
    eta = ctx.design * d.beta;
    if (d.beta.size() > 1)
      covariate_part = ctx.design.rightCols(d.beta.size() - 1) * d.beta.tail(d.beta.size() - 1);
  } else if (d.beta.size() == 1) {
    eta.setConstant(d.beta[0]);
  } else if (d.beta.size() > 1 && field < static_cast<std::size_t>(d.beta.size())) {
    eta.setConstant(d.beta[static_cast<Eigen::Index>(field)]);  // multitype intercepts
  }
  Vector out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!ctx.cell_observed(static_cast<std::size_t>(k))) {
      out[k] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    switch (f) {
      case Functional::exp_s: out[k] = std::exp(s[k]); break;
      case Functional::relative_risk: out[k] = std::exp(covariate_part[k] + s[k]); break;
      case Functional::intensity: {
        double v = std::exp(eta[k] + s[k]);
        if (ctx.offset.size() > 0) v *= ctx.offset[k];
        if (ctx.time_scale.size() > 0) v *= ctx.time_scale[static_cast<Eigen::Index>(field)];
        out[k] = v;
        break;
      }
    }
  }
  return out;
}

/// Nearest-rank p-quantile of values (sorted in place): element ceil(p n) - 1.
inline double nearest_rank(std::vector<double>& v, double p) {
  if (v.empty()) throw InsufficientSamples("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const auto idx = static_cast<std::size_t>(std::max(1.0, std::ceil(p * n - 1e-12))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

namespace detail {
inline void require_samples(const PosteriorSamples& s, std::size_t min_samples) {
  if (s.size() < min_samples)
    throw InsufficientSamples("prediction needs at least " + std::to_string(min_samples) +
                              " retained samples, got " + std::to_string(s.size()));
}

// Per cell, the functional's values across draws.
inline std::vector<std::vector<double>> functional_columns(const PosteriorSamples& samples,
                                                           const PredictionContext& ctx,
                                                           Functional f, std::size_t field) {
  std::vector<std::vector<double>> cols(ctx.grid.n_obs());
  for (auto& c : cols) c.reserve(samples.size());
  for (const Draw& d : samples.draws) {
    const Vector v = evaluate_functional(d, ctx, f, field);
    for (std::size_t k = 0; k < cols.size(); ++k) cols[k].push_back(v[static_cast<Eigen::Index>(k)]);
  }
  return cols;
}
}  // namespace detail

inline constexpr std::size_t kMinPredictionSamples = 100;

/// Per-cell nearest-rank p-quantile of the functional across draws.
inline Raster percentile_surface(const PosteriorSamples& samples, const PredictionContext& ctx,
                                 Functional f, double p, std::size_t field = 0,
                                 std::size_t min_samples = kMinPredictionSamples) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("percentile: p must lie in [0, 1]");
  detail::require_samples(samples, min_samples);
  Raster r = Raster::on(ctx.grid);
  auto cols = detail::functional_columns(samples, ctx, f, field);
  for (std::size_t k = 0; k < cols.size(); ++k)
    r.values[k] = ctx.cell_observed(k) ? nearest_rank(cols[k], p)
                                       : std::numeric_limits<double>::quiet_NaN();
  return r;
}

/// Per-cell fraction of draws whose functional lies strictly above (or
/// below) the threshold.
inline Raster exceedance_probability(const PosteriorSamples& samples, const PredictionContext& ctx,
                                     Functional f, double threshold,
                                     Direction dir = Direction::above, std::size_t field = 0,
                                     std::size_t min_samples = kMinPredictionSamples) {
  detail::require_samples(samples, min_samples);
  Raster r = Raster::on(ctx.grid);
  std::vector<long> hits(ctx.grid.n_obs(), 0);
  for (const Draw& d : samples.draws) {
    const Vector v = evaluate_functional(d, ctx, f, field);
    for (std::size_t k = 0; k < hits.size(); ++k) {
      const double x = v[static_cast<Eigen::Index>(k)];
      if (dir == Direction::above ? x > threshold : x < threshold) ++hits[k];
    }
  }
  for (std::size_t k = 0; k < hits.size(); ++k)
    r.values[k] = ctx.cell_observed(k)
                      ? static_cast<double>(hits[k]) / static_cast<double>(samples.size())
                      : std::numeric_limits<double>::quiet_NaN();
  return r;
}

/// Per-cell posterior mean of the functional.
inline Raster posterior_mean_surface(const PosteriorSamples& samples, const PredictionContext& ctx,
                                     Functional f, std::size_t field = 0,
                                     std::size_t min_samples = kMinPredictionSamples) {
  detail::require_samples(samples, min_samples);
  Raster r = Raster::on(ctx.grid);
  for (const Draw& d : samples.draws) {
    const Vector v = evaluate_functional(d, ctx, f, field);
    for (std::size_t k = 0; k < r.size(); ++k) r.values[k] += v[static_cast<Eigen::Index>(k)];
  }
  for (double& v : r.values) v /= static_cast<double>(samples.size());
  return r;
}

// ---------------------------------------------------------------------------
// Multitype

namespace detail {
// p_k at every cell for one multitype draw: softmax over beta_k + S_k.
inline std::vector<Vector> type_probabilities_draw(const Draw& d, std::size_t n_cells) {
  const std::size_t m = d.fields.size();
  if (m < 2 || static_cast<std::size_t>(d.beta.size()) != m)
    throw InvalidInput("multitype prediction: draws need one field and one intercept per type");
  std::vector<Vector> p(m, Vector(static_cast<Eigen::Index>(n_cells)));
  std::vector<double> li(m);
  for (std::size_t k = 0; k < n_cells; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    for (std::size_t t = 0; t < m; ++t) li[t] = d.beta[static_cast<Eigen::Index>(t)] + d.fields[t][i];
    const auto pk = type_probabilities(li);
    for (std::size_t t = 0; t < m; ++t) p[t][i] = pk[t];
  }
  return p;
}
}  // namespace detail

/// Posterior mean of p_k(x) for every type.
inline std::vector<Raster> type_probability_surfaces(const PosteriorSamples& samples,
                                                     const GridSpec& grid,
                                                     std::size_t min_samples = kMinPredictionSamples) {
  detail::require_samples(samples, min_samples);
  const std::size_t m = samples.n_fields();
  std::vector<Raster> out(m, Raster::on(grid));
  for (const Draw& d : samples.draws) {
    const auto p = detail::type_probabilities_draw(d, grid.n_obs());
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t k = 0; k < grid.n_obs(); ++k) out[t].values[k] += p[t][static_cast<Eigen::Index>(k)];
  }
  // Divide by the per-cell total rather than the draw count so the surfaces
  // sum to one without accumulated rounding.
  for (std::size_t k = 0; k < grid.n_obs(); ++k) {
    double z = 0.0;
    for (std::size_t t = 0; t < m; ++t) z += out[t].values[k];
    for (std::size_t t = 0; t < m; ++t) out[t].values[k] /= z;
  }
  return out;
}

struct SegregationSet {
  int type = 1;  // 1-based
  double c = 0.5;
  double q = 0.5;
  std::vector<std::size_t> cells;
};

/// A_k(c, q): cells where the posterior probability that p_k exceeds c is
/// itself above q, for every type and every q in q_list.
inline std::vector<SegregationSet> segregation_sets(const PosteriorSamples& samples,
                                                    const GridSpec& grid, double c,
                                                    const std::vector<double>& q_list,
                                                    std::size_t min_samples = kMinPredictionSamples) {
  if (!(c > 0.0 && c < 1.0)) throw InvalidInput("segregation: c must lie in (0, 1)");
  for (double q : q_list)
    if (!(q >= 0.0 && q < 1.0)) throw InvalidInput("segregation: q must lie in [0, 1)");
  detail::require_samples(samples, min_samples);
  const std::size_t m = samples.n_fields();
  std::vector<std::vector<long>> hits(m, std::vector<long>(grid.n_obs(), 0));
  for (const Draw& d : samples.draws) {
    const auto p = detail::type_probabilities_draw(d, grid.n_obs());
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t k = 0; k < grid.n_obs(); ++k)
        if (p[t][static_cast<Eigen::Index>(k)] > c) ++hits[t][k];
  }
  std::vector<SegregationSet> out;
  const double n = static_cast<double>(samples.size());
  for (std::size_t t = 0; t < m; ++t)
    for (double q : q_list) {
      SegregationSet s;
      s.type = static_cast<int>(t) + 1;
      s.c = c;
      s.q = q;
      for (std::size_t k = 0; k < grid.n_obs(); ++k)
        if (static_cast<double>(hits[t][k]) / n > q) s.cells.push_back(k);
      out.push_back(std::move(s));
    }
  return out;
}

/// Membership raster (1 inside, 0 outside) for one segregation set.
inline Raster segregation_raster(const SegregationSet& s, const GridSpec& grid) {
  Raster r = Raster::on(grid);
  for (std::size_t k : s.cells) r.values[k] = 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// Aggregated counts with covariates

struct EffectQuantiles {
  std::string name;
  double q025 = 0.0, q50 = 0.0, q975 = 0.0;  // of exp(beta_j)
};

struct RiskReport {
  std::vector<EffectQuantiles> effects;
  Raster relative_risk;        // posterior median of exp(S)
  Raster log_risk_variance;    // posterior variance of S
  Raster exceedance;           // P(exp(S) > threshold)
  double threshold = 1.1;
};

/// Multiplicative covariate effects exp(beta_j), j >= 1, with 95% intervals,
/// and covariate-adjusted risk surfaces built from exp(S).
inline RiskReport aggregated_risk_report(const PosteriorSamples& samples,
                                         const PredictionContext& ctx,
                                         const std::vector<std::string>& covariate_names,
                                         double threshold = 1.1,
                                         std::size_t min_samples = kMinPredictionSamples) {
  detail::require_samples(samples, min_samples);
  RiskReport rep;
  rep.threshold = threshold;
  const Eigen::Index p = samples.draws[0].beta.size();
  if (static_cast<Eigen::Index>(covariate_names.size()) != p - 1)
    throw InvalidInput("risk report: need one name per non-intercept coefficient");
  for (Eigen::Index j = 1; j < p; ++j) {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const Draw& d : samples.draws) v.push_back(std::exp(d.beta[j]));
    EffectQuantiles e;
    e.name = covariate_names[static_cast<std::size_t>(j - 1)];
    e.q025 = nearest_rank(v, 0.025);
    e.q50 = nearest_rank(v, 0.5);
    e.q975 = nearest_rank(v, 0.975);
    rep.effects.push_back(e);
  }
  rep.relative_risk = percentile_surface(samples, ctx, Functional::exp_s, 0.5, 0, min_samples);
  rep.exceedance = exceedance_probability(samples, ctx, Functional::exp_s, threshold,
                                          Direction::above, 0, min_samples);
  rep.log_risk_variance = Raster::on(ctx.grid);
  const std::size_t n = ctx.grid.n_obs();
  std::vector<double> mean(n, 0.0), m2(n, 0.0);
  long count = 0;
  for (const Draw& d : samples.draws) {
    ++count;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = d.fields[0][static_cast<Eigen::Index>(k)];
      const double delta = x - mean[k];
      mean[k] += delta / static_cast<double>(count);
      m2[k] += delta * (x - mean[k]);
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    rep.log_risk_variance.values[k] =
        ctx.cell_observed(k) ? m2[k] / static_cast<double>(count - 1)
                             : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

}  // namespace lgcp

#endif  // LGCP_PREDICTION_HPP
