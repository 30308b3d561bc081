#ifndef LGCP_MC_LIKELIHOOD_HPP
#define LGCP_MC_LIKELIHOOD_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lgcp/covariance.hpp"
#include "lgcp/error.hpp"
#include "lgcp/gaussian_field.hpp"
#include "lgcp/mcmc.hpp"
#include "lgcp/models.hpp"
#include "lgcp/optim.hpp"
#include "lgcp/rng.hpp"
#include "lgcp/targets.hpp"

// Monte Carlo likelihood ratios for the unitype model. The latent variable
// is the field S on the extended torus, whose Gaussian density is exact
// there; each stored draw keeps S on the observation cells plus its
// periodogram, so a new parameter value costs O(cells) per draw.

namespace lgcp {

/// (beta, log sigma, log phi); sigma and phi are ignored when the model has
/// no field.
struct McTheta {
  Vector beta;
  double log_sigma = 0.0;
  double log_phi = 0.0;

  static McTheta natural(Vector beta, double sigma, double phi) {
    return {std::move(beta), std::log(sigma), std::log(phi)};
  }
  double sigma() const { return std::exp(log_sigma); }
  double phi() const { return std::exp(log_phi); }
};

/// One latent draw, reduced to what the complete-data density needs.
struct LatentDraw {
  std::vector<double> counts;  // joint draws only; empty means "use the data"
  Vector s_obs;                // S on observation cells
  double sum_s = 0.0;          // sum of S over the extended grid
  std::vector<double> power;   // multiplicity-weighted |DFT(S)|^2, half spectrum
  double log_f0 = 0.0;         // complete-data log density at theta0
};

namespace detail {

inline UnitypeModel model_at(const UnitypeModel& base, const McTheta& th) {
  UnitypeModel m = base;
  m.beta = th.beta;
  if (m.field) m.cov = with_log_theta(m.cov, th.log_sigma, th.log_phi);
  return m;
}

// Number of times each half-spectrum entry appears in the full spectrum.
inline double hermitian_multiplicity(int cols, int c) {
  return c == 0 || (cols % 2 == 0 && c == cols / 2) ? 1.0 : 2.0;
}

// Circulant eigenvalues at a covariance, plus their log-sum.
struct GaussianTerms {
  std::vector<double> lambda;  // half spectrum
  double log_det = 0.0;
  double mean = 0.0;
  double n = 0.0;
  int cols = 0;
};

inline GaussianTerms gaussian_terms(const UnitypeModel& m, FftWorkspace& ws) {
  GaussianTerms g;
  const auto base = circulant_base(m.cov, m.grid);
  Spectrum sp = spectral_check(base, m.grid.ext_ny(), m.grid.ext_nx(), ws);
  g.cols = m.grid.ext_nx();
  const int hc = g.cols / 2 + 1;
  g.lambda = std::move(sp.half);
  for (std::size_t i = 0; i < g.lambda.size(); ++i) {
    const double lam = g.lambda[i];
    if (!(lam > 0.0))
      throw EmbeddingFailure("covariance is singular on the torus; its density is undefined",
                             lam < 0 ? -lam : 0.0);
    g.log_det += hermitian_multiplicity(g.cols, static_cast<int>(i % hc)) * std::log(lam);
  }
  g.mean = m.mean();
  g.n = static_cast<double>(m.grid.n_ext());
  return g;
}

inline double poisson_part(const UnitypeModel& m, std::span<const double> y, const Vector& s_obs) {
  const GridSpec& g = m.grid;
  const Vector eta = m.design * m.beta;
  const double log_area = std::log(g.cell_area());
  double v = 0.0;
  for (std::size_t k = 0; k < g.n_obs(); ++k) {
    if (!m.observed[k]) continue;
    const auto i = static_cast<Eigen::Index>(k);
    const double d = m.offset[i];
    if (d <= 0.0) {
      if (y[k] > 0) return -std::numeric_limits<double>::infinity();
      continue;
    }
    const double lm = log_area + std::log(d) + eta[i] + (m.field ? s_obs[i] : 0.0);
    if (lm > kMaxLogMean) throw NumericalOverflow("mc likelihood: cell mean overflow", lm);
    v += (y[k] > 0 ? y[k] * lm : 0.0) - std::exp(lm);
  }
  return v;
}

inline double gaussian_part(const GaussianTerms& g, const LatentDraw& d) {
  // (S - m)' Sigma^-1 (S - m) = N^-1 sum_f |DFT(S - m)_f|^2 / lambda_f; the
  // constant mean only moves the zero frequency.
  double quad = 0.0;
  for (std::size_t i = 1; i < g.lambda.size(); ++i) quad += d.power[i] / g.lambda[i];
  const double dc = d.sum_s - g.n * g.mean;
  quad += dc * dc / g.lambda[0];
  return -0.5 * quad / g.n - 0.5 * g.log_det;
}

inline double log_mean_exp(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("log_mean_exp: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s / static_cast<double>(v.size()));
}

inline double effective_sample_size(std::span<const double> log_w) {
  const double mx = *std::max_element(log_w.begin(), log_w.end());
  if (!std::isfinite(mx)) return 0.0;
  double s = 0.0, s2 = 0.0;
  for (double x : log_w) {
    const double w = std::exp(x - mx);
    s += w;
    s2 += w * w;
  }
  return s * s / s2;
}

}  // namespace detail

/// log f(y, S; theta), the complete-data log density up to terms free of
/// theta.
inline double complete_log_density(const UnitypeModel& model_theta,
                                   const detail::GaussianTerms* gauss,
                                   std::span<const double> y, const LatentDraw& d) {
  double v = detail::poisson_part(model_theta, y, d.s_obs);
  if (model_theta.field) v += detail::gaussian_part(*gauss, d);
  return v;
}

/// Reduce a field on the extended grid to a LatentDraw (log_f0 unset).
inline LatentDraw summarise_latent(const GridSpec& grid, const Vector& s_ext, FftWorkspace& ws) {
  LatentDraw d;
  d.s_obs.resize(static_cast<Eigen::Index>(grid.n_obs()));
  for (std::size_t k = 0; k < grid.n_obs(); ++k)
    d.s_obs[static_cast<Eigen::Index>(k)] = s_ext[static_cast<Eigen::Index>(grid.ext_of_obs(k))];
  d.sum_s = s_ext.sum();
  std::copy(s_ext.data(), s_ext.data() + s_ext.size(), ws.real().begin());
  ws.forward();
  auto spec = ws.spectrum();
  const int cols = grid.ext_nx(), hc = cols / 2 + 1;
  d.power.resize(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i)
    d.power[i] = detail::hermitian_multiplicity(cols, static_cast<int>(i % hc)) * std::norm(spec[i]);
  return d;
}

/// log r(X, S, theta, theta0) = log f(X, S; theta) - log f(X, S; theta0).
inline double log_ratio_r(const UnitypeModel& base, std::span<const double> counts,
                          const Vector& s_ext, const McTheta& theta, const McTheta& theta0,
                          FftWorkspace& ws) {
  const UnitypeModel m1 = detail::model_at(base, theta);
  const UnitypeModel m0 = detail::model_at(base, theta0);
  LatentDraw d;
  if (base.field) {
    d = summarise_latent(base.grid, s_ext, ws);
  } else {
    d.s_obs = Vector::Zero(static_cast<Eigen::Index>(base.grid.n_obs()));
  }
  std::optional<detail::GaussianTerms> g1, g0;
  if (base.field) {
    g1 = detail::gaussian_terms(m1, ws);
    g0 = detail::gaussian_terms(m0, ws);
  }
  return complete_log_density(m1, g1 ? &*g1 : nullptr, counts, d) -
         complete_log_density(m0, g0 ? &*g0 : nullptr, counts, d);
}

struct MCLikelihoodOptions {
  long sims = 1000;
  long pilot = 4000;  // pilot iterations for adapting h and choosing thinning
  long max_thin = 1000;
  double acf_target = 0.1;
  double min_ess = 5.0;
  double box_beta = 2.0;        // half-width of the beta search interval
  double box_prior_sds = 2.0;   // half-width for log sigma / log phi, in prior sds
  int reanchor = 0;             // extra passes with theta0 <- theta_hat
  SamplerConfig sampler;
};

struct MCLikelihoodPlan {
  UnitypeModel model;  // data model; beta/cov replaced by theta at evaluation
  std::vector<double> counts;
  McTheta theta0;
  long s = 0;
  long thin = 1;
  double pilot_lag1 = 0.0;  // lag-1 autocorrelation at the chosen thinning
  std::vector<LatentDraw> conditional_draws;
  std::vector<LatentDraw> joint_draws;
};

struct MCLogLik {
  double value = 0.0;
  double ess_conditional = 0.0;
  double ess_joint = 0.0;
  bool unreliable = false;
  std::string warning;
};

/// Estimated log L(theta) - log L(theta0) from a plan.
inline MCLogLik mc_loglik(const MCLikelihoodPlan& plan, const McTheta& theta,
                          double min_ess = 5.0) {
  if (plan.conditional_draws.empty() || plan.joint_draws.empty())
    throw InvalidInput("mc_loglik: plan has no draws");
  if (theta.beta.size() != plan.model.beta.size())
    throw InvalidInput("mc_loglik: theta has the wrong number of coefficients");
  const UnitypeModel m = detail::model_at(plan.model, theta);
  FftWorkspace ws(m.grid.ext_ny(), m.grid.ext_nx());
  std::optional<detail::GaussianTerms> g;
  if (m.field) g = detail::gaussian_terms(m, ws);
  auto log_r = [&](const LatentDraw& d, std::span<const double> y) {
    return complete_log_density(m, g ? &*g : nullptr, y, d) - d.log_f0;
  };
  std::vector<double> lc, lj;
  lc.reserve(plan.conditional_draws.size());
  lj.reserve(plan.joint_draws.size());
  for (const auto& d : plan.conditional_draws) lc.push_back(log_r(d, plan.counts));
  for (const auto& d : plan.joint_draws) lj.push_back(log_r(d, d.counts));
  MCLogLik out;
  out.value = detail::log_mean_exp(lc) - detail::log_mean_exp(lj);
  out.ess_conditional = detail::effective_sample_size(lc);
  out.ess_joint = detail::effective_sample_size(lj);
  if (out.ess_conditional < min_ess || out.ess_joint < min_ess) {
    out.unreliable = true;
    out.warning = "effective sample size below " + std::to_string(min_ess) +
                  " (conditional " + std::to_string(out.ess_conditional) + ", joint " +
                  std::to_string(out.ess_joint) + "); approximation unreliable";
  }
  return out;
}

/// Conditional draws from an MCMC chain at theta0 (thinned until the lag-1
/// autocorrelation of the log posterior drops below the target) and joint
/// draws by forward simulation at theta0.
inline MCLikelihoodPlan build_plan(const UnitypeModel& model, std::vector<double> counts,
                                   const McTheta& theta0, const MCLikelihoodOptions& opt,
                                   std::uint64_t seed) {
  if (opt.sims < 1) throw InvalidInput("mcmle: sims must be >= 1");
  MCLikelihoodPlan plan;
  plan.model = model;
  plan.counts = std::move(counts);
  plan.theta0 = theta0;
  plan.s = opt.sims;
  const UnitypeModel m0 = detail::model_at(model, theta0);
  m0.validate();
  const GridSpec& g = m0.grid;
  FftWorkspace ws(g.ext_ny(), g.ext_nx());
  std::optional<detail::GaussianTerms> g0;
  std::optional<SpectralSqrt> root;
  if (m0.field) {
    g0 = detail::gaussian_terms(m0, ws);
    root = make_spectral_sqrt(m0.cov, g, ws);
  }
  auto finish = [&](LatentDraw& d, std::span<const double> y) {
    d.log_f0 = complete_log_density(m0, g0 ? &*g0 : nullptr, y, d);
  };

  // Conditional draws.
  if (!m0.field) {
    LatentDraw d;
    d.s_obs = Vector::Zero(static_cast<Eigen::Index>(g.n_obs()));
    finish(d, plan.counts);
    plan.conditional_draws.assign(static_cast<std::size_t>(opt.sims), d);
  } else {
    UnitypeTarget target(m0, plan.counts);
    SamplerConfig cfg = opt.sampler;
    cfg.fix_beta = true;
    cfg.fix_theta = true;
    cfg.record_fields = false;
    cfg.record_gamma = false;
    cfg.burnin = 0;
    cfg.iterations = std::max(1L, opt.pilot);
    cfg.thin = 1;
    Rng rng = make_stream(seed, "mcmle.conditional");
    const Vector lt = (Vector(2) << theta0.log_sigma, theta0.log_phi).finished();
    ChainResult pilot = run_chain(target, cfg, initial_state(target.gamma_dim(), theta0.beta, lt, cfg.h0), rng);
    long thin = 1;
    double lag = 1.0;
    const auto& tr = pilot.log_post_trace;
    const std::size_t half = tr.size() / 2;  // discard the first half as burn-in
    std::span<const double> tail(tr.data() + half, tr.size() - half);
    for (thin = 1; thin <= opt.max_thin; thin *= 2) {
      if (static_cast<std::size_t>(thin) * 10 >= tail.size()) break;
      auto acf = autocorrelation(tail, static_cast<int>(thin));
      lag = acf ? acf->back() : 0.0;
      if (lag < opt.acf_target) break;
    }
    thin = std::min(thin, opt.max_thin);
    plan.thin = thin;
    plan.pilot_lag1 = lag;
    cfg.iterations = opt.sims * thin;
    cfg.thin = thin;
    cfg.record_gamma = true;
    SamplerState start = pilot.final_state;
    ChainResult chain = run_chain(target, cfg, std::move(start), rng);
    plan.conditional_draws.reserve(chain.samples.size());
    for (const Draw& dr : chain.samples.draws) {
      const Vector s = field_from_whitened(*root, dr.gamma, m0.mean(), ws);
      LatentDraw d = summarise_latent(g, s, ws);
      finish(d, plan.counts);
      plan.conditional_draws.push_back(std::move(d));
    }
  }

  // Joint draws.
  Rng rng = make_stream(seed, "mcmle.joint");
  plan.joint_draws.reserve(static_cast<std::size_t>(opt.sims));
  for (long j = 0; j < opt.sims; ++j) {
    const Simulation sim = simulate(m0, rng, ws);
    LatentDraw d;
    if (m0.field) {
      d = summarise_latent(g, sim.fields[0], ws);
    } else {
      d.s_obs = Vector::Zero(static_cast<Eigen::Index>(g.n_obs()));
    }
    d.counts = observation_counts(bin_points(sim.pattern, g), g);
    finish(d, d.counts);
    plan.joint_draws.push_back(std::move(d));
  }
  return plan;
}

struct MCMLEResult {
  McTheta theta_hat;
  double value = 0.0;  // L-hat at theta_hat under the final plan
  MCLogLik diagnostics;
  bool at_boundary = false;
  std::vector<std::string> warnings;
  int anchors = 1;
};

namespace detail {

inline std::vector<double> pack(const McTheta& t, bool field) {
  std::vector<double> x(t.beta.data(), t.beta.data() + t.beta.size());
  if (field) {
    x.push_back(t.log_sigma);
    x.push_back(t.log_phi);
  }
  return x;
}

inline McTheta unpack(const std::vector<double>& x, Eigen::Index nb, bool field,
                      const McTheta& fallback) {
  McTheta t = fallback;
  t.beta = Eigen::Map<const Vector>(x.data(), nb);
  if (field) {
    t.log_sigma = x[static_cast<std::size_t>(nb)];
    t.log_phi = x[static_cast<std::size_t>(nb) + 1];
  }
  return t;
}

}  // namespace detail

/// Maximise L-hat over a box around theta0 by Nelder-Mead.
inline MCMLEResult mc_mle(const MCLikelihoodPlan& plan, const MCLikelihoodOptions& opt) {
  const bool field = plan.model.field;
  const Eigen::Index nb = plan.theta0.beta.size();
  const std::vector<double> x0 = detail::pack(plan.theta0, field);
  std::vector<double> lo(x0.size()), hi(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    double half = opt.box_beta;
    if (field && i == static_cast<std::size_t>(nb))
      half = opt.box_prior_sds * std::sqrt(opt.sampler.priors.log_sigma_var);
    if (field && i == static_cast<std::size_t>(nb) + 1)
      half = opt.box_prior_sds * std::sqrt(opt.sampler.priors.log_phi_var);
    lo[i] = x0[i] - half;
    hi[i] = x0[i] + half;
  }
  auto objective = [&](const std::vector<double>& x) {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return std::numeric_limits<double>::infinity();
    try {
      return -mc_loglik(plan, detail::unpack(x, nb, field, plan.theta0), opt.min_ess).value;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  NelderMeadOptions nm;
  nm.initial_step = 0.1;
  nm.size_tol = 1e-6;
  const MinimizeResult r = nelder_mead(objective, x0, nm);
  MCMLEResult out;
  out.theta_hat = detail::unpack(r.x, nb, field, plan.theta0);
  out.diagnostics = mc_loglik(plan, out.theta_hat, opt.min_ess);
  out.value = out.diagnostics.value;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    const double tol = 1e-3 * (hi[i] - lo[i]);
    if (r.x[i] - lo[i] < tol || hi[i] - r.x[i] < tol) out.at_boundary = true;
  }
  if (out.at_boundary)
    out.warnings.push_back("estimate lies on the search-box boundary; re-anchor theta0 at the estimate");
  if (out.diagnostics.unreliable) out.warnings.push_back(out.diagnostics.warning);
  if (!r.converged) out.warnings.push_back("Nelder-Mead did not meet its tolerance");
  return out;
}

/// mc_mle followed by opt.reanchor rebuilds of the plan at the current
/// estimate.
inline MCMLEResult mc_mle(const UnitypeModel& model, const std::vector<double>& counts,
                          const McTheta& theta0, const MCLikelihoodOptions& opt,
                          std::uint64_t seed) {
  MCLikelihoodPlan plan = build_plan(model, counts, theta0, opt, seed);
  MCMLEResult res = mc_mle(plan, opt);
  for (int pass = 1; pass <= opt.reanchor; ++pass) {
    plan = build_plan(model, counts, res.theta_hat, opt,
                      seed + static_cast<std::uint64_t>(pass) * 0x9E3779B97F4A7C15ull);
    MCMLEResult next = mc_mle(plan, opt);
    next.anchors = res.anchors + 1;
    res = std::move(next);
  }
  return res;
}

}  // namespace lgcp

#endif  // LGCP_MC_LIKELIHOOD_HPP
