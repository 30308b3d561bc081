#ifndef LGCP_MCMC_HPP
#define LGCP_MCMC_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "lgcp/error.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/models.hpp"
#include "lgcp/rng.hpp"
#include "lgcp/targets.hpp"

namespace lgcp {

// ---------------------------------------------------------------------------
// Configuration

/// Gaussian priors on the log scale for (sigma, phi) and on each beta.
/// The second argument of each pair is a variance.
struct Priors {
  double log_sigma_mean = 0.0;  // log 1
  double log_sigma_var = 0.15;
  double log_phi_mean = std::log(10.0);
  double log_phi_var = 0.15;
  double beta_mean = 0.0;
  double beta_var = 1e6;
};

struct SamplerConfig {
  long burnin = 1000;
  long iterations = 10000;
  long thin = 10;
  double target_accept = 0.574;
  double c = 0.4;         // theta-block compromise factor
  double adapt_a = 0.3;  // Robbins-Monro gain, eta_i = a / sqrt(i)
  double h0 = 1.0;
  bool adapt_after_burnin = true;
  bool fix_theta = false;
  bool fix_beta = false;
  bool record_fields = true;
  bool record_gamma = false;  // keep whitened coefficients with each draw
  Priors priors;

  void validate() const {
    if (burnin < 0 || iterations < 1 || thin < 1)
      throw InvalidInput("mcmc: burnin >= 0, iterations >= 1 and thin >= 1 required");
    if (iterations % thin != 0)
      throw InvalidInput("mcmc: thin must divide the number of iterations");
    if (!(priors.log_sigma_var > 0) || !(priors.log_phi_var > 0) || !(priors.beta_var > 0))
      throw InvalidInput("mcmc: prior variances must be > 0");
    if (!(target_accept > 0 && target_accept < 1))
      throw InvalidInput("mcmc: target_accept must lie in (0, 1)");
    if (!(c > 0)) throw InvalidInput("mcmc: c must be > 0");
    if (!(h0 > 0)) throw InvalidInput("mcmc: h0 must be > 0");
  }
};

/// Optimal scalings for Gaussian targets: MALA blocks 1.65^2/d^(1/3),
/// random-walk block 2.38^2/d.
inline double h_gamma_sq(Eigen::Index dim) {
  return dim > 0 ? 1.65 * 1.65 / std::cbrt(static_cast<double>(dim)) : 0.0;
}
inline double h_beta_sq(Eigen::Index dim) { return h_gamma_sq(dim); }
inline double h_theta_sq(Eigen::Index dim) {
  return dim > 0 ? 2.38 * 2.38 / static_cast<double>(dim) : 0.0;
}

/// Reference acceptance rate for pure random-walk proposals; reported, not
/// targeted.
inline constexpr double kRandomWalkAccept = 0.234;

// ---------------------------------------------------------------------------
// State

struct SamplerState {
  Vector gamma;
  Vector beta;
  Vector log_theta;  // (log sigma, log phi) per covariance block
  double h = 1.0;
  long iteration = 0;
  long accepted = 0;
  double sum_alpha = 0.0;

  TargetEval eval;  // at the current point
  double log_post = -std::numeric_limits<double>::infinity();

  double acceptance_rate() const {
    return iteration > 0 ? static_cast<double>(accepted) / iteration : 0.0;
  }
  double mean_alpha() const { return iteration > 0 ? sum_alpha / iteration : 0.0; }
};

struct Proposal {
  Vector gamma, beta, log_theta;
};

/// Block preconditioners: identity for gamma, (Z'WZ)^-1 for beta, diagonal
/// prior variances for theta.
struct Preconditioner {
  Matrix xi_beta;       // proposal shape for beta
  Matrix xi_beta_inv;   // its inverse (the information matrix)
  Matrix xi_beta_chol;  // lower Cholesky factor of xi_beta
  Vector xi_theta;      // diagonal

  static Preconditioner make(const Matrix& beta_information, Eigen::Index theta_dim,
                             const Priors& priors) {
    Preconditioner p;
    const Eigen::Index nb = beta_information.rows();
    if (nb > 0) {
      Matrix info = beta_information;
      // Guard against empty-data designs.
      info.diagonal().array() += 1e-8 * std::max(1.0, info.diagonal().maxCoeff());
      p.xi_beta_inv = info;
      p.xi_beta = info.ldlt().solve(Matrix::Identity(nb, nb));
      Eigen::LLT<Matrix> llt(p.xi_beta);
      if (llt.info() != Eigen::Success)
        throw NumericalError("mcmc: beta preconditioner is not positive definite");
      p.xi_beta_chol = llt.matrixL();
    }
    p.xi_theta.resize(theta_dim);
    for (Eigen::Index j = 0; j < theta_dim; ++j)
      p.xi_theta[j] = j % 2 == 0 ? priors.log_sigma_var : priors.log_phi_var;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Posterior pieces

inline double log_prior(const SamplerState& s, const Priors& pr) {
  double lp = -0.5 * s.gamma.squaredNorm();
  lp -= 0.5 * (s.beta.array() - pr.beta_mean).square().sum() / pr.beta_var;
  for (Eigen::Index j = 0; j < s.log_theta.size(); ++j) {
    const double m = j % 2 == 0 ? pr.log_sigma_mean : pr.log_phi_mean;
    const double v = j % 2 == 0 ? pr.log_sigma_var : pr.log_phi_var;
    lp -= 0.5 * (s.log_theta[j] - m) * (s.log_theta[j] - m) / v;
  }
  return lp;
}

inline double log_posterior(const SamplerState& s, const Priors& pr) {
  if (!(s.eval.loglik > -std::numeric_limits<double>::infinity()))
    return -std::numeric_limits<double>::infinity();
  return s.eval.loglik + log_prior(s, pr);
}

/// Gradient of log pi with respect to gamma (likelihood plus N(0, I) prior).
inline Vector grad_log_post_gamma(const SamplerState& s) { return s.eval.grad_gamma - s.gamma; }

inline Vector grad_log_post_beta(const SamplerState& s, const Priors& pr) {
  return s.eval.grad_beta - ((s.beta.array() - pr.beta_mean) / pr.beta_var).matrix();
}

namespace detail {

struct Drifts {
  Vector gamma, beta;  // mean of the proposal for each MALA block
};

inline Drifts mala_means(const SamplerState& s, double h, const Preconditioner& pc,
                         const SamplerConfig& cfg) {
  Drifts d;
  const double hg = h * h * h_gamma_sq(s.gamma.size());
  d.gamma = s.gamma + 0.5 * hg * grad_log_post_gamma(s);
  if (s.beta.size() > 0 && !cfg.fix_beta) {
    const double hb = h * h * h_beta_sq(s.beta.size());
    d.beta = s.beta + 0.5 * hb * pc.xi_beta * grad_log_post_beta(s, cfg.priors);
  } else {
    d.beta = s.beta;
  }
  return d;
}

// log q(to | from) up to constants shared by both directions.
inline double log_q(const Proposal& to, const SamplerState& from, double h,
                    const Preconditioner& pc, const SamplerConfig& cfg) {
  const Drifts d = mala_means(from, h, pc, cfg);
  double lq = 0.0;
  if (to.gamma.size() > 0) {
    const double var = h * h * h_gamma_sq(to.gamma.size());
    lq -= 0.5 * (to.gamma - d.gamma).squaredNorm() / var;
  }
  if (to.beta.size() > 0 && !cfg.fix_beta) {
    const double var = h * h * h_beta_sq(to.beta.size());
    const Vector r = to.beta - d.beta;
    lq -= 0.5 * r.dot(pc.xi_beta_inv * r) / var;
  }
  return lq;
}

}  // namespace detail

/// Joint proposal: Langevin moves for gamma and beta with covariances
/// h^2 h_gamma^2 I and h^2 h_beta^2 Xi_beta, and a zero-drift random walk
/// for log theta with covariance c h^2 h_theta^2 Xi_theta.
inline Proposal mala_rw_propose(const SamplerState& s, const Preconditioner& pc,
                                const SamplerConfig& cfg, Rng& rng) {
  const double h = s.h;
  if (!s.eval.grad_gamma.allFinite() || !s.eval.grad_beta.allFinite())
    throw NumericalError("mcmc: non-finite gradient at iteration " +
                         std::to_string(s.iteration));
  const detail::Drifts d = detail::mala_means(s, h, pc, cfg);
  Proposal p;
  p.gamma = d.gamma;
  if (s.gamma.size() > 0)
    p.gamma += h * std::sqrt(h_gamma_sq(s.gamma.size())) * standard_normal(s.gamma.size(), rng);
  p.beta = d.beta;
  if (s.beta.size() > 0 && !cfg.fix_beta)
    p.beta += h * std::sqrt(h_beta_sq(s.beta.size())) * pc.xi_beta_chol *
              standard_normal(s.beta.size(), rng);
  p.log_theta = s.log_theta;
  if (s.log_theta.size() > 0 && !cfg.fix_theta) {
    const double scale = h * std::sqrt(cfg.c * h_theta_sq(s.log_theta.size()));
    const Vector z = standard_normal(s.log_theta.size(), rng);
    p.log_theta += scale * (pc.xi_theta.array().sqrt() * z.array()).matrix();
  }
  return p;
}

/// State at a proposal, evaluated against the target.
template <SamplerTarget T>
SamplerState evaluate_at(T& target, const Proposal& p, const SamplerState& like,
                         const Priors& pr) {
  SamplerState s = like;
  s.gamma = p.gamma;
  s.beta = p.beta;
  s.log_theta = p.log_theta;
  s.eval = target.evaluate(s.gamma, s.beta, s.log_theta);
  s.log_post = log_posterior(s, pr);
  return s;
}

/// log of pi(z*) q(z | z*) / (pi(z) q(z* | z)); the theta random walk is
/// symmetric and drops out.
inline double acceptance_log_ratio(const SamplerState& cur, const SamplerState& prop,
                                   const Preconditioner& pc, const SamplerConfig& cfg) {
  if (!(prop.log_post > -std::numeric_limits<double>::infinity()) ||
      std::isnan(prop.log_post))
    return -std::numeric_limits<double>::infinity();
  const double h = cur.h;
  const Proposal to_prop{prop.gamma, prop.beta, prop.log_theta};
  const Proposal to_cur{cur.gamma, cur.beta, cur.log_theta};
  return prop.log_post - cur.log_post + detail::log_q(to_cur, prop, h, pc, cfg) -
         detail::log_q(to_prop, cur, h, pc, cfg);
}

/// Accept or reject; returns the acceptance probability actually used.
inline double mh_accept(SamplerState& cur, SamplerState&& prop, const Preconditioner& pc,
                        const SamplerConfig& cfg, Rng& rng, bool* accepted = nullptr) {
  const double log_ratio = acceptance_log_ratio(cur, prop, pc, cfg);
  const double alpha = log_ratio >= 0 ? 1.0 : std::exp(log_ratio);
  const bool ok = log_ratio >= 0 || uniform01(rng) < alpha;
  if (ok) {
    const double h = cur.h;
    const long it = cur.iteration, acc = cur.accepted;
    const double sa = cur.sum_alpha;
    cur = std::move(prop);
    cur.h = h;
    cur.iteration = it;
    cur.accepted = acc + 1;
    cur.sum_alpha = sa;
  }
  if (accepted) *accepted = ok;
  return alpha;
}

/// Robbins-Monro step on log h towards the target acceptance rate, with
/// gain a / sqrt(i).
inline double adapt_h(double h, double alpha, long iteration, const SamplerConfig& cfg) {
  const double eta = cfg.adapt_a / std::sqrt(static_cast<double>(std::max(1L, iteration)));
  return h * std::exp(eta * (alpha - cfg.target_accept));
}

// ---------------------------------------------------------------------------
// Aggregated counts

/// Distribute each region's total over its cells, multinomially with
/// probabilities proportional to the cell means. Cells outside every region
/// get zero.
inline std::vector<double> gibbs_multinomial_step(const RegionMask& mask,
                                                  std::span<const long> totals,
                                                  std::span<const double> cell_means,
                                                  std::size_t n_cells, Rng& rng) {
  if (totals.size() != mask.cells.size())
    throw InvalidInput("gibbs step: one total per region required");
  std::vector<double> out(n_cells, 0.0);
  for (std::size_t r = 0; r < mask.cells.size(); ++r) {
    long remaining = totals[r];
    if (remaining < 0) throw InvalidInput("gibbs step: negative region total");
    if (remaining == 0) continue;
    const auto& cells = mask.cells[r];
    double mass = 0.0;
    for (std::size_t k : cells) {
      if (!(cell_means[k] >= 0.0) || !std::isfinite(cell_means[k]))
        throw InvalidInput("gibbs step: cell means must be finite and >= 0");
      mass += cell_means[k];
    }
    if (!(mass > 0.0))
      throw DegenerateRegion("gibbs step: region " + std::to_string(r + 1) +
                             " has a positive total but zero mean everywhere");
    // Sequential binomial decomposition of the multinomial.
    for (std::size_t j = 0; j < cells.size() && remaining > 0; ++j) {
      const std::size_t k = cells[j];
      long n;
      if (j + 1 == cells.size() || mass <= cell_means[k]) {
        n = remaining;
      } else {
        const double p = std::clamp(cell_means[k] / mass, 0.0, 1.0);
        n = std::binomial_distribution<long>(remaining, p)(rng);
      }
      out[k] = static_cast<double>(n);
      remaining -= n;
      mass -= cell_means[k];
    }
  }
  return out;
}

/// Unitype target whose cell counts are latent given region totals; the
/// chain refreshes them by a multinomial Gibbs step every iteration and
/// audits that every region total is preserved.
class AggregatedTarget {
 public:
  AggregatedTarget(UnitypeModel model, RegionPartition partition)
      : partition_(std::move(partition)),
        mask_(region_mask(partition_, model.grid)),
        inner_(prepare(std::move(model), partition_, mask_), initial_counts()) {}

  Eigen::Index gamma_dim() const { return inner_.gamma_dim(); }
  Eigen::Index beta_dim() const { return inner_.beta_dim(); }
  Eigen::Index theta_dim() const { return inner_.theta_dim(); }
  TargetEval evaluate(const Vector& g, const Vector& b, const Vector& t) {
    return inner_.evaluate(g, b, t);
  }
  std::vector<Vector> fields(const Vector& g, const Vector& t) { return inner_.fields(g, t); }
  Matrix beta_information() const { return inner_.beta_information(); }

  const UnitypeTarget& inner() const { return inner_; }
  const RegionMask& mask() const { return mask_; }
  const RegionPartition& partition() const { return partition_; }
  long audits() const { return audits_; }

  /// Draw the augmentation step from its own stream instead of the chain's.
  void use_stream(Rng rng) { stream_ = std::move(rng); }

  /// Gibbs step for the cell counts given the current cell means.
  void augment(const TargetEval& current, Rng& chain_rng) {
    Rng& rng = stream_ ? *stream_ : chain_rng;
    std::vector<double> counts =
        gibbs_multinomial_step(mask_, partition_.region_totals,
                               std::span<const double>(current.mu[0].data(),
                                                       static_cast<std::size_t>(current.mu[0].size())),
                               inner_.model().grid.n_obs(), rng);
    audit(counts);
    inner_.set_counts(std::move(counts));
  }

  /// Throws if any region total differs from the observed one.
  void audit(const std::vector<double>& counts) {
    for (std::size_t r = 0; r < mask_.cells.size(); ++r) {
      double s = 0.0;
      for (std::size_t k : mask_.cells[r]) s += counts[k];
      if (s != static_cast<double>(partition_.region_totals[r]))
        throw NumericalError("aggregation audit failed for region " + std::to_string(r + 1));
    }
    for (std::size_t k : mask_.outside)
      if (counts[k] != 0.0) throw NumericalError("aggregation audit: count outside regions");
    ++audits_;
  }

 private:
  static UnitypeModel prepare(UnitypeModel m, const RegionPartition& part,
                              const RegionMask& mask) {
    if (!part.offsets.empty()) m.offset = Eigen::Map<const Vector>(
        part.offsets.data(), static_cast<Eigen::Index>(part.offsets.size()));
    m.observed.assign(m.grid.n_obs(), 1);
    for (std::size_t k : mask.outside) m.observed[k] = 0;
    return m;
  }

  // Start from totals spread in proportion to the offsets.
  std::vector<double> initial_counts() const {
    std::vector<double> counts(partition_.region_of_cell.size(), 0.0);
    for (std::size_t r = 0; r < mask_.cells.size(); ++r) {
      long remaining = partition_.region_totals[r];
      const auto& cells = mask_.cells[r];
      if (remaining == 0 || cells.empty()) continue;
      double mass = 0.0;
      for (std::size_t k : cells) mass += weight(k);
      std::vector<std::pair<double, std::size_t>> frac;
      for (std::size_t k : cells) {
        const double share = mass > 0 ? remaining * weight(k) / mass : 0.0;
        counts[k] = std::floor(share);
        frac.emplace_back(share - counts[k], k);
      }
      long placed = 0;
      for (std::size_t k : cells) placed += static_cast<long>(counts[k]);
      std::sort(frac.begin(), frac.end(), std::greater<>());
      for (long j = 0; j < remaining - placed; ++j)
        counts[frac[static_cast<std::size_t>(j) % frac.size()].second] += 1.0;
    }
    return counts;
  }

  double weight(std::size_t k) const {
    return partition_.offsets.empty() ? 1.0 : partition_.offsets[k];
  }

  RegionPartition partition_;
  RegionMask mask_;
  UnitypeTarget inner_;
  long audits_ = 0;
  std::optional<Rng> stream_;
};

template <class T>
concept AugmentedTarget = SamplerTarget<T> && requires(T& t, const TargetEval& e, Rng& r) {
  t.augment(e, r);
};

// ---------------------------------------------------------------------------
// Chain

/// One retained draw. sigma/phi hold one entry per covariance block.
struct Draw {
  long iteration = 0;
  double log_post = 0.0;
  Vector beta;
  Vector sigma, phi;
  std::vector<Vector> fields;  // S on observation cells, per type or step
  Vector gamma;                // whitened coefficients, if requested
};

struct PosteriorSamples {
  std::size_t n_obs = 0;
  std::vector<Draw> draws;

  std::size_t size() const { return draws.size(); }
  bool empty() const { return draws.empty(); }
  std::size_t n_fields() const { return draws.empty() ? 0 : draws.front().fields.size(); }
};

struct ChainResult {
  PosteriorSamples samples;
  std::vector<double> alpha_trace;     // acceptance probability per iteration
  std::vector<double> log_post_trace;  // current log posterior per iteration
  std::vector<double> h_trace;
  SamplerState final_state;
  long overflow_rejections = 0;
  long embedding_rejections = 0;  // proposals whose covariance does not embed
  long augmentation_audits = 0;

  /// Mean acceptance probability over the last `fraction` of iterations.
  double trailing_acceptance(double fraction = 0.2) const {
    const std::size_t n = alpha_trace.size();
    const std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
    if (n == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = n - std::min(k, n); i < n; ++i) s += alpha_trace[i];
    return s / static_cast<double>(std::min(k, n));
  }
};

/// Initial values: gamma = 0, supplied beta and log theta.
inline SamplerState initial_state(Eigen::Index gamma_dim, Vector beta, Vector log_theta,
                                  double h0) {
  SamplerState s;
  s.gamma = Vector::Zero(gamma_dim);
  s.beta = std::move(beta);
  s.log_theta = std::move(log_theta);
  s.h = h0;
  return s;
}

/// beta_0 = log(n / (|A| * mean offset)), other coefficients zero.
inline Vector default_beta_init(const UnitypeModel& model, std::span<const double> counts) {
  double exposure = 0.0, total = 0.0;
  for (std::size_t k = 0; k < model.grid.n_obs(); ++k) {
    if (!model.observed[k]) continue;
    exposure += model.grid.cell_area() * model.offset[static_cast<Eigen::Index>(k)];
    total += counts[k];
  }
  Vector beta = Vector::Zero(model.beta.size());
  beta[0] = std::log(std::max(total, 0.5) / exposure);
  return beta;
}

/// Shrink each block's phi by 10% steps until its covariance embeds on the
/// grid, so a chain can start there.
inline Vector embeddable_start(const CovarianceModel& base, const GridSpec& grid, Vector log_theta) {
  FftWorkspace ws(grid.ext_ny(), grid.ext_nx());
  for (Eigen::Index b = 0; b + 1 < log_theta.size(); b += 2) {
    for (int tries = 0;; ++tries) {
      const CovarianceModel c = with_log_theta(base, log_theta[b], log_theta[b + 1]);
      try {
        spectral_check(circulant_base(c, grid), grid.ext_ny(), grid.ext_nx(), ws);
        break;
      } catch (const EmbeddingFailure&) {
        if (tries == 200) throw;
        log_theta[b + 1] += std::log(0.9);
      }
    }
  }
  return log_theta;
}

template <class T>
Draw record_draw(T& target, const SamplerState& s, bool with_fields, bool with_gamma = false) {
  Draw d;
  d.iteration = s.iteration;
  d.log_post = s.log_post;
  d.beta = s.beta;
  const Eigen::Index nb = s.log_theta.size() / 2;
  d.sigma.resize(nb);
  d.phi.resize(nb);
  for (Eigen::Index j = 0; j < nb; ++j) {
    d.sigma[j] = std::exp(s.log_theta[2 * j]);
    d.phi[j] = std::exp(s.log_theta[2 * j + 1]);
  }
  if (with_fields) d.fields = target.fields(s.gamma, s.log_theta);
  if (with_gamma) d.gamma = s.gamma;
  return d;
}

/// Burn-in then sampling with thinning. Proposals whose cell means overflow,
/// or whose covariance does not embed on the extended grid, are rejected and
/// counted.
template <SamplerTarget T>
ChainResult run_chain(T& target, const SamplerConfig& cfg, SamplerState init, Rng& rng) {
  cfg.validate();
  if (init.gamma.size() != target.gamma_dim() || init.beta.size() != target.beta_dim() ||
      init.log_theta.size() != target.theta_dim())
    throw InvalidInput("run_chain: initial state does not match the target dimensions");
  const Preconditioner pc =
      Preconditioner::make(target.beta_information(), target.theta_dim(), cfg.priors);
  ChainResult out;
  SamplerState cur = std::move(init);
  cur.iteration = 0;
  cur.accepted = 0;
  cur.sum_alpha = 0.0;
  cur.eval = target.evaluate(cur.gamma, cur.beta, cur.log_theta);
  cur.log_post = log_posterior(cur, cfg.priors);
  if (!std::isfinite(cur.log_post))
    throw NumericalError("run_chain: initial state has zero posterior density");

  const long total = cfg.burnin + cfg.iterations;
  out.alpha_trace.reserve(static_cast<std::size_t>(total));
  out.log_post_trace.reserve(static_cast<std::size_t>(total));
  out.h_trace.reserve(static_cast<std::size_t>(total));
  out.samples.draws.reserve(static_cast<std::size_t>(cfg.iterations / cfg.thin));

  for (long i = 1; i <= total; ++i) {
    cur.iteration = i;
    if constexpr (AugmentedTarget<T>) {
      target.augment(cur.eval, rng);
      cur.eval = target.evaluate(cur.gamma, cur.beta, cur.log_theta);
      cur.log_post = log_posterior(cur, cfg.priors);
    }
    Proposal p = mala_rw_propose(cur, pc, cfg, rng);
    double alpha = 0.0;
    try {
      SamplerState prop = evaluate_at(target, p, cur, cfg.priors);
      if (std::isfinite(prop.eval.loglik) &&
          (!prop.eval.grad_gamma.allFinite() || !prop.eval.grad_beta.allFinite()))
        throw NumericalError("mcmc: non-finite gradient at iteration " + std::to_string(i));
      alpha = mh_accept(cur, std::move(prop), pc, cfg, rng);
    } catch (const NumericalOverflow&) {
      ++out.overflow_rejections;
      alpha = 0.0;
    } catch (const EmbeddingFailure&) {
      ++out.embedding_rejections;
      alpha = 0.0;
    }
    cur.sum_alpha += alpha;
    if (i <= cfg.burnin || cfg.adapt_after_burnin) cur.h = adapt_h(cur.h, alpha, i, cfg);
    out.alpha_trace.push_back(alpha);
    out.log_post_trace.push_back(cur.log_post);
    out.h_trace.push_back(cur.h);
    if (i > cfg.burnin && (i - cfg.burnin) % cfg.thin == 0)
      out.samples.draws.push_back(record_draw(target, cur, cfg.record_fields, cfg.record_gamma));
  }
  if constexpr (AugmentedTarget<T>) out.augmentation_audits = target.audits();
  out.samples.n_obs = out.samples.draws.empty() || out.samples.draws[0].fields.empty()
                          ? 0
                          : static_cast<std::size_t>(out.samples.draws[0].fields[0].size());
  out.final_state = std::move(cur);
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Sample autocorrelations at lags 1..max_lag; nullopt for a constant series.
inline std::optional<std::vector<double>> autocorrelation(std::span<const double> x,
                                                          int max_lag) {
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0;
  for (double v : x) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) return std::nullopt;
  std::vector<double> acf;
  for (int k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(k) < n; ++t)
      num += (x[t] - mean) * (x[t + static_cast<std::size_t>(k)] - mean);
    acf.push_back(static_cast<std::size_t>(k) < n ? num / denom : 0.0);
  }
  return acf;
}

/// Monte Carlo standard error of the mean by non-overlapping batch means.
inline double batch_means_se(std::span<const double> x, int n_batches = 25) {
  const std::size_t n = x.size();
  const std::size_t b = n / static_cast<std::size_t>(n_batches);
  if (b < 1) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> means;
  for (int j = 0; j < n_batches; ++j) {
    double s = 0.0;
    for (std::size_t t = 0; t < b; ++t) s += x[static_cast<std::size_t>(j) * b + t];
    means.push_back(s / static_cast<double>(b));
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / n_batches;
  double v = 0.0;
  for (double m : means) v += (m - grand) * (m - grand);
  v /= (n_batches - 1);
  return std::sqrt(v / n_batches);
}

struct ParameterDiagnostics {
  std::string name;
  std::vector<double> acf;  // lags 1..20
  bool degenerate = false;
  bool poor_mixing = false;  // lag-1 autocorrelation above 0.5
  double mean = 0.0;
  std::vector<double> trace_head;  // first few retained values
};

struct Diagnostics {
  std::size_t n_samples = 0;
  std::vector<ParameterDiagnostics> parameters;
  double acceptance = std::numeric_limits<double>::quiet_NaN();
  double trailing_acceptance = std::numeric_limits<double>::quiet_NaN();
  double target_accept = 0.574;
  double random_walk_reference = kRandomWalkAccept;
};

inline ParameterDiagnostics diagnose_series(std::string name, std::span<const double> x,
                                            int max_lag = 20) {
  ParameterDiagnostics p;
  p.name = std::move(name);
  p.mean = x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  auto acf = autocorrelation(x, max_lag);
  if (!acf) {
    p.degenerate = true;
  } else {
    p.acf = std::move(*acf);
    p.poor_mixing = p.acf.front() > 0.5;
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(x.size(), 10); ++i)
    p.trace_head.push_back(x[i]);
  return p;
}

/// Lag-1..20 autocorrelations of every scalar parameter in the thinned chain.
inline Diagnostics diagnostics(const PosteriorSamples& samples) {
  if (samples.size() < 10)
    throw InsufficientSamples("diagnostics: at least 10 retained samples required");
  Diagnostics d;
  d.n_samples = samples.size();
  auto column = [&](auto&& get) {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& dr : samples.draws) v.push_back(get(dr));
    return v;
  };
  d.parameters.push_back(
      diagnose_series("logpost", column([](const Draw& x) { return x.log_post; })));
  const Eigen::Index nb = samples.draws[0].beta.size();
  for (Eigen::Index j = 0; j < nb; ++j)
    d.parameters.push_back(diagnose_series(
        nb == 1 ? "beta" : "beta_" + std::to_string(j),
        column([j](const Draw& x) { return x.beta[j]; })));
  const Eigen::Index nt = samples.draws[0].sigma.size();
  for (Eigen::Index j = 0; j < nt; ++j) {
    const std::string suffix = nt == 1 ? "" : "_" + std::to_string(j + 1);
    d.parameters.push_back(diagnose_series(
        "sigma" + suffix, column([j](const Draw& x) { return x.sigma[j]; })));
    d.parameters.push_back(
        diagnose_series("phi" + suffix, column([j](const Draw& x) { return x.phi[j]; })));
  }
  return d;
}

inline Diagnostics diagnostics(const ChainResult& chain) {
  Diagnostics d = diagnostics(chain.samples);
  d.acceptance = chain.final_state.mean_alpha();
  d.trailing_acceptance = chain.trailing_acceptance(0.2);
  return d;
}

}  // namespace lgcp

#endif  // LGCP_MCMC_HPP
