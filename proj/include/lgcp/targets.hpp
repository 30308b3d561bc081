#ifndef LGCP_TARGETS_HPP
#define LGCP_TARGETS_HPP

#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lgcp/covariance.hpp"
#include "lgcp/gaussian_field.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/models.hpp"

// Posterior targets in whitened coordinates. A target owns its data and a
// transform workspace, so each chain needs its own copy.

namespace lgcp {

/// Data log-likelihood at (gamma, beta, log theta) and its gradients with
/// respect to gamma (already transported through the covariance root) and
/// beta. Priors are added by the sampler.
struct TargetEval {
  double loglik = -std::numeric_limits<double>::infinity();
  Vector grad_gamma;
  Vector grad_beta;
  std::vector<Vector> mu;  // cell means on observation cells, per block
};

template <class T>
concept SamplerTarget = requires(T& t, const T& ct, const Vector& v) {
  { ct.gamma_dim() } -> std::convertible_to<Eigen::Index>;
  { ct.beta_dim() } -> std::convertible_to<Eigen::Index>;
  { ct.theta_dim() } -> std::convertible_to<Eigen::Index>;
  { t.evaluate(v, v, v) } -> std::same_as<TargetEval>;
  { t.fields(v, v) } -> std::same_as<std::vector<Vector>>;
  { ct.beta_information() } -> std::convertible_to<Matrix>;
};

/// Covariance model with (sigma, phi) taken from (log sigma, log phi).
inline CovarianceModel with_log_theta(CovarianceModel base, double log_sigma,
                                      double log_phi) {
  base.sigma2 = std::exp(2.0 * log_sigma);
  base.phi = std::exp(log_phi);
  return base;
}

/// Remembers the square roots for the last two parameter values, which is
/// what a Metropolis-Hastings chain alternates between.
class SqrtCache {
 public:
  const SpectralSqrt& get(const CovarianceModel& cov, const GridSpec& grid,
                          FftWorkspace& ws) {
    for (auto& e : entries_)
      if (e && e->first.sigma2 == cov.sigma2 && e->first.phi == cov.phi &&
          e->first.kappa == cov.kappa && e->first.family == cov.family)
        return e->second;
    auto& slot = entries_[next_];
    next_ = 1 - next_;
    slot.reset();
    slot.emplace(cov, make_spectral_sqrt(cov, grid, ws));
    return slot->second;
  }

 private:
  std::optional<std::pair<CovarianceModel, SpectralSqrt>> entries_[2];
  int next_ = 0;
};

namespace detail {
inline std::vector<Vector> on_observation_cells(const GridSpec& g,
                                                const std::vector<Vector>& ext) {
  std::vector<Vector> out;
  for (const auto& f : ext) {
    Vector o(static_cast<Eigen::Index>(g.n_obs()));
    for (std::size_t k = 0; k < g.n_obs(); ++k)
      o[static_cast<Eigen::Index>(k)] = f[static_cast<Eigen::Index>(g.ext_of_obs(k))];
    out.push_back(std::move(o));
  }
  return out;
}
}  // namespace detail

/// Unitype target; also the inner target for aggregated counts.
class UnitypeTarget {
 public:
  UnitypeTarget(UnitypeModel model, std::vector<double> counts)
      : model_(std::move(model)),
        counts_(std::move(counts)),
        ws_(model_.grid.ext_ny(), model_.grid.ext_nx()) {
    model_.validate();
    detail::check_counts(counts_, model_.grid.n_obs());
  }

  Eigen::Index gamma_dim() const {
    return model_.field ? static_cast<Eigen::Index>(model_.grid.n_ext()) : 0;
  }
  Eigen::Index beta_dim() const { return model_.beta.size(); }
  Eigen::Index theta_dim() const { return model_.field ? 2 : 0; }

  const UnitypeModel& model() const { return model_; }
  const std::vector<double>& counts() const { return counts_; }
  void set_counts(std::vector<double> counts) {
    detail::check_counts(counts, model_.grid.n_obs());
    counts_ = std::move(counts);
  }

  /// Model at these parameters (beta and covariance replaced).
  UnitypeModel model_at(const Vector& beta, const Vector& log_theta) const {
    UnitypeModel m = model_;
    m.beta = beta;
    if (m.field) m.cov = with_log_theta(m.cov, log_theta[0], log_theta[1]);
    return m;
  }

  TargetEval evaluate(const Vector& gamma, const Vector& beta, const Vector& log_theta) {
    const UnitypeModel m = model_at(beta, log_theta);
    TargetEval out;
    if (!m.field) {
      LogLik ll = cell_loglik_field(m, Vector(), counts_);
      out.loglik = ll.value;
      out.grad_gamma = Vector(0);
      out.grad_beta = std::move(ll.d_beta);
      out.mu.push_back(std::move(ll.mu));
      return out;
    }
    const SpectralSqrt& root = cache_.get(m.cov, m.grid, ws_);
    const Vector s = field_from_whitened(root, gamma, m.mean(), ws_);
    LogLik ll = cell_loglik_field(m, s, counts_);
    out.loglik = ll.value;
    out.grad_gamma = grad_transport(root, ll.d_field, ws_);
    out.grad_beta = std::move(ll.d_beta);
    out.mu.push_back(std::move(ll.mu));
    return out;
  }

  std::vector<Vector> fields(const Vector& gamma, const Vector& log_theta) {
    if (!model_.field)
      return {Vector::Zero(static_cast<Eigen::Index>(model_.grid.n_obs()))};
    const CovarianceModel cov = with_log_theta(model_.cov, log_theta[0], log_theta[1]);
    const SpectralSqrt& root = cache_.get(cov, model_.grid, ws_);
    const double mean = model_.mean_offset ? field_mean(cov) : 0.0;
    return detail::on_observation_cells(model_.grid,
                                        {field_from_whitened(root, gamma, mean, ws_)});
  }

  /// Z'WZ with W the cell means of a constant-rate fit; approximates the
  /// Fisher information for beta.
  Matrix beta_information() const {
    const GridSpec& g = model_.grid;
    double exposure = 0.0, total = 0.0;
    for (std::size_t k = 0; k < g.n_obs(); ++k) {
      if (!model_.observed[k]) continue;
      exposure += g.cell_area() * model_.offset[static_cast<Eigen::Index>(k)];
      total += counts_[k];
    }
    const double rate = total > 0 && exposure > 0 ? total / exposure : 1.0;
    Vector w(static_cast<Eigen::Index>(g.n_obs()));
    for (std::size_t k = 0; k < g.n_obs(); ++k)
      w[static_cast<Eigen::Index>(k)] =
          model_.observed[k] ? g.cell_area() * model_.offset[static_cast<Eigen::Index>(k)] * rate
                             : 0.0;
    return model_.design.transpose() * w.asDiagonal() * model_.design;
  }

 private:
  UnitypeModel model_;
  std::vector<double> counts_;
  FftWorkspace ws_;
  SqrtCache cache_;
};

/// Multitype target: m whitened blocks, m intercepts, shared (2) or
/// per-type (2m) covariance parameters ordered (log sigma_k, log phi_k).
class MultitypeTarget {
 public:
  MultitypeTarget(MultitypeModel model, std::vector<std::vector<double>> typed_counts)
      : model_(std::move(model)),
        counts_(std::move(typed_counts)),
        ws_(model_.grid.ext_ny(), model_.grid.ext_nx()),
        caches_(model_.covs.size()) {
    model_.validate();
    if (static_cast<int>(counts_.size()) != model_.m())
      throw InvalidInput("multitype target: need one count vector per type");
    for (const auto& c : counts_) detail::check_counts(c, model_.grid.n_obs());
  }

  Eigen::Index gamma_dim() const {
    return static_cast<Eigen::Index>(model_.grid.n_ext()) * model_.m();
  }
  Eigen::Index beta_dim() const { return model_.m(); }
  Eigen::Index theta_dim() const { return 2 * static_cast<Eigen::Index>(model_.covs.size()); }
  const MultitypeModel& model() const { return model_; }

  TargetEval evaluate(const Vector& gamma, const Vector& beta, const Vector& log_theta) {
    MultitypeModel m = model_at(beta, log_theta);
    const auto n = static_cast<Eigen::Index>(m.grid.n_ext());
    std::vector<const SpectralSqrt*> roots;
    for (std::size_t j = 0; j < m.covs.size(); ++j)
      roots.push_back(&caches_[j].get(m.covs[j], m.grid, ws_));
    std::vector<Vector> fields;
    for (int k = 0; k < m.m(); ++k) {
      const SpectralSqrt& root = *roots[roots.size() == 1 ? 0 : static_cast<std::size_t>(k)];
      const double mean = m.mean_offset ? field_mean(m.cov(k)) : 0.0;
      fields.push_back(field_from_whitened(root, gamma.segment(k * n, n), mean, ws_));
    }
    MultiLogLik ll = multitype_loglik_fields(m, fields, counts_);
    TargetEval out;
    out.loglik = ll.value;
    out.grad_gamma.resize(gamma_dim());
    for (int k = 0; k < m.m(); ++k) {
      const SpectralSqrt& root = *roots[roots.size() == 1 ? 0 : static_cast<std::size_t>(k)];
      out.grad_gamma.segment(k * n, n) = grad_transport(root, ll.d_field[k], ws_);
    }
    out.grad_beta = std::move(ll.d_beta);
    out.mu = std::move(ll.mu);
    return out;
  }

  std::vector<Vector> fields(const Vector& gamma, const Vector& log_theta) {
    MultitypeModel m = model_at(model_.beta, log_theta);
    const auto n = static_cast<Eigen::Index>(m.grid.n_ext());
    std::vector<Vector> ext;
    for (int k = 0; k < m.m(); ++k) {
      const std::size_t j = m.covs.size() == 1 ? 0 : static_cast<std::size_t>(k);
      const SpectralSqrt& root = caches_[j].get(m.covs[j], m.grid, ws_);
      const double mean = m.mean_offset ? field_mean(m.cov(k)) : 0.0;
      ext.push_back(field_from_whitened(root, gamma.segment(k * n, n), mean, ws_));
    }
    return detail::on_observation_cells(m.grid, ext);
  }

  Matrix beta_information() const {
    Matrix info = Matrix::Zero(model_.m(), model_.m());
    const double exposure = model_.grid.window().area();
    for (int k = 0; k < model_.m(); ++k) {
      double total = 0.0;
      for (double y : counts_[static_cast<std::size_t>(k)]) total += y;
      info(k, k) = total > 0 ? total : exposure;
    }
    return info;
  }

 private:
  MultitypeModel model_at(const Vector& beta, const Vector& log_theta) const {
    MultitypeModel m = model_;
    m.beta = beta;
    for (std::size_t j = 0; j < m.covs.size(); ++j)
      m.covs[j] = with_log_theta(m.covs[j], log_theta[static_cast<Eigen::Index>(2 * j)],
                                 log_theta[static_cast<Eigen::Index>(2 * j + 1)]);
    return m;
  }

  MultitypeModel model_;
  std::vector<std::vector<double>> counts_;
  FftWorkspace ws_;
  std::vector<SqrtCache> caches_;
};

/// Separable spatio-temporal target over whitened innovations; the temporal
/// coefficient is held fixed and there are no regression coefficients.
class SpaceTimeTarget {
 public:
  SpaceTimeTarget(STModel model, std::vector<std::vector<double>> counts)
      : model_(std::move(model)),
        counts_(std::move(counts)),
        ws_(model_.grid.ext_ny(), model_.grid.ext_nx()) {
    model_.validate();
    if (static_cast<int>(counts_.size()) != model_.steps)
      throw InvalidInput("spacetime target: need one count vector per step");
    for (const auto& c : counts_) detail::check_counts(c, model_.grid.n_obs());
  }

  Eigen::Index gamma_dim() const {
    return static_cast<Eigen::Index>(model_.grid.n_ext()) * model_.steps;
  }
  Eigen::Index beta_dim() const { return 0; }
  Eigen::Index theta_dim() const { return 2; }
  const STModel& model() const { return model_; }

  TargetEval evaluate(const Vector& gamma, const Vector&, const Vector& log_theta) {
    const STModel m = model_at(log_theta);
    const SpectralSqrt& root = cache_.get(m.cov.spatial, m.grid, ws_);
    const std::vector<Vector> fields = st_evolve(m, root, gamma, ws_);
    STLogLik ll = st_loglik_fields(m, fields, counts_);
    TargetEval out;
    out.loglik = ll.value;
    out.grad_gamma = st_adjoint(m, root, ll.d_field, ws_);
    out.grad_beta = Vector(0);
    out.mu = std::move(ll.mu);
    return out;
  }

  std::vector<Vector> fields(const Vector& gamma, const Vector& log_theta) {
    const STModel m = model_at(log_theta);
    const SpectralSqrt& root = cache_.get(m.cov.spatial, m.grid, ws_);
    return detail::on_observation_cells(m.grid, st_evolve(m, root, gamma, ws_));
  }

  Matrix beta_information() const { return Matrix(0, 0); }

 private:
  STModel model_at(const Vector& log_theta) const {
    STModel m = model_;
    m.cov.spatial = with_log_theta(m.cov.spatial, log_theta[0], log_theta[1]);
    return m;
  }

  STModel model_;
  std::vector<std::vector<double>> counts_;
  FftWorkspace ws_;
  SqrtCache cache_;
};

}  // namespace lgcp

#endif  // LGCP_TARGETS_HPP
