#ifndef LGCP_GAUSSIAN_FIELD_HPP
#define LGCP_GAUSSIAN_FIELD_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lgcp/covariance.hpp"
#include "lgcp/fft.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/rng.hpp"

namespace lgcp {

using Vector = Eigen::VectorXd;

/// Standardised coefficients over the extended grid; prior N(0, I).
struct WhitenedField {
  Vector gamma;
};

/// Correlated field S over the extended grid.
struct LatentField {
  Vector values;
  WhitenedField whitened;
};

/// Symmetric square root of a block-circulant covariance, held as the
/// square roots of its (clamped) eigenvalues. Applying it is
/// F^-1 diag(sqrt(lambda)) F; the operator is self-adjoint, so the same
/// routine maps white noise to the field and field-space gradients back to
/// whitened space.
struct SpectralSqrt {
  int rows = 0, cols = 0;
  std::vector<double> sqrt_eig;  // half spectrum, already divided by rows*cols
  Spectrum spectrum;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

inline SpectralSqrt make_spectral_sqrt(std::span<const double> base_row,
                                       int rows, int cols, FftWorkspace& ws) {
  SpectralSqrt out;
  out.rows = rows;
  out.cols = cols;
  out.spectrum = spectral_check(base_row, rows, cols, ws);
  const double n = static_cast<double>(rows) * cols;
  out.sqrt_eig.resize(out.spectrum.half.size());
  for (std::size_t i = 0; i < out.sqrt_eig.size(); ++i)
    out.sqrt_eig[i] = std::sqrt(std::max(0.0, out.spectrum.half[i])) / n;
  return out;
}

inline SpectralSqrt make_spectral_sqrt(const CovarianceModel& model,
                                       const GridSpec& grid, FftWorkspace& ws) {
  const auto base = circulant_base(model, grid);
  return make_spectral_sqrt(base, grid.ext_ny(), grid.ext_nx(), ws);
}

namespace detail {
inline void spectral_scale(const std::vector<double>& scale,
                           std::span<const double> in, std::span<double> out,
                           FftWorkspace& ws) {
  std::copy(in.begin(), in.end(), ws.real().begin());
  ws.forward();
  auto spec = ws.spectrum();
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= scale[i];
  ws.backward();
  std::copy(ws.real().begin(), ws.real().end(), out.begin());
}
}  // namespace detail

/// out = Sigma^{1/2} in, with no mean offset.
inline void apply_sqrt_cov(const SpectralSqrt& root, std::span<const double> in,
                           std::span<double> out, FftWorkspace& ws) {
  if (in.size() != root.size() || out.size() != root.size() ||
      ws.rows() != root.rows || ws.cols() != root.cols)
    throw InvalidInput("apply_sqrt_cov: size mismatch");
  detail::spectral_scale(root.sqrt_eig, in, out, ws);
}

inline Vector apply_sqrt_cov(const SpectralSqrt& root, const Vector& in,
                             FftWorkspace& ws) {
  Vector out(in.size());
  apply_sqrt_cov(root, std::span<const double>(in.data(), in.size()),
                 std::span<double>(out.data(), out.size()), ws);
  return out;
}

/// Gradient with respect to the whitened coefficients given a gradient with
/// respect to S: Sigma^{1/2}' g = Sigma^{1/2} g.
inline Vector grad_transport(const SpectralSqrt& root, const Vector& d_field,
                             FftWorkspace& ws) {
  return apply_sqrt_cov(root, d_field, ws);
}

/// Sigma^{-1/2} in. Requires every eigenvalue to be strictly positive.
inline Vector apply_inverse_sqrt_cov(const SpectralSqrt& root, const Vector& in,
                                     FftWorkspace& ws) {
  const double n = static_cast<double>(root.rows) * root.cols;
  std::vector<double> inv(root.sqrt_eig.size());
  for (std::size_t i = 0; i < inv.size(); ++i) {
    const double lam = root.spectrum.half[i];
    if (!(lam > 0.0))
      throw EmbeddingFailure(
          "covariance is singular on the torus; its density is undefined",
          lam < 0 ? -lam : 0.0);
    inv[i] = 1.0 / (std::sqrt(lam) * n);
  }
  Vector out(in.size());
  detail::spectral_scale(inv, std::span<const double>(in.data(), in.size()),
                         std::span<double>(out.data(), out.size()), ws);
  return out;
}

/// log det of the circulant covariance (sum of log eigenvalues).
inline double log_det_cov(const SpectralSqrt& root) {
  double s = 0.0;
  for (double lam : root.spectrum.full()) {
    if (!(lam > 0.0))
      throw EmbeddingFailure("covariance is singular on the torus",
                             lam < 0 ? -lam : 0.0);
    s += std::log(lam);
  }
  return s;
}

/// The field's constant mean, -sigma2/2, so that E[exp S] = 1.
inline double field_mean(const CovarianceModel& model) {
  return -0.5 * model.sigma2;
}

/// Draw S = -sigma2/2 + Sigma^{1/2} Gamma with Gamma ~ N(0, I).
inline LatentField sample_field(const CovarianceModel& model, const GridSpec& grid,
                                Rng& rng, FftWorkspace& ws,
                                bool mean_offset = true) {
  const SpectralSqrt root = make_spectral_sqrt(model, grid, ws);
  LatentField out;
  out.whitened.gamma = standard_normal(static_cast<Eigen::Index>(grid.n_ext()), rng);
  out.values = apply_sqrt_cov(root, out.whitened.gamma, ws);
  if (mean_offset) out.values.array() += field_mean(model);
  return out;
}

inline LatentField sample_field(const CovarianceModel& model, const GridSpec& grid,
                                Rng& rng) {
  FftWorkspace ws(grid.ext_ny(), grid.ext_nx());
  return sample_field(model, grid, rng, ws);
}

}  // namespace lgcp

#endif  // LGCP_GAUSSIAN_FIELD_HPP
