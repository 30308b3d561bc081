#include <gtest/gtest.h>

#include <cmath>

#include "dense.hpp"
#include "lgcp/gaussian_field.hpp"

using namespace lgcp;

namespace {

struct Fixture {
  GridSpec g = GridSpec::build({0, 0, 4, 4}, 4, 4);
  CovarianceModel m = CovarianceModel::exponential(1.5, 1.2);
  FftWorkspace ws{g.ext_ny(), g.ext_nx()};
  SpectralSqrt root = make_spectral_sqrt(m, g, ws);
};

}  // namespace

TEST(GaussianField, SqrtSquaredIsCovariance) {
  Fixture f;
  Rng rng = make_stream(1, "field");
  const Vector x = standard_normal(static_cast<Eigen::Index>(f.g.n_ext()), rng);
  const Vector twice = apply_sqrt_cov(f.root, apply_sqrt_cov(f.root, x, f.ws), f.ws);
  const Vector dense = lgcp::testing::dense_torus_cov(f.m, f.g) * x;
  EXPECT_LT((twice - dense).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(GaussianField, SqrtIsSelfAdjoint) {
  Fixture f;
  Rng rng = make_stream(2, "field");
  const auto n = static_cast<Eigen::Index>(f.g.n_ext());
  const Vector a = standard_normal(n, rng), b = standard_normal(n, rng);
  EXPECT_NEAR(apply_sqrt_cov(f.root, a, f.ws).dot(b), a.dot(grad_transport(f.root, b, f.ws)), 1e-11);
}

TEST(GaussianField, InverseSqrtRoundTrip) {
  Fixture f;
  Rng rng = make_stream(3, "field");
  const Vector x = standard_normal(static_cast<Eigen::Index>(f.g.n_ext()), rng);
  const Vector back = apply_inverse_sqrt_cov(f.root, apply_sqrt_cov(f.root, x, f.ws), f.ws);
  EXPECT_LT((back - x).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(GaussianField, LogDetMatchesCholesky) {
  Fixture f;
  Eigen::LLT<Eigen::MatrixXd> llt(lgcp::testing::dense_torus_cov(f.m, f.g));
  ASSERT_EQ(llt.info(), Eigen::Success);
  const double dense = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  EXPECT_NEAR(log_det_cov(f.root), dense, 1e-9 * std::abs(dense));
}

TEST(GaussianField, MeanOffsetGivesUnitExpectation) {
  auto g = GridSpec::build({0, 0, 10, 10}, 8, 8);
  const auto m = CovarianceModel::exponential(0.8, 2.0);
  FftWorkspace ws(g.ext_ny(), g.ext_nx());
  Rng rng = make_stream(4, "field");
  const int draws = 4000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const LatentField s = sample_field(m, g, rng, ws);
    const double v = std::exp(s.values[0]);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
  EXPECT_LT(std::abs(mean - 1.0), 4 * se);
  EXPECT_DOUBLE_EQ(field_mean(m), -0.4);
}

TEST(GaussianField, SameStreamSameField) {
  auto g = GridSpec::build({0, 0, 10, 10}, 8, 8);
  const auto m = CovarianceModel::matern(1.0, 0.8, 1.5);
  Rng a = make_stream(9, "field", 2), b = make_stream(9, "field", 2), c = make_stream(9, "field", 3);
  const Vector sa = sample_field(m, g, a).values;
  EXPECT_EQ(sa, sample_field(m, g, b).values);
  EXPECT_NE(sa, sample_field(m, g, c).values);
}
