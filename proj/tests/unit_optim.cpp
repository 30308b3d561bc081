#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lgcp/optim.hpp"

using namespace lgcp;

TEST(Optim, Integrate) {
  EXPECT_NEAR(integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi), 2.0, 1e-12);
  EXPECT_NEAR(integrate([](double x) { return std::exp(-x * x); }, -10.0, 10.0),
              std::sqrt(std::numbers::pi), 1e-10);
  EXPECT_EQ(integrate([](double) { return 1.0; }, 3.0, 3.0), 0.0);
}

TEST(Optim, NelderMeadRosenbrock) {
  auto f = [](const std::vector<double>& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  NelderMeadOptions opt;
  opt.max_iterations = 5000;
  const auto r = nelder_mead(f, {-1.2, 1.0}, opt);
  EXPECT_NEAR(r.x[0], 1.0, 1e-3);
  EXPECT_NEAR(r.x[1], 1.0, 2e-3);
  EXPECT_LT(r.value, 1e-6);
}

TEST(Optim, NelderMeadNonFinite) {
  auto f = [](const std::vector<double>& x) {
    return x[0] < 0 ? std::nan("") : (x[0] - 2) * (x[0] - 2);
  };
  const auto r = nelder_mead(f, {1.0});
  EXPECT_NEAR(r.x[0], 2.0, 1e-3);
}
