#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "steel/adam.hpp"

using namespace steel;

namespace {

// Scalar bias-corrected Adam with coupled L2.
struct ScalarAdam {
  double lr, b1, b2, eps, wd;
  double m = 0, v = 0;
  int t = 0;
  double step(double x, double g) {
    g += wd * x;
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST(Adam, ZeroGradientIsFixedPoint) {
  AdamSettings s;
  s.weight_decay = 0;
  Adam adam(s, Shape4{1, 1, 2, 2});
  Tensor4 x(Shape4{1, 1, 2, 2}, {1, -2, 3, 4});
  const auto x0 = x;
  for (int i = 0; i < 5; ++i) adam.step(x, Tensor4(Shape4{1, 1, 2, 2}));
  EXPECT_EQ(x, x0);
  EXPECT_EQ(adam.steps(), 5);
}

TEST(Adam, FirstStepHasMagnitudeLr) {
  AdamSettings s;
  s.weight_decay = 0;
  BasicAdam<double> adam(s, Shape4{1, 1, 1, 1});
  BasicTensor4<double> x(Shape4{1, 1, 1, 1}, {0.0});
  adam.step(x, BasicTensor4<double>(Shape4{1, 1, 1, 1}, {1.0}));
  EXPECT_NEAR(x[0], -1.0 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, TrajectoryMatchesScalarOracle) {
  std::mt19937 rng(1);
  std::normal_distribution<double> n(0, 3);
  AdamSettings s;
  ScalarAdam ref{s.lr, s.beta1, s.beta2, s.eps, s.weight_decay};
  BasicAdam<double> adam(s, Shape4{1, 1, 1, 1});
  BasicTensor4<double> x(Shape4{1, 1, 1, 1}, {5.0});
  double xr = 5.0;
  for (int i = 0; i < 10; ++i) {
    const double g = n(rng);
    adam.step(x, BasicTensor4<double>(Shape4{1, 1, 1, 1}, {g}));
    xr = ref.step(xr, g);
    EXPECT_NEAR(x[0], xr, 1e-6);
  }
}

TEST(Adam, ConstantGradientStepsByLearningRate) {
  AdamSettings s;
  s.lr = 0.5;
  s.weight_decay = 0;
  Adam adam(s, Shape4{1, 1, 1, 3});
  Tensor4 x(Shape4{1, 1, 1, 3});
  const Tensor4 g(x.shape(), {3.f, -40.f, 0.25f});
  for (int it = 0; it < 20; ++it) {
    const auto before = x;
    adam.step(x, g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(x[i] - before[i], g[i] > 0 ? -s.lr : s.lr, 1e-5);
    }
  }
}

TEST(Adam, StepWithinCauchySchwarzBound) {
  // |m_hat| / sqrt(v_hat) <= sqrt(sum_i a_i^2 / b_i) for the bias-corrected EMA weights a, b.
  std::mt19937 rng(2);
  std::normal_distribution<float> n(0, 100);
  AdamSettings s;
  s.lr = 0.5;
  s.weight_decay = 0;
  Adam adam(s, Shape4{1, 2, 4, 4});
  Tensor4 x(Shape4{1, 2, 4, 4});
  for (int t = 1; t <= 20; ++t) {
    Tensor4 g(x.shape());
    for (auto& v : g.data()) v = n(rng);
    const auto before = x;
    adam.step(x, g);
    double k = 0;
    for (int i = 1; i <= t; ++i) {
      const double a = (1 - s.beta1) * std::pow(s.beta1, t - i) / (1 - std::pow(s.beta1, t));
      const double b = (1 - s.beta2) * std::pow(s.beta2, t - i) / (1 - std::pow(s.beta2, t));
      k += a * a / b;
    }
    const double bound = s.lr * std::sqrt(k) * (1 + 1e-5);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(x[i] - before[i]), bound);
  }
}

TEST(Adam, Errors) {
  Adam adam(AdamSettings{}, Shape4{1, 1, 1, 2});
  Tensor4 x(Shape4{1, 1, 1, 2});
  EXPECT_THROW(adam.step(x, Tensor4(Shape4{1, 1, 1, 3})), ShapeError);
  EXPECT_THROW(adam.step(x, Tensor4(Shape4{1, 1, 1, 2}, {1.f, std::nanf("")})), NumericError);
  AdamSettings bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(Adam(bad, Shape4{}), ValidationError);
}
