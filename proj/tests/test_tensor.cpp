#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "steel/tensor.hpp"

using namespace steel;

namespace {

Tensor4 random4(Shape4 s, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  Tensor4 t(s);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(-2.f, 2.f);
  Matrix m(r, c);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

}  // namespace

TEST(Tensor4, RejectsZeroDimsAndWrongLength) {
  EXPECT_THROW(Tensor4(Shape4{1, 0, 2, 2}), ShapeError);
  EXPECT_THROW(Tensor4(Shape4{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  Tensor4 t(Shape4{2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
}

TEST(ReshapeToMatrix, LayoutIdentity) {
  Tensor4 t(Shape4{1, 2, 1, 2}, {1, 2, 3, 4});
  auto m = reshape_to_matrix(t);
  ASSERT_EQ(m.rows(), 2u);
  ASSERT_EQ(m.cols(), 2u);
  EXPECT_EQ(m(0, 0), 1);
  EXPECT_EQ(m(0, 1), 2);
  EXPECT_EQ(m(1, 0), 3);
  EXPECT_EQ(m(1, 1), 4);

  auto flat = reshape_to_matrix(Tensor4(Shape4{1, 1, 2, 2}, {5, 6, 7, 8}));
  ASSERT_EQ(flat.rows(), 1u);
  ASSERT_EQ(flat.cols(), 4u);
  EXPECT_EQ(flat(0, 3), 8);
}

TEST(ReshapeToMatrix, MatchesIndexArithmetic) {
  std::mt19937 rng(1);
  auto t = random4(Shape4{1, 3, 4, 4}, rng);
  auto m = reshape_to_matrix(t);
  ASSERT_EQ(m.rows(), 3u);
  ASSERT_EQ(m.cols(), 16u);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(m(c, y * 4 + x), t.at(0, c, y, x));
}

TEST(ReshapeToMatrix, RejectsBatch) {
  EXPECT_THROW(reshape_to_matrix(Tensor4(Shape4{2, 1, 2, 2})), ShapeError);
}

TEST(ReshapeToMatrix, InverseIsIdentity) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape4 s{1, 1 + rng() % 5, 1 + rng() % 6, 1 + rng() % 6};
    auto t = random4(s, rng);
    EXPECT_EQ(matrix_to_tensor(reshape_to_matrix(t), s.h, s.w), t);
  }
}

TEST(MatmulTransposed, SmallCases) {
  auto id = matmul_transposed(Matrix(2, 2, {1, 0, 0, 1}));
  EXPECT_EQ(id, Matrix(2, 2, {1, 0, 0, 1}));
  auto g = matmul_transposed(Matrix(1, 3, {1, 2, 3}));
  ASSERT_EQ(g.rows(), 1u);
  EXPECT_EQ(g(0, 0), 14.f);
}

TEST(MatmulTransposed, MatchesTripleLoop) {
  std::mt19937 rng(3);
  auto f = random_matrix(4, 9, rng);
  auto g = matmul_transposed(f);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double ref = 0;
      for (std::size_t k = 0; k < 9; ++k) ref += double(f(i, k)) * double(f(j, k));
      EXPECT_NEAR(g(i, j), ref, 1e-5 * std::max(1.0, std::abs(ref)));
    }
}

TEST(MatmulTransposed, SymmetricAndPositiveSemidefinite) {
  std::mt19937 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + rng() % 8, c = 1 + rng() % 20;
    auto g = matmul_transposed(random_matrix(r, c, rng));
    double gmax = 0;
    for (float v : g.data()) gmax = std::max(gmax, double(std::abs(v)));
    std::vector<double> x(r);
    double xx = 0;
    for (auto& v : x) {
      v = n(rng);
      xx += v * v;
    }
    double q = 0;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        EXPECT_EQ(g(i, j), g(j, i));
        q += x[i] * double(g(i, j)) * x[j];
      }
    EXPECT_GE(q, -1e-4 * xx * gmax);
  }
}

TEST(Elementwise, SubScaleAxpySumSquares) {
  std::mt19937 rng(5);
  auto t = random4(Shape4{1, 2, 3, 3}, rng);
  auto z = sub(t, t);
  for (float v : z.data()) EXPECT_EQ(v, 0.f);
  EXPECT_EQ(sum_squares(Tensor4(Shape4{1, 1, 2, 2})), 0.f);
  EXPECT_EQ(sum_squares(Tensor4(Shape4{1, 1, 1, 2}, {3, 4})), 25.f);

  auto y = scale(t, 2.0);
  axpy(-2.0, t, y);
  for (float v : y.data()) EXPECT_EQ(v, 0.f);

  EXPECT_THROW(sub(t, Tensor4(Shape4{1, 2, 3, 2})), ShapeError);
  auto other = Tensor4(Shape4{1, 1, 1, 1});
  EXPECT_THROW(axpy(1.0, t, other), ShapeError);
}

TEST(Elementwise, FiniteValidation) {
  Tensor4 t(Shape4{1, 1, 1, 2}, {1.f, std::nanf("")});
  EXPECT_THROW(require_finite(t, "t"), NumericError);
  EXPECT_NO_THROW(require_finite(Tensor4(Shape4{1, 1, 1, 1}), "ok"));
}
