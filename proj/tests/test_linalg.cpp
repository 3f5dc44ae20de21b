#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "adinf/linalg.hpp"
#include "adinf/rng.hpp"

using namespace adinf;

TEST(Matrix, BasicOps) {
  Matrix a(2, 3);
  a.at(0, 0) = 1;
  a.at(0, 1) = 2;
  a.at(0, 2) = 3;
  a.at(1, 0) = 4;
  a.at(1, 1) = 5;
  a.at(1, 2) = 6;
  const Matrix t = transpose(a);
  EXPECT_EQ(t.rows, 3);
  EXPECT_EQ(t.cols, 2);
  EXPECT_DOUBLE_EQ(t.at(2, 1), 6.0);

  const Matrix g = matmul(a, t);  // 2x2
  EXPECT_DOUBLE_EQ(g.at(0, 0), 14.0);
  EXPECT_DOUBLE_EQ(g.at(0, 1), 32.0);
  EXPECT_DOUBLE_EQ(g.at(1, 1), 77.0);

  const std::vector<double> v = matvec(a, {1.0, 0.0, -1.0});
  EXPECT_DOUBLE_EQ(v[0], -2.0);
  EXPECT_DOUBLE_EQ(v[1], -2.0);

  const Matrix id = Matrix::identity(3);
  const Matrix s = sandwich(a, id);
  for (size_t i = 0; i < s.a.size(); ++i) EXPECT_DOUBLE_EQ(s.a[i], g.a[i]);

  EXPECT_THROW(matmul(a, a), numeric_error);
  EXPECT_THROW(matvec(a, {1.0}), numeric_error);
}

TEST(EigenSym, KnownTwoByTwo) {
  Matrix s(2, 2);
  s.at(0, 0) = 2;
  s.at(0, 1) = 1;
  s.at(1, 0) = 1;
  s.at(1, 1) = 2;
  const SymEigen e = eigen_sym(s);
  ASSERT_EQ(e.values.size(), 2u);
  EXPECT_NEAR(e.values[0], 1.0, 1e-12);
  EXPECT_NEAR(e.values[1], 3.0, 1e-12);
  // columns orthonormal
  for (int i = 0; i < 2; ++i) {
    double n2 = 0.0;
    for (int r = 0; r < 2; ++r) n2 += e.vectors.at(r, i) * e.vectors.at(r, i);
    EXPECT_NEAR(n2, 1.0, 1e-12);
  }
}

TEST(EigenSym, RandomReconstruction) {
  Rng rng(99);
  const int n = 12;
  Matrix s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = rng.normal();
      s.at(i, j) = v;
      s.at(j, i) = v;
    }
  const SymEigen e = eigen_sym(s);
  for (int i = 0; i + 1 < n; ++i) EXPECT_LE(e.values[i], e.values[i + 1]);
  // A == V diag(values) V'
  Matrix rec(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      for (int r = 0; r < n; ++r)
        v += e.vectors.at(i, r) * e.values[r] * e.vectors.at(j, r);
      rec.at(i, j) = v;
    }
  for (size_t i = 0; i < s.a.size(); ++i) EXPECT_NEAR(rec.a[i], s.a[i], 1e-9);
}

TEST(SolveSym, SolvesAndDetectsSingular) {
  Matrix s(2, 2);
  s.at(0, 0) = 4;
  s.at(0, 1) = 1;
  s.at(1, 0) = 1;
  s.at(1, 1) = 3;
  std::vector<double> x;
  ASSERT_TRUE(solve_sym(s, {1.0, 2.0}, x, 1e-12));
  EXPECT_NEAR(4 * x[0] + 1 * x[1], 1.0, 1e-12);
  EXPECT_NEAR(1 * x[0] + 3 * x[1], 2.0, 1e-12);

  Matrix sing(2, 2);
  sing.at(0, 0) = 1;
  sing.at(0, 1) = 1;
  sing.at(1, 0) = 1;
  sing.at(1, 1) = 1;
  EXPECT_FALSE(solve_sym(sing, {1.0, 0.0}, x, 1e-12));

  double q = 0.0;
  ASSERT_TRUE(quad_form_inv(s, {1.0, 2.0}, q, 1e-12));
  // q = b' S^{-1} b with the same b
  EXPECT_NEAR(q, 1.0 * x[0] + 2.0 * x[1], 1e-12);
}

TEST(RowRank, DetectsDependentRows) {
  Matrix c1(1, 2);
  c1.at(0, 0) = -1;
  c1.at(0, 1) = 1;
  EXPECT_TRUE(has_full_row_rank(c1));

  Matrix c2(2, 2);
  c2.at(0, 0) = 1;
  c2.at(0, 1) = 1;
  c2.at(1, 0) = 2;
  c2.at(1, 1) = 2;
  EXPECT_FALSE(has_full_row_rank(c2));

  EXPECT_TRUE(has_full_row_rank(Matrix::identity(3)));
}

TEST(Kahan, CompensatesAccumulation) {
  KahanSum ks;
  double naive = 0.0;
  for (int i = 0; i < 10000000; ++i) {
    ks.add(0.1);
    naive += 0.1;
  }
  EXPECT_NEAR(ks.sum, 1e6, 1e-7);
  EXPECT_GT(std::fabs(naive - 1e6), std::fabs(ks.sum - 1e6));

  KahanVec kv(2);
  kv.add({1.0, 2.0}, 0.5);
  kv.add({3.0, 4.0}, 0.25);
  const std::vector<double> v = kv.value();
  EXPECT_DOUBLE_EQ(v[0], 1.25);
  EXPECT_DOUBLE_EQ(v[1], 2.0);
}
