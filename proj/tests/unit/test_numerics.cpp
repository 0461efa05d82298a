#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace acfl;
using acfl::testing::random_matrix;
using acfl::testing::random_spd;

namespace {

// det(A − xI) via Gaussian elimination with partial pivoting.
double char_poly(const Matrix& a, double x) {
  const std::size_t n = a.rows();
  std::vector<double> m(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] -= x;
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
    if (m[piv * n + c] == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(m[c * n + k], m[piv * n + k]);
      det = -det;
    }
    det *= m[c * n + c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r * n + c] / m[c * n + c];
      for (std::size_t k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
    }
  }
  return det;
}

// Smallest root of the characteristic polynomial: scan the Gershgorin interval
// for the first sign change, then bisect.
double smallest_root(const Matrix& a) {
  const std::size_t n = a.rows();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double radius = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) radius += std::abs(a(i, j));
    lo = std::min(lo, a(i, i) - radius);
  }
  lo -= 1e-3;
  const double step = 1e-4;
  double x = lo;
  double fx = char_poly(a, x);
  while (true) {
    const double nx = x + step;
    const double fn = char_poly(a, nx);
    if ((fx < 0) != (fn < 0) || fn == 0.0) {
      double l = x;
      double r = nx;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (l + r);
        if ((char_poly(a, mid) < 0) == (fx < 0)) l = mid;
        else r = mid;
      }
      return 0.5 * (l + r);
    }
    x = nx;
    fx = fn;
  }
}

}  // namespace

TEST(Matrix, RejectsZeroDimensionsAndNonFiniteEntries) {
  EXPECT_THROW(Matrix(0, 3), ParameterError);
  EXPECT_THROW(Matrix(2, 0), ParameterError);
  EXPECT_THROW(Matrix(1, 1, std::numeric_limits<double>::quiet_NaN()), ParameterError);
  EXPECT_THROW(Matrix(1, 2, std::vector<double>{1.0, std::numeric_limits<double>::infinity()}),
               ParameterError);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1.0, 2.0, 3.0}), ParameterError);
  EXPECT_THROW((Matrix{{1.0, 2.0}, {3.0}}), ParameterError);
}

TEST(Matrix, ArithmeticAndShapes) {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  const Matrix b{{1, 0}, {0, 1}, {1, 1}};
  const Matrix ab = a * b;
  EXPECT_EQ(ab, (Matrix{{4, 5}, {10, 11}}));
  EXPECT_EQ(a.transpose(), (Matrix{{1, 4}, {2, 5}, {3, 6}}));
  EXPECT_EQ(transpose_times(b, b), b.transpose() * b);
  EXPECT_EQ(a + a, a * 2.0);
  EXPECT_EQ(a - a, Matrix::zeros(2, 3));
  EXPECT_THROW(a * a, ParameterError);
  EXPECT_THROW(a + b, ParameterError);
  EXPECT_DOUBLE_EQ(frobenius_norm_sq(a), 91.0);
  EXPECT_DOUBLE_EQ(frobenius_inner(a, a), 91.0);
  EXPECT_EQ(Matrix::identity(2, 3.0), (Matrix{{3, 0}, {0, 3}}));
}

TEST(Matrix, GramIsExactlySymmetric) {
  const Matrix x = random_matrix(3, 17, 6);
  const Matrix g = gram(x);
  EXPECT_TRUE(is_symmetric(g, 0.0));
  acfl::testing::expect_matrix_near(g, x.transpose() * x, 1e-12);
}

TEST(Rng, StreamsAreDeterministicAndSeparated) {
  const RngStream s(7, "alpha", {1, 2});
  EXPECT_EQ(s.key(), RngStream(7, "alpha", {1, 2}).key());
  EXPECT_EQ(s.child(3).key(), RngStream(7, "alpha", {1, 2, 3}).key());
  EXPECT_NE(s.key(), RngStream(8, "alpha", {1, 2}).key());
  EXPECT_NE(s.key(), RngStream(7, "beta", {1, 2}).key());
  EXPECT_NE(s.key(), RngStream(7, "alpha", {2, 1}).key());
  EXPECT_NE(s.child(0).key(), s.child(1).key());
}

TEST(Rng, UniformStaysInRange) {
  Generator g(RngStream(1, "u"));
  for (int k = 0; k < 100000; ++k) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  const Matrix m = uniform_matrix(RngStream(2, "u"), 50, 50, -1.0, 1.0);
  EXPECT_LE(m.max_abs(), 1.0);
}

TEST(GaussianMatrix, ZeroVarianceGivesZeros) {
  EXPECT_EQ(gaussian_matrix(RngStream(11, "any"), 3, 2, 0.0), Matrix::zeros(3, 2));
}

TEST(GaussianMatrix, NegativeOrNonFiniteVarianceRejected) {
  EXPECT_THROW(gaussian_matrix(RngStream(1, "g"), 2, 2, -1.0), ParameterError);
  EXPECT_THROW(gaussian_matrix(RngStream(1, "g"), 2, 2, std::numeric_limits<double>::infinity()),
               ParameterError);
}

TEST(GaussianMatrix, MomentsMatchVariance) {
  const Matrix m = gaussian_matrix(RngStream(7, "gaussian"), 100, 100, 4.0);
  double sum = 0.0;
  for (double v : m.data()) sum += v;
  const double mean = sum / 10000.0;
  double ss = 0.0;
  for (double v : m.data()) ss += (v - mean) * (v - mean);
  const double var = ss / 9999.0;
  EXPECT_LT(std::abs(mean), 4.0 * (2.0 / 100.0));
  EXPECT_NEAR(var, 4.0, 0.4);
}

TEST(GaussianMatrix, SameStreamIsBitIdentical) {
  const RngStream s(5, "noise", {3, 4});
  const Matrix a = gaussian_matrix(s, 6, 5, 2.5);
  const Matrix b = gaussian_matrix(RngStream(5, "noise", {3, 4}), 6, 5, 2.5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, gaussian_matrix(s.child(0), 6, 5, 2.5));
}

TEST(SpdSolve, IdentityReturnsRightHandSide) {
  const Matrix b = random_matrix(4, 3, 2);
  EXPECT_EQ(spd_solve(Matrix::identity(3), b), b);
}

TEST(SpdSolve, ScaledIdentity) {
  acfl::testing::expect_matrix_near(spd_solve(Matrix::identity(2, 2.0), Matrix::identity(2)),
                                    Matrix::identity(2, 0.5), 1e-15);
}

TEST(SpdSolve, RandomResidualIsSmall) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = random_spd(seed, 6);
    const Matrix b = random_matrix(seed + 100, 6, 3);
    const Matrix z = spd_solve(a, b);
    EXPECT_LT(frobenius_norm(a * z - b), 1e-8);
  }
}

TEST(SpdSolve, NonSpdReportsPivot) {
  const Matrix a{{1.0, 0.0, 0.0}, {0.0, 2.0, 0.0}, {0.0, 0.0, -1.0}};
  try {
    spd_solve(a, Matrix::identity(3));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    ASSERT_TRUE(e.pivot().has_value());
    EXPECT_EQ(*e.pivot(), 2u);
  }
  const Matrix singular{{1.0, 1.0}, {1.0, 1.0}};
  try {
    spd_solve(singular, Matrix::identity(2));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.pivot(), std::optional<std::size_t>(1));
  }
}

TEST(SpdSolve, ShapeAndSymmetryChecks) {
  EXPECT_THROW(spd_solve(Matrix(2, 3), Matrix(2, 1)), ParameterError);
  EXPECT_THROW(spd_solve(Matrix::identity(2), Matrix(3, 1)), ParameterError);
  EXPECT_THROW(spd_solve(Matrix{{2.0, 1.0}, {0.0, 2.0}}, Matrix::identity(2)), ParameterError);
}

TEST(EigMinSym, KnownSpectra) {
  EXPECT_NEAR(eig_min_sym(Matrix::identity(4)), 1.0, 1e-14);
  const Matrix diag{{1, 0, 0}, {0, 3, 0}, {0, 0, 5}};
  EXPECT_NEAR(eig_min_sym(diag), 1.0, 1e-14);
}

TEST(EigMinSym, MatchesCharacteristicPolynomialRoot) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix r = random_matrix(seed + 40, 5, 5);
    const Matrix a = (r + r.transpose()) * 0.5;
    EXPECT_NEAR(eig_min_sym(a), smallest_root(a), 1e-6) << "seed " << seed;
  }
}

TEST(EigMinSym, RejectsAsymmetricInput) {
  EXPECT_THROW(eig_min_sym(Matrix{{1.0, 2.0}, {0.0, 1.0}}), ParameterError);
  EXPECT_THROW(eig_min_sym(Matrix(2, 3)), ParameterError);
}
