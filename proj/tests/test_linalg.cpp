#include <gtest/gtest.h>

#include "afl/linalg.hpp"
#include "test_util.hpp"

namespace {

using afl::Rng;
using afl::linalg::Index;
using afl::linalg::Matrix;
using afl::linalg::max_abs;
using afl::test::gaussian;
using afl::test::uniform_int;

double penrose_residual(const Matrix& a, const Matrix& p) {
  const Matrix ap = a * p;
  const Matrix pa = p * a;
  double r = max_abs(ap * a - a);
  r = std::max(r, max_abs(pa * p - p));
  r = std::max(r, max_abs(ap - ap.transpose()));
  r = std::max(r, max_abs(pa - pa.transpose()));
  return r;
}

TEST(Pinv, IdentityAndZero) {
  EXPECT_EQ(afl::linalg::pinv(Matrix::Identity(3, 3), 1e-12), Matrix::Identity(3, 3));
  const Matrix z = afl::linalg::pinv(Matrix::Zero(4, 2), 1e-12);
  EXPECT_EQ(z.rows(), 2);
  EXPECT_EQ(z.cols(), 4);
  EXPECT_EQ(max_abs(z), 0.0);
}

TEST(Pinv, ZeroSizedInput) {
  const Matrix z = afl::linalg::pinv(Matrix(0, 3));
  EXPECT_EQ(z.rows(), 3);
  EXPECT_EQ(z.cols(), 0);
}

TEST(Pinv, PenroseRandom6x3) {
  Rng rng(11);
  const Matrix a = gaussian(rng, 6, 3);
  EXPECT_LE(penrose_residual(a, afl::linalg::pinv(a)), 1e-10);
}

TEST(Pinv, PenroseSuiteIncludingRankDeficient) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const Index m = uniform_int(rng, 1, 32);
    const Index n = uniform_int(rng, 1, 32);
    Matrix a;
    if (t % 2 == 0) {
      a = gaussian(rng, m, n);
    } else {
      const Index r = uniform_int(rng, 1, std::min(m, n));
      a = gaussian(rng, m, r) * gaussian(rng, r, n);
    }
    EXPECT_LE(penrose_residual(a, afl::linalg::pinv(a)), 1e-9) << m << "x" << n;
  }
}

TEST(Pinv, RejectsNonFinite) {
  Matrix a = Matrix::Identity(2, 2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(afl::linalg::pinv(a), afl::NumericalError);
}

TEST(Rank, Detection) {
  Rng rng(13);
  const Matrix full = gaussian(rng, 10, 4);
  EXPECT_EQ(afl::linalg::numerical_rank(full), 4);
  EXPECT_TRUE(afl::linalg::has_full_column_rank(full));
  const Matrix low = gaussian(rng, 10, 2) * gaussian(rng, 2, 4);
  EXPECT_EQ(afl::linalg::numerical_rank(low), 2);
  EXPECT_FALSE(afl::linalg::has_full_column_rank(low));
  EXPECT_FALSE(afl::linalg::has_full_column_rank(gaussian(rng, 2, 3)));
}

TEST(SpdSolve, DiagonalAndIdentity) {
  const auto r = afl::linalg::spd_solve(2.0 * Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  EXPECT_LE(max_abs(r.solution - 0.5 * Matrix::Identity(2, 2)), 1e-15);
  EXPECT_FALSE(r.used_pseudoinverse);
  Rng rng(14);
  const Matrix b = gaussian(rng, 5, 3);
  EXPECT_LE(max_abs(afl::linalg::spd_solve(Matrix::Identity(5, 5), b).solution - b), 1e-15);
}

TEST(SpdSolve, RandomResidual) {
  Rng rng(15);
  const Matrix m = gaussian(rng, 8, 8);
  const Matrix c = m.transpose() * m + Matrix::Identity(8, 8);
  const Matrix b = gaussian(rng, 8, 4);
  const Matrix z = afl::linalg::spd_solve(afl::linalg::symmetrize(c), b).solution;
  EXPECT_LE((c * z - b).norm() / b.norm(), 1e-12);
}

TEST(SpdSolve, ResidualPropertyOverSizes) {
  Rng rng(16);
  for (int t = 0; t < 50; ++t) {
    const Index n = uniform_int(rng, 1, 40);
    const Matrix m = gaussian(rng, n + 5, n);
    const Matrix c = afl::linalg::gram(m, 0.1);
    const Matrix b = gaussian(rng, n, 3);
    const auto r = afl::linalg::spd_solve(c, b);
    EXPECT_FALSE(r.used_pseudoinverse);
    EXPECT_LE((c * r.solution - b).norm() / b.norm(), 1e-11);
  }
}

TEST(SpdSolve, SingularFallsBackToPseudoinverse) {
  Rng rng(17);
  const Matrix x = gaussian(rng, 3, 6);  // rank 3 Gram of size 6
  const Matrix c = afl::linalg::gram(x);
  const Matrix b = c * gaussian(rng, 6, 2);  // consistent right-hand side
  const auto r = afl::linalg::spd_solve(c, b);
  EXPECT_TRUE(r.used_pseudoinverse);
  EXPECT_LE(max_abs(c * r.solution - b), 1e-9);
}

TEST(SpdSolve, ShapeAndSymmetryErrors) {
  EXPECT_THROW(afl::linalg::spd_solve(Matrix::Identity(2, 3), Matrix::Zero(2, 1)),
               afl::ContractError);
  EXPECT_THROW(afl::linalg::spd_solve(Matrix::Identity(2, 2), Matrix::Zero(3, 1)),
               afl::ContractError);
  Matrix c = Matrix::Identity(2, 2);
  c(0, 1) = 0.5;
  EXPECT_THROW(afl::linalg::spd_solve(c, Matrix::Zero(2, 1)), afl::ContractError);
}

TEST(BlockPinv, IdentityBlocks) {
  const Matrix i3 = Matrix::Identity(3, 3);
  Matrix expected(3, 6);
  expected << 0.5 * i3, 0.5 * i3;
  EXPECT_LE(max_abs(afl::linalg::block_pinv(i3, i3) - expected), 1e-15);
}

TEST(BlockPinv, Random8and9by3) {
  Rng rng(18);
  const Matrix xu = gaussian(rng, 8, 3);
  const Matrix xv = gaussian(rng, 9, 3);
  Matrix stacked(17, 3);
  stacked << xu, xv;
  EXPECT_LE(max_abs(afl::linalg::block_pinv(xu, xv) - afl::linalg::pinv(stacked)), 1e-10);
}

TEST(BlockPinv, Matches200StackedPairs) {
  Rng rng(19);
  for (int t = 0; t < 200; ++t) {
    const Index d = uniform_int(rng, 1, 16);
    const Matrix xu = afl::test::conditioned(rng, d + uniform_int(rng, 0, 16), d, 100.0);
    const Matrix xv = afl::test::conditioned(rng, d + uniform_int(rng, 0, 16), d, 100.0);
    Matrix stacked(xu.rows() + xv.rows(), d);
    stacked << xu, xv;
    EXPECT_LE(max_abs(afl::linalg::block_pinv(xu, xv) - afl::linalg::pinv(stacked)), 1e-9);
  }
}

TEST(BlockPinv, ErrorGrowsWithBlockConditioning) {
  // The formula applies (Xu^T Xu)^-1, so its error scales with cond(Xu)^2
  // while the stacked SVD stays near machine precision.
  Rng rng(23);
  const Matrix xv = afl::test::conditioned(rng, 12, 6, 10.0);
  double previous = 0.0;
  for (double kappa : {1e1, 1e4, 1e7}) {
    double err = 0.0;
    for (int t = 0; t < 5; ++t) {
      const Matrix xu = afl::test::conditioned(rng, 6, 6, kappa);
      Matrix stacked(18, 6);
      stacked << xu, xv;
      err = std::max(err, max_abs(afl::linalg::block_pinv(xu, xv) - afl::linalg::pinv(stacked)));
    }
    EXPECT_GE(err, previous);
    previous = err;
  }
  EXPECT_GT(previous, 1e-9);
}

TEST(BlockPinv, Preconditions) {
  Rng rng(20);
  try {
    afl::linalg::block_pinv(gaussian(rng, 2, 3), gaussian(rng, 5, 3));
    FAIL() << "expected a rank error";
  } catch (const afl::RankError& e) {
    EXPECT_NE(std::string(e.what()).find("upper block"), std::string::npos);
  }
  try {
    afl::linalg::block_pinv(gaussian(rng, 5, 3), gaussian(rng, 2, 3));
    FAIL() << "expected a rank error";
  } catch (const afl::RankError& e) {
    EXPECT_NE(std::string(e.what()).find("lower block"), std::string::npos);
  }
  EXPECT_THROW(afl::linalg::block_pinv(gaussian(rng, 5, 3), gaussian(rng, 5, 2)),
               afl::ContractError);
}

TEST(Gram, SmallCases) {
  EXPECT_EQ(afl::linalg::gram(Matrix::Identity(2, 2), 0.0), Matrix::Identity(2, 2));
  EXPECT_EQ(afl::linalg::gram(Matrix::Zero(7, 4), 2.5), 2.5 * Matrix::Identity(4, 4));
  EXPECT_EQ(afl::linalg::gram(Matrix(0, 3), 1.0), Matrix::Identity(3, 3));
  EXPECT_THROW(afl::linalg::gram(Matrix::Identity(2, 2), -1.0), afl::ContractError);
}

TEST(Gram, MatchesLoopOracle) {
  Rng rng(21);
  const Matrix x = gaussian(rng, 50, 8);
  Matrix expected = Matrix::Zero(8, 8);
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 8; ++j) {
      double s = 0.0;
      for (Index r = 0; r < 50; ++r) s += x(r, i) * x(r, j);
      expected(i, j) = s + (i == j ? 0.5 : 0.0);
    }
  }
  EXPECT_LE(max_abs(afl::linalg::gram(x, 0.5) - expected), 1e-12);
}

TEST(Gram, ExactlySymmetric) {
  Rng rng(22);
  for (int t = 0; t < 20; ++t) {
    const Matrix g = afl::linalg::gram(gaussian(rng, uniform_int(rng, 1, 60),
                                                uniform_int(rng, 1, 30)), 0.3);
    for (Index i = 0; i < g.rows(); ++i) {
      for (Index j = 0; j < i; ++j) ASSERT_EQ(g(i, j), g(j, i));
    }
  }
}

}  // namespace
