#pragma once

// Dense real linear algebra used by the analytic learner: SVD pseudoinverse,
// SPD solves with a pseudoinverse fallback, Gram matrices, and the block
// pseudoinverse of a row-stacked pair of full-column-rank matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "afl/error.hpp"

namespace afl::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// eps * max(rows, cols): singular values at or below rcond * sigma_max count
// as zero.
inline double default_rcond(Index rows, Index cols) {
  return std::numeric_limits<double>::epsilon() *
         static_cast<double>(std::max<Index>({rows, cols, 1}));
}

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericalError(std::string(what) + ": non-finite entries");
  }
}

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Matrix symmetrize(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

namespace detail {

inline Eigen::BDCSVD<Matrix> thin_svd(const Matrix& a) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("SVD failed to converge on " + shape_str(a) +
                         " matrix");
  }
  return svd;
}

inline double cutoff(const Vector& sigma, double rcond) {
  return sigma.size() == 0 ? 0.0 : rcond * sigma.maxCoeff();
}

}  // namespace detail

// Moore-Penrose inverse via a thin SVD. Result is cols x rows.
inline Matrix pinv(const Matrix& a, std::optional<double> rcond = std::nullopt) {
  require_finite(a, "pinv input");
  if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  const double rc = rcond.value_or(default_rcond(a.rows(), a.cols()));
  if (rc < 0.0) throw ContractError("pinv: rcond must be >= 0");

  const auto svd = detail::thin_svd(a);
  const Vector& sigma = svd.singularValues();
  const double tol = detail::cutoff(sigma, rc);
  Vector inv_sigma = Vector::Zero(sigma.size());
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > tol) inv_sigma(i) = 1.0 / sigma(i);
  }
  Matrix out = svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().transpose();
  require_finite(out, "pinv output");
  return out;
}

inline Index numerical_rank(const Matrix& a,
                            std::optional<double> rcond = std::nullopt) {
  if (a.size() == 0) return 0;
  const double rc = rcond.value_or(default_rcond(a.rows(), a.cols()));
  const auto svd = detail::thin_svd(a);
  const Vector& sigma = svd.singularValues();
  const double tol = detail::cutoff(sigma, rc);
  Index r = 0;
  for (Index i = 0; i < sigma.size(); ++i) r += sigma(i) > tol ? 1 : 0;
  return r;
}

inline bool has_full_column_rank(const Matrix& a,
                                 std::optional<double> rcond = std::nullopt) {
  if (a.rows() < a.cols()) return false;
  return numerical_rank(a, rcond) == a.cols();
}

// X^T X + gamma I. Only the lower triangle is accumulated; the upper one is a
// copy of it, so (i,j) and (j,i) are bit-identical.
inline Matrix gram(const Matrix& x, double gamma = 0.0) {
  if (gamma < 0.0) throw ContractError("gram: gamma must be >= 0");
  const Index d = x.cols();
  Matrix g = Matrix::Zero(d, d);
  if (x.rows() > 0) {
    g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  g.diagonal().array() += gamma;
  require_finite(g, "gram");
  return g;
}

// Factorization of a symmetric matrix. Cholesky when the matrix is
// numerically positive definite (every squared pivot above
// rcond * max diagonal), otherwise an SVD pseudoinverse.
class SpdFactor {
 public:
  SpdFactor() = default;

  explicit SpdFactor(const Matrix& c, std::optional<double> rcond = std::nullopt)
      : n_(c.rows()) {
    if (c.rows() != c.cols()) {
      throw ContractError("spd factor: matrix is " + shape_str(c) +
                          ", expected square");
    }
    require_finite(c, "spd factor input");
    if (n_ == 0) return;
    const double scale = std::max(c.diagonal().cwiseAbs().maxCoeff(), 0.0);
    if (max_abs(c - c.transpose()) > 1e-8 * std::max(scale, 1e-300)) {
      throw ContractError("spd factor: matrix is not symmetric");
    }
    const double rc = rcond.value_or(default_rcond(n_, n_));

    llt_.compute(c);
    if (llt_.info() == Eigen::Success && scale > 0.0) {
      const Vector pivots = llt_.matrixLLT().diagonal().array().square();
      positive_definite_ = pivots.minCoeff() > rc * scale;
    }
    if (!positive_definite_) {
      pinv_ = pinv(symmetrize(c), rc);
    }
  }

  Index size() const noexcept { return n_; }

  bool positive_definite() const noexcept { return positive_definite_; }

  Matrix solve(const Matrix& b) const {
    if (b.rows() != n_) {
      throw ContractError("spd solve: rhs has " + std::to_string(b.rows()) +
                          " rows, factor has " + std::to_string(n_));
    }
    if (n_ == 0) return Matrix::Zero(0, b.cols());
    Matrix z = positive_definite_ ? Matrix(llt_.solve(b)) : Matrix(pinv_ * b);
    require_finite(z, "spd solve");
    return z;
  }

 private:
  Index n_ = 0;
  bool positive_definite_ = false;
  Eigen::LLT<Matrix> llt_;
  Matrix pinv_;
};

struct SolveResult {
  Matrix solution;
  bool used_pseudoinverse = false;
};

// Solves C Z = B for symmetric C.
inline SolveResult spd_solve(const Matrix& c, const Matrix& b) {
  if (c.rows() != c.cols() || b.rows() != c.rows()) {
    throw ContractError("spd_solve: C is " + shape_str(c) + ", B is " +
                        shape_str(b));
  }
  SpdFactor f(c);
  return {f.solve(b), !f.positive_definite()};
}

// Pseudoinverse of the row-stack [xu; xv] assembled from the blocks:
//
//   [xu; xv]^+ = [U V]
//   U = (I - Ru Cv + Ru Cv (Cu + Cv)^-1 Cv) xu^+
//   V = (I - Rv Cu + Rv Cu (Cu + Cv)^-1 Cu) xv^+
//
// with Cu = xu^T xu, Ru = Cu^-1 (and likewise for v). Both blocks need full
// column rank.
inline Matrix block_pinv(const Matrix& xu, const Matrix& xv,
                         std::optional<double> rcond = std::nullopt) {
  if (xu.cols() != xv.cols()) {
    throw ContractError("block_pinv: column counts differ (" +
                        std::to_string(xu.cols()) + " vs " +
                        std::to_string(xv.cols()) + ")");
  }
  if (!has_full_column_rank(xu, rcond)) {
    throw RankError("block_pinv: upper block Xu (" + shape_str(xu) +
                    ") lacks full column rank");
  }
  if (!has_full_column_rank(xv, rcond)) {
    throw RankError("block_pinv: lower block Xv (" + shape_str(xv) +
                    ") lacks full column rank");
  }

  const Matrix cu = gram(xu);
  const Matrix cv = gram(xv);
  const SpdFactor ru(cu);
  const SpdFactor rv(cv);
  const SpdFactor rs(cu + cv);
  if (!ru.positive_definite() || !rv.positive_definite()) {
    throw RankError("block_pinv: block Gram matrix is not positive definite");
  }

  // (I - R1 C2 + R1 C2 S^-1 C2) P  ==  P - R1 C2 S^-1 C1 P, using
  // I - S^-1 C2 = S^-1 C1. The right-hand form skips a subtraction whose
  // cancellation R1 would amplify for ill-conditioned blocks.
  auto side = [&rs](const Matrix& p, const SpdFactor& r1, const Matrix& c1,
                    const Matrix& c2) {
    return Matrix(p - r1.solve(c2 * rs.solve(c1 * p)));
  };

  const Matrix pu = pinv(xu, rcond);
  const Matrix pv = pinv(xv, rcond);
  Matrix out(xu.cols(), xu.rows() + xv.rows());
  out.leftCols(xu.rows()) = side(pu, ru, cu, cv);
  out.rightCols(xv.rows()) = side(pv, rv, cv, cu);
  require_finite(out, "block_pinv");
  return out;
}

}  // namespace afl::linalg
