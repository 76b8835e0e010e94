#pragma once

#include <Eigen/Core>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "parallel.hpp"

namespace parasplit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(Index pivot)
      : std::runtime_error("matrix not positive definite (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}

  /// Row of the offending pivot in the caller's numbering.
  Index pivot() const { return pivot_; }

 private:
  Index pivot_;
};

inline void require_same_size(Index expected, Index actual, const char* what) {
  if (expected != actual) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (expected " +
                                std::to_string(expected) + ", got " + std::to_string(actual) + ")");
  }
}

inline bool is_symmetric(const SparseMatrix& m, double tol = 1e-14) {
  if (m.rows() != m.cols()) return false;
  const SparseMatrix t = m.transpose();
  const SparseMatrix diff = m - t;
  for (Index k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      if (std::abs(it.value()) > tol) return false;
    }
  }
  return true;
}

/// Averages m with its transpose; removes round-off asymmetry from products.
inline SparseMatrix symmetrized(const SparseMatrix& m) {
  SparseMatrix t = m.transpose();
  SparseMatrix s = 0.5 * (m + t);
  s.makeCompressed();
  return s;
}

/// Sparse LDL^T factorization of an SPD matrix with a fill-reducing AMD
/// ordering. Positive definiteness is certified by a strictly positive D.
class CholFactor {
 public:
  CholFactor() = default;

  explicit CholFactor(const SparseMatrix& m) {
    if (m.rows() != m.cols()) {
      throw std::invalid_argument("factorize: matrix is not square");
    }
    if (!is_symmetric(m, 1e-14 * std::max(1.0, max_abs(m)))) {
      throw std::invalid_argument("factorize: matrix is not symmetric");
    }
    dim_ = m.rows();
    auto ldlt = std::make_shared<Ldlt>(m);
    const Vector& diag = ldlt->vectorD();
    const auto& pinv = ldlt->permutationPinv();
    // A zero pivot stops the elimination after D(k) is written, so the first
    // non-positive entry in elimination order is the failing pivot.
    for (Index k = 0; k < dim_; ++k) {
      if (!(diag(k) > 0.0)) throw NotPositiveDefinite(pinv.indices()(k));
    }
    ldlt_ = std::move(ldlt);
  }

  Index dimension() const { return dim_; }

  /// P^{-1} L D L^T P, dense; meant for checking small factors.
  Matrix reconstruct() const {
    if (!ldlt_) throw std::logic_error("reconstruct: factor is empty");
    const Matrix l = Matrix(SparseMatrix(ldlt_->matrixL()));
    const Matrix ldl = l * ldlt_->vectorD().asDiagonal() * l.transpose();
    return ldlt_->permutationPinv() * ldl * ldlt_->permutationP();
  }

  Vector solve(const Vector& b) const {
    if (!ldlt_) throw std::logic_error("solve: factor is empty");
    require_same_size(dim_, b.size(), "solve");
    return ldlt_->solve(b);
  }

 private:
  static double max_abs(const SparseMatrix& m) {
    double r = 0.0;
    for (Index k = 0; k < m.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
    }
    return r;
  }

  using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

  Index dim_ = 0;
  std::shared_ptr<const Ldlt> ldlt_;
};

inline CholFactor factorize(const SparseMatrix& m) { return CholFactor(m); }

/// Solves f x_j = rhs_j for every column j. Columns are distributed over
/// threads; each column is solved by the same sequential kernel, so the result
/// is bitwise independent of the thread count.
inline Matrix solve_multi(const CholFactor& f, const Matrix& rhs, int threads = 1) {
  require_same_size(f.dimension(), rhs.rows(), "solve_multi");
  Matrix out(rhs.rows(), rhs.cols());
  parallel_for(rhs.cols(), threads, [&](Index j) { out.col(j) = f.solve(rhs.col(j)); });
  return out;
}

/// Column-wise product out_j = m * in_j.
inline Matrix multiply_columns(const SparseMatrix& m, const Matrix& in, int threads = 1) {
  require_same_size(m.cols(), in.rows(), "multiply_columns");
  Matrix out(m.rows(), in.cols());
  parallel_for(in.cols(), threads, [&](Index j) { out.col(j).noalias() = m * in.col(j); });
  return out;
}

inline double quadratic_form(const SparseMatrix& m, const Vector& v) {
  require_same_size(m.cols(), v.size(), "quadratic_form");
  require_same_size(m.rows(), v.size(), "quadratic_form");
  double acc = 0.0;
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      acc += v(it.row()) * it.value() * v(it.col());
    }
  }
  return acc;
}

}  // namespace parasplit
