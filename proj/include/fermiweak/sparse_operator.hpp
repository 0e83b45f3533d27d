// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <thread>
#include <vector>

namespace fermiweak {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using DenseMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<Complex>;

/// Square sparse operator on a FockBasis. Immutable once built; the
/// `hermitian` flag records what the producer guarantees.
class SparseOperator {
 public:
  SparseOperator() = default;
  explicit SparseOperator(SparseMatrix m, bool hermitian = false)
      : matrix_(std::move(m)), hermitian_(hermitian) {
    matrix_.makeCompressed();
  }

  static SparseOperator zero(std::size_t dim, bool hermitian = true) {
    return SparseOperator(SparseMatrix(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)),
                          hermitian);
  }
  static SparseOperator identity(std::size_t dim) {
    SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    m.setIdentity();
    return SparseOperator(std::move(m), true);
  }
  static SparseOperator diagonal(const Eigen::VectorXd& d) {
    const auto n = d.size();
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] != 0.0) t.emplace_back(i, i, Complex(d[i], 0.0));
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return SparseOperator(std::move(m), true);
  }

  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  std::size_t nnz() const { return static_cast<std::size_t>(matrix_.nonZeros()); }
  const SparseMatrix& matrix() const { return matrix_; }
  bool hermitian_flag() const { return hermitian_; }

  Complex coeff(std::size_t row, std::size_t col) const {
    return matrix_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }

  Vector apply(const Vector& v) const { return matrix_ * v; }

  SparseOperator adjoint() const {
    SparseMatrix a = matrix_.adjoint();
    return SparseOperator(std::move(a), hermitian_);
  }

  DenseMatrix dense() const { return DenseMatrix(matrix_); }

  bool is_diagonal() const {
    for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it) {
        if (it.row() != it.col() && it.value() != Complex{}) return false;
      }
    }
    return true;
  }

  /// Real parts of the diagonal (exact for Hermitian operators).
  Eigen::VectorXd real_diagonal() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(matrix_.rows());
    for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it) {
        if (it.row() == it.col()) d[it.row()] = it.value().real();
      }
    }
    return d;
  }

  /// Largest |A(r,c) - conj(A(c,r))|.
  double hermiticity_defect() const {
    SparseMatrix diff = matrix_ - SparseMatrix(matrix_.adjoint());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    }
    return worst;
  }
  bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect() <= tol; }

  /// Largest entry modulus.
  double max_abs() const {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    }
    return worst;
  }

  friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(a.matrix_ + b.matrix_, a.hermitian_ && b.hermitian_);
  }
  friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(a.matrix_ - b.matrix_, a.hermitian_ && b.hermitian_);
  }
  friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
    return SparseOperator(SparseMatrix(a.matrix_ * b.matrix_), false);
  }
  friend SparseOperator operator*(double s, const SparseOperator& a) {
    return SparseOperator(SparseMatrix(s * a.matrix_), a.hermitian_);
  }
  friend SparseOperator operator*(Complex s, const SparseOperator& a) {
    return SparseOperator(SparseMatrix(s * a.matrix_), a.hermitian_ && s.imag() == 0.0);
  }

 private:
  SparseMatrix matrix_;
  bool hermitian_ = false;
};

/// Anticommutator {A, B} = AB + BA.
inline SparseOperator anticommutator(const SparseOperator& a, const SparseOperator& b) {
  return SparseOperator(SparseMatrix(a.matrix() * b.matrix() + b.matrix() * a.matrix()));
}
/// Commutator [A, B] = AB - BA.
inline SparseOperator commutator(const SparseOperator& a, const SparseOperator& b) {
  return SparseOperator(SparseMatrix(a.matrix() * b.matrix() - b.matrix() * a.matrix()));
}

/// Builds an operator column by column. `column(j, out)` appends the nonzero
/// entries of column j as (row, value) pairs. Column blocks may be generated
/// on several threads; blocks are concatenated in column order, so the result
/// does not depend on the schedule.
template <typename ColumnFn>
SparseMatrix assemble_columns(std::size_t dim, ColumnFn&& column, unsigned threads = 1) {
  using Entry = std::pair<std::size_t, Complex>;
  const unsigned workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(dim / 64 + 1)));
  std::vector<std::vector<Triplet>> blocks(workers);
  auto run = [&](unsigned w) {
    const std::size_t lo = dim * w / workers;
    const std::size_t hi = dim * (w + 1) / workers;
    std::vector<Entry> scratch;
    for (std::size_t j = lo; j < hi; ++j) {
      scratch.clear();
      column(j, scratch);
      for (const auto& [row, value] : scratch) {
        if (value != Complex{}) {
          blocks[w].emplace_back(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j), value);
        }
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  std::vector<Triplet> all;
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.size();
  all.reserve(total);
  for (auto& b : blocks) all.insert(all.end(), b.begin(), b.end());
  SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.setFromTriplets(all.begin(), all.end());
  return m;
}

}  // namespace fermiweak
