// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file spectral.hpp
 * @brief Eigensolvers, spectral projections and commutator operators.
 *
 * Ground states come from a Lanczos iteration with full reorthogonalization
 * and explicit restarts. Spectral windows split the operator into connected
 * blocks of its sparsity graph; blocks up to `dense_limit` are diagonalized
 * densely, larger blocks by shift-invert subspace iteration around the window
 * centre.
 */

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "fermiweak/errors.hpp"
#include "fermiweak/fock.hpp"
#include "fermiweak/kernel.hpp"
#include "fermiweak/model.hpp"
#include "fermiweak/operators.hpp"
#include "fermiweak/sparse_operator.hpp"

namespace fermiweak {

inline constexpr std::uint64_t kDefaultSeed = 20260417;
inline constexpr std::size_t kDenseLimit = 4096;

/// Standard complex Gaussian vector, normalized.
inline Vector random_unit_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = n(rng);
    const double im = n(rng);
    v[i] = Complex(re, im);
  }
  return v / v.norm();
}

struct SolverOptions {
  double tol = 1e-10;
  std::size_t krylov_dim = 80;
  std::size_t max_restarts = 400;
  std::uint64_t seed = kDefaultSeed;
};

struct SpectralReport {
  double energy = 0.0;
  Vector vector;
  double residual = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

inline double residual_norm(const SparseOperator& h, const Vector& x, double e) {
  return (h.apply(x) - e * x).norm();
}

inline void require_hermitian(const SparseOperator& h) {
  const double scale = std::max(1.0, h.max_abs());
  if (h.hermiticity_defect() > 1e-12 * scale) throw DomainError("operator is not Hermitian");
}

}  // namespace detail

/// Lowest eigenpair of a Hermitian operator.
inline SpectralReport ground_state(const SparseOperator& h, const SolverOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw DomainError("solver tolerance must be positive");
  detail::require_hermitian(h);
  const std::size_t n = h.dim();
  if (n == 0) throw DomainError("empty operator");

  if (h.is_diagonal()) {
    const Eigen::VectorXd d = h.real_diagonal();
    Eigen::Index at = 0;
    d.minCoeff(&at);
    SpectralReport r;
    r.energy = d[at];
    r.vector = Vector::Zero(static_cast<Eigen::Index>(n));
    r.vector[at] = 1.0;
    r.residual = 0.0;
    return r;
  }

  std::mt19937_64 rng(opt.seed);
  Vector x = random_unit_vector(n, rng);
  const std::size_t m = std::min<std::size_t>(opt.krylov_dim, n);
  DenseMatrix v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  double best = std::numeric_limits<double>::infinity();
  SpectralReport r;
  for (std::size_t restart = 0; restart < opt.max_restarts; ++restart) {
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(m));
    Eigen::VectorXd beta(static_cast<Eigen::Index>(m));
    v.col(0) = x;
    std::size_t k = 0;
    for (; k < m; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      Vector w = h.apply(v.col(kk));
      alpha[kk] = v.col(kk).dot(w).real();
      // Two passes of classical Gram-Schmidt against the whole Krylov basis.
      for (int pass = 0; pass < 2; ++pass) {
        const Vector c = v.leftCols(kk + 1).adjoint() * w;
        w -= v.leftCols(kk + 1) * c;
      }
      beta[kk] = w.norm();
      if (k + 1 == m) {
        ++k;
        break;
      }
      if (beta[kk] < 1e-14 * std::max(1.0, std::abs(alpha[kk]))) {
        ++k;
        break;
      }
      v.col(kk + 1) = w / beta[kk];
    }
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(kk, kk);
    for (Eigen::Index i = 0; i < kk; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < kk) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::VectorXd y = es.eigenvectors().col(0);
    x = v.leftCols(kk) * y.cast<Complex>();
    x /= x.norm();
    const double e = es.eigenvalues()[0];
    const double res = detail::residual_norm(h, x, e);
    r.iterations += k;
    if (res < best) {
      best = res;
      r.energy = e;
      r.vector = x;
      r.residual = res;
    }
    if (res <= opt.tol) {
      // Energy as a Rayleigh quotient of the final vector.
      r.energy = x.dot(h.apply(x)).real();
      r.residual = detail::residual_norm(h, x, r.energy);
      return r;
    }
  }
  throw SolverError("Lanczos did not reach residual " + std::to_string(opt.tol), best);
}

/// Dense diagonalization; the reference for small problems.
inline Eigen::SelfAdjointEigenSolver<DenseMatrix> dense_eigensystem(const SparseOperator& h) {
  return Eigen::SelfAdjointEigenSolver<DenseMatrix>(h.dense());
}

/// Connected components of the sparsity graph (pattern symmetrized), each a
/// sorted list of basis indices; components are ordered by smallest index.
inline std::vector<std::vector<std::size_t>> connected_blocks(const SparseOperator& h) {
  const std::size_t n = h.dim();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  const SparseMatrix& m = h.matrix();
  for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      if (it.value() == Complex{}) continue;
      const std::size_t a = find(static_cast<std::size_t>(it.row()));
      const std::size_t b = find(static_cast<std::size_t>(it.col()));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] == n) {
      slot[r] = out.size();
      out.emplace_back();
    }
    out[slot[r]].push_back(i);
  }
  return out;
}

inline SparseMatrix restrict_block(const SparseOperator& h, const std::vector<std::size_t>& block) {
  std::vector<Eigen::Index> local(h.dim(), -1);
  for (std::size_t i = 0; i < block.size(); ++i) local[block[i]] = static_cast<Eigen::Index>(i);
  std::vector<Triplet> t;
  const SparseMatrix& m = h.matrix();
  for (std::size_t j = 0; j < block.size(); ++j) {
    for (SparseMatrix::InnerIterator it(m, static_cast<Eigen::Index>(block[j])); it; ++it) {
      const Eigen::Index r = local[static_cast<std::size_t>(it.row())];
      if (r >= 0) t.emplace_back(r, static_cast<Eigen::Index>(j), it.value());
    }
  }
  const auto b = static_cast<Eigen::Index>(block.size());
  SparseMatrix out(b, b);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

/// Eigenpairs of one Hermitian block with eigenvalue in [a, b].
struct WindowPairs {
  Eigen::VectorXd values;
  DenseMatrix vectors;
};

namespace detail {

inline WindowPairs dense_window(const DenseMatrix& m, double a, double b) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(m);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double e = es.eigenvalues()[i];
    if (e >= a && e <= b) keep.push_back(i);
  }
  WindowPairs w;
  w.values.resize(static_cast<Eigen::Index>(keep.size()));
  w.vectors.resize(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    w.values[static_cast<Eigen::Index>(c)] = es.eigenvalues()[keep[c]];
    w.vectors.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]);
  }
  return w;
}

// Shift-invert subspace iteration: the block grows until its Ritz values
// reach past the window, so every eigenvalue in [a, b] is captured.
inline WindowPairs shift_invert_window(const SparseMatrix& m, double a, double b, std::uint64_t seed) {
  const Eigen::Index n = m.rows();
  const double half = 0.5 * (b - a);
  double shift = 0.5 * (a + b);
  SparseMatrix id(n, n);
  id.setIdentity();
  Eigen::SparseLU<SparseMatrix> lu;
  for (int attempt = 0; attempt < 4; ++attempt) {
    lu.compute(m - Complex(shift) * id);
    if (lu.info() == Eigen::Success) break;
    shift += 1e-7 * std::max(1e-3, b - a) * (attempt + 1);
  }
  if (lu.info() != Eigen::Success) throw SolverError("shift-invert factorization failed", 0.0);

  std::mt19937_64 rng(seed);
  Eigen::Index k = std::min<Eigen::Index>(16, n);
  while (true) {
    DenseMatrix x(n, k);
    for (Eigen::Index c = 0; c < k; ++c) x.col(c) = random_unit_vector(static_cast<std::size_t>(n), rng);
    double worst = std::numeric_limits<double>::infinity();
    Eigen::VectorXd theta;
    DenseMatrix ritz;
    for (int it = 0; it < 500; ++it) {
      DenseMatrix y = lu.solve(x);
      Eigen::HouseholderQR<DenseMatrix> qr(y);
      x = qr.householderQ() * DenseMatrix::Identity(n, k);
      const DenseMatrix t = x.adjoint() * (m * x);
      Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (t + t.adjoint()));
      theta = es.eigenvalues();
      ritz = x * es.eigenvectors();
      worst = 0.0;
      for (Eigen::Index c = 0; c < k; ++c) {
        if (theta[c] < a - half || theta[c] > b + half) continue;
        const double res = (m * ritz.col(c) - theta[c] * ritz.col(c)).norm();
        worst = std::max(worst, res);
      }
      x = ritz;
      if (worst < 1e-11) break;
    }
    if (worst >= 1e-8) throw SolverError("shift-invert subspace iteration did not converge", worst);
    double reach = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) reach = std::max(reach, std::abs(theta[c] - shift));
    const bool spans_window = reach > std::max(shift - a, b - shift);
    if (spans_window || k == n) {
      std::vector<Eigen::Index> keep;
      for (Eigen::Index c = 0; c < k; ++c) {
        if (theta[c] >= a && theta[c] <= b) keep.push_back(c);
      }
      WindowPairs w;
      w.values.resize(static_cast<Eigen::Index>(keep.size()));
      w.vectors.resize(n, static_cast<Eigen::Index>(keep.size()));
      for (std::size_t c = 0; c < keep.size(); ++c) {
        w.values[static_cast<Eigen::Index>(c)] = theta[keep[c]];
        w.vectors.col(static_cast<Eigen::Index>(c)) = ritz.col(keep[c]);
      }
      return w;
    }
    k = std::min<Eigen::Index>(2 * k, n);
  }
}

}  // namespace detail

struct SpectralWindow {
  SparseOperator projector;
  std::size_t dim = 0;
  Eigen::VectorXd values;
  SparseMatrix vectors;  ///< orthonormal columns spanning the window, block-sparse
};

/// Projector onto the eigenvectors of h with eigenvalue in [a, b].
inline SpectralWindow spectral_window(const SparseOperator& h, double a, double b,
                                      std::size_t dense_limit = kDenseLimit, std::uint64_t seed = kDefaultSeed) {
  if (!(a < b)) throw DomainError("spectral window needs a < b");
  detail::require_hermitian(h);
  const auto n = static_cast<Eigen::Index>(h.dim());
  std::vector<double> vals;
  std::vector<Triplet> entries;
  if (h.is_diagonal()) {
    const Eigen::VectorXd d = h.real_diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] >= a && d[i] <= b) {
        entries.emplace_back(i, static_cast<Eigen::Index>(vals.size()), Complex(1.0));
        vals.push_back(d[i]);
      }
    }
  } else {
    for (const auto& block : connected_blocks(h)) {
      const SparseMatrix sub = restrict_block(h, block);
      const WindowPairs w = block.size() <= dense_limit ? detail::dense_window(DenseMatrix(sub), a, b)
                                                        : detail::shift_invert_window(sub, a, b, seed);
      for (Eigen::Index c = 0; c < w.values.size(); ++c) {
        const auto col = static_cast<Eigen::Index>(vals.size());
        for (std::size_t i = 0; i < block.size(); ++i) {
          const Complex v = w.vectors(static_cast<Eigen::Index>(i), c);
          if (v != Complex{}) entries.emplace_back(static_cast<Eigen::Index>(block[i]), col, v);
        }
        vals.push_back(w.values[c]);
      }
    }
  }
  SpectralWindow out;
  out.dim = vals.size();
  out.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  out.vectors.resize(n, static_cast<Eigen::Index>(vals.size()));
  out.vectors.setFromTriplets(entries.begin(), entries.end());
  out.projector = SparseOperator(SparseMatrix(out.vectors * out.vectors.adjoint()), true);
  return out;
}

/// Largest singular value, from the top eigenvalue of A^* A per block.
inline double operator_norm(const SparseOperator& a, std::size_t dense_limit = kDenseLimit) {
  const SparseOperator ata(SparseMatrix(a.matrix().adjoint() * a.matrix()), true);
  double top = 0.0;
  for (const auto& block : connected_blocks(ata)) {
    const SparseMatrix sub = restrict_block(ata, block);
    if (block.size() <= dense_limit) {
      Eigen::SelfAdjointEigenSolver<DenseMatrix> es(DenseMatrix(sub), Eigen::EigenvaluesOnly);
      top = std::max(top, es.eigenvalues().maxCoeff());
    } else {
      const SparseOperator neg(SparseMatrix(-sub), true);
      top = std::max(top, -ground_state(neg, SolverOptions{1e-12}).energy);
    }
  }
  return std::sqrt(std::max(0.0, top));
}

// ---------------------------------------------------------------------------
// Thresholds and projections.

struct ThresholdSet {
  std::vector<double> values;
  double e_max = 0.0;

  /// dist([a, b], S); zero when a threshold lies inside the interval.
  double distance(double a, double b) const {
    double d = std::numeric_limits<double>::infinity();
    for (double s : values) {
      if (s >= a && s <= b) return 0.0;
      d = std::min(d, s < a ? a - s : s - b);
    }
    return d;
  }
};

/// {k m1 + l m4 : k, l >= 0} intersected with [0, e_max].
inline ThresholdSet thresholds(const PhysicalParams& params, double e_max) {
  if (!(e_max >= 0.0)) throw DomainError("e_max must be non-negative");
  ThresholdSet s;
  s.e_max = e_max;
  const double slack = 1e-12 * std::max(1.0, e_max);
  for (long l = 0; l * params.m4 <= e_max + slack; ++l) {
    for (long k = 0; k * params.m1 + l * params.m4 <= e_max + slack; ++k) {
      s.values.push_back(static_cast<double>(k) * params.m1 + static_cast<double>(l) * params.m4);
    }
  }
  std::sort(s.values.begin(), s.values.end());
  std::vector<double> uniq;
  for (double v : s.values) {
    if (uniq.empty() || v - uniq.back() > slack) uniq.push_back(v);
  }
  s.values = std::move(uniq);
  return s;
}

/// Threshold set reaching far enough above b that dist([a, b], S) is exact.
inline ThresholdSet thresholds_for_window(const PhysicalParams& params, double b) {
  return thresholds(params, std::max(0.0, b) + params.m4);
}

/// P(lambda): states whose species-1 and species-4 free energy is at most lambda.
inline SparseOperator projection_P_lambda(const FockBasis& basis, const PhysicalParams& params, double lambda) {
  if (!(lambda > 0.0 && lambda < params.m1)) throw DomainError("lambda must lie in (0, m1)");
  const SparseOperator h01 = second_quantized_diagonal(basis, [&](const Mode& m) {
    const int s = m.species();
    return (s == 1 || s == 4) ? dispersion(s, m.momentum_norm(), params) : 0.0;
  });
  const Eigen::VectorXd e = h01.real_diagonal();
  Eigen::VectorXd d(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) d[i] = e[i] <= lambda ? 1.0 : 0.0;
  return SparseOperator::diagonal(d);
}

/// Projection onto states without species-2 or species-3 particles.
inline SparseOperator projection_neutrino_vacuum(const FockBasis& basis) {
  const std::uint64_t mask = basis.table().species_mask(2) | basis.table().species_mask(3);
  Eigen::VectorXd d(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) d[static_cast<Eigen::Index>(i)] = basis.state(i).count(mask) == 0;
  return SparseOperator::diagonal(d);
}

// ---------------------------------------------------------------------------
// Commutators with the dilation generator A = sum dGamma(p.grad + 3/2).

/// p.grad(omega): p^2/omega for the massive species, |p| for neutrinos.
inline double dilation_symbol(int species, double p, const PhysicalParams& params) {
  if (species == 2 || species == 3) return p;
  return p * p / dispersion(species, p, params);
}

/// (p.grad)^2 omega: p^2 (p^2 + 2 m^2)/omega^3 for the massive species, |p| for neutrinos.
inline double double_dilation_symbol(int species, double p, const PhysicalParams& params) {
  if (species == 2 || species == 3) return p;
  const double m = params.mass(species);
  const double w = dispersion(species, p, params);
  return p * p * (p * p + 2.0 * m * m) / (w * w * w);
}

inline SparseOperator commutator_A_H0(const FockBasis& basis, const PhysicalParams& params) {
  return second_quantized_diagonal(
      basis, [&](const Mode& m) { return dilation_symbol(m.species(), m.momentum_norm(), params); });
}

/// [A, H_I(G)] = H_I(aG) with aG the summed dilation derivative of the kernel.
inline SparseOperator commutator_A_HI(const FockBasis& basis, const Kernel& a_g, unsigned threads = 1) {
  return assemble_HI(basis, a_g, threads);
}

inline SparseOperator double_commutator_A_A_H0(const FockBasis& basis, const PhysicalParams& params) {
  return second_quantized_diagonal(
      basis, [&](const Mode& m) { return double_dilation_symbol(m.species(), m.momentum_norm(), params); });
}

// ---------------------------------------------------------------------------
// Compressed commutator positivity.

struct MourreRecord {
  double a = 0.0;
  double b = 0.0;
  double beta = 0.0;
  double bottom = std::numeric_limits<double>::infinity();
  std::size_t dim_window = 0;

  bool empty() const { return dim_window == 0; }
};

/// Smallest eigenvalue of E C E on ran E, with E the spectral projection of h
/// on [a, b]. An empty window records bottom = +inf.
inline MourreRecord mourre_bottom(const SparseOperator& h, const SparseOperator& commutator, double a, double b,
                                  const ThresholdSet& s, std::size_t dense_limit = kDenseLimit) {
  if (!(a < b)) throw DomainError("window needs a < b");
  if (s.values.size() < 2 || s.e_max < b + s.values[1]) {
    throw DomainError("threshold set does not reach far enough above the window");
  }
  MourreRecord rec;
  rec.a = a;
  rec.b = b;
  rec.beta = s.distance(a, b);
  if (rec.beta == 0.0) {
    throw ThresholdCollisionError("window [" + std::to_string(a) + ", " + std::to_string(b) +
                                  "] meets the threshold set");
  }
  detail::require_hermitian(commutator);
  const SpectralWindow w = spectral_window(h, a, b, dense_limit);
  rec.dim_window = w.dim;
  if (w.dim == 0) return rec;
  const DenseMatrix c(SparseMatrix(w.vectors.adjoint()) * (commutator.matrix() * w.vectors));
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (c + c.adjoint()), Eigen::EigenvaluesOnly);
  rec.bottom = es.eigenvalues()[0];
  return rec;
}

}  // namespace fermiweak
