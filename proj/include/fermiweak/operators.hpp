// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file operators.hpp
 * @brief Ladder operators on a truncated FockBasis.
 *
 * `annihilator(k)` is the unit-normalized mode operator c_k obeying the
 * discrete CAR {c_k, c_l^*} = delta_kl inside a grading group. The pointwise
 * field b(xi_k) of a continuum mode with quadrature weight w_k is c_k/sqrt(w_k),
 * so every integral  \int dxi f(xi) b(xi)  becomes  sum_k sqrt(w_k) f_k c_k.
 * With this convention number operators have integer spectrum and smeared
 * operators have the norm of their test function in the weighted L^2 space.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fermiweak/fock.hpp"
#include "fermiweak/sparse_operator.hpp"

namespace fermiweak {

/// (-1)^(occupied modes of k's grading group that precede k).
inline int ladder_sign(const ModeTable& table, std::uint64_t bits, std::size_t k) {
  return (std::popcount(bits & table.sign_mask(k)) & 1) ? -1 : 1;
}

inline void check_mode(const FockBasis& basis, std::size_t k) {
  if (k >= basis.num_modes()) {
    throw DomainError("mode index " + std::to_string(k) + " out of range (" +
                      std::to_string(basis.num_modes()) + " modes)");
  }
}

inline SparseOperator annihilator(const FockBasis& basis, std::size_t k, unsigned threads = 1) {
  check_mode(basis, k);
  const std::uint64_t bit = std::uint64_t{1} << k;
  auto column = [&](std::size_t j, auto& out) {
    const std::uint64_t s = basis.state(j).bits();
    if (!(s & bit)) return;
    if (auto i = basis.index_of(OccupationState(s ^ bit))) {
      out.emplace_back(*i, Complex(ladder_sign(basis.table(), s, k)));
    }
  };
  return SparseOperator(assemble_columns(basis.size(), column, threads));
}

inline SparseOperator creator(const FockBasis& basis, std::size_t k, unsigned threads = 1) {
  check_mode(basis, k);
  const std::uint64_t bit = std::uint64_t{1} << k;
  auto column = [&](std::size_t j, auto& out) {
    const std::uint64_t s = basis.state(j).bits();
    if (s & bit) return;
    if (auto i = basis.index_of(OccupationState(s | bit))) {
      out.emplace_back(*i, Complex(ladder_sign(basis.table(), s, k)));
    }
  };
  return SparseOperator(assemble_columns(basis.size(), column, threads));
}

/// Discretized pointwise field b(xi_k) = c_k / sqrt(w_k).
inline SparseOperator pointwise_annihilator(const FockBasis& basis, std::size_t k) {
  return (1.0 / std::sqrt(basis.table()[k].weight)) * annihilator(basis, k);
}

/// b(phi) = \int b(xi) conj(phi(xi)) dxi over the modes of one sector.
inline SparseOperator smeared_annihilator(const FockBasis& basis, SectorId sector, std::span<const Complex> phi) {
  const ModeTable& table = basis.table();
  if (phi.size() != table.sector_size(sector)) {
    throw DomainError("test function has " + std::to_string(phi.size()) + " values, sector " +
                      to_string(sector) + " has " + std::to_string(table.sector_size(sector)) + " modes");
  }
  const std::size_t off = table.sector_offset(sector);
  auto column = [&](std::size_t j, auto& out) {
    const std::uint64_t s = basis.state(j).bits();
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const std::size_t k = off + i;
      const std::uint64_t bit = std::uint64_t{1} << k;
      if (!(s & bit) || phi[i] == Complex{}) continue;
      if (auto row = basis.index_of(OccupationState(s ^ bit))) {
        const double amp = std::sqrt(table[k].weight) * ladder_sign(table, s, k);
        out.emplace_back(*row, amp * std::conj(phi[i]));
      }
    }
  };
  return SparseOperator(assemble_columns(basis.size(), column));
}

/// b^*(phi) = \int b^*(xi) phi(xi) dxi.
inline SparseOperator smeared_creator(const FockBasis& basis, SectorId sector, std::span<const Complex> phi) {
  return smeared_annihilator(basis, sector, phi).adjoint();
}

/// Weighted L^2 norm sqrt(sum_k w_k |phi_k|^2) of a test function on a sector.
inline double l2_norm(const ModeTable& table, SectorId sector, std::span<const Complex> phi) {
  const auto modes = table.sector_modes(sector);
  double acc = 0.0;
  for (std::size_t i = 0; i < phi.size() && i < modes.size(); ++i) acc += modes[i].weight * std::norm(phi[i]);
  return std::sqrt(acc);
}

inline SparseOperator number_operator(const FockBasis& basis, int species) {
  if (species < 1 || species > kNumSpecies) throw DomainError("species must be in 1..4");
  const std::uint64_t mask = basis.table().species_mask(species);
  Eigen::VectorXd d(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) d[static_cast<Eigen::Index>(i)] = basis.state(i).count(mask);
  return SparseOperator::diagonal(d);
}

/// Occupation counts of one species per basis state (the diagonal of N_j).
inline Eigen::VectorXd number_diagonal(const FockBasis& basis, int species) {
  const std::uint64_t mask = basis.table().species_mask(species);
  Eigen::VectorXd d(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) d[static_cast<Eigen::Index>(i)] = basis.state(i).count(mask);
  return d;
}

/// One factor b_{sector}(xi) or b^*_{sector}(xi) of a normal-ordered product.
struct Ladder {
  SectorId sector;
  bool creation = false;

  static constexpr Ladder create(int species, Charge c) { return {{species, c}, true}; }
  static constexpr Ladder annihilate(int species, Charge c) { return {{species, c}, false}; }
};

namespace detail {

template <std::size_t N, typename KernelFn, typename Out>
struct ProductWalker {
  const FockBasis& basis;
  const std::array<Ladder, N>& factors;
  KernelFn& kernel;
  Out& out;
  std::array<std::size_t, N> local{};

  // Applies factors N-1, N-2, ..., 0 (rightmost first) and emits one entry
  // per admissible index tuple.
  void walk(int level, std::uint64_t bits, int sign, double sqrt_w) {
    if (level < 0) {
      const Complex k = kernel(static_cast<const std::array<std::size_t, N>&>(local));
      if (k == Complex{}) return;
      if (auto row = basis.index_of(OccupationState(bits))) {
        out.emplace_back(*row, static_cast<double>(sign) * sqrt_w * k);
      }
      return;
    }
    const ModeTable& table = basis.table();
    const Ladder& f = factors[static_cast<std::size_t>(level)];
    const std::size_t off = table.sector_offset(f.sector);
    const std::size_t n = table.sector_size(f.sector);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = off + i;
      const std::uint64_t bit = std::uint64_t{1} << k;
      const bool occ = bits & bit;
      if (occ == f.creation) continue;
      local[static_cast<std::size_t>(level)] = i;
      walk(level - 1, bits ^ bit, sign * ladder_sign(table, bits, k), sqrt_w * std::sqrt(table[k].weight));
    }
  }
};

}  // namespace detail

/// Assembles  \int dxi_1..dxi_N K(xi_1..xi_N) L_1(xi_1) ... L_N(xi_N)  on the
/// basis, with K evaluated on local (per-sector) mode indices. The result is
/// the compression of the operator to the truncated space.
template <std::size_t N, typename KernelFn>
SparseOperator assemble_integral(const FockBasis& basis, const std::array<Ladder, N>& factors, KernelFn&& kernel,
                                 unsigned threads = 1) {
  auto column = [&](std::size_t j, auto& out) {
    using OutT = std::remove_reference_t<decltype(out)>;
    detail::ProductWalker<N, std::remove_reference_t<KernelFn>, OutT> w{basis, factors, kernel, out, {}};
    w.walk(static_cast<int>(N) - 1, basis.state(j).bits(), 1, 1.0);
  };
  return SparseOperator(assemble_columns(basis.size(), column, threads));
}

}  // namespace fermiweak
