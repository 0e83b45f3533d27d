// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "fermiweak/errors.hpp"
#include "fermiweak/fock.hpp"
#include "fermiweak/kernel.hpp"
#include "fermiweak/operators.hpp"
#include "fermiweak/sparse_operator.hpp"

namespace fermiweak {

struct PhysicalParams {
  double m1 = 1.0;
  double m4 = 2.0;
  double g = 0.0;
  double lambda_uv = 1.0;
  double sigma = 0.0;
  double eta = 1.0;

  void validate() const {
    if (!(m1 > 0.0) || !(m4 > 0.0)) throw ConfigError("masses m1 and m4 must be positive");
    if (!(m1 < m4)) throw ConfigError("the electron mass m1 must be below the muon mass m4");
    if (!std::isfinite(g)) throw ConfigError("coupling g must be finite");
    if (!(lambda_uv > 0.0)) throw ConfigError("lambda_uv must be positive");
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  }

  double mass(int species) const {
    if (species == 1) return m1;
    if (species == 4) return m4;
    return 0.0;
  }
};

inline double dispersion(int species, double p, const PhysicalParams& params) {
  if (species < 1 || species > kNumSpecies) throw DomainError("species must be in 1..4");
  if (species == 2 || species == 3) return p;
  const double m = params.mass(species);
  return std::sqrt(p * p + m * m);
}

inline double dispersion(int species, const Momentum& p, const PhysicalParams& params) {
  return dispersion(species, norm(p), params);
}

/// Diagonal operator sum_k f(mode k) n_k on the basis.
template <typename SymbolFn>
SparseOperator second_quantized_diagonal(const FockBasis& basis, SymbolFn&& symbol) {
  const ModeTable& table = basis.table();
  std::vector<double> per_mode(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) per_mode[k] = symbol(table[k]);
  Eigen::VectorXd d(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    std::uint64_t bits = basis.state(i).bits();
    double e = 0.0;
    while (bits) {
      e += per_mode[static_cast<std::size_t>(std::countr_zero(bits))];
      bits &= bits - 1;
    }
    d[static_cast<Eigen::Index>(i)] = e;
  }
  return SparseOperator::diagonal(d);
}

inline SparseOperator assemble_H0(const FockBasis& basis, const PhysicalParams& params) {
  return second_quantized_diagonal(
      basis, [&](const Mode& m) { return dispersion(m.species(), m.momentum_norm(), params); });
}

namespace detail {

inline void require_same_modes(const ModeTable& basis_table, const ModeTable& kernel_table) {
  if (!(basis_table.with_grading(kernel_table.grading()) == kernel_table)) {
    throw ConfigError("kernel sectors do not match the basis mode table");
  }
}

}  // namespace detail

/// B_{eps,-eps} = sum w G b*_{1,eps} b*_{2,-eps} b*_{3,eps} b_{4,eps} for one channel.
inline SparseOperator assemble_channel(const FockBasis& basis, const Kernel& g, Charge eps, unsigned threads = 1) {
  detail::require_same_modes(basis.table(), g.table());
  const Charge ep = opposite(eps);
  const std::array<Ladder, 4> factors{Ladder::create(1, eps), Ladder::create(2, ep), Ladder::create(3, eps),
                                      Ladder::annihilate(4, eps)};
  const KernelTensor& t = g.channel(eps);
  return assemble_integral(
      basis, factors, [&](const std::array<std::size_t, 4>& i) { return t(i); }, threads);
}

/// Interaction operator: sum over channels of B + B^*.
inline SparseOperator assemble_HI(const FockBasis& basis, const Kernel& g, unsigned threads = 1) {
  detail::require_same_modes(basis.table(), g.table());
  SparseOperator out = SparseOperator::zero(basis.size());
  for (Charge eps : g.populated_channels()) {
    const SparseOperator b = assemble_channel(basis, g, eps, threads);
    out = out + b + b.adjoint();
  }
  return SparseOperator(out.matrix(), true);
}

inline SparseOperator assemble_H(const FockBasis& basis, const PhysicalParams& params, const Kernel& g,
                                 unsigned threads = 1) {
  SparseOperator h0 = assemble_H0(basis, params);
  if (params.g == 0.0) return h0;
  return SparseOperator((h0 + params.g * assemble_HI(basis, g, threads)).matrix(), true);
}

/// H_sigma: the Hamiltonian with the infrared-cut kernel.
inline SparseOperator assemble_H_sigma(const FockBasis& basis, const PhysicalParams& params, const Kernel& g,
                                       double sigma, unsigned threads = 1) {
  return assemble_H(basis, params, infrared_cutoff(g, sigma), threads);
}

// ---------------------------------------------------------------------------
// Operators of the norm bounds.

/// Sectors (1,eps), (2,-eps), (3,eps) of the three-annihilator operator.
inline std::array<SectorId, 3> triple_sectors(Charge eps) {
  return {SectorId{1, eps}, SectorId{2, opposite(eps)}, SectorId{3, eps}};
}

/// A_{eps,-eps} = sum w conj(H) b_{3,eps} b_{2,-eps} b_{1,eps}.
inline SparseOperator assemble_triple_annihilator(const FockBasis& basis, const ReducedKernel& h, Charge eps) {
  if (h.sectors() != triple_sectors(eps)) throw ConfigError("reduced kernel sectors do not match the channel");
  const Charge ep = opposite(eps);
  const std::array<Ladder, 3> factors{Ladder::annihilate(3, eps), Ladder::annihilate(2, ep),
                                      Ladder::annihilate(1, eps)};
  return assemble_integral(basis, factors, [&](const std::array<std::size_t, 3>& i) {
    return std::conj(h({i[2], i[1], i[0]}));
  });
}

/// Sectors of the reduced vertex V_j: (1,eps), (5-j,-eps), (4,eps) for j = 2, 3.
inline std::array<SectorId, 3> reduced_vertex_sectors(int j, Charge eps) {
  if (j != 2 && j != 3) throw DomainError("reduced vertex index must be 2 or 3");
  return {SectorId{1, eps}, SectorId{5 - j, opposite(eps)}, SectorId{4, eps}};
}

/// V_j = sum w G^j b*_{1,eps} b*_{5-j,-eps} b_{4,eps}: the interaction with
/// the species-j neutrino removed.
inline SparseOperator assemble_reduced_vertex(const FockBasis& basis, const ReducedKernel& gj, int j, Charge eps) {
  if (gj.sectors() != reduced_vertex_sectors(j, eps)) {
    throw ConfigError("reduced kernel sectors do not match V_" + std::to_string(j));
  }
  const Charge ep = opposite(eps);
  const std::array<Ladder, 3> factors{Ladder::create(1, eps), Ladder::create(5 - j, ep), Ladder::annihilate(4, eps)};
  return assemble_integral(basis, factors, [&](const std::array<std::size_t, 3>& i) { return gj(i); });
}

}  // namespace fermiweak
