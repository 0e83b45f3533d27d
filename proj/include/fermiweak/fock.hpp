// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file fock.hpp
 * @brief Discretized single-particle modes and the truncated occupation basis
 *        of the eight-sector fermionic Fock space.
 *
 * Sectors are labelled by (species, charge) with species 1 (electron),
 * 2 and 3 (the two neutrino flavours) and 4 (muon); charge + is the particle,
 * charge - the antiparticle. The global mode order is
 *
 *   (1,+) (1,-) (2,+) (2,-) (3,+) (3,-) (4,+) (4,-)
 *
 * and every fermionic sign in the library is measured against it.
 */

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fermiweak/errors.hpp"

namespace fermiweak {

using Momentum = std::array<double, 3>;

inline double norm(const Momentum& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

enum class Charge : int { Plus = 0, Minus = 1 };

inline constexpr Charge opposite(Charge c) { return c == Charge::Plus ? Charge::Minus : Charge::Plus; }
inline constexpr char symbol(Charge c) { return c == Charge::Plus ? '+' : '-'; }

inline constexpr int kNumSpecies = 4;
inline constexpr int kNumSectors = 8;
inline constexpr std::size_t kMaxModes = 64;

/// (species, charge) pair; `index()` is the position in the global sector order.
struct SectorId {
  int species = 1;
  Charge charge = Charge::Plus;

  constexpr int index() const { return 2 * (species - 1) + static_cast<int>(charge); }
  static constexpr SectorId from_index(int i) { return {i / 2 + 1, static_cast<Charge>(i % 2)}; }

  friend constexpr bool operator==(const SectorId&, const SectorId&) = default;
};

inline std::string to_string(SectorId s) {
  return "(" + std::to_string(s.species) + "," + symbol(s.charge) + ")";
}

/// Spins are half-integers for the massive species 1 and 4 and helicities
/// for the neutrinos.
inline bool valid_spin(int species, double spin) {
  if (species == 1 || species == 4) return spin == 0.5 || spin == -0.5;
  return spin == 1.0 || spin == -1.0;
}

struct Mode {
  SectorId sector;
  Momentum momentum{};
  double spin = 0.5;
  double weight = 1.0;
  std::size_t node = 0;  // momentum node index inside the sector's grid

  int species() const { return sector.species; }
  Charge charge() const { return sector.charge; }
  double momentum_norm() const { return norm(momentum); }
};

struct GridNode {
  Momentum momentum{};
  double weight = 1.0;
};

/// Per-species momentum nodes and spin values; particle and antiparticle
/// sectors of a species share the grid.
struct SpeciesGrid {
  std::vector<GridNode> nodes;
  std::vector<double> spins;
};

struct GridSpec {
  std::array<SpeciesGrid, kNumSpecies> species;
};

/// One explicit mode of a sector, used when a grid is read back from a
/// kernel file rather than generated from a GridSpec.
struct ModeSpec {
  Momentum momentum{};
  double spin = 0.5;
  double weight = 1.0;
};

/// Assignment of sectors to Jordan-Wigner grading groups. Ladder operators of
/// sectors in the same group anticommute, operators in different groups
/// commute.
struct GradingScheme {
  std::array<int, kNumSectors> group_of_sector{0, 0, 1, 1, 1, 1, 2, 2};

  /// G_A = {1+,1-}, G_B = {2+,2-,3+,3-}, G_C = {4+,4-}.
  static constexpr GradingScheme standard() { return {{0, 0, 1, 1, 1, 1, 2, 2}}; }
  /// Neutrino flavours in separate groups, so species 2 and 3 commute.
  static constexpr GradingScheme commuting_neutrinos() { return {{0, 0, 1, 1, 2, 2, 3, 3}}; }
  /// One string over every sector; species 1 and 4 then anticommute with the rest.
  static constexpr GradingScheme single_string() { return {{0, 0, 0, 0, 0, 0, 0, 0}}; }

  friend constexpr bool operator==(const GradingScheme&, const GradingScheme&) = default;
};

inline std::optional<GradingScheme> grading_from_name(const std::string& name) {
  if (name == "standard") return GradingScheme::standard();
  if (name == "commuting-neutrinos") return GradingScheme::commuting_neutrinos();
  if (name == "single-string") return GradingScheme::single_string();
  return std::nullopt;
}

class ModeTable {
 public:
  ModeTable() = default;

  /// Builds the table from explicit per-sector mode lists (in sector order).
  /// Validation happens here so every construction path shares it.
  ModeTable(const std::array<std::vector<ModeSpec>, kNumSectors>& sectors,
            GradingScheme grading = GradingScheme::standard())
      : grading_(grading) {
    std::size_t total = 0;
    for (const auto& s : sectors) total += s.size();
    if (total > kMaxModes) {
      throw ResourceError("mode table has " + std::to_string(total) + " modes; at most " +
                          std::to_string(kMaxModes) + " fit an occupation word");
    }
    modes_.reserve(total);
    for (int s = 0; s < kNumSectors; ++s) {
      const SectorId id = SectorId::from_index(s);
      if (sectors[s].empty()) throw ConfigError("sector " + to_string(id) + " has no modes");
      sector_offsets_[s] = modes_.size();
      std::vector<Momentum> nodes;
      for (const auto& m : sectors[s]) {
        if (!valid_spin(id.species, m.spin)) {
          throw ConfigError("spin " + std::to_string(m.spin) + " is outside the domain of species " +
                            std::to_string(id.species));
        }
        if (!(m.weight > 0.0) || !std::isfinite(m.weight)) {
          throw ConfigError("quadrature weight must be positive in sector " + to_string(id));
        }
        if (!(norm(m.momentum) > 0.0)) {
          throw InfraredGridError("grid node at |p| = 0 in sector " + to_string(id));
        }
        auto at = std::find(nodes.begin(), nodes.end(), m.momentum);
        if (at == nodes.end()) at = nodes.insert(nodes.end(), m.momentum);
        modes_.push_back(Mode{id, m.momentum, m.spin, m.weight, static_cast<std::size_t>(at - nodes.begin())});
      }
    }
    sector_offsets_[kNumSectors] = modes_.size();
    build_masks();
  }

  std::size_t size() const { return modes_.size(); }
  const Mode& operator[](std::size_t k) const { return modes_[k]; }
  std::span<const Mode> modes() const { return modes_; }
  const GradingScheme& grading() const { return grading_; }

  std::size_t sector_offset(SectorId s) const { return sector_offsets_[s.index()]; }
  std::size_t sector_size(SectorId s) const {
    return sector_offsets_[s.index() + 1] - sector_offsets_[s.index()];
  }
  std::span<const Mode> sector_modes(SectorId s) const {
    return std::span<const Mode>(modes_).subspan(sector_offset(s), sector_size(s));
  }
  /// The eight start offsets, in global sector order.
  std::array<std::size_t, kNumSectors> sector_offsets() const {
    std::array<std::size_t, kNumSectors> out{};
    std::copy_n(sector_offsets_.begin(), kNumSectors, out.begin());
    return out;
  }

  std::uint64_t sector_mask(SectorId s) const { return sector_masks_[s.index()]; }
  std::uint64_t species_mask(int species) const {
    return sector_masks_[2 * (species - 1)] | sector_masks_[2 * (species - 1) + 1];
  }
  /// Occupied modes of the same grading group that precede mode k.
  std::uint64_t sign_mask(std::size_t k) const { return sign_masks_[k]; }

  /// Same modes, different grading; used for sign-convention experiments.
  ModeTable with_grading(GradingScheme grading) const {
    ModeTable t = *this;
    t.grading_ = grading;
    t.build_masks();
    return t;
  }

  /// Explicit per-sector mode lists (round-trips through the constructor).
  std::array<std::vector<ModeSpec>, kNumSectors> sector_specs() const {
    std::array<std::vector<ModeSpec>, kNumSectors> out;
    for (const auto& m : modes_) out[m.sector.index()].push_back({m.momentum, m.spin, m.weight});
    return out;
  }

  friend bool operator==(const ModeTable& a, const ModeTable& b) {
    if (a.size() != b.size() || !(a.grading_ == b.grading_)) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const Mode& x = a.modes_[k];
      const Mode& y = b.modes_[k];
      if (!(x.sector == y.sector) || x.momentum != y.momentum || x.spin != y.spin ||
          x.weight != y.weight) {
        return false;
      }
    }
    return true;
  }

 private:
  void build_masks() {
    sector_masks_.fill(0);
    for (std::size_t k = 0; k < modes_.size(); ++k) {
      sector_masks_[modes_[k].sector.index()] |= std::uint64_t{1} << k;
    }
    sign_masks_.assign(modes_.size(), 0);
    for (std::size_t k = 0; k < modes_.size(); ++k) {
      const int group = grading_.group_of_sector[modes_[k].sector.index()];
      std::uint64_t mask = 0;
      for (std::size_t l = 0; l < k; ++l) {
        if (grading_.group_of_sector[modes_[l].sector.index()] == group) mask |= std::uint64_t{1} << l;
      }
      sign_masks_[k] = mask;
    }
  }

  std::vector<Mode> modes_;
  std::array<std::size_t, kNumSectors + 1> sector_offsets_{};
  std::array<std::uint64_t, kNumSectors> sector_masks_{};
  std::vector<std::uint64_t> sign_masks_;
  GradingScheme grading_ = GradingScheme::standard();
};

/// Expands a per-species grid into the eight sectors. Inside a sector modes
/// are ordered by momentum node, then by spin.
inline ModeTable build_mode_table(const GridSpec& grid, GradingScheme grading = GradingScheme::standard()) {
  std::array<std::vector<ModeSpec>, kNumSectors> sectors;
  for (int species = 1; species <= kNumSpecies; ++species) {
    const SpeciesGrid& g = grid.species[species - 1];
    if (g.nodes.empty() || g.spins.empty()) {
      throw ConfigError("species " + std::to_string(species) + " has an empty grid");
    }
    std::vector<double> spins = g.spins;
    std::sort(spins.begin(), spins.end());
    if (std::adjacent_find(spins.begin(), spins.end()) != spins.end()) {
      throw ConfigError("duplicate spin value for species " + std::to_string(species));
    }
    std::vector<ModeSpec> modes;
    for (const auto& node : g.nodes) {
      for (double s : spins) modes.push_back({node.momentum, s, node.weight});
    }
    sectors[2 * (species - 1)] = modes;
    sectors[2 * (species - 1) + 1] = std::move(modes);
  }
  return ModeTable(sectors, grading);
}

/// Same momentum nodes for every species. With `both_spins` each node
/// carries both spin (helicity) values, otherwise only the positive one.
inline GridSpec shared_grid(const std::vector<GridNode>& nodes, bool both_spins = true) {
  GridSpec g;
  for (int species = 1; species <= kNumSpecies; ++species) {
    const double s = (species == 1 || species == 4) ? 0.5 : 1.0;
    g.species[species - 1].nodes = nodes;
    g.species[species - 1].spins = both_spins ? std::vector<double>{-s, s} : std::vector<double>{s};
  }
  return g;
}

/// Nodes at the given radii along one direction.
inline std::vector<GridNode> radial_nodes(const std::vector<double>& radii, const std::vector<double>& weights,
                                          const Momentum& direction = {0.0, 0.0, 1.0}) {
  if (!weights.empty() && weights.size() != radii.size()) {
    throw ConfigError("radial grid has " + std::to_string(radii.size()) + " radii but " +
                      std::to_string(weights.size()) + " weights");
  }
  const double len = norm(direction);
  if (!(len > 0.0)) throw ConfigError("radial grid direction must be nonzero");
  std::vector<GridNode> out;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double r = radii[i] / len;
    out.push_back({{direction[0] * r, direction[1] * r, direction[2] * r}, weights.empty() ? 1.0 : weights[i]});
  }
  return out;
}

/// Bit pattern over the global mode list, bit k set when mode k is occupied.
class OccupationState {
 public:
  constexpr OccupationState() = default;
  constexpr explicit OccupationState(std::uint64_t bits) : bits_(bits) {}

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool occupied(std::size_t k) const { return (bits_ >> k) & 1U; }
  constexpr int popcount() const { return std::popcount(bits_); }
  constexpr int count(std::uint64_t mask) const { return std::popcount(bits_ & mask); }

  friend constexpr bool operator==(OccupationState, OccupationState) = default;

 private:
  std::uint64_t bits_ = 0;
};

/// Per-sector occupation numbers Q = (q, qbar, r, rbar, s, sbar, t, tbar).
inline std::array<int, kNumSectors> sector_occupations(const ModeTable& table, OccupationState s) {
  std::array<int, kNumSectors> q{};
  for (int i = 0; i < kNumSectors; ++i) q[i] = s.count(table.sector_mask(SectorId::from_index(i)));
  return q;
}

inline constexpr std::size_t kDefaultBasisCap = 4'000'000;

/// All occupation patterns with at most `n_max` particles, ordered by
/// particle number and then by increasing bit pattern; the vacuum is state 0.
class FockBasis {
 public:
  FockBasis(ModeTable table, int n_max, std::size_t cap = kDefaultBasisCap)
      : table_(std::move(table)), n_max_(n_max) {
    if (n_max < 0) throw DomainError("n_max must be non-negative");
    const int m = static_cast<int>(table_.size());
    const int top = std::min(n_max, m);
    std::size_t total = 0;
    for (int k = 0; k <= top; ++k) {
      total += binomial(m, k);
      if (total > cap) {
        throw ResourceError("basis with " + std::to_string(m) + " modes and n_max " +
                            std::to_string(n_max) + " exceeds the cap of " + std::to_string(cap) +
                            " states");
      }
    }
    states_.reserve(total);
    index_.reserve(total);
    for (int k = 0; k <= top; ++k) {
      if (k == 0) {
        push(0);
        continue;
      }
      // Gosper's hack walks k-subsets in increasing numeric order.
      std::uint64_t v = (k == 64) ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1;
      const std::uint64_t limit = (m == 64) ? 0 : (std::uint64_t{1} << m);
      while (true) {
        push(v);
        if (k == m) break;
        const std::uint64_t t = v | (v - 1);
        const std::uint64_t next = (t + 1) | (((~t & -~t) - 1) >> (std::countr_zero(v) + 1));
        if (next <= v || (limit != 0 && next >= limit)) break;
        v = next;
      }
    }
  }

  const ModeTable& table() const { return table_; }
  int n_max() const { return n_max_; }
  std::size_t size() const { return states_.size(); }
  std::size_t num_modes() const { return table_.size(); }
  OccupationState state(std::size_t i) const { return states_[i]; }
  std::span<const OccupationState> states() const { return states_; }

  std::optional<std::size_t> index_of(OccupationState s) const {
    auto it = index_.find(s.bits());
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// True when every occupation pattern of the modes is present.
  bool untruncated() const { return n_max_ >= static_cast<int>(table_.size()); }

  static std::size_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::size_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
    return r;
  }

 private:
  void push(std::uint64_t bits) {
    index_.emplace(bits, states_.size());
    states_.emplace_back(bits);
  }

  ModeTable table_;
  int n_max_;
  std::vector<OccupationState> states_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

inline FockBasis build_basis(const ModeTable& table, int n_max, std::size_t cap = kDefaultBasisCap) {
  return FockBasis(table, n_max, cap);
}

}  // namespace fermiweak
