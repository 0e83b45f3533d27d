// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

// Shared grids for the unit tests.

#pragma once

#include "fermiweak/fock.hpp"

namespace fermiweak::testing {

/// Eight modes: one node at |p| = 1, one spin per sector, unit weights.
inline ModeTable one_mode_per_sector(double p = 1.0, GradingScheme grading = GradingScheme::standard()) {
  return build_mode_table(shared_grid({{{0.0, 0.0, p}, 1.0}}, false), grading);
}

/// 32 modes: nodes at |p| = 0.5 and 1 along z, both spins, unit weights.
inline ModeTable two_node_table() {
  return build_mode_table(shared_grid(radial_nodes({0.5, 1.0}, {}), true));
}

/// 16 modes: nodes at |p| = 0.5 and 1 with weights 0.3 and 0.7, one spin.
inline ModeTable weighted_table() {
  return build_mode_table(shared_grid(radial_nodes({0.5, 1.0}, {0.3, 0.7}), false));
}

/// Species 1 with two weighted nodes and both spins (four modes in (1,+) and
/// (1,-)); one unit-weight mode in every other sector. 14 modes.
inline ModeTable four_mode_sector_table() {
  GridSpec g = shared_grid({{{0.0, 0.0, 1.0}, 1.0}}, false);
  g.species[0].nodes = radial_nodes({0.5, 1.0}, {0.3, 0.7});
  g.species[0].spins = {-0.5, 0.5};
  return build_mode_table(g);
}

}  // namespace fermiweak::testing
