// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "fermiweak/fock.hpp"
#include "fermiweak/operators.hpp"
#include "test_support.hpp"

using namespace fermiweak;
using fermiweak::testing::one_mode_per_sector;
using fermiweak::testing::two_node_table;

namespace {

std::uint64_t bit(std::size_t k) { return std::uint64_t{1} << k; }

// Entry (row, col) of an operator where col is the state `from` and row the state `to`.
Complex element(const FockBasis& basis, const SparseOperator& op, std::uint64_t to, std::uint64_t from) {
  const auto r = basis.index_of(OccupationState(to));
  const auto c = basis.index_of(OccupationState(from));
  EXPECT_TRUE(r && c);
  return op.coeff(*r, *c);
}

std::size_t binomial_oracle(int n, int k) {
  // Pascal's triangle.
  std::vector<std::vector<std::size_t>> t(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    t[i].assign(static_cast<std::size_t>(i) + 1, 1);
    for (int j = 1; j < i; ++j) t[i][j] = t[i - 1][j - 1] + t[i - 1][j];
  }
  return k <= n ? t[n][k] : 0;
}

}  // namespace

TEST(ModeTable, SpinMultiplicityOfMassiveSpecies) {
  GridSpec g = shared_grid({{{0.0, 0.0, 1.0}, 1.0}}, true);
  const ModeTable t = build_mode_table(g);
  EXPECT_EQ(t.sector_size({1, Charge::Plus}), 2u);
}

TEST(ModeTable, RejectsHalfIntegerHelicity) {
  GridSpec g = shared_grid({{{0.0, 0.0, 1.0}, 1.0}}, false);
  g.species[1].spins = {0.5};
  EXPECT_THROW(build_mode_table(g), ConfigError);
}

TEST(ModeTable, ThirtyTwoModeOffsets) {
  const ModeTable t = two_node_table();
  ASSERT_EQ(t.size(), 32u);
  // Each sector holds 2 nodes x 2 spins.
  const std::array<std::size_t, 8> expected{0, 4, 8, 12, 16, 20, 24, 28};
  EXPECT_EQ(t.sector_offsets(), expected);
}

TEST(ModeTable, OrderWithinSectorIsNodeThenSpin) {
  const ModeTable t = two_node_table();
  const auto modes = t.sector_modes({4, Charge::Minus});
  EXPECT_EQ(modes[0].node, 0u);
  EXPECT_EQ(modes[0].spin, -0.5);
  EXPECT_EQ(modes[1].node, 0u);
  EXPECT_EQ(modes[1].spin, 0.5);
  EXPECT_EQ(modes[2].node, 1u);
}

TEST(ModeTable, Errors) {
  GridSpec empty = shared_grid({{{0.0, 0.0, 1.0}, 1.0}});
  empty.species[2].nodes.clear();
  EXPECT_THROW(build_mode_table(empty), ConfigError);

  GridSpec origin = shared_grid({{{0.0, 0.0, 0.0}, 1.0}});
  EXPECT_THROW(build_mode_table(origin), InfraredGridError);

  GridSpec weight = shared_grid({{{0.0, 0.0, 1.0}, 0.0}});
  EXPECT_THROW(build_mode_table(weight), ConfigError);

  std::vector<GridNode> many;
  for (int i = 1; i <= 5; ++i) many.push_back({{0.0, 0.0, double(i)}, 1.0});
  EXPECT_THROW(build_mode_table(shared_grid(many, true)), ResourceError);  // 80 modes
}

TEST(ModeTable, DeterministicForEqualInput) {
  EXPECT_TRUE(two_node_table() == two_node_table());
}

TEST(FockBasis, Sizes) {
  const ModeTable eight = one_mode_per_sector();
  EXPECT_EQ(build_basis(eight, 0).size(), 1u);
  EXPECT_EQ(build_basis(eight, 8).size(), 256u);
  const ModeTable t32 = two_node_table();
  const std::size_t expected = binomial_oracle(32, 0) + binomial_oracle(32, 1) + binomial_oracle(32, 2);
  EXPECT_EQ(expected, 529u);
  EXPECT_EQ(build_basis(t32, 2).size(), expected);
}

TEST(FockBasis, OrderingAndIndexBijection) {
  const FockBasis b = build_basis(two_node_table(), 3);
  ASSERT_EQ(b.state(0).bits(), 0u);
  for (std::size_t i = 0; i < b.size(); ++i) {
    ASSERT_EQ(*b.index_of(b.state(i)), i);
    ASSERT_LE(b.state(i).popcount(), 3);
    if (i > 0) {
      const auto p = b.state(i - 1);
      const auto q = b.state(i);
      ASSERT_TRUE(p.popcount() < q.popcount() || (p.popcount() == q.popcount() && p.bits() < q.bits()));
    }
  }
  std::size_t total = 0;
  for (int k = 0; k <= 3; ++k) total += binomial_oracle(32, k);
  EXPECT_EQ(b.size(), total);
}

TEST(FockBasis, ResourceCapAndDomain) {
  EXPECT_THROW(FockBasis(two_node_table(), 4, 1000), ResourceError);
  EXPECT_THROW(FockBasis(one_mode_per_sector(), -1), DomainError);
}

TEST(FockBasis, SectorOccupations) {
  const ModeTable t = one_mode_per_sector();
  const auto q = sector_occupations(t, OccupationState(bit(0) | bit(1) | bit(6)));
  const std::array<int, 8> expected{1, 1, 0, 0, 0, 0, 1, 0};
  EXPECT_EQ(q, expected);
}

// Modes of the one-mode-per-sector table: 0=(1,+) 1=(1,-) 2=(2,+) 3=(2,-)
// 4=(3,+) 5=(3,-) 6=(4,+) 7=(4,-).
TEST(Annihilator, VacuumColumnIsZero) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  for (std::size_t k = 0; k < 8; ++k) {
    const SparseOperator c = annihilator(b, k);
    for (std::size_t r = 0; r < b.size(); ++r) ASSERT_EQ(c.coeff(r, 0), Complex{});
  }
}

TEST(Annihilator, SignAntiparticleAfterParticle) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  EXPECT_EQ(element(b, annihilator(b, 1), bit(0), bit(0) | bit(1)), Complex(-1.0));
}

TEST(Annihilator, SignNeutrinoThreeAfterTwo) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  const std::uint64_t from = bit(2) | bit(3) | bit(4);
  EXPECT_EQ(element(b, annihilator(b, 4), from ^ bit(4), from), Complex(1.0));
}

TEST(Annihilator, SignNeutrinoThreeAntiparticle) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  const std::uint64_t from = bit(2) | bit(3) | bit(4) | bit(5);
  EXPECT_EQ(element(b, annihilator(b, 5), from ^ bit(5), from), Complex(-1.0));
}

TEST(Annihilator, MuonDoesNotEnterNeutrinoSign) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  const std::uint64_t from = bit(2) | bit(6);
  EXPECT_EQ(element(b, annihilator(b, 2), bit(6), from), Complex(1.0));
  // A species-1 particle in front is outside the neutrino group as well.
  EXPECT_EQ(element(b, annihilator(b, 2), bit(0), bit(0) | bit(2)), Complex(1.0));
}

TEST(Annihilator, SingleStringGradingChangesTheSign) {
  const FockBasis b = build_basis(one_mode_per_sector().with_grading(GradingScheme::single_string()), 8);
  EXPECT_EQ(element(b, annihilator(b, 2), bit(0), bit(0) | bit(2)), Complex(-1.0));
}

TEST(Annihilator, RejectsOutOfRangeMode) {
  const FockBasis b = build_basis(one_mode_per_sector(), 2);
  EXPECT_THROW(annihilator(b, 8), DomainError);
}

TEST(Creator, ExactAdjointOfAnnihilator) {
  const FockBasis b = build_basis(two_node_table(), 3);
  for (std::size_t k = 0; k < b.num_modes(); ++k) {
    const SparseMatrix c = annihilator(b, k).matrix();
    const SparseMatrix d = creator(b, k).matrix();
    const SparseMatrix diff = d - SparseMatrix(c.adjoint());
    ASSERT_EQ(diff.norm(), 0.0) << "mode " << k;
  }
}

TEST(Creator, PauliAndVacuum) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  const SparseOperator cd = creator(b, 3);
  EXPECT_EQ(element(b, cd, bit(3), 0), Complex(1.0));
  const auto occupied = *b.index_of(OccupationState(bit(3)));
  for (std::size_t r = 0; r < b.size(); ++r) ASSERT_EQ(cd.coeff(r, occupied), Complex{});
}

TEST(Assembly, ThreadCountDoesNotChangeTheResult) {
  const FockBasis b = build_basis(two_node_table(), 3);
  const SparseOperator one = annihilator(b, 17, 1);
  const SparseOperator four = annihilator(b, 17, 4);
  EXPECT_EQ((one - four).max_abs(), 0.0);
}

TEST(Smeared, IndicatorOfUnitWeightModeHasUnitNorm) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  const std::vector<Complex> phi{1.0};
  const Eigen::JacobiSVD<DenseMatrix> svd(smeared_annihilator(b, {2, Charge::Minus}, phi).dense());
  EXPECT_NEAR(svd.singularValues()[0], 1.0, 1e-14);
}

TEST(Smeared, ZeroFunctionGivesZeroOperator) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  EXPECT_EQ(smeared_annihilator(b, {1, Charge::Plus}, std::vector<Complex>{0.0}).nnz(), 0u);
}

TEST(Smeared, DimensionMismatch) {
  const FockBasis b = build_basis(one_mode_per_sector(), 2);
  EXPECT_THROW(smeared_annihilator(b, {1, Charge::Plus}, std::vector<Complex>{1.0, 2.0}), DomainError);
}

// Power iteration; enough here because the spectrum of a*a is {0, |phi|^2}.
static double largest_eigenvalue(const SparseOperator& positive) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Vector v(static_cast<Eigen::Index>(positive.dim()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = {n(rng), n(rng)};
  double value = 0.0;
  for (int it = 0; it < 8; ++it) {
    v.normalize();
    const Vector w = positive.apply(v);
    value = v.dot(w).real();
    v = w;
  }
  return value;
}

TEST(Smeared, NormEqualsWeightedL2NormOnFullSector) {
  // Sectors (1,+) and (1,-) carry four weighted modes; n_max = 4 keeps every
  // occupation pattern of either sector.
  const ModeTable t = fermiweak::testing::four_mode_sector_table();
  const FockBasis b = build_basis(t, 4);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 6; ++trial) {
    const SectorId s{1, trial % 2 ? Charge::Minus : Charge::Plus};
    ASSERT_EQ(t.sector_size(s), 4u);
    std::vector<Complex> phi(4);
    double expected = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      phi[i] = {n(rng), n(rng)};
      expected += t.sector_modes(s)[i].weight * std::norm(phi[i]);
    }
    const SparseOperator a = smeared_annihilator(b, s, phi);
    const SparseOperator ad = smeared_creator(b, s, phi);
    EXPECT_NEAR(std::sqrt(largest_eigenvalue(ad * a)), std::sqrt(expected), 1e-10);
    EXPECT_NEAR(std::sqrt(largest_eigenvalue(a * ad)), std::sqrt(expected), 1e-10);
    EXPECT_NEAR(l2_norm(t, s, phi), std::sqrt(expected), 1e-14);
  }
}

TEST(NumberOperator, Values) {
  const FockBasis b = build_basis(two_node_table(), 3);
  const Eigen::VectorXd n4 = number_operator(b, 4).real_diagonal();
  EXPECT_EQ(n4[0], 0.0);
  // q = 2, qbar = 1: modes 0, 1 of (1,+) and 4 of (1,-).
  const auto idx = *b.index_of(OccupationState(bit(0) | bit(1) | bit(4)));
  EXPECT_EQ(number_operator(b, 1).real_diagonal()[static_cast<Eigen::Index>(idx)], 3.0);
  EXPECT_THROW(number_operator(b, 5), DomainError);
}

TEST(NumberOperator, SumIsTotalPopcount) {
  const FockBasis b = build_basis(two_node_table(), 3);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size()));
  for (int j = 1; j <= 4; ++j) total += number_operator(b, j).real_diagonal();
  for (std::size_t i = 0; i < b.size(); ++i) {
    ASSERT_EQ(total[static_cast<Eigen::Index>(i)], static_cast<double>(std::popcount(b.state(i).bits())));
  }
}

TEST(NumberOperator, EqualsWeightedSumOfPointwiseProducts) {
  const ModeTable t = fermiweak::testing::weighted_table();
  const FockBasis b = build_basis(t, 2);
  for (int j = 1; j <= 4; ++j) {
    DenseMatrix acc = DenseMatrix::Zero(static_cast<Eigen::Index>(b.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k].species() != j) continue;
      const DenseMatrix p = pointwise_annihilator(b, k).dense();
      acc += t[k].weight * p.adjoint() * p;
    }
    ASSERT_LT((acc - number_operator(b, j).dense()).cwiseAbs().maxCoeff(), 1e-13);
  }
}

// Relations checked against dense products of randomly chosen mode pairs.
TEST(Relations, RandomPairsOnUntruncatedBasis) {
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  const SparseOperator id = SparseOperator::identity(256);
  const SparseOperator zero = SparseOperator::zero(256);
  const auto max_diff = [](const SparseOperator& x, const SparseOperator& y) { return (x - y).max_abs(); };
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, 7);
  for (int trial = 0; trial < 64; ++trial) {
    const std::size_t k = pick(rng), l = pick(rng);
    const SparseOperator ck = annihilator(b, k), cl = annihilator(b, l);
    const SparseOperator ckd = ck.adjoint(), cld = cl.adjoint();
    const int sk = b.table()[k].species(), sl = b.table()[l].species();
    const int gk = b.table().grading().group_of_sector[b.table()[k].sector.index()];
    const int gl = b.table().grading().group_of_sector[b.table()[l].sector.index()];
    if (gk == gl) {
      ASSERT_LT(max_diff(anticommutator(ck, cld), k == l ? id : zero), 1e-14);
      ASSERT_LT(anticommutator(ck, cl).max_abs(), 1e-14);
      ASSERT_LT(anticommutator(ckd, cld).max_abs(), 1e-14);
    } else {
      ASSERT_TRUE(sk == 1 || sk == 4 || sl == 1 || sl == 4);
      ASSERT_LT(commutator(ck, cl).max_abs(), 1e-14);
      ASSERT_LT(commutator(ck, cld).max_abs(), 1e-14);
    }
  }
}
