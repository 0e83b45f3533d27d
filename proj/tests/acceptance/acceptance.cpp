// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../test_support.hpp"
#include "fermiweak/cli.hpp"
#include "fermiweak/operators.hpp"
#include "fermiweak/verify.hpp"

using namespace fermiweak;
using fermiweak::testing::four_mode_sector_table;
using fermiweak::testing::one_mode_per_sector;
using fermiweak::testing::two_node_table;
using fermiweak::testing::weighted_table;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const CheckResult& find(const std::vector<CheckResult>& rs, const std::string& name) {
  for (const auto& r : rs) {
    if (r.name == name) return r;
  }
  throw std::runtime_error("missing result " + name);
}

double context(const CheckResult& r, const std::string& key) {
  for (const auto& [k, v] : r.context) {
    if (k == key) return v;
  }
  throw std::runtime_error("missing context " + key);
}

std::string failing_names(const std::vector<CheckResult>& rs) {
  std::string s;
  for (const auto& r : rs) {
    if (!r.passed) s += " " + r.name + "(lhs=" + num(r.lhs) + ")";
  }
  return s;
}

Kernel smooth(const ModeTable& t) { return smooth_gaussian_kernel(t, 1.0); }

/// Three unit-weight radial nodes, one spin per sector: 24 modes.
ModeTable three_node_table() {
  return build_mode_table(shared_grid(radial_nodes({0.3, 0.6, 0.9}, {}), false));
}

// ---------------------------------------------------------------------------

Outcome algebra() {
  const auto t0 = std::chrono::steady_clock::now();
  const FockBasis b = build_basis(one_mode_per_sector(), 8);
  const auto rs = check_algebra(b, 1e-12);
  const double secs = seconds_since(t0);
  const bool ok = all_passed(rs) && b.untruncated() && b.size() == 256 && secs < 5.0;
  return {ok, "dim 256, " + std::to_string(rs.size()) + " relations, " + num(secs) + " s" + failing_names(rs)};
}

Outcome sign_fixtures() {
  // Exhaustive over the untruncated 16-mode basis: annihilate the first mode
  // of (1,-), (3,+), (3,-) and compare with the sign counted from the sector
  // occupations q, r, rbar, s.
  const ModeTable t = weighted_table();
  const FockBasis b = build_basis(t, 16);
  auto occ = [&](std::uint64_t bits, SectorId s) {
    int n = 0;
    for (std::size_t k = t.sector_offset(s); k < t.sector_offset(s) + t.sector_size(s); ++k) n += (bits >> k) & 1ULL;
    return n;
  };
  struct Fixture {
    SectorId target;
    std::function<int(std::uint64_t)> exponent;
    const char* label;
  };
  const std::vector<Fixture> fixtures{
      {{1, Charge::Minus}, [&](std::uint64_t x) { return occ(x, {1, Charge::Plus}); }, "(-1)^q"},
      {{3, Charge::Plus},
       [&](std::uint64_t x) { return occ(x, {2, Charge::Plus}) + occ(x, {2, Charge::Minus}); },
       "(-1)^(r+rbar)"},
      {{3, Charge::Minus},
       [&](std::uint64_t x) {
         return occ(x, {2, Charge::Plus}) + occ(x, {2, Charge::Minus}) + occ(x, {3, Charge::Plus});
       },
       "(-1)^(r+rbar+s)"},
  };
  std::size_t checked = 0, wrong = 0;
  for (const auto& f : fixtures) {
    const std::size_t k = t.sector_offset(f.target);
    const SparseOperator c = annihilator(b, k);
    for (std::size_t col = 0; col < b.size(); ++col) {
      const std::uint64_t bits = b.state(col).bits();
      if (!(bits >> k & 1ULL)) continue;
      const std::size_t row = *b.index_of(OccupationState(bits ^ (1ULL << k)));
      const Complex expected = (f.exponent(bits) % 2) ? -1.0 : 1.0;
      ++checked;
      if (c.coeff(row, col) != expected) ++wrong;
    }
  }
  return {wrong == 0 && checked > 0,
          std::to_string(checked) + " matrix elements over three cases, " + std::to_string(wrong) + " wrong"};
}

Outcome smeared() {
  const FockBasis b = build_basis(four_mode_sector_table(), 4);
  const CheckResult r = check_smeared_norm(b, 50, 101, 1e-10);
  return {r.passed, "50 test functions, worst | ||b(phi)|| - ||phi|| | = " + num(r.lhs)};
}

Outcome props_1_2_2bis() {
  const FockBasis b = build_basis(two_node_table(), 3);
  const CheckResult p1 = check_prop1(b, 100, 201);
  const auto p2 = check_prop2(b, 100, 202);
  const auto p2b = check_prop2bis(b, 100, 203);
  // Rank-one kernel: ||A|| = ||H||.
  std::mt19937_64 rng(204);
  double rank_one_gap = 0.0;
  const ModeTable& t = b.table();
  for (Charge eps : kChannels) {
    const auto s = triple_sectors(eps);
    const auto f1 = random_test_function(t.sector_size(s[0]), rng);
    const auto f2 = random_test_function(t.sector_size(s[1]), rng);
    const auto f3 = random_test_function(t.sector_size(s[2]), rng);
    ReducedKernel h(t, s);
    h.fill([&](const ReducedKernel::Index& i) { return f1[i[0]] * f2[i[1]] * f3[i[2]]; });
    const TripleNorms n = triple_norms(b, h, eps);
    rank_one_gap = std::max(rank_one_gap, std::abs(n.a - n.kernel) / n.kernel);
  }
  std::vector<CheckResult> all{p1};
  all.insert(all.end(), p2.begin(), p2.end());
  all.insert(all.end(), p2b.begin(), p2b.end());
  const bool ok = all_passed(all) && rank_one_gap <= 1e-9;
  return {ok, "worst ratios prop1 " + num(p1.lhs) + ", prop2 " + num(find(p2, "prop2.annihilating").lhs) + "/" +
                  num(find(p2, "prop2.starred").lhs) + ", prop2bis " + num(find(p2b, "prop2bis.annihilating").lhs) +
                  "/" + num(find(p2b, "prop2bis.starred").lhs) + "; rank-one relative gap " + num(rank_one_gap) +
                  failing_names(all)};
}

Outcome thm3() {
  const ModeTable t = weighted_table();
  const FockBasis b = build_basis(t, 4);
  std::mt19937_64 rng(301);
  PhysicalParams p;
  p.g = 0.4;
  const auto rs = check_relative_bound(b, p, random_kernel(t, rng), 100, 302, {0.1, 1.0, 10.0});
  const CheckResult& diag = find(rs, "relative.n4_below_h0_over_m4");
  return {all_passed(rs), "N4 <= H0/m4 worst " + num(diag.lhs) + " on " + std::to_string(b.size()) +
                              " states; " + std::to_string(rs.size()) + " bounds, 100 states" + failing_names(rs)};
}

Outcome identity53() {
  const FockBasis b = build_basis(weighted_table(), 3);
  const CheckResult r = check_number_identity(b, 50, 401, 1e-12);
  return {r.passed && b.num_modes() == 16, "16 modes, n_max 3, worst gap " + num(r.lhs)};
}

Outcome ground_state_limits() {
  const ModeTable t = four_mode_sector_table();
  const FockBasis b = build_basis(t, 4);  // 1471 states
  const Kernel g = smooth(t);
  PhysicalParams p;

  const SpectralReport free = ground_state(assemble_H(b, p, g));
  bool ok = free.energy == 0.0 && free.vector.size() > 0 && free.vector[0] == Complex(1.0) &&
            free.vector.squaredNorm() == 1.0;
  std::string detail = "g=0: E=" + num(free.energy);

  double worst_e = -std::numeric_limits<double>::infinity();
  for (double coupling : {0.05, 0.2, 1.0}) {
    p.g = coupling;
    for (double sigma : {0.0, 0.25, 0.75, 2.0}) {
      worst_e = std::max(worst_e, ground_state(assemble_H_sigma(b, p, g, sigma)).energy);
    }
  }
  ok = ok && inequality("ground_state.nonpositive", worst_e, 0.0).passed;
  detail += "; max E_sigma " + num(worst_e);

  // Lanczos against dense diagonalization: the full operator and every
  // connected block (the blocks away from the vacuum carry nonzero energies).
  p.g = 0.5;
  const SparseOperator h = assemble_H(b, p, g);
  double worst_gap = std::abs(ground_state(h).energy - dense_eigensystem(h).eigenvalues()[0]);
  std::size_t blocks = 0;
  for (const auto& block : connected_blocks(h)) {
    if (block.size() < 2) continue;
    const SparseOperator sub(restrict_block(h, block), true);
    const double dense = dense_eigensystem(sub).eigenvalues()[0];
    worst_gap = std::max(worst_gap, std::abs(ground_state(sub, SolverOptions{1e-11}).energy - dense));
    ++blocks;
  }
  ok = ok && worst_gap <= 1e-8 && b.size() <= 2000;
  detail += "; Lanczos vs dense worst " + num(worst_gap) + " over " + std::to_string(blocks + 1) +
            " operators, dim " + std::to_string(b.size());
  return {ok, detail};
}

Outcome thm6_i() {
  const ModeTable t = build_mode_table(shared_grid(radial_nodes({0.2, 0.5, 0.9}, {0.2, 0.3, 0.5}), false));
  const FockBasis b = build_basis(t, 3);
  PhysicalParams p;
  p.g = 0.3;
  const auto rs = check_cutoff_convergence(b, p, smooth(t), {1.0, 0.9, 0.7, 0.5, 0.35, 0.2, 0.1, 0.0}, 50, 501);
  const CheckResult& m = find(rs, "cutoff.monotone");
  return {all_passed(rs), "worst bound ratio " + num(find(rs, "cutoff.bound").lhs) + ", ||H - H_sigma|| from " +
                              num(context(m, "largest_norm")) + " to " + num(find(rs, "cutoff.vanishes").lhs) +
                              "; per-state non-monotone " + num(context(m, "nonmonotone_states")) + "/50" +
                              failing_names(rs)};
}

Outcome thm6_iii() {
  const ModeTable t = two_node_table();
  const FockBasis b = build_basis(t, 4);
  const auto rs = check_overlap(b, PhysicalParams{}, smooth(t), {0.2, 0.1, 0.05, 0.025}, 0.0, 0.5);
  const CheckResult& fit = find(rs, "overlap.linear_in_g");
  const CheckResult& trend = find(rs, "overlap.deficit_decreasing");
  return {all_passed(rs), "fitted c~ " + num(context(fit, "fitted_c")) + ", deficit " +
                              num(context(trend, "largest_deficit")) + " -> " +
                              num(context(trend, "smallest_g_deficit")) + failing_names(rs)};
}

Outcome lemma6() {
  const ModeTable t = two_node_table();
  const FockBasis b = build_basis(t, 4);
  const auto rs = check_pull_through_scaling(b, PhysicalParams{}, smooth(t), 0.3, {0.01, 0.02, 0.05, 0.1}, 0.10);
  std::string detail;
  for (const auto& r : rs) {
    detail += r.name + ": ";
    if (r.note.empty()) {
      detail += "spread " + num(r.lhs) + ", q/g^2 in [" + num(context(r, "min_q_over_g2")) + ", " +
                num(context(r, "max_q_over_g2")) + "]";
    } else {
      detail += r.note;
    }
    detail += "; ";
  }
  return {all_passed(rs), detail};
}

Outcome prop51() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModeTable t = three_node_table();
  const FockBasis b = build_basis(t, 3);
  PhysicalParams p;
  p.m1 = 1.0;
  p.m4 = 2.0;
  const SparseOperator h0 = assemble_H0(b, p);
  const SparseOperator c0 = commutator_A_H0(b, p);
  std::mt19937_64 rng(601);
  std::uniform_real_distribution<double> centre(0.1, 3.9), width(0.05, 0.6);
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t windows = 0, nonempty = 0;
  while (windows < 20) {
    const double c = centre(rng), w = width(rng);
    const double a = c - w / 2, hi = c + w / 2;
    const ThresholdSet s = thresholds_for_window(p, hi);
    if (!(a > 0.0) || s.distance(a, hi) < 0.02) continue;  // inadmissible: touches S
    const MourreRecord r = mourre_bottom(h0, c0, a, hi, s);
    ++windows;
    if (r.empty()) continue;
    ++nonempty;
    worst = std::max(worst, r.beta - r.bottom);
  }
  const double secs = seconds_since(t0);
  const bool ok = nonempty > 0 && worst <= 1e-10 && secs < 60.0 && b.size() <= 4096;
  return {ok, std::to_string(windows) + " windows (" + std::to_string(nonempty) + " nonempty), max(beta - bottom) " +
                  num(worst) + ", dim " + std::to_string(b.size()) + ", " + num(secs) + " s"};
}

Outcome prop52() {
  const ModeTable t = three_node_table();
  const FockBasis b = build_basis(t, 3);
  const PhysicalParams p;
  const MourreScan scan = mourre_scan(b, p, smooth(t), {0.01, 0.02, 0.05, 0.1},
                                      {{1.2, 1.4}, {1.5, 1.8}, {2.2, 2.6}, {2.65, 2.95}});
  const auto rs = mourre_results(scan);
  bool rejected = false;
  try {
    check_mourre(b, p, sharp_cutoff_kernel(t, 2.0), {0.1}, {{1.2, 1.4}});
  } catch (const NonDifferentiableKernelError&) {
    rejected = true;
  }
  const CheckResult& inter = find(rs, "mourre.interacting");
  return {all_passed(rs) && rejected, "fitted c " + num(scan.fitted_c) + " over " + num(context(inter, "points")) +
                                          " (g, window) points; sharp kernel " +
                                          (rejected ? "rejected" : "NOT rejected") + failing_names(rs)};
}

// ---------------------------------------------------------------------------
// Runs through the installed binary.

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FERMIWEAK_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / ("fermiweak_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

Outcome determinism() {
  const fs::path dir = scratch();
  const cli::json cfg{{"grid", {{"radii", {0.5, 1.0}}, {"weights", {0.3, 0.7}}, {"both_spins", false}}},
                      {"params", {{"m1", 1.0}, {"m4", 2.0}, {"g", 0.2}}},
                      {"n_max", 4},
                      {"kernel", {{"preset", "smooth-gaussian"}, {"lambda", 1.0}}},
                      {"scan",
                       {{"g", {0.3, 0.1, 0.0, -0.1}},
                        {"sigma", {1.2, 0.75, 0.0}},
                        {"windows", {{1.2, 1.4}, {0.9, 1.1}, {1.5, 1.8}}}}},
                      {"seed", 17}};
  const fs::path path = dir / "determinism.json";
  std::ofstream(path) << cfg.dump(2);
  std::size_t compared = 0, differing = 0;
  bool exits_ok = true;
  for (const char* command : {"gs-scan", "ir-scan", "mourre"}) {
    const fs::path a = dir / (std::string(command) + "_a.csv");
    const fs::path b = dir / (std::string(command) + "_b.csv");
    exits_ok = exits_ok && run_cli(std::string(command) + " --config " + path.string() + " --out " + a.string()) == 0;
    exits_ok = exits_ok && run_cli(std::string(command) + " --config " + path.string() + " --threads 2 --out " +
                                   b.string()) == 0;
    const std::string sa = slurp(a), sb = slurp(b);
    ++compared;
    if (sa.empty() || sa != sb) ++differing;
  }
  fs::remove_all(dir);
  return {exits_ok && differing == 0,
          std::to_string(compared) + " scan commands run twice, " + std::to_string(differing) + " differing outputs"};
}

Outcome negative_control() {
  const auto broken = check_algebra(build_basis(one_mode_per_sector(1.0, GradingScheme::single_string()), 8));
  const auto split = check_algebra(build_basis(one_mode_per_sector(1.0, GradingScheme::commuting_neutrinos()), 8));
  const bool lib = !find(broken, "algebra.commute_species_1_4").passed &&
                   !find(split, "algebra.anticommute_species_2_3").passed;
  const fs::path dir = scratch();
  const cli::json cfg{{"grid", {{"radii", {1.0}}, {"both_spins", false}}},
                      {"grading", "single-string"},
                      {"kernel", {{"preset", "smooth-gaussian"}}},
                      {"checks", {"algebra"}}};
  std::ofstream(dir / "negative.json") << cfg.dump();
  const int code = run_cli("verify --config " + (dir / "negative.json").string());
  fs::remove_all(dir);
  return {lib && code == cli::kExitCheckFailed, std::string("broken groupings fail the algebra suite: ") +
                                                    (lib ? "yes" : "no") + "; CLI verify exit " +
                                                    std::to_string(code)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"algebra suite (8 modes, untruncated, 1e-12, < 5 s)", algebra},
      {"sign-convention fixtures", sign_fixtures},
      {"smeared-operator norm (50 test functions)", smeared},
      {"triple and vertex norm bounds (100 trials each, rank-one equality)", props_1_2_2bis},
      {"N4 <= H0/m4 and eta-split relative bound", thm3},
      {"number identity on 16 modes, n_max 3", identity53},
      {"ground-state limits and solver agreement", ground_state_limits},
      {"infrared-cutoff bound and monotone convergence", thm6_i},
      {"vacuum-overlap deficit trend and fitted linear bound", thm6_iii},
      {"neutrino number over free energy scales as g^2", lemma6},
      {"free commutator bottom >= dist(window, thresholds)", prop51},
      {"interacting commutator bottom >= beta/2 - c g/beta; sharp rejected", prop52},
      {"byte-identical reruns of scan commands", determinism},
      {"negative control: broken grading fails algebra", negative_control},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s: %s\n", o.passed ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += o.passed ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
