// Copyright 2026 The fermiweak Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fermiweak/cli.hpp"

int main(int argc, char** argv) {
  namespace fc = fermiweak::cli;

  CLI::App app{"Finite-mode Fock-space experiments for the four-fermion weak-decay Hamiltonian"};
  app.require_subcommand(1);

  std::string config;
  fc::Overrides overrides;
  std::uint64_t seed = 0;
  double tol = 0.0;
  std::string out;
  unsigned threads = 1;

  const char* commands[][2] = {
      {"build", "build basis and operators; print dimensions, nonzero counts and kernel norms"},
      {"gs-scan", "ground-state energy and vacuum-overlap diagnostics over scan.g"},
      {"ir-scan", "infrared-cutoff scan over scan.sigma"},
      {"mourre", "commutator bottoms on scan.windows for every coupling in scan.g"},
      {"verify", "run the checks listed in the config; exit 1 when any fails"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output path (CSV or JSON report); stdout when omitted");
    sub->add_option("--seed", seed, "seed for random states and solver starts");
    sub->add_option("--threads", threads, "worker threads for scan points")->check(CLI::PositiveNumber);
    sub->add_option("--tol", tol, "eigensolver residual tolerance")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? fc::kExitOk : fc::kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) overrides.seed = seed;
  if (sub->count("--tol")) overrides.tol = tol;
  if (sub->count("--out")) overrides.out = out;
  if (sub->count("--threads")) overrides.threads = threads;
  return fc::main_entry(sub->get_name(), config, overrides, std::cout, std::cerr);
}
