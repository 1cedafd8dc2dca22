#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sedd {

// One self-check outcome: the measured discrepancy and the bound it must sit
// under. Consumers render these as JSON lines or a table.
struct CheckRecord {
  std::string name;
  double metric = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// Fast oracle-backed consistency sweep over the core machinery: closed-form
// kernels against dense exponentials, schedules against finite differences,
// factorized evolution against the sequence-level generator, loss identities
// and cross-objective offsets, exact reversal of the token kernel, the
// mean-to-score bridge, analytic gradients, and the likelihood bound on an
// enumerable toy. Deterministic given the seed. Runs in seconds.
std::vector<CheckRecord> run_verification(uint64_t seed);

}  // namespace sedd
