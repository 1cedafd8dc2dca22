#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sedd/errors.hpp"

namespace sedd {

// Sequences over {0..S-1}^d are enumerated in mixed radix with position 0 as
// the most significant digit: index(x) = x[0]*S^(d-1) + ... + x[d-1].
// Every enumeration-based oracle and model shares this convention.

inline constexpr std::size_t kMaxEnumStates = std::size_t{1} << 20;

// S^d, throwing CapacityError above cap.
std::size_t pow_checked(int S, int d, std::size_t cap);

std::size_t encode_sequence(std::span<const int> seq, int S);
void decode_sequence(std::size_t index, int S, std::span<int> out);

// Exhaustive distribution over all S^d sequences. Oracle-side only; gated at
// 2^20 states.
struct EnumeratedDist {
  int d = 0;
  int S = 0;
  std::vector<double> p;

  EnumeratedDist() = default;
  EnumeratedDist(int d_, int S_);

  std::size_t size() const { return p.size(); }
  double& at(std::span<const int> seq) { return p[encode_sequence(seq, S)]; }
  double at(std::span<const int> seq) const { return p[encode_sequence(seq, S)]; }

  // Entries nonnegative (within -tol) and summing to one (within tol).
  void validate(double tol = 1e-9) const;
  void normalize();
};

}  // namespace sedd
