#include "sedd/enumerated.hpp"

#include <cmath>
#include <string>

namespace sedd {

std::size_t pow_checked(int S, int d, std::size_t cap) {
  if (S < 1 || d < 0) throw ArgumentError("pow_checked needs S >= 1, d >= 0");
  std::size_t r = 1;
  for (int i = 0; i < d; ++i) {
    if (r > cap / static_cast<std::size_t>(S))
      throw CapacityError("state space exceeds enumeration capacity (" + std::to_string(cap) +
                          " states)");
    r *= static_cast<std::size_t>(S);
  }
  if (r > cap)
    throw CapacityError("state space exceeds enumeration capacity (" + std::to_string(cap) +
                        " states)");
  return r;
}

std::size_t encode_sequence(std::span<const int> seq, int S) {
  std::size_t idx = 0;
  for (int tok : seq) {
    if (tok < 0 || tok >= S) throw ArgumentError("token out of range in encode_sequence");
    idx = idx * static_cast<std::size_t>(S) + static_cast<std::size_t>(tok);
  }
  return idx;
}

void decode_sequence(std::size_t index, int S, std::span<int> out) {
  for (size_t i = out.size(); i-- > 0;) {
    out[i] = static_cast<int>(index % static_cast<std::size_t>(S));
    index /= static_cast<std::size_t>(S);
  }
  if (index != 0) throw ArgumentError("index out of range in decode_sequence");
}

EnumeratedDist::EnumeratedDist(int d_, int S_) : d(d_), S(S_) {
  if (d < 1 || S < 2) throw ArgumentError("enumerated distribution needs d >= 1, S >= 2");
  p.assign(pow_checked(S, d, kMaxEnumStates), 0.0);
}

void EnumeratedDist::validate(double tol) const {
  if (p.size() != pow_checked(S, d, kMaxEnumStates))
    throw ArgumentError("enumerated distribution has wrong size");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= -tol)) throw ArgumentError("enumerated distribution has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol)
    throw ArgumentError("enumerated distribution does not sum to one");
}

void EnumeratedDist::normalize() {
  double sum = 0.0;
  for (double v : p) sum += v;
  if (!(sum > 0.0)) throw ArgumentError("cannot normalize a zero distribution");
  for (double& v : p) v /= sum;
}

}  // namespace sedd
