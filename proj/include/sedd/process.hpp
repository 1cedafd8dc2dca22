#pragma once

#include <span>
#include <vector>

#include "sedd/rng.hpp"

namespace sedd {

enum class TransitionKind { kUniform, kAbsorbing };

// Structured token-level CTMC generator Q. Column convention throughout:
// entry (dest, src) is the jump rate src -> dest; columns sum to zero and
// off-diagonal entries are nonnegative.
//
// Uniform: Q = scale * (ones - n*I) over n states.
// Absorbing: n real tokens plus a MASK state (index n). Every real token
// decays into MASK at rate scale; MASK is a trap. With the default scale 1,
// the generator has diagonal -1 on real tokens, 1 on the MASK row for real
// columns, and an all-zero MASK column.
class TransitionSpec {
 public:
  static TransitionSpec uniform(int n, double scale);
  static TransitionSpec uniform(int n) { return uniform(n, 1.0 / n); }
  static TransitionSpec absorbing(int n, double scale = 1.0, double leak_eta = 1e-5);

  TransitionKind kind() const { return kind_; }
  bool is_absorbing() const { return kind_ == TransitionKind::kAbsorbing; }
  // Count of real (non-MASK) tokens.
  int vocab() const { return n_; }
  // Size of the state space the process runs on: n, or n+1 with MASK.
  int num_states() const { return is_absorbing() ? n_ + 1 : n_; }
  int mask_state() const { return is_absorbing() ? n_ : -1; }
  double scale() const { return scale_; }
  double leak_eta() const { return leak_eta_; }

  double rate(int dest, int src) const;

  // exp(sigma_bar * Q)[dest, src]; closed form, no dense exponential.
  double transition_prob(double sigma_bar, int dest, int src) const;
  void transition_column(double sigma_bar, int src, std::span<double> out) const;

  // out = exp(±sigma_bar * Q) · v using the closed-form kernel structure.
  // inverse=true applies exp(-sigma_bar * Q), whose entries may be negative.
  void kernel_apply(double sigma_bar, std::span<const double> v, std::span<double> out,
                    bool inverse = false) const;

  int sample_forward(double sigma_bar, int src, Rng& rng) const;

  // Stationary token distribution. Uniform kind: flat. Absorbing kind: MASK
  // carries 1-eta with eta spread evenly over real tokens so the prior KL
  // stays finite; sampling initialization never uses the leaked mass.
  std::vector<double> stationary() const;

 private:
  TransitionSpec(TransitionKind kind, int n, double scale, double leak_eta);

  // Total decay exponent lambda such that the self-transition probability of a
  // real token is exp(-lambda).
  double lambda(double sigma_bar) const;
  void check_state(int s, const char* what) const;

  TransitionKind kind_;
  int n_;
  double scale_;
  double leak_eta_;
};

enum class ScheduleKind { kGeometric, kLogLinear };

// Noise schedule over t in [0, 1]: sigma_bar(t) is the accumulated noise,
// sigma(t) its derivative. t_min bounds every integration / sampling grid
// away from zero; the functions themselves are defined on all of [0, 1].
class NoiseSchedule {
 public:
  static NoiseSchedule geometric(double sigma_min, double sigma_max, double t_min = 1e-3);
  static NoiseSchedule log_linear(double eps, double t_min = 1e-3);

  double sigma_bar(double t) const;
  double sigma(double t) const;
  // Inverse of sigma_bar; used by the geometric-in-sigma sampling grid.
  double time_of_sigma_bar(double sb) const;

  ScheduleKind kind() const { return kind_; }
  double t_min() const { return t_min_; }
  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }
  double eps() const { return eps_; }

 private:
  NoiseSchedule() = default;

  ScheduleKind kind_ = ScheduleKind::kGeometric;
  double sigma_min_ = 1e-4;
  double sigma_max_ = 20.0;
  double eps_ = 1e-3;
  double t_min_ = 1e-3;
};

}  // namespace sedd
