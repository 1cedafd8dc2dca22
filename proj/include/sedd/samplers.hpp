#pragma once

#include <span>
#include <utility>
#include <vector>

#include "sedd/process.hpp"
#include "sedd/rng.hpp"
#include "sedd/scores.hpp"

namespace sedd {

enum class SampleMethod { kEuler, kTweedie, kExactTweedie };
enum class TimeGridKind { kUniform, kGeometricSigma };

struct SamplerConfig {
  SampleMethod method = SampleMethod::kTweedie;
  int steps = 64;
  TimeGridKind grid = TimeGridKind::kUniform;
};

// Tokens held fixed during generation, as (position, token) pairs.
struct PromptSpec {
  std::vector<std::pair<int, int>> pinned;

  bool empty() const { return pinned.empty(); }
  void validate(const TransitionSpec& spec, int d) const;
};

// Descending time grid with steps+1 points from 1 to t_min. kUniform spaces t
// evenly; kGeometricSigma spaces accumulated noise geometrically, which
// spends more steps where sigma_bar changes fastest.
std::vector<double> time_grid(const NoiseSchedule& schedule, int steps, TimeGridKind kind);

// Reverse transition kernel of one token for a noise decrement sigma_bar_delta
// given ratio vector r (self entry 1): dist(dest) proportional to
// [exp(-sigma_bar_delta Q) r](dest) * exp(sigma_bar_delta Q)(xt_token, dest).
// Negative components from inexact ratios are clipped; the clipped mass is
// returned. Reverses the token kernel exactly when r is the true score.
double tweedie_denoise(const TransitionSpec& spec, double sigma_bar_delta,
                       std::span<const double> ratios, int xt_token, std::span<double> out);

// Per-position transition distributions of the two step rules, exposed for
// direct comparison against dense oracles. Both return clipped mass.
double euler_position_dist(const ScoreEval& ev, const TransitionSpec& spec, double sigma_t,
                           double dt, int pos, std::span<double> out);
double tweedie_position_dist(const ScoreEval& ev, const TransitionSpec& spec,
                             double sigma_bar_delta, int pos, std::span<double> out);

// Tau-leaping updates: every position jumps simultaneously from the same
// score evaluation. seq is modified in place; returns clipped mass.
double euler_step(const ScoreEval& ev, const TransitionSpec& spec, double sigma_t, double dt,
                  std::span<int> seq, Rng& rng);
double tweedie_step(const ScoreEval& ev, const TransitionSpec& spec, double sigma_bar_delta,
                    std::span<int> seq, Rng& rng);

struct SampleResult {
  std::vector<std::vector<int>> sequences;
  double clipped_mass = 0.0;  // summed over all samples, steps, positions
};

// Generate num_samples sequences by integrating the reverse process from t=1
// to t_min. Absorbing runs start fully masked and finish with a forced
// unmasking of any remaining MASK positions from the final score evaluation.
SampleResult sample(const ScoreModel& model, const TransitionSpec& spec,
                    const NoiseSchedule& schedule, const SamplerConfig& cfg, int num_samples,
                    Rng& rng);

// Same loop with pinned positions re-imposed after initialization and every
// step. sample() is infill() with nothing pinned.
SampleResult infill(const ScoreModel& model, const TransitionSpec& spec,
                    const NoiseSchedule& schedule, const SamplerConfig& cfg,
                    const PromptSpec& prompt, int num_samples, Rng& rng);

}  // namespace sedd
