#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "sedd/config.hpp"
#include "sedd/corpus.hpp"
#include "sedd/process.hpp"
#include "sedd/scores.hpp"

namespace sedd {

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;

  explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam with fixed betas (0.9, 0.999) and eps 1e-8.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               double lr);

double global_grad_norm(std::span<const double> grad);

// Scale grad down to max_norm when it exceeds it; returns the pre-clip norm.
double clip_grad_norm(std::span<double> grad, double max_norm);

void ema_update(std::span<double> ema, std::span<const double> params, double decay);

struct TrainResult {
  int64_t steps = 0;
  double final_loss = 0.0;
  std::vector<double> ema;  // exponential average of the parameter trajectory
  std::array<uint64_t, 4> rng_state{};
};

// Optimize the model on the corpus. Stochastic modes draw one (t, x_t) pair
// per batch sequence per step from a per-step child stream, so a run is a
// pure function of (model init, corpus, config). The exact mode replaces the
// batch with the full enumeration objective on the corpus empirical
// distribution. Per-step metrics go to `metrics` as JSON lines when given;
// wall_ms is informational only and excluded from any reproducibility claim.
// A non-finite loss or gradient aborts with NumericalError naming the step
// and a hash of the offending batch.
TrainResult train(ScoreModel& model, const TransitionSpec& spec, const NoiseSchedule& schedule,
                  const Corpus& corpus, const TrainConfig& cfg, std::ostream* metrics = nullptr);

}  // namespace sedd
