#pragma once

#include <span>

#include "sedd/corpus.hpp"
#include "sedd/losses.hpp"
#include "sedd/process.hpp"
#include "sedd/rng.hpp"
#include "sedd/scores.hpp"

namespace sedd {

// Upper bound on -log p(x0): Monte Carlo estimate of the time-integrated
// denoising term plus the closed-form prior KL. The [0, t_min) slice of the
// integral is not represented; t_min is part of the reported setup, not a
// hidden approximation.
struct NllBound {
  double bound = 0.0;
  double integral = 0.0;
  double integral_std_err = 0.0;  // MC error of the integral term only
  double prior = 0.0;
  int samples = 0;
};

NllBound nll_bound(const ScoreModel& model, const TransitionSpec& spec,
                   const NoiseSchedule& schedule, std::span<const int> x0, int num_samples,
                   Rng& rng);

struct EvalReport {
  double avg_bound = 0.0;       // nats per sequence
  double std_err = 0.0;         // MC component, averaged in quadrature
  double perplexity = 0.0;      // exp(avg_bound / seq_len)
  double bits_per_token = 0.0;  // avg_bound / (seq_len * ln 2)
  double avg_prior = 0.0;
  int sequences = 0;
  int samples_per_sequence = 0;
};

EvalReport corpus_eval(const ScoreModel& model, const TransitionSpec& spec,
                       const NoiseSchedule& schedule, const Corpus& corpus,
                       int samples_per_sequence, Rng& rng);

}  // namespace sedd
