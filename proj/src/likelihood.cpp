#include "sedd/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "sedd/errors.hpp"

namespace sedd {

NllBound nll_bound(const ScoreModel& model, const TransitionSpec& spec,
                   const NoiseSchedule& schedule, std::span<const int> x0, int num_samples,
                   Rng& rng) {
  const McEstimate est = dwdse_bound_integral(model, spec, schedule, x0, num_samples, rng);
  NllBound b;
  b.integral = est.value;
  b.integral_std_err = est.std_err;
  b.prior = prior_kl(spec, schedule, x0);
  b.bound = b.integral + b.prior;
  b.samples = est.samples;
  return b;
}

EvalReport corpus_eval(const ScoreModel& model, const TransitionSpec& spec,
                       const NoiseSchedule& schedule, const Corpus& corpus,
                       int samples_per_sequence, Rng& rng) {
  corpus.validate();
  if (corpus.sequences.empty()) throw ArgumentError("cannot evaluate an empty corpus");
  if (corpus.seq_len != model.seq_len())
    throw ArgumentError("corpus/model sequence length mismatch");
  EvalReport r;
  r.sequences = static_cast<int>(corpus.size());
  r.samples_per_sequence = samples_per_sequence;
  double var_acc = 0.0;
  for (const auto& seq : corpus.sequences) {
    const NllBound b = nll_bound(model, spec, schedule, seq, samples_per_sequence, rng);
    r.avg_bound += b.bound;
    r.avg_prior += b.prior;
    var_acc += b.integral_std_err * b.integral_std_err;
  }
  const double m = static_cast<double>(corpus.size());
  r.avg_bound /= m;
  r.avg_prior /= m;
  r.std_err = std::sqrt(var_acc) / m;
  const double d = static_cast<double>(corpus.seq_len);
  r.perplexity = std::exp(r.avg_bound / d);
  r.bits_per_token = r.avg_bound / (d * std::numbers::ln2_v<double>);
  return r;
}

}  // namespace sedd
