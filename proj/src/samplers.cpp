#include "sedd/samplers.hpp"

#include <algorithm>
#include <cmath>

#include "sedd/errors.hpp"

namespace sedd {

void PromptSpec::validate(const TransitionSpec& spec, int d) const {
  std::vector<int> seen;
  for (const auto& [pos, tok] : pinned) {
    if (pos < 0 || pos >= d) throw ArgumentError("pinned position out of range");
    if (tok < 0 || tok >= spec.vocab())
      throw ArgumentError("pinned token outside the clean vocabulary");
    seen.push_back(pos);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw ArgumentError("position pinned twice");
}

std::vector<double> time_grid(const NoiseSchedule& schedule, int steps, TimeGridKind kind) {
  if (steps < 1) throw ArgumentError("time grid needs at least one step");
  std::vector<double> grid(static_cast<size_t>(steps) + 1);
  const double t_min = schedule.t_min();
  if (kind == TimeGridKind::kUniform) {
    for (int k = 0; k <= steps; ++k)
      grid[static_cast<size_t>(k)] =
          1.0 + (t_min - 1.0) * static_cast<double>(k) / static_cast<double>(steps);
  } else {
    const double hi = std::log(schedule.sigma_bar(1.0));
    const double lo = std::log(schedule.sigma_bar(t_min));
    for (int k = 0; k <= steps; ++k) {
      const double sb =
          std::exp(hi + (lo - hi) * static_cast<double>(k) / static_cast<double>(steps));
      grid[static_cast<size_t>(k)] = schedule.time_of_sigma_bar(sb);
    }
  }
  grid.front() = 1.0;
  grid.back() = t_min;
  return grid;
}

double tweedie_denoise(const TransitionSpec& spec, double sigma_bar_delta,
                       std::span<const double> ratios, int xt_token, std::span<double> out) {
  const int S = spec.num_states();
  if (static_cast<int>(ratios.size()) != S || static_cast<int>(out.size()) != S)
    throw ArgumentError("tweedie_denoise span size mismatch");
  if (!(sigma_bar_delta >= 0.0)) throw ArgumentError("noise decrement must be nonnegative");
  std::vector<double> pulled(static_cast<size_t>(S));
  spec.kernel_apply(sigma_bar_delta, ratios, pulled, /*inverse=*/true);
  double clipped = 0.0, total = 0.0;
  for (int dest = 0; dest < S; ++dest) {
    double v = pulled[static_cast<size_t>(dest)] * spec.transition_prob(sigma_bar_delta, xt_token, dest);
    if (v < 0.0) {
      clipped -= v;
      v = 0.0;
    }
    out[static_cast<size_t>(dest)] = v;
    total += v;
  }
  if (!(total > 0.0)) throw SamplerError("tweedie step produced no usable mass");
  for (double& v : out) v /= total;
  return clipped;
}

double euler_position_dist(const ScoreEval& ev, const TransitionSpec& spec, double sigma_t,
                           double dt, int pos, std::span<double> out) {
  const int S = spec.num_states();
  if (static_cast<int>(out.size()) != S) throw ArgumentError("euler dist span size mismatch");
  if (!(dt > 0.0)) throw ArgumentError("euler step needs dt > 0");
  const int self = ev.token(pos);
  const std::vector<double> col = ev.score_column(pos);
  double move = 0.0;
  for (int dest = 0; dest < S; ++dest) {
    if (dest == self) continue;
    // rate(self <- dest): the forward jump dest -> self drives the reverse
    // move self -> dest.
    const double q = dt * sigma_t * spec.rate(self, dest) * col[static_cast<size_t>(dest)];
    out[static_cast<size_t>(dest)] = q;
    move += q;
  }
  double clipped = 0.0;
  if (move <= 1.0) {
    out[static_cast<size_t>(self)] = 1.0 - move;
  } else {
    // Step overshoots: drop the (negative) self weight and renormalize.
    clipped = move - 1.0;
    out[static_cast<size_t>(self)] = 0.0;
    for (double& v : out) v /= move;
  }
  return clipped;
}

double tweedie_position_dist(const ScoreEval& ev, const TransitionSpec& spec,
                             double sigma_bar_delta, int pos, std::span<double> out) {
  return tweedie_denoise(spec, sigma_bar_delta, ev.score_column(pos), ev.token(pos), out);
}

double euler_step(const ScoreEval& ev, const TransitionSpec& spec, double sigma_t, double dt,
                  std::span<int> seq, Rng& rng) {
  const int S = spec.num_states();
  std::vector<double> dist(static_cast<size_t>(S));
  double clipped = 0.0;
  for (int pos = 0; pos < ev.seq_len(); ++pos) {
    clipped += euler_position_dist(ev, spec, sigma_t, dt, pos, dist);
    seq[static_cast<size_t>(pos)] = rng.categorical(dist);
  }
  return clipped;
}

double tweedie_step(const ScoreEval& ev, const TransitionSpec& spec, double sigma_bar_delta,
                    std::span<int> seq, Rng& rng) {
  const int S = spec.num_states();
  std::vector<double> dist(static_cast<size_t>(S));
  double clipped = 0.0;
  for (int pos = 0; pos < ev.seq_len(); ++pos) {
    clipped += tweedie_position_dist(ev, spec, sigma_bar_delta, pos, dist);
    seq[static_cast<size_t>(pos)] = rng.categorical(dist);
  }
  return clipped;
}

namespace {

void apply_prompt(const PromptSpec& prompt, std::span<int> seq) {
  for (const auto& [pos, tok] : prompt.pinned) seq[static_cast<size_t>(pos)] = tok;
}

// Forced unmasking at the end of an absorbing run: each still-masked position
// draws from its clean-token score weights at the final noise level.
void finalize_masked(const ScoreModel& model, const TransitionSpec& spec, double sigma_bar,
                     std::span<int> seq, Rng& rng) {
  const int mask = spec.mask_state();
  bool any = false;
  for (int tok : seq) any = any || tok == mask;
  if (!any) return;
  const ScoreEval ev = model.eval(seq, sigma_bar);
  std::vector<double> weights(static_cast<size_t>(spec.vocab()));
  for (int pos = 0; pos < ev.seq_len(); ++pos) {
    if (seq[static_cast<size_t>(pos)] != mask) continue;
    const std::vector<double> col = ev.score_column(pos);
    double total = 0.0;
    for (int c = 0; c < spec.vocab(); ++c) {
      weights[static_cast<size_t>(c)] = col[static_cast<size_t>(c)];
      total += col[static_cast<size_t>(c)];
    }
    if (!(total > 0.0)) throw SamplerError("no clean token available to unmask");
    seq[static_cast<size_t>(pos)] = rng.categorical(weights);
  }
}

}  // namespace

SampleResult infill(const ScoreModel& model, const TransitionSpec& spec,
                    const NoiseSchedule& schedule, const SamplerConfig& cfg,
                    const PromptSpec& prompt, int num_samples, Rng& rng) {
  if (num_samples < 1) throw ArgumentError("need at least one sample");
  if (model.num_states() != spec.num_states())
    throw ArgumentError("model/process state count mismatch");
  const int d = model.seq_len();
  prompt.validate(spec, d);
  const std::vector<double> grid = time_grid(schedule, cfg.steps, cfg.grid);

  SampleResult res;
  res.sequences.reserve(static_cast<size_t>(num_samples));
  std::vector<int> seq(static_cast<size_t>(d));
  for (int s = 0; s < num_samples; ++s) {
    if (spec.is_absorbing()) {
      std::fill(seq.begin(), seq.end(), spec.mask_state());
    } else {
      for (int& tok : seq) tok = static_cast<int>(rng.below(static_cast<uint64_t>(spec.num_states())));
    }
    apply_prompt(prompt, seq);
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
      const double t = grid[k], t_next = grid[k + 1];
      const ScoreEval ev = model.eval(seq, schedule.sigma_bar(t));
      if (cfg.method == SampleMethod::kEuler)
        res.clipped_mass += euler_step(ev, spec, schedule.sigma(t), t - t_next, seq, rng);
      else
        res.clipped_mass +=
            tweedie_step(ev, spec, schedule.sigma_bar(t) - schedule.sigma_bar(t_next), seq, rng);
      apply_prompt(prompt, seq);
    }
    if (spec.is_absorbing()) {
      finalize_masked(model, spec, schedule.sigma_bar(schedule.t_min()), seq, rng);
      apply_prompt(prompt, seq);
    }
    res.sequences.push_back(seq);
  }
  return res;
}

SampleResult sample(const ScoreModel& model, const TransitionSpec& spec,
                    const NoiseSchedule& schedule, const SamplerConfig& cfg, int num_samples,
                    Rng& rng) {
  return infill(model, spec, schedule, cfg, PromptSpec{}, num_samples, rng);
}

}  // namespace sedd
