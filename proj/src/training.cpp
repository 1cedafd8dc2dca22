#include "sedd/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "sedd/errors.hpp"
#include "sedd/losses.hpp"
#include "sedd/rng.hpp"

namespace sedd {

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw ArgumentError("adam_step size mismatch");
  state.t += 1;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grad[i];
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + kEps);
  }
}

double global_grad_norm(std::span<const double> grad) {
  double acc = 0.0;
  for (double g : grad) acc += g * g;
  return std::sqrt(acc);
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  if (!(max_norm > 0.0)) throw ArgumentError("clip norm must be positive");
  const double norm = global_grad_norm(grad);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (double& g : grad) g *= f;
  }
  return norm;
}

void ema_update(std::span<double> ema, std::span<const double> params, double decay) {
  if (ema.size() != params.size()) throw ArgumentError("ema_update size mismatch");
  for (size_t i = 0; i < ema.size(); ++i) ema[i] = decay * ema[i] + (1.0 - decay) * params[i];
}

namespace {

uint64_t fnv1a_tokens(uint64_t h, std::span<const int> tokens) {
  for (int tok : tokens) {
    h ^= static_cast<uint64_t>(static_cast<uint32_t>(tok));
    h *= 0x100000001B3ull;
  }
  return h;
}

// One loss draw for a sequence under the configured objective, no gradient.
double val_draw(const ScoreModel& model, const TransitionSpec& spec,
                const NoiseSchedule& schedule, const TrainConfig& cfg,
                std::span<const int> seq, Rng& rng) {
  if (cfg.loss == TrainLoss::kDwdse) return dwdse_sample(model, spec, schedule, seq, rng, {});
  return dse_fixed_sample(model, spec, cfg.sigma_bar, cfg.sigma_weight, seq, rng, {});
}

double validation_loss(const ScoreModel& model, const TransitionSpec& spec,
                       const NoiseSchedule& schedule, const Corpus& corpus,
                       const TrainConfig& cfg, size_t val_count) {
  // Fixed seed: every validation round sees identical (t, x_t) draws, so the
  // series is comparable across steps and between raw and EMA weights.
  Rng rng(cfg.seed ^ 0xA5A5A5A55A5A5A5Aull);
  double acc = 0.0;
  for (size_t i = 0; i < val_count; ++i)
    for (int k = 0; k < cfg.val_draws; ++k)
      acc += val_draw(model, spec, schedule, cfg, corpus.sequences[i], rng);
  return acc / (static_cast<double>(val_count) * cfg.val_draws);
}

}  // namespace

TrainResult train(ScoreModel& model, const TransitionSpec& spec, const NoiseSchedule& schedule,
                  const Corpus& corpus, const TrainConfig& cfg, std::ostream* metrics) {
  corpus.validate();
  if (corpus.sequences.empty()) throw ArgumentError("cannot train on an empty corpus");
  if (corpus.seq_len != model.seq_len())
    throw ArgumentError("corpus/model sequence length mismatch");
  if (corpus.vocab != spec.vocab()) throw ArgumentError("corpus/process vocabulary mismatch");
  if (model.num_params() == 0) throw ArgumentError("model has no trainable parameters");
  if (cfg.exact && cfg.loss != TrainLoss::kDseFixed)
    throw ArgumentError("exact training requires the fixed-level objective");

  const size_t P = model.num_params();
  std::span<double> params = model.params();
  TrainResult res;
  res.ema.assign(params.begin(), params.end());
  AdamState adam(P);
  std::vector<double> grad(P);
  Rng root(cfg.seed);
  const size_t val_count = std::min<size_t>(static_cast<size_t>(cfg.val_sequences),
                                            corpus.size());

  EnumeratedDist empirical;
  if (cfg.exact) empirical = corpus_empirical(corpus);

  for (int step = 0; step < cfg.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = root.child(static_cast<uint64_t>(step));
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    uint64_t batch_hash = 0xCBF29CE484222325ull;

    if (cfg.exact) {
      loss = expected_dse_with_grad(model, empirical, spec, cfg.sigma_bar, cfg.sigma_weight,
                                    grad);
    } else {
      const size_t batch =
          cfg.batch_size == 0 ? corpus.size()
                              : std::min<size_t>(static_cast<size_t>(cfg.batch_size),
                                                 corpus.size());
      for (size_t b = 0; b < batch; ++b) {
        const size_t idx = cfg.batch_size == 0 ? b : rng.below(corpus.size());
        const auto& seq = corpus.sequences[idx];
        batch_hash = fnv1a_tokens(batch_hash, seq);
        if (cfg.loss == TrainLoss::kDwdse)
          loss += dwdse_sample(model, spec, schedule, seq, rng, grad);
        else
          loss += dse_fixed_sample(model, spec, cfg.sigma_bar, cfg.sigma_weight, seq, rng, grad);
      }
      loss /= static_cast<double>(batch);
      for (double& g : grad) g /= static_cast<double>(batch);
    }

    const double grad_norm = clip_grad_norm(grad, cfg.clip_norm);
    if (!std::isfinite(loss) || !std::isfinite(grad_norm)) {
      char hash_hex[17];
      std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                    static_cast<unsigned long long>(batch_hash));
      throw NumericalError("non-finite loss or gradient at step " + std::to_string(step) +
                           " (batch hash 0x" + hash_hex + ")");
    }

    const double lr = cfg.warmup > 0
                          ? cfg.lr * std::min(1.0, static_cast<double>(step + 1) / cfg.warmup)
                          : cfg.lr;
    adam_step(params, grad, adam, lr);
    ema_update(res.ema, params, cfg.ema_decay);
    res.final_loss = loss;

    if (metrics) {
      const double wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();
      nlohmann::json line{
          {"step", step}, {"loss", loss}, {"grad_norm", grad_norm}, {"wall_ms", wall_ms}};
      *metrics << line.dump() << "\n";
    }

    if (cfg.val_every > 0 && (step + 1) % cfg.val_every == 0) {
      const double raw = validation_loss(model, spec, schedule, corpus, cfg, val_count);
      std::vector<double> saved(params.begin(), params.end());
      std::copy(res.ema.begin(), res.ema.end(), params.begin());
      const double smoothed = validation_loss(model, spec, schedule, corpus, cfg, val_count);
      std::copy(saved.begin(), saved.end(), params.begin());
      if (metrics) {
        nlohmann::json line{{"step", step}, {"val_loss", raw}, {"val_loss_ema", smoothed}};
        *metrics << line.dump() << "\n";
      }
    }
  }

  res.steps = cfg.steps;
  res.rng_state = root.state();
  return res;
}

}  // namespace sedd
