#include "sedd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "sedd/errors.hpp"
#include "sedd/oracle.hpp"

namespace sedd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double k_const(double a) {
  if (a == 0.0) return 0.0;
  if (!(a > 0.0)) throw ArgumentError("k_const needs a >= 0");
  return a * (std::log(a) - 1.0);
}

double se_term(double s, double a, double w) {
  if (w == 0.0) return 0.0;
  if (!(w > 0.0)) throw ArgumentError("loss weight must be nonnegative");
  if (!(a >= 0.0)) throw ArgumentError("true ratio must be nonnegative");
  if (s == 0.0) return a == 0.0 ? 0.0 : kInf;
  if (!(s > 0.0)) throw ArgumentError("score must be nonnegative");
  return w * (s - a * std::log(s) + k_const(a));
}

double se_term_from_log(double log_s, double a, double w) {
  if (w == 0.0) return 0.0;
  if (!(w > 0.0)) throw ArgumentError("loss weight must be nonnegative");
  if (!(a >= 0.0)) throw ArgumentError("true ratio must be nonnegative");
  return w * (std::exp(log_s) - a * log_s + k_const(a));
}

double csm_term(double s, double a, double w) {
  if (w == 0.0) return 0.0;
  if (!(w > 0.0)) throw ArgumentError("loss weight must be nonnegative");
  const double diff = s - a;
  return 0.5 * w * diff * diff;
}

WeightFn unit_weights() {
  return [](std::span<const int>, int, int) { return 1.0; };
}

WeightFn forward_rate_weights(const TransitionSpec& spec, double sigma) {
  if (!(sigma >= 0.0)) throw ArgumentError("sigma must be nonnegative");
  return [spec, sigma](std::span<const int> seq, int pos, int dest) {
    return sigma * spec.rate(seq[static_cast<size_t>(pos)], dest);
  };
}

namespace {

void check_same_state(const ScoreEval& a, const ScoreEval& b) {
  if (a.seq_len() != b.seq_len() || a.num_states() != b.num_states())
    throw ArgumentError("score evaluations have mismatched shapes");
  for (int i = 0; i < a.seq_len(); ++i)
    if (a.token(i) != b.token(i))
      throw ArgumentError("score evaluations belong to different states");
}

// Per-edit accumulation shared by the explicit losses. term(s_log_or_excluded)
double sum_edits(const ScoreEval& model_ev, const WeightFn& w,
                 const std::function<double(int pos, int dest, double wv)>& term) {
  const int d = model_ev.seq_len(), S = model_ev.num_states();
  const auto seq = model_ev.seq();
  double acc = 0.0;
  for (int pos = 0; pos < d; ++pos)
    for (int dest = 0; dest < S; ++dest) {
      if (dest == model_ev.token(pos)) continue;
      const double wv = w(seq, pos, dest);
      if (wv == 0.0) continue;
      acc += term(pos, dest, wv);
    }
  return acc;
}

double exact_ratio(const ScoreEval& exact_ev, int pos, int dest) {
  return exact_ev.is_excluded(pos, dest) ? 0.0 : exact_ev.score(pos, dest);
}

}  // namespace

double score_entropy(const ScoreEval& model_ev, const ScoreEval& exact_ev, const WeightFn& w) {
  check_same_state(model_ev, exact_ev);
  return sum_edits(model_ev, w, [&](int pos, int dest, double wv) {
    const double a = exact_ratio(exact_ev, pos, dest);
    if (model_ev.is_excluded(pos, dest)) return se_term(0.0, a, wv);
    return se_term_from_log(model_ev.log_score(pos, dest), a, wv);
  });
}

double concrete_score_matching(const ScoreEval& model_ev, const ScoreEval& exact_ev,
                               const WeightFn& w) {
  check_same_state(model_ev, exact_ev);
  return sum_edits(model_ev, w, [&](int pos, int dest, double wv) {
    const double a = exact_ratio(exact_ev, pos, dest);
    const double s = model_ev.is_excluded(pos, dest) ? 0.0 : model_ev.score(pos, dest);
    return csm_term(s, a, wv);
  });
}

double implicit_score_entropy(const ScoreModel& model, std::span<const int> seq,
                              double sigma_bar, const WeightFn& w) {
  const int d = model.seq_len(), S = model.num_states();
  if (static_cast<int>(seq.size()) != d) throw ArgumentError("sequence length mismatch");
  const ScoreEval ev_x = model.eval(seq, sigma_bar);
  double acc = 0.0;
  std::vector<int> y(seq.begin(), seq.end());
  for (int pos = 0; pos < d; ++pos) {
    const int keep = y[static_cast<size_t>(pos)];
    for (int dest = 0; dest < S; ++dest) {
      if (dest == keep) continue;
      const double w_out = w(seq, pos, dest);
      if (w_out != 0.0)
        acc += w_out * (ev_x.is_excluded(pos, dest) ? 0.0 : ev_x.score(pos, dest));
      y[static_cast<size_t>(pos)] = dest;
      const double w_in = w(y, pos, keep);
      if (w_in != 0.0) {
        const ScoreEval ev_y = model.eval(y, sigma_bar);
        if (ev_y.is_excluded(pos, keep))
          acc += kInf;  // log of a zero score
        else
          acc -= w_in * ev_y.log_score(pos, keep);
      }
      y[static_cast<size_t>(pos)] = keep;
    }
  }
  return acc;
}

double denoising_score_entropy(const ScoreEval& model_ev, const TransitionSpec& spec,
                               double sigma_bar, std::span<const int> x0, const WeightFn& w) {
  if (static_cast<int>(x0.size()) != model_ev.seq_len())
    throw ArgumentError("clean sequence length mismatch");
  if (model_ev.num_states() != spec.num_states())
    throw ArgumentError("state count mismatch");
  return sum_edits(model_ev, w, [&](int pos, int dest, double wv) {
    const int xt_tok = model_ev.token(pos);
    const int x0_tok = x0[static_cast<size_t>(pos)];
    const double denom = spec.transition_prob(sigma_bar, xt_tok, x0_tok);
    if (denom == 0.0)
      throw UndefinedScoreError("noised state unreachable from its clean token");
    const double a = spec.transition_prob(sigma_bar, dest, x0_tok) / denom;
    if (model_ev.is_excluded(pos, dest)) return se_term(0.0, a, wv);
    return se_term_from_log(model_ev.log_score(pos, dest), a, wv);
  });
}

double expected_score_entropy(const ScoreModel& model, const EnumeratedDist& pt,
                              const TransitionSpec& spec, double sigma_bar, const WeightFn& w) {
  if (pt.S != model.num_states()) throw ArgumentError("state count mismatch");
  double acc = 0.0;
  std::vector<int> seq(static_cast<size_t>(pt.d));
  for (size_t idx = 0; idx < pt.p.size(); ++idx) {
    const double px = pt.p[idx];
    if (px == 0.0) continue;
    decode_sequence(idx, pt.S, seq);
    const ScoreEval exact_ev = exact_concrete_score(pt, spec, sigma_bar, seq);
    acc += px * score_entropy(model.eval(seq, sigma_bar), exact_ev, w);
  }
  return acc;
}

double expected_implicit_score_entropy(const ScoreModel& model, const EnumeratedDist& pt,
                                       double sigma_bar, const WeightFn& w) {
  if (pt.S != model.num_states()) throw ArgumentError("state count mismatch");
  double acc = 0.0;
  std::vector<int> seq(static_cast<size_t>(pt.d));
  for (size_t idx = 0; idx < pt.p.size(); ++idx) {
    const double px = pt.p[idx];
    if (px == 0.0) continue;
    decode_sequence(idx, pt.S, seq);
    acc += px * implicit_score_entropy(model, seq, sigma_bar, w);
  }
  return acc;
}

double expected_denoising_score_entropy(const ScoreModel& model, const EnumeratedDist& p0,
                                        const TransitionSpec& spec, double sigma_bar,
                                        const WeightFn& w) {
  if (p0.S != spec.vocab() && p0.S != spec.num_states())
    throw ArgumentError("clean distribution alphabet mismatch");
  const int d = p0.d;
  const int S = spec.num_states();
  const size_t dim = pow_checked(S, d, kMaxEnumStates);
  double acc = 0.0;
  std::vector<int> x0(static_cast<size_t>(d)), xt(static_cast<size_t>(d));
  for (size_t i0 = 0; i0 < p0.p.size(); ++i0) {
    const double p0w = p0.p[i0];
    if (p0w == 0.0) continue;
    decode_sequence(i0, p0.S, x0);
    for (size_t it = 0; it < dim; ++it) {
      decode_sequence(it, S, xt);
      double pxt = 1.0;
      for (int i = 0; i < d && pxt > 0.0; ++i)
        pxt *= spec.transition_prob(sigma_bar, xt[static_cast<size_t>(i)],
                                    x0[static_cast<size_t>(i)]);
      if (pxt == 0.0) continue;
      acc += p0w * pxt *
             denoising_score_entropy(model.eval(xt, sigma_bar), spec, sigma_bar, x0, w);
    }
  }
  return acc;
}

namespace {

// Shared body of the stochastic denoising draws: noise x0 at sigma_bar, sum
// the weighted terms, optionally push the gradient through the model. The
// upstream on log s of each term is w * (s - a).
double dse_draw(const ScoreModel& model, const TransitionSpec& spec, double sigma_bar,
                double sigma_weight, std::span<const int> x0, Rng& rng, double scale,
                std::span<double> grad) {
  const int d = model.seq_len(), S = model.num_states();
  if (static_cast<int>(x0.size()) != d) throw ArgumentError("sequence length mismatch");
  std::vector<int> xt(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i)
    xt[static_cast<size_t>(i)] = spec.sample_forward(sigma_bar, x0[static_cast<size_t>(i)], rng);
  const ScoreEval ev = model.eval(xt, sigma_bar);
  double loss = 0.0;
  std::vector<double> upstream;
  if (!grad.empty()) upstream.assign(static_cast<size_t>(d) * S, 0.0);
  for (int pos = 0; pos < d; ++pos) {
    const int xt_tok = xt[static_cast<size_t>(pos)];
    const int x0_tok = x0[static_cast<size_t>(pos)];
    const double denom = spec.transition_prob(sigma_bar, xt_tok, x0_tok);
    for (int dest = 0; dest < S; ++dest) {
      if (dest == xt_tok) continue;
      const double wv = sigma_weight * spec.rate(xt_tok, dest);
      if (wv == 0.0) continue;
      const double a = spec.transition_prob(sigma_bar, dest, x0_tok) / denom;
      if (ev.is_excluded(pos, dest)) {
        loss += se_term(0.0, a, wv);
        continue;
      }
      const double log_s = ev.log_score(pos, dest);
      loss += se_term_from_log(log_s, a, wv);
      if (!grad.empty())
        upstream[static_cast<size_t>(pos) * S + dest] = scale * wv * (std::exp(log_s) - a);
    }
  }
  if (!grad.empty()) model.backprop(xt, sigma_bar, upstream, grad);
  return scale * loss;
}

}  // namespace

McEstimate dwdse_bound_integral(const ScoreModel& model, const TransitionSpec& spec,
                                const NoiseSchedule& schedule, std::span<const int> x0,
                                int num_samples, Rng& rng) {
  if (num_samples < 2) throw ArgumentError("need at least two samples for a standard error");
  const double span = 1.0 - schedule.t_min();
  double mean = 0.0, m2 = 0.0;
  for (int k = 0; k < num_samples; ++k) {
    const double t = rng.uniform(schedule.t_min(), 1.0);
    const double v = dse_draw(model, spec, schedule.sigma_bar(t), schedule.sigma(t), x0, rng,
                              span, {});
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  McEstimate est;
  est.value = mean;
  est.std_err = std::sqrt(m2 / (static_cast<double>(num_samples) *
                                static_cast<double>(num_samples - 1)));
  est.samples = num_samples;
  return est;
}

namespace {

// Exact inner expectation of the bound integrand at time t.
double dwdse_integrand_exact(const ScoreModel& model, const TransitionSpec& spec, double t,
                             const NoiseSchedule& schedule, std::span<const int> x0) {
  const double sb = schedule.sigma_bar(t);
  const int d = model.seq_len(), S = model.num_states();
  const size_t dim = pow_checked(S, d, kMaxEnumStates);
  const WeightFn w = forward_rate_weights(spec, schedule.sigma(t));
  double acc = 0.0;
  std::vector<int> xt(static_cast<size_t>(d));
  for (size_t it = 0; it < dim; ++it) {
    decode_sequence(it, S, xt);
    double pxt = 1.0;
    for (int i = 0; i < d && pxt > 0.0; ++i)
      pxt *= spec.transition_prob(sb, xt[static_cast<size_t>(i)], x0[static_cast<size_t>(i)]);
    if (pxt == 0.0) continue;
    acc += pxt * denoising_score_entropy(model.eval(xt, sb), spec, sb, x0, w);
  }
  return acc;
}

}  // namespace

double dwdse_integral_exact(const ScoreModel& model, const TransitionSpec& spec,
                            const NoiseSchedule& schedule, std::span<const int> x0,
                            int quad_intervals) {
  if (quad_intervals < 2 || quad_intervals % 2 != 0)
    throw ArgumentError("Simpson quadrature needs an even interval count >= 2");
  const double lo = schedule.t_min(), hi = 1.0;
  const double h = (hi - lo) / static_cast<double>(quad_intervals);
  double acc = 0.0;
  for (int k = 0; k <= quad_intervals; ++k) {
    const double t = lo + h * static_cast<double>(k);
    const double f = dwdse_integrand_exact(model, spec, t, schedule, x0);
    const double coef = (k == 0 || k == quad_intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    acc += coef * f;
  }
  return acc * h / 3.0;
}

double dwdse_sample(const ScoreModel& model, const TransitionSpec& spec,
                    const NoiseSchedule& schedule, std::span<const int> x0, Rng& rng,
                    std::span<double> grad) {
  const double t = rng.uniform(schedule.t_min(), 1.0);
  return dse_draw(model, spec, schedule.sigma_bar(t), schedule.sigma(t), x0, rng,
                  1.0 - schedule.t_min(), grad);
}

double dse_fixed_sample(const ScoreModel& model, const TransitionSpec& spec, double sigma_bar,
                        double sigma_weight, std::span<const int> x0, Rng& rng,
                        std::span<double> grad) {
  return dse_draw(model, spec, sigma_bar, sigma_weight, x0, rng, 1.0, grad);
}

double expected_dse_with_grad(const ScoreModel& model, const EnumeratedDist& p0,
                              const TransitionSpec& spec, double sigma_bar, double sigma_weight,
                              std::span<double> grad) {
  if (p0.S != spec.vocab() && p0.S != spec.num_states())
    throw ArgumentError("clean distribution alphabet mismatch");
  const int d = p0.d;
  const int S = spec.num_states();
  if (model.seq_len() != d || model.num_states() != S)
    throw ArgumentError("model/distribution shape mismatch");
  const size_t dim = pow_checked(S, d, kMaxEnumStates);
  double loss = 0.0;
  std::vector<int> x0(static_cast<size_t>(d)), xt(static_cast<size_t>(d));
  std::vector<double> upstream(static_cast<size_t>(d) * S);
  for (size_t it = 0; it < dim; ++it) {
    decode_sequence(it, S, xt);
    std::optional<ScoreEval> ev;
    std::fill(upstream.begin(), upstream.end(), 0.0);
    double touched = 0.0;
    for (size_t i0 = 0; i0 < p0.p.size(); ++i0) {
      const double p0w = p0.p[i0];
      if (p0w == 0.0) continue;
      decode_sequence(i0, p0.S, x0);
      double pxt = 1.0;
      for (int i = 0; i < d && pxt > 0.0; ++i)
        pxt *= spec.transition_prob(sigma_bar, xt[static_cast<size_t>(i)],
                                    x0[static_cast<size_t>(i)]);
      if (pxt == 0.0) continue;
      const double joint = p0w * pxt;
      if (!ev) ev = model.eval(xt, sigma_bar);
      touched += joint;
      for (int pos = 0; pos < d; ++pos) {
        const int xt_tok = xt[static_cast<size_t>(pos)];
        const int x0_tok = x0[static_cast<size_t>(pos)];
        const double denom = spec.transition_prob(sigma_bar, xt_tok, x0_tok);
        for (int dest = 0; dest < S; ++dest) {
          if (dest == xt_tok) continue;
          const double wv = sigma_weight * spec.rate(xt_tok, dest);
          if (wv == 0.0) continue;
          const double a = spec.transition_prob(sigma_bar, dest, x0_tok) / denom;
          if (ev->is_excluded(pos, dest)) {
            loss += joint * se_term(0.0, a, wv);
            continue;
          }
          const double log_s = ev->log_score(pos, dest);
          loss += joint * se_term_from_log(log_s, a, wv);
          upstream[static_cast<size_t>(pos) * S + dest] +=
              joint * wv * (std::exp(log_s) - a);
        }
      }
    }
    if (touched > 0.0 && !grad.empty()) model.backprop(xt, sigma_bar, upstream, grad);
  }
  return loss;
}

double prior_kl(const TransitionSpec& spec, const NoiseSchedule& schedule,
                std::span<const int> x0) {
  const double sb = schedule.sigma_bar(1.0);
  const std::vector<double> pi = spec.stationary();
  std::vector<double> col(static_cast<size_t>(spec.num_states()));
  double acc = 0.0;
  for (int tok : x0) {
    spec.transition_column(sb, tok, col);
    acc += kl(col, pi);
  }
  return acc;
}

}  // namespace sedd
