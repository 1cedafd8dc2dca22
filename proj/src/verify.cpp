#include "sedd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sedd/enumerated.hpp"
#include "sedd/losses.hpp"
#include "sedd/matrix.hpp"
#include "sedd/oracle.hpp"
#include "sedd/process.hpp"
#include "sedd/rng.hpp"
#include "sedd/samplers.hpp"
#include "sedd/scores.hpp"

namespace sedd {
namespace {

CheckRecord record(std::string name, double metric, double threshold) {
  CheckRecord r;
  r.name = std::move(name);
  r.metric = metric;
  r.threshold = threshold;
  r.pass = std::isfinite(metric) && metric <= threshold;
  return r;
}

EnumeratedDist random_dist(int d, int S, Rng& rng) {
  EnumeratedDist p(d, S);
  for (double& v : p.p) v = 0.05 + rng.uniform01();
  p.normalize();
  return p;
}

double max_abs_kernel_gap(const TransitionSpec& spec, double sigma_bar) {
  Matrix q = dense_rate_matrix(spec);
  for (double& v : q.a) v *= sigma_bar;
  Matrix e = dense_expm(q);
  const int S = spec.num_states();
  double worst = 0.0;
  for (int dest = 0; dest < S; ++dest)
    for (int src = 0; src < S; ++src)
      worst = std::max(worst, std::abs(e(dest, src) - spec.transition_prob(sigma_bar, dest, src)));
  return worst;
}

double inverse_roundtrip_gap(const TransitionSpec& spec, double sigma_bar, Rng& rng) {
  const int S = spec.num_states();
  std::vector<double> v(static_cast<size_t>(S)), fwd(v.size()), back(v.size());
  double total = 0.0;
  for (double& x : v) {
    x = 0.1 + rng.uniform01();
    total += x;
  }
  for (double& x : v) x /= total;
  spec.kernel_apply(sigma_bar, v, fwd);
  spec.kernel_apply(sigma_bar, fwd, back, /*inverse=*/true);
  double worst = 0.0;
  for (int i = 0; i < S; ++i) worst = std::max(worst, std::abs(back[i] - v[i]));
  return worst;
}

double chapman_kolmogorov_gap(const TransitionSpec& spec, double sb1, double sb2) {
  const int S = spec.num_states();
  std::vector<double> col(static_cast<size_t>(S)), step2(col.size());
  double worst = 0.0;
  for (int src = 0; src < S; ++src) {
    spec.transition_column(sb1, src, col);
    spec.kernel_apply(sb2, col, step2);
    for (int dest = 0; dest < S; ++dest)
      worst = std::max(worst, std::abs(step2[dest] - spec.transition_prob(sb1 + sb2, dest, src)));
  }
  return worst;
}

double schedule_derivative_gap(const NoiseSchedule& sched) {
  const double h = 1e-5;
  double worst = 0.0;
  for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    double fd = (sched.sigma_bar(t + h) - sched.sigma_bar(t - h)) / (2 * h);
    double sg = sched.sigma(t);
    worst = std::max(worst, std::abs(fd - sg) / std::max(std::abs(sg), 1e-12));
  }
  return worst;
}

double schedule_inverse_gap(const NoiseSchedule& sched) {
  double worst = 0.0;
  for (double t : {0.05, 0.2, 0.5, 0.8, 0.99})
    worst = std::max(worst, std::abs(sched.time_of_sigma_bar(sched.sigma_bar(t)) - t));
  return worst;
}

double evolve_vs_dense_gap(const TransitionSpec& spec, int d, double sigma_bar, Rng& rng) {
  EnumeratedDist p = random_dist(d, spec.num_states(), rng);
  EnumeratedDist fast = evolve(p, spec, sigma_bar);
  Matrix g = dense_sequence_generator(spec, d);
  for (double& v : g.a) v *= sigma_bar;
  Matrix e = dense_expm(g);
  const int dim = static_cast<int>(p.size());
  double worst = 0.0;
  for (int i = 0; i < dim; ++i) {
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) acc += e(i, j) * p.p[static_cast<size_t>(j)];
    worst = std::max(worst, std::abs(acc - fast.p[static_cast<size_t>(i)]));
  }
  return worst;
}

double loss_identity_gap() {
  double worst = std::abs(se_term(1.0, 0.2, 1.0) - 0.4781124175131799);
  worst = std::max(worst, std::abs(k_const(1.0) + 1.0));
  worst = std::max(worst, std::abs(k_const(std::exp(1.0))));
  worst = std::max(worst, std::abs(k_const(0.0)));
  for (double a : {0.3, 1.0, 2.5}) {
    worst = std::max(worst, std::abs(se_term(a, a, 1.7)));
    worst = std::max(worst, std::abs(se_term_from_log(std::log(a), a, 1.7)));
  }
  worst = std::max(worst, std::abs(csm_term(1.0, 0.2, 1.0) - 0.32));
  return worst;
}

// The three objectives differ by score-independent constants, so their
// differences across two models must agree exactly.
double objective_offset_gap(Rng& rng) {
  TransitionSpec spec = TransitionSpec::uniform(3);
  const int d = 2;
  const double sigma_bar = 0.7;
  EnumeratedDist p0 = random_dist(d, spec.vocab(), rng);
  EnumeratedDist pt = evolve(embed_clean(p0, spec), spec, sigma_bar);
  WeightFn w = forward_rate_weights(spec, 0.9);

  TabularScore a(d, spec), b(d, spec);
  for (double& v : a.params()) v = 0.4 * rng.normal();
  for (double& v : b.params()) v = 0.4 * rng.normal();

  double d_se = expected_score_entropy(a, pt, spec, sigma_bar, w) -
                expected_score_entropy(b, pt, spec, sigma_bar, w);
  double d_ise = expected_implicit_score_entropy(a, pt, sigma_bar, w) -
                 expected_implicit_score_entropy(b, pt, sigma_bar, w);
  double d_dse = expected_denoising_score_entropy(a, p0, spec, sigma_bar, w) -
                 expected_denoising_score_entropy(b, p0, spec, sigma_bar, w);
  return std::max(std::abs(d_se - d_ise), std::abs(d_se - d_dse));
}

// With true ratios, one backward token step must reproduce the exact
// posterior p(x_s = dest | x_t) of the forward kernel.
double tweedie_reversal_gap(const TransitionSpec& spec, Rng& rng) {
  const int S = spec.num_states();
  EnumeratedDist p0 = random_dist(1, spec.vocab(), rng);
  ExactScoreModel model(p0, spec);
  const double sb_s = 0.4, sb_t = 1.1;
  EnumeratedDist ps = evolve(embed_clean(p0, spec), spec, sb_s);
  EnumeratedDist pt = evolve(embed_clean(p0, spec), spec, sb_t);

  std::vector<double> got(static_cast<size_t>(S));
  double worst = 0.0;
  for (int xt = 0; xt < S; ++xt) {
    if (pt.p[static_cast<size_t>(xt)] <= 0) continue;
    std::vector<int> seq{xt};
    ScoreEval ev = model.eval(seq, sb_t);
    tweedie_position_dist(ev, spec, sb_t - sb_s, 0, got);
    double acc = 0.0;
    for (int dest = 0; dest < S; ++dest) {
      double truth = spec.transition_prob(sb_t - sb_s, xt, dest) *
                     ps.p[static_cast<size_t>(dest)] / pt.p[static_cast<size_t>(xt)];
      acc += std::abs(got[static_cast<size_t>(dest)] - truth);
    }
    worst = std::max(worst, 0.5 * acc);
  }
  return worst;
}

// Integrating the exact-score reverse ODE down from t=1 must land on the
// forward marginal at t_min (up to the vanishing start-distribution gap).
double reverse_solver_gap(const TransitionSpec& spec, Rng& rng) {
  const int d = 2;
  NoiseSchedule sched = NoiseSchedule::geometric(0.02, 20.0, 1e-3);
  EnumeratedDist p0 = random_dist(d, spec.vocab(), rng);
  ExactScoreModel model(p0, spec);
  ReverseSolveResult res = exact_reverse_solve(model, spec, sched, 400);
  EnumeratedDist truth = evolve(embed_clean(p0, spec), spec, sched.sigma_bar(sched.t_min()));
  return tv(res.dist, truth);
}

// With exact scores the time-integrated denoising bound plus the prior term
// equals the data NLL, so its average under the data distribution is the
// entropy (up to t_min truncation, quadrature, and the stationary leak).
double elbo_entropy_gap(Rng& rng) {
  TransitionSpec spec = TransitionSpec::absorbing(3);
  const int d = 2;
  NoiseSchedule sched = NoiseSchedule::geometric(0.005, 20.0, 1e-3);
  EnumeratedDist p0 = random_dist(d, spec.vocab(), rng);
  ExactScoreModel model(p0, spec);

  double avg_bound = 0.0, entropy = 0.0;
  std::vector<int> x0(static_cast<size_t>(d));
  for (size_t i = 0; i < p0.size(); ++i) {
    double mass = p0.p[i];
    decode_sequence(i, p0.S, x0);
    avg_bound += mass * (dwdse_integral_exact(model, spec, sched, x0, 128) +
                         prior_kl(spec, sched, x0));
    entropy -= mass * std::log(mass);
  }
  return std::abs(avg_bound - entropy);
}

// Scores derived from the exact posterior mean must match exact concrete
// scores on every edit the process carries (nonzero forward-generator
// weight); entries with zero weight are never consumed and the mean
// parameterization does not represent them.
double mean_bridge_gap(Rng& rng) {
  TransitionSpec spec = TransitionSpec::absorbing(3);
  const int d = 2, S = spec.num_states();
  EnumeratedDist p0 = random_dist(d, spec.vocab(), rng);
  ExactScoreModel score_model(p0, spec);
  ExactPosteriorMeanModel mean_model(p0, spec);

  double worst = 0.0;
  std::vector<int> seq(static_cast<size_t>(d));
  for (size_t i = 0; i < pow_checked(S, d, kMaxEnumStates); ++i) {
    decode_sequence(i, S, seq);
    ScoreEval exact = score_model.eval(seq, 0.8);
    ScoreEval bridged = score_from_mean(mean_model, spec, 0.8, seq);
    for (int pos = 0; pos < d; ++pos)
      for (int dest = 0; dest < S; ++dest) {
        if (dest == seq[static_cast<size_t>(pos)]) continue;
        if (spec.rate(seq[static_cast<size_t>(pos)], dest) <= 0) continue;
        if (exact.is_excluded(pos, dest) != bridged.is_excluded(pos, dest)) return 1.0;
        if (exact.is_excluded(pos, dest)) continue;
        double se = exact.score(pos, dest), sb = bridged.score(pos, dest);
        worst = std::max(worst, std::abs(se - sb) / std::max(std::abs(se), 1e-300));
      }
  }
  return worst;
}

double grad_fd_gap(ScoreModel& model, const TransitionSpec& spec, double sigma_bar, Rng& rng) {
  EnumeratedDist p0 = random_dist(model.seq_len(), spec.vocab(), rng);
  for (double& v : model.params()) v += 0.15 * rng.normal();

  std::vector<double> grad(model.num_params(), 0.0);
  expected_dse_with_grad(model, p0, spec, sigma_bar, 1.0, grad);

  std::vector<double> base(model.params().begin(), model.params().end());
  auto loss_at = [&](std::span<const double> p) {
    std::copy(p.begin(), p.end(), model.params().begin());
    std::vector<double> scratch(model.num_params(), 0.0);
    return expected_dse_with_grad(model, p0, spec, sigma_bar, 1.0, scratch);
  };
  std::vector<double> fd = finite_difference_grad(loss_at, base, 1e-5);
  std::copy(base.begin(), base.end(), model.params().begin());

  double diff2 = 0.0, norm2 = 0.0;
  for (size_t i = 0; i < grad.size(); ++i) {
    diff2 += (fd[i] - grad[i]) * (fd[i] - grad[i]);
    norm2 += grad[i] * grad[i];
  }
  return std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-12);
}

double prior_kl_factorization_gap(const TransitionSpec& spec, Rng& rng) {
  const int d = 2, S = spec.num_states();
  NoiseSchedule sched = NoiseSchedule::geometric(1e-3, 6.0);
  std::vector<int> x0(static_cast<size_t>(d));
  for (int& t : x0) t = static_cast<int>(rng.below(static_cast<uint64_t>(spec.vocab())));

  EnumeratedDist delta(d, S);
  delta.at(x0) = 1.0;
  EnumeratedDist p1 = evolve(delta, spec, sched.sigma_bar(1.0));
  std::vector<double> pi = spec.stationary();
  EnumeratedDist ref(d, S);
  std::vector<int> seq(static_cast<size_t>(d));
  for (size_t i = 0; i < ref.size(); ++i) {
    decode_sequence(i, S, seq);
    double prod = 1.0;
    for (int tok : seq) prod *= pi[static_cast<size_t>(tok)];
    ref.p[i] = prod;
  }
  return std::abs(prior_kl(spec, sched, x0) - kl(p1, ref));
}

// sample() and infill() with nothing pinned must be the same draw for the
// same seed, and a repeated run must reproduce itself bit for bit.
double sampler_identity_gap() {
  TransitionSpec spec = TransitionSpec::absorbing(3);
  NoiseSchedule sched = NoiseSchedule::geometric(1e-2, 4.0);
  MlpScore model(3, spec, MlpDims{4, 8, 4}, 7);
  SamplerConfig cfg;
  cfg.steps = 8;

  Rng r1(11), r2(11), r3(11);
  SampleResult a = sample(model, spec, sched, cfg, 4, r1);
  SampleResult b = infill(model, spec, sched, cfg, PromptSpec{}, 4, r2);
  SampleResult c = sample(model, spec, sched, cfg, 4, r3);
  return (a.sequences == b.sequences && a.sequences == c.sequences) ? 0.0 : 1.0;
}

}  // namespace

std::vector<CheckRecord> run_verification(uint64_t seed) {
  Rng root(seed);
  std::vector<CheckRecord> out;

  TransitionSpec uni = TransitionSpec::uniform(5);
  TransitionSpec abs_spec = TransitionSpec::absorbing(4);
  out.push_back(record("kernel_matches_expm_uniform",
                       std::max(max_abs_kernel_gap(uni, 0.3), max_abs_kernel_gap(uni, 1.7)),
                       1e-10));
  out.push_back(record(
      "kernel_matches_expm_absorbing",
      std::max(max_abs_kernel_gap(abs_spec, 0.3), max_abs_kernel_gap(abs_spec, 1.7)), 1e-10));

  {
    Rng rng = root.child(1);
    double m = std::max(inverse_roundtrip_gap(uni, 0.9, rng), inverse_roundtrip_gap(abs_spec, 0.9, rng));
    out.push_back(record("kernel_inverse_roundtrip", m, 1e-10));
  }
  out.push_back(record(
      "chapman_kolmogorov",
      std::max(chapman_kolmogorov_gap(uni, 0.4, 1.3), chapman_kolmogorov_gap(abs_spec, 0.4, 1.3)),
      1e-10));

  NoiseSchedule geo = NoiseSchedule::geometric(1e-3, 10.0);
  NoiseSchedule lin = NoiseSchedule::log_linear(1e-3);
  out.push_back(record("schedule_derivative_matches",
                       std::max(schedule_derivative_gap(geo), schedule_derivative_gap(lin)),
                       1e-6));
  out.push_back(record("schedule_inverse_roundtrip",
                       std::max(schedule_inverse_gap(geo), schedule_inverse_gap(lin)), 1e-9));

  {
    Rng rng = root.child(2);
    double m = std::max(evolve_vs_dense_gap(TransitionSpec::uniform(3), 3, 1.2, rng),
                        evolve_vs_dense_gap(TransitionSpec::absorbing(3), 2, 1.2, rng));
    out.push_back(record("factorized_evolution_matches_dense", m, 1e-9));
  }

  out.push_back(record("score_entropy_identities", loss_identity_gap(), 1e-12));

  {
    Rng rng = root.child(3);
    out.push_back(record("objective_offsets_match", objective_offset_gap(rng), 1e-9));
  }
  {
    Rng rng = root.child(4);
    double m = std::max(tweedie_reversal_gap(TransitionSpec::uniform(4), rng),
                        tweedie_reversal_gap(TransitionSpec::absorbing(3), rng));
    out.push_back(record("tweedie_reverses_token_kernel", m, 1e-10));
  }
  {
    Rng rng = root.child(5);
    double m = std::max(reverse_solver_gap(TransitionSpec::uniform(3), rng),
                        reverse_solver_gap(TransitionSpec::absorbing(2), rng));
    out.push_back(record("reverse_solver_matches_forward", m, 1e-5));
  }
  {
    Rng rng = root.child(6);
    out.push_back(record("elbo_matches_entropy_exact_scores", elbo_entropy_gap(rng), 0.05));
  }
  {
    Rng rng = root.child(7);
    out.push_back(record("mean_bridge_matches_scores", mean_bridge_gap(rng), 1e-9));
  }
  {
    Rng rng = root.child(8);
    TransitionSpec spec = TransitionSpec::uniform(3);
    MlpScore model(2, spec, MlpDims{4, 8, 4}, 21);
    out.push_back(record("grad_backprop_matches_fd_score_mlp", grad_fd_gap(model, spec, 0.8, rng),
                         1e-5));
  }
  {
    Rng rng = root.child(9);
    TransitionSpec spec = TransitionSpec::absorbing(3);
    MeanMlpScore model(2, spec, MlpDims{4, 8, 4}, 22);
    out.push_back(record("grad_backprop_matches_fd_mean_mlp",
                         grad_fd_gap(model, spec, 0.8, rng), 1e-5));
  }
  {
    Rng rng = root.child(10);
    double m = std::max(prior_kl_factorization_gap(uni, rng),
                        prior_kl_factorization_gap(abs_spec, rng));
    out.push_back(record("prior_kl_factorizes", m, 1e-10));
  }
  out.push_back(record("sampler_prompt_identity", sampler_identity_gap(), 0.5));

  return out;
}

}  // namespace sedd
