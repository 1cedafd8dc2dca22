// Acceptance gate: one test case per criterion, one PASS/FAIL line each.
// Tolerances and runtime budgets are pinned in code next to each check.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sedd/checkpoint.hpp"
#include "sedd/config.hpp"
#include "sedd/corpus.hpp"
#include "sedd/enumerated.hpp"
#include "sedd/likelihood.hpp"
#include "sedd/losses.hpp"
#include "sedd/matrix.hpp"
#include "sedd/oracle.hpp"
#include "sedd/process.hpp"
#include "sedd/samplers.hpp"
#include "sedd/scores.hpp"
#include "sedd/training.hpp"

using namespace sedd;

namespace {

struct Crit {
  int id;
  const char* name;
  bool ok = true;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  // Prints the verdict line; budget <= 0 means no runtime cap for this criterion.
  void finish(double budget_s) {
    const double s = elapsed();
    const bool time_ok = budget_s <= 0.0 || s < budget_s;
    CHECK(time_ok);
    ok &= time_ok;
    std::printf("criterion %d (%s): %s [%.2fs]\n", id, name, ok ? "PASS" : "FAIL", s);
    std::fflush(stdout);
  }
};

#define ACC(crit, cond)                               \
  do {                                                \
    const bool acc_ok_ = static_cast<bool>(cond);     \
    CHECK(acc_ok_);                                   \
    (crit).ok &= acc_ok_;                             \
  } while (0)

EnumeratedDist random_full_support(int d, int S, Rng& rng) {
  EnumeratedDist out(d, S);
  for (auto& v : out.p) v = 0.05 + std::exp(rng.normal());
  out.normalize();
  return out;
}

}  // namespace

// 1. Closed-form kernel vs dense matrix exponential.
TEST_CASE("criterion 1: kernel correctness") {
  Crit crit{1, "kernel correctness"};
  constexpr double kTol = 1e-8;

  double worst = 0.0;
  for (int n : {2, 5, 30}) {
    for (int kind = 0; kind < 2; ++kind) {
      TransitionSpec spec =
          kind == 0 ? TransitionSpec::uniform(n) : TransitionSpec::absorbing(n);
      const int S = spec.num_states();
      Matrix q = dense_rate_matrix(spec);
      for (int pt = 0; pt < 20; ++pt) {
        // 20 noise levels, log-spaced across four decades
        const double sb = 1e-3 * std::pow(20.0 / 1e-3, pt / 19.0);
        Matrix sq(S, S);
        for (int r = 0; r < S; ++r)
          for (int c = 0; c < S; ++c) sq(r, c) = sb * q(r, c);
        Matrix p = dense_expm(sq);
        for (int dest = 0; dest < S; ++dest)
          for (int src = 0; src < S; ++src)
            worst = std::max(worst,
                             std::fabs(p(dest, src) - spec.transition_prob(sb, dest, src)));
      }
    }
  }
  ACC(crit, worst <= kTol);
  crit.finish(5.0);
}

// 2. A tabular model trained at one noise level recovers the true score.
TEST_CASE("criterion 2: consistency") {
  Crit crit{2, "consistency"};
  constexpr double kRelTol = 1e-3;
  constexpr double kLseTol = 1e-6;
  constexpr int kMaxSteps = 5000;

  TransitionSpec spec = TransitionSpec::uniform(8);
  Rng rng(123);
  EnumeratedDist p0(1, 8);
  for (auto& v : p0.p) v = 0.05 + rng.uniform01();
  p0.normalize();
  const double sb = 0.5;
  EnumeratedDist pt = evolve(p0, spec, sb);
  WeightFn w = forward_rate_weights(spec, 1.0);
  const double floor = expected_score_entropy(ExactScoreModel(p0, spec), pt, spec, sb, w);

  TabularScore model(1, spec);
  AdamState adam(model.num_params());
  std::vector<double> grad(model.num_params());

  auto max_rel_err = [&]() {
    double worst = 0.0;
    for (int x = 0; x < 8; ++x) {
      std::vector<int> seq{x};
      ScoreEval ev = model.eval(seq, sb);
      for (int dest = 0; dest < 8; ++dest) {
        if (dest == x) continue;
        const double a = pt.p[(size_t)dest] / pt.p[(size_t)x];
        worst = std::max(worst, std::fabs(ev.score(0, dest) - a) / a);
      }
    }
    return worst;
  };

  int hit = -1;
  double rel = 1e9, lse = 1e9;
  for (int step = 0; step < kMaxSteps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    expected_dse_with_grad(model, p0, spec, sb, 1.0, grad);
    const double lr = 0.1 * std::pow(1e-3, step / double(kMaxSteps - 1));
    adam_step(model.params(), grad, adam, lr);
    if ((step + 1) % 50 == 0) {
      rel = max_rel_err();
      lse = expected_score_entropy(model, pt, spec, sb, w);
      if (rel <= kRelTol && lse - floor <= kLseTol) {
        hit = step + 1;
        break;
      }
    }
  }
  std::printf("  converged at step %d: max rel %.3e, score entropy %.3e above floor %.3e\n",
              hit, rel, lse - floor, floor);
  ACC(crit, hit > 0);
  ACC(crit, hit <= kMaxSteps);
  ACC(crit, rel <= kRelTol);
  ACC(crit, lse - floor <= kLseTol);
  crit.finish(60.0);
}

// 3. SE, ISE and DSE differ only by model-independent constants.
TEST_CASE("criterion 3: loss equivalences") {
  Crit crit{3, "loss equivalences"};
  constexpr double kTol = 1e-10;

  TransitionSpec spec = TransitionSpec::uniform(4);
  const int d = 2;
  Rng rng(2024);
  EnumeratedDist p0 = random_full_support(d, 4, rng);
  const double sb = 0.7;
  EnumeratedDist pt = evolve(p0, spec, sb);
  std::vector<WeightFn> weights{forward_rate_weights(spec, 0.9), unit_weights()};

  double worst_ise = 0.0, worst_dse = 0.0;
  for (int pair = 0; pair < 10; ++pair) {
    TabularScore a(d, spec), b(d, spec);
    for (double& v : a.params()) v = 0.6 * rng.normal();
    for (double& v : b.params()) v = 0.6 * rng.normal();
    for (const WeightFn& w : weights) {
      const double d_se = expected_score_entropy(a, pt, spec, sb, w) -
                          expected_score_entropy(b, pt, spec, sb, w);
      const double d_ise = expected_implicit_score_entropy(a, pt, sb, w) -
                           expected_implicit_score_entropy(b, pt, sb, w);
      const double d_dse = expected_denoising_score_entropy(a, p0, spec, sb, w) -
                           expected_denoising_score_entropy(b, p0, spec, sb, w);
      worst_ise = std::max(worst_ise, std::fabs(d_ise - d_se));
      worst_dse = std::max(worst_dse, std::fabs(d_dse - d_se));
    }
  }
  std::printf("  offset gaps: ise %.3e, dse %.3e\n", worst_ise, worst_dse);
  ACC(crit, worst_ise <= kTol);
  ACC(crit, worst_dse <= kTol);
  crit.finish(10.0);
}

// 4. The log-space gradient identity, and backprop vs finite differences.
TEST_CASE("criterion 4: gradient identity") {
  Crit crit{4, "gradient identity"};
  constexpr double kIdTol = 1e-12;
  constexpr double kFdTol = 1e-4;

  // (1 - a/s) = (1/s)(s - a) over a 1000-point grid
  double worst_id = 0.0;
  for (int i = 0; i < 40; ++i) {
    const double s = 1e-2 * std::pow(1e4, i / 39.0);
    for (int j = 0; j < 25; ++j) {
      const double a = 10.0 * j / 24.0;
      worst_id = std::max(worst_id, std::fabs((1.0 - a / s) - (1.0 / s) * (s - a)));
    }
  }
  ACC(crit, worst_id <= kIdTol);

  // every parametric loss gradient vs central finite differences
  TransitionSpec au = TransitionSpec::uniform(3);
  TransitionSpec ab = TransitionSpec::absorbing(4);
  NoiseSchedule sched = NoiseSchedule::geometric(0.01, 5.0, 1e-3);
  Rng rng(31);
  EnumeratedDist pu = random_full_support(2, 3, rng);
  EnumeratedDist pa = random_full_support(3, 4, rng);
  std::vector<int> x0{1, 3, 0};

  auto check_grad = [&](const char* label, ScoreModel& model,
                        const std::function<double(ScoreModel&, std::span<double>)>& loss) {
    std::vector<double> bp(model.num_params(), 0.0);
    loss(model, bp);
    std::vector<double> base(model.params().begin(), model.params().end());
    auto f = [&](std::span<const double> p) {
      std::copy(p.begin(), p.end(), model.params().begin());
      std::vector<double> scratch;  // empty: no gradient accumulation
      const double v = loss(model, scratch);
      return v;
    };
    std::vector<double> fd = finite_difference_grad(f, base, 1e-5);
    std::copy(base.begin(), base.end(), model.params().begin());
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < fd.size(); ++i) {
      num += (bp[i] - fd[i]) * (bp[i] - fd[i]);
      den += fd[i] * fd[i];
    }
    const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    std::printf("  %s: rel grad error %.3e (fd norm %.3e)\n", label, rel, std::sqrt(den));
    ACC(crit, den > 0.0);  // a zero gradient would make the comparison vacuous
    ACC(crit, rel <= kFdTol);
  };

  {
    TabularScore m(2, au);
    Rng pr(7);
    for (double& v : m.params()) v = 0.3 * pr.normal();
    check_grad("tabular / fixed-level dse", m, [&](ScoreModel& mod, std::span<double> g) {
      return expected_dse_with_grad(mod, pu, au, 0.8, 1.0, g);
    });
  }
  {
    MlpScore m(3, ab, MlpDims{6, 12, 4}, 11);
    Rng pr(8);
    for (double& v : m.params()) v += 0.2 * pr.normal();
    check_grad("score mlp / fixed-level dse", m, [&](ScoreModel& mod, std::span<double> g) {
      return expected_dse_with_grad(mod, pa, ab, 0.9, 1.0, g);
    });
    check_grad("score mlp / integrated bound draw", m,
               [&](ScoreModel& mod, std::span<double> g) {
                 Rng r(55);
                 return dwdse_sample(mod, ab, sched, x0, r, g);
               });
    check_grad("score mlp / fixed-level draw", m, [&](ScoreModel& mod, std::span<double> g) {
      Rng r(66);
      return dse_fixed_sample(mod, ab, 0.7, 1.0, x0, r, g);
    });
  }
  {
    MeanMlpScore m(3, ab, MlpDims{6, 12, 4}, 13);
    Rng pr(9);
    for (double& v : m.params()) v += 0.2 * pr.normal();
    check_grad("mean mlp / fixed-level dse", m, [&](ScoreModel& mod, std::span<double> g) {
      return expected_dse_with_grad(mod, pa, ab, 0.9, 1.0, g);
    });
    check_grad("mean mlp / integrated bound draw", m,
               [&](ScoreModel& mod, std::span<double> g) {
                 Rng r(63);  // this draw masks a position, so the gradient is nonzero
                 return dwdse_sample(mod, ab, sched, x0, r, g);
               });
  }
  crit.finish(0.0);
}

// 5. The single-token reverse kernel undoes the forward kernel exactly.
TEST_CASE("criterion 5: tweedie exactness") {
  Crit crit{5, "tweedie exactness"};
  constexpr double kTol = 1e-10;

  Rng rng(404);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    // sizes chosen across 2..20 states, alternating process kinds
    const int uniform_n[5] = {4, 12, 2, 7, 20};
    const int absorbing_n[5] = {8, 19, 15, 6, 10};
    TransitionSpec spec = (k % 2 == 0) ? TransitionSpec::uniform(uniform_n[k / 2])
                                       : TransitionSpec::absorbing(absorbing_n[k / 2]);
    const int S = spec.num_states();
    EnumeratedDist p0 = random_full_support(1, spec.vocab(), rng);
    EnumeratedDist p0e = embed_clean(p0, spec);

    for (double sb : {0.1, 1.0, 5.0}) {
      const double sb_prev = 0.5 * sb;
      EnumeratedDist pt = evolve(p0e, spec, sb);
      EnumeratedDist prev = evolve(p0e, spec, sb_prev);
      std::vector<double> mix((size_t)S, 0.0), ratios((size_t)S), out((size_t)S);
      for (int x = 0; x < S; ++x) {
        const double px = pt.p[(size_t)x];
        if (px <= 0.0) continue;
        for (int dest = 0; dest < S; ++dest) ratios[(size_t)dest] = pt.p[(size_t)dest] / px;
        ratios[(size_t)x] = 1.0;
        tweedie_denoise(spec, sb - sb_prev, ratios, x, out);
        for (int dest = 0; dest < S; ++dest) mix[(size_t)dest] += px * out[(size_t)dest];
      }
      worst = std::max(worst, tv(mix, prev.p));
    }
  }
  std::printf("  worst reconstruction tv %.3e\n", worst);
  ACC(crit, worst <= kTol);
  crit.finish(5.0);
}

// 6. With exact scores the factorized Tweedie step matches the true reverse
//    marginals and beats the Euler step in KL to the true reverse.
TEST_CASE("criterion 6: factorized optimality") {
  Crit crit{6, "factorized optimality"};
  constexpr double kMargTol = 1e-9;
  constexpr double kKlSlack = 1e-12;

  TransitionSpec spec = TransitionSpec::uniform(4);
  const int d = 2, S = 4, states = 16;
  NoiseSchedule sched = NoiseSchedule::geometric(0.05, 6.0, 1e-3);
  Rng rng(77);
  EnumeratedDist p0 = random_full_support(d, S, rng);
  ExactScoreModel exact(p0, spec);

  double worst_marg = 0.0, worst_order = -1e9;
  for (double t : {0.9, 0.7, 0.5, 0.3, 0.15}) {
    const double sbt = sched.sigma_bar(t);
    const double sigma_t = sched.sigma(t);
    EnumeratedDist pt = evolve(p0, spec, sbt);
    for (double dt : {0.1, 0.05, 0.01}) {
      const double sbs = sched.sigma_bar(t - dt);
      const double sb_delta = sbt - sbs;
      EnumeratedDist ps = evolve(p0, spec, sbs);

      std::vector<int> xt(d), xs(d);
      for (size_t xi = 0; xi < (size_t)states; ++xi) {
        if (pt.p[xi] <= 1e-14) continue;
        decode_sequence(xi, S, xt);
        ScoreEval ev = exact.eval(xt, sbt);

        // exhaustive reverse posterior over the previous state
        std::vector<double> post((size_t)states, 0.0);
        double z = 0.0;
        for (size_t si = 0; si < (size_t)states; ++si) {
          decode_sequence(si, S, xs);
          double k = ps.p[si];
          for (int pos = 0; pos < d; ++pos)
            k *= spec.transition_prob(sb_delta, xt[(size_t)pos], xs[(size_t)pos]);
          post[si] = k;
          z += k;
        }
        for (double& v : post) v /= z;

        std::vector<std::vector<double>> tw(2), eu(2);
        for (int pos = 0; pos < d; ++pos) {
          tw[(size_t)pos].assign((size_t)S, 0.0);
          eu[(size_t)pos].assign((size_t)S, 0.0);
          tweedie_position_dist(ev, spec, sb_delta, pos, tw[(size_t)pos]);
          euler_position_dist(ev, spec, sigma_t, dt, pos, eu[(size_t)pos]);

          // true reverse marginal of this position
          std::vector<double> marg((size_t)S, 0.0);
          for (size_t si = 0; si < (size_t)states; ++si) {
            decode_sequence(si, S, xs);
            marg[(size_t)xs[(size_t)pos]] += post[si];
          }
          for (int c = 0; c < S; ++c)
            worst_marg =
                std::max(worst_marg, std::fabs(marg[(size_t)c] - tw[(size_t)pos][(size_t)c]));
        }

        std::vector<double> prod_tw((size_t)states), prod_eu((size_t)states);
        for (size_t si = 0; si < (size_t)states; ++si) {
          decode_sequence(si, S, xs);
          prod_tw[si] = tw[0][(size_t)xs[0]] * tw[1][(size_t)xs[1]];
          prod_eu[si] = eu[0][(size_t)xs[0]] * eu[1][(size_t)xs[1]];
        }
        const double kl_tw = kl(post, prod_tw);
        const double kl_eu = kl(post, prod_eu);
        // factorized-KL optimality: tweedie is the best product approximation
        worst_order = std::max(worst_order, kl_tw - kl_eu);
      }
    }
  }
  std::printf("  worst marginal gap %.3e, worst KL ordering margin %.3e\n", worst_marg,
              worst_order);
  ACC(crit, worst_marg <= kMargTol);
  ACC(crit, worst_order <= kKlSlack);
  crit.finish(30.0);
}

// 7. The likelihood bound really bounds the exact reverse-process NLL.
TEST_CASE("criterion 7: elbo validity") {
  Crit crit{7, "elbo validity"};
  constexpr int kMcSamples = 2000;
  constexpr double kExactGapTol = 0.05;

  TransitionSpec spec = TransitionSpec::absorbing(4);
  NoiseSchedule sched = NoiseSchedule::geometric(0.005, 12.0, 1e-3);
  IidSpec ispec = iid_spec(4, 3, 77);
  Corpus corpus = gen_iid(ispec, 512, 78);

  ModelConfig mc;
  mc.backend = "mlp";
  mc.embed = 8;
  mc.hidden = 24;
  mc.noise_features = 6;
  std::unique_ptr<ScoreModel> model = make_model(mc, 3, spec);
  TrainConfig tc;
  tc.steps = 1000;
  tc.batch_size = 64;
  tc.lr = 5e-3;
  tc.val_every = 0;
  TrainResult res = train(*model, spec, sched, corpus, tc, nullptr);
  std::copy(res.ema.begin(), res.ema.end(), model->params().begin());

  ReverseSolveResult sol = exact_reverse_solve(*model, spec, sched, 600);
  for (int i = 0; i < 4; ++i) {
    std::span<const int> x0 = corpus.sequences[(size_t)(i * 7)];
    const double nll = -std::log(sol.dist.at(x0));
    Rng r((uint64_t)(900 + i));
    NllBound b = nll_bound(*model, spec, sched, x0, kMcSamples, r);
    std::printf("  trained: nll %.4f vs bound %.4f + 3*%.4f\n", nll, b.bound,
                b.integral_std_err);
    ACC(crit, nll <= b.bound + 3.0 * b.integral_std_err);
  }

  ExactScoreModel exact(iid_ground_truth(ispec), spec);
  ReverseSolveResult sol2 = exact_reverse_solve(exact, spec, sched, 600);
  for (int i = 0; i < 4; ++i) {
    std::span<const int> x0 = corpus.sequences[(size_t)(i * 7)];
    const double nll = -std::log(sol2.dist.at(x0));
    Rng r((uint64_t)(800 + i));
    NllBound b = nll_bound(exact, spec, sched, x0, kMcSamples, r);
    ACC(crit, nll <= b.bound + 3.0 * b.integral_std_err);
    // tightness, free of MC noise: quadrature bound within 0.05 nats of the NLL
    const double quad =
        dwdse_integral_exact(exact, spec, sched, x0, 256) + prior_kl(spec, sched, x0);
    std::printf("  exact: nll %.4f, mc bound %.4f (se %.4f), quad bound %.4f, gap %.4f\n", nll,
                b.bound, b.integral_std_err, quad, quad - nll);
    ACC(crit, std::fabs(quad - nll) <= kExactGapTol);
  }
  crit.finish(120.0);
}

namespace {

// Adam on a fixed quadrature of the time-integrated denoising objective:
// deterministic training that fits scores at every level the sampler visits.
void train_multilevel(ScoreModel& model, const EnumeratedDist& p0, const TransitionSpec& spec,
                      const NoiseSchedule& sched, int steps) {
  const int L = 16;
  std::vector<double> levels((size_t)L), wts((size_t)L);
  const double tmin = sched.t_min();
  for (int j = 0; j < L; ++j) {
    const double t = tmin + (1.0 - tmin) * (j + 0.5) / L;
    levels[(size_t)j] = sched.sigma_bar(t);
    wts[(size_t)j] = sched.sigma(t) * (1.0 - tmin) / L;
  }
  AdamState adam(model.num_params());
  std::vector<double> grad(model.num_params());
  for (int step = 0; step < steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int j = 0; j < L; ++j)
      expected_dse_with_grad(model, p0, spec, levels[(size_t)j], wts[(size_t)j], grad);
    const double lr = 3e-3 * std::pow(0.1, step / double(steps));
    adam_step(model.params(), grad, adam, lr);
  }
}

}  // namespace

// 8. Trained models sample the data distribution, both process kinds.
TEST_CASE("criterion 8: end-to-end sampling") {
  Crit crit{8, "end-to-end sampling"};
  constexpr double kTvTol = 0.05;
  constexpr int kSteps = 256;
  constexpr int kSamples = 4096;

  for (int kind = 0; kind < 2; ++kind) {
    const bool absorbing = kind == 1;
    TransitionSpec spec =
        absorbing ? TransitionSpec::absorbing(8) : TransitionSpec::uniform(8);
    NoiseSchedule sched = NoiseSchedule::geometric(0.01, 8.0, 1e-3);
    IidSpec ispec = iid_spec(8, 1, absorbing ? 302 : 301);
    EnumeratedDist p0 = iid_ground_truth(ispec);

    MlpDims dims{8, 32, 8};
    std::unique_ptr<ScoreModel> model;
    if (absorbing)
      model = std::make_unique<MeanMlpScore>(1, spec, dims, 5);
    else
      model = std::make_unique<MlpScore>(1, spec, dims, 5);
    train_multilevel(*model, p0, spec, sched, 1200);

    SamplerConfig sc;
    sc.method = SampleMethod::kTweedie;
    sc.steps = kSteps;
    Rng r(42);
    SampleResult out = sample(*model, spec, sched, sc, kSamples, r);
    EnumeratedDist emp = empirical_from_samples(out.sequences, 1, spec.num_states());
    const double d_tv = tv(emp, embed_clean(p0, spec));
    std::printf("  %s: tv %.4f (clipped %.2e)\n", absorbing ? "absorbing" : "uniform", d_tv,
                out.clipped_mass);
    ACC(crit, d_tv <= kTvTol);
  }
  crit.finish(120.0);
}

// 9. Conditional sampling matches the exhaustive Bayes posterior.
TEST_CASE("criterion 9: infilling") {
  Crit crit{9, "infilling"};
  constexpr double kTvTol = 0.05;
  constexpr int kSamples = 4096;

  TransitionSpec spec = TransitionSpec::absorbing(4);
  NoiseSchedule sched = NoiseSchedule::geometric(0.005, 10.0, 1e-3);
  Rng prng(31);
  EnumeratedDist p0(3, 4);
  for (auto& v : p0.p) v = std::exp(1.2 * prng.normal());
  p0.normalize();
  ExactScoreModel exact(p0, spec);

  SamplerConfig sc;
  sc.method = SampleMethod::kTweedie;
  sc.steps = 256;

  struct Pattern {
    const char* name;
    int pos;
  };
  for (Pattern pat : {Pattern{"prefix", 0}, Pattern{"middle", 1}, Pattern{"suffix", 2}}) {
    std::vector<double> marg = axis_marginal(p0, pat.pos);
    const int tok = (int)(std::max_element(marg.begin(), marg.end()) - marg.begin());
    PromptSpec prompt;
    prompt.pinned = {{pat.pos, tok}};
    Rng r((uint64_t)(1000 + pat.pos));
    SampleResult out = infill(exact, spec, sched, sc, prompt, kSamples, r);

    std::vector<int> free_pos;
    for (int i = 0; i < 3; ++i)
      if (i != pat.pos) free_pos.push_back(i);

    EnumeratedDist emp(2, 4);
    for (const auto& s : out.sequences) {
      std::vector<int> key{s[(size_t)free_pos[0]], s[(size_t)free_pos[1]]};
      emp.at(key) += 1.0 / kSamples;
    }
    EnumeratedDist post(2, 4);
    std::vector<int> seq(3);
    for (size_t idx = 0; idx < p0.size(); ++idx) {
      decode_sequence(idx, 4, seq);
      if (seq[(size_t)pat.pos] != tok) continue;
      std::vector<int> key{seq[(size_t)free_pos[0]], seq[(size_t)free_pos[1]]};
      post.at(key) += p0.p[idx];
    }
    post.normalize();
    const double d_tv = tv(emp, post);
    std::printf("  %s (pin %d=%d): tv %.4f\n", pat.name, pat.pos, tok, d_tv);
    ACC(crit, d_tv <= kTvTol);
  }
  crit.finish(120.0);
}

// 10. The mean-parameterization bridge, plus the directional ablation.
TEST_CASE("criterion 10: mean parameterization bridge") {
  Crit crit{10, "mean parameterization bridge"};
  constexpr double kBridgeTol = 1e-9;

  // bridge equality on single-token toys, both kinds, restricted to edits the
  // forward process carries (nothing consumes the rest)
  Rng rng(808);
  double worst = 0.0;
  for (int kind = 0; kind < 2; ++kind) {
    for (int n : {4, 7}) {
      TransitionSpec spec =
          kind == 0 ? TransitionSpec::uniform(n) : TransitionSpec::absorbing(n);
      const int S = spec.num_states();
      EnumeratedDist p0 = random_full_support(1, spec.vocab(), rng);
      ExactPosteriorMeanModel mean(p0, spec);
      for (double sb : {0.3, 1.0}) {
        EnumeratedDist pt = evolve(embed_clean(p0, spec), spec, sb);
        for (int x = 0; x < S; ++x) {
          if (pt.p[(size_t)x] <= 0.0) continue;
          std::vector<int> seq{x};
          ScoreEval bridged = score_from_mean(mean, spec, sb, seq);
          ScoreEval direct = exact_concrete_score(pt, spec, sb, seq);
          for (int dest = 0; dest < S; ++dest) {
            if (dest == x || spec.rate(x, dest) <= 0.0) continue;
            if (bridged.is_excluded(0, dest) != direct.is_excluded(0, dest)) {
              worst = 1.0;
              continue;
            }
            if (bridged.is_excluded(0, dest)) continue;
            worst = std::max(worst, std::fabs(bridged.score(0, dest) - direct.score(0, dest)));
          }
        }
      }
    }
  }
  std::printf("  bridge worst gap %.3e\n", worst);
  ACC(crit, worst <= kBridgeTol);

  // ablation smoke: the free-form score net ends below the mean-parameterized
  // one on held-out bound in a capacity-limited, converged regime
  TransitionSpec spec = TransitionSpec::absorbing(8);
  NoiseSchedule sched = NoiseSchedule::geometric(0.01, 10.0, 1e-3);
  IidSpec ispec = iid_spec(8, 6, 55);
  Corpus trainc = gen_iid(ispec, 512, 5);
  Corpus heldc = gen_iid(ispec, 128, 9999);
  MlpDims dims{4, 8, 4};
  double bounds[2];
  for (int which = 0; which < 2; ++which) {
    std::unique_ptr<ScoreModel> model;
    if (which == 0)
      model = std::make_unique<MlpScore>(6, spec, dims, 2);
    else
      model = std::make_unique<MeanMlpScore>(6, spec, dims, 2);
    TrainConfig tc;
    tc.steps = 4000;
    tc.batch_size = 64;
    tc.lr = 5e-3;
    tc.seed = 2;
    tc.val_every = 0;
    TrainResult res = train(*model, spec, sched, trainc, tc, nullptr);
    std::copy(res.ema.begin(), res.ema.end(), model->params().begin());
    Rng r(1234);
    EvalReport rep = corpus_eval(*model, spec, sched, heldc, 256, r);
    bounds[which] = rep.avg_bound;
  }
  std::printf("  held-out bound: score %.4f vs mean %.4f\n", bounds[0], bounds[1]);
  ACC(crit, bounds[0] < bounds[1]);
  crit.finish(0.0);
}

namespace {

int run_cmd(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the wall-clock field, the one intentionally nondeterministic output.
std::string strip_wall(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    const size_t pos = line.find(",\"wall_ms\"");
    out += line.substr(0, pos) + "\n";
  }
  return out;
}

}  // namespace

// 11. Fixed seeds reproduce every subcommand bitwise; checkpoints round-trip.
TEST_CASE("criterion 11: reproducibility") {
  Crit crit{11, "reproducibility"};
  namespace fs = std::filesystem;
  const std::string cli = SEDD_CLI_PATH;
  const fs::path base = fs::temp_directory_path() / "sedd_acceptance_cli";
  fs::remove_all(base);
  fs::create_directories(base);

  const fs::path cfg_path = base / "config.json";
  const fs::path run_dir = base / "run";
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({
  "seq_len": 3,
  "output_dir": ")" << run_dir.string() << R"(",
  "process": {"kind": "absorbing", "n": 4},
  "schedule": {"kind": "geometric", "sigma_min": 0.01, "sigma_max": 8.0},
  "model": {"backend": "mlp", "embed": 4, "hidden": 8, "noise_features": 4},
  "training": {"steps": 30, "batch_size": 8, "lr": 0.005, "val_every": 10, "seed": 5},
  "sampling": {"steps": 8, "num_samples": 4, "seed": 2},
  "corpus": {"kind": "iid", "count": 32, "seed": 3}
})";
  }

  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };

  // train twice into the same directory, stashing the first run's artifacts
  ACC(crit, run_cmd(cli + " train --config " + q(cfg_path) + " > " + q(base / "train1.out") +
                    " 2> " + q(base / "train1.err")) == 0);
  const fs::path stash = base / "run_first";
  fs::rename(run_dir, stash);
  ACC(crit, run_cmd(cli + " train --config " + q(cfg_path) + " > " + q(base / "train2.out") +
                    " 2> " + q(base / "train2.err")) == 0);

  const std::string ckpt1 = slurp(stash / "checkpoint.bin");
  const std::string ckpt2 = slurp(run_dir / "checkpoint.bin");
  ACC(crit, !ckpt1.empty());
  ACC(crit, ckpt1 == ckpt2);
  ACC(crit, slurp(stash / "config.json") == slurp(run_dir / "config.json"));
  ACC(crit, strip_wall(slurp(stash / "metrics.jsonl")) ==
                strip_wall(slurp(run_dir / "metrics.jsonl")));

  // checkpoint bytes survive a parse/serialize round trip exactly
  Checkpoint cp = parse_checkpoint(ckpt1);
  ACC(crit, serialize_checkpoint(cp) == ckpt1);

  const std::string ckpt_arg = q(run_dir / "checkpoint.bin");
  struct Sub {
    const char* label;
    std::string args;
  };
  const Sub subs[] = {
      {"sample", " sample " + ckpt_arg + " --num-samples 6 --seed 9 --steps 16"},
      {"infill", " infill " + ckpt_arg + " --prompt 0:1,2:3 --num-samples 6 --seed 11"},
      {"eval", " eval " + ckpt_arg + " --samples 8 --seed 4"},
      {"verify", " verify --seed 1"},
      {"landscape", " landscape --points 40"},
  };
  for (const Sub& sub : subs) {
    const fs::path o1 = base / (std::string(sub.label) + "1.out");
    const fs::path o2 = base / (std::string(sub.label) + "2.out");
    ACC(crit, run_cmd(cli + sub.args + " > " + q(o1) + " 2> /dev/null") == 0);
    ACC(crit, run_cmd(cli + sub.args + " > " + q(o2) + " 2> /dev/null") == 0);
    const std::string a = slurp(o1);
    ACC(crit, !a.empty());
    if (a != slurp(o2)) {
      std::printf("  %s differs between identical runs\n", sub.label);
      ACC(crit, false);
    }
  }
  crit.finish(0.0);
}
