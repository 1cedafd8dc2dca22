#include <cmath>
#include <vector>

#include "doctest.h"
#include "sedd/errors.hpp"
#include "sedd/oracle.hpp"
#include "sedd/process.hpp"
#include "sedd/rng.hpp"
#include "sedd/scores.hpp"

using namespace sedd;

TEST_CASE("ScoreEval pins self, stores ratios, guards exclusions") {
  std::vector<int> seq{1, 0};
  ScoreEval ev(seq, 3, 0.5);
  CHECK(ev.log_score(0, 1) == doctest::Approx(0.0));  // self starts at log 1
  ev.set_log_score(0, 2, std::log(2.0));
  CHECK(ev.score(0, 2) == doctest::Approx(2.0).epsilon(1e-14));

  CHECK_THROWS_AS(ev.set_log_score(0, 1, 5.0), ArgumentError);  // self entry is pinned
  CHECK(ev.log_score(0, 1) == doctest::Approx(0.0));

  ev.exclude(1, 2);
  CHECK(ev.is_excluded(1, 2));
  CHECK_THROWS_AS(ev.log_score(1, 2), ArgumentError);
  CHECK_THROWS_AS(ev.exclude(1, 0), ArgumentError);  // self cannot be excluded
  CHECK_THROWS_AS(ev.set_log_score(0, 0, std::nan("")), ArgumentError);
}

TEST_CASE("score_column carries self 1 and excluded 0") {
  std::vector<int> seq{2};
  ScoreEval ev(seq, 3, 0.1);
  ev.set_log_score(0, 0, std::log(0.25));
  ev.exclude(0, 1);
  std::vector<double> col = ev.score_column(0);
  CHECK(col[0] == doctest::Approx(0.25));
  CHECK(col[1] == doctest::Approx(0.0));
  CHECK(col[2] == doctest::Approx(1.0));
}

TEST_CASE("absorbing exclusion pattern") {
  std::vector<int> seq{0, 3, 1};  // position 1 is MASK for n=3
  ScoreEval ev(seq, 4, 0.2);
  ev.apply_absorbing_exclusions(3);
  CHECK(ev.is_excluded(0, 3));
  CHECK(ev.is_excluded(2, 3));
  CHECK(!ev.is_excluded(1, 0));  // masked position can move to tokens
}

TEST_CASE("tabular score stores per-sequence log scores") {
  TransitionSpec spec = TransitionSpec::uniform(3);
  TabularScore model(2, spec);
  CHECK(model.num_params() == 9 * 2 * 3);
  for (double v : model.params()) CHECK(v == 0.0);  // fresh table scores all 1

  std::vector<int> seq{1, 2};
  ScoreEval ev = model.eval(seq, 0.7);
  CHECK(ev.score(0, 0) == doctest::Approx(1.0));

  // flat parameter layout: [seq_index][pos][dest]
  size_t idx = (1 * 3 + 2) * size_t{2 * 3} + size_t{0 * 3 + 0};
  model.params()[idx] = std::log(3.0);
  CHECK(model.eval(seq, 0.7).score(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("tabular backprop adds upstream into the table slice") {
  TransitionSpec spec = TransitionSpec::uniform(2);
  TabularScore model(1, spec);
  std::vector<int> seq{0};
  std::vector<double> upstream{0.5, 0.25};  // self entry ignored
  std::vector<double> grad(model.num_params(), 0.0);
  model.backprop(seq, 0.3, upstream, grad);
  // sequence "0" occupies slice [0*2 .. 0*2+1]
  CHECK(grad[0] == doctest::Approx(0.0));  // self
  CHECK(grad[1] == doctest::Approx(0.25));
  CHECK(grad[2] == doctest::Approx(0.0));
  CHECK(grad[3] == doctest::Approx(0.0));
}

TEST_CASE("fresh mlp scores everything at exactly 1") {
  for (const TransitionSpec& spec :
       {TransitionSpec::uniform(4), TransitionSpec::absorbing(3, 1.0)}) {
    MlpScore model(3, spec, MlpDims{6, 12, 4}, 99);
    std::vector<int> seq{0, 1, 2};
    ScoreEval ev = model.eval(seq, 0.8);
    for (int pos = 0; pos < 3; ++pos)
      for (int dest = 0; dest < spec.num_states(); ++dest)
        if (!ev.is_excluded(pos, dest)) CHECK(ev.log_score(pos, dest) == doctest::Approx(0.0));
  }
}

TEST_CASE("mlp output depends on the noise level and the sequence") {
  TransitionSpec spec = TransitionSpec::uniform(3);
  MlpScore model(2, spec, MlpDims{4, 8, 4}, 7);
  Rng rng(5);
  for (double& v : model.params()) v += 0.2 * rng.normal();

  std::vector<int> a{0, 1}, b{1, 1};
  double s1 = model.eval(a, 0.3).log_score(0, 2);
  double s2 = model.eval(a, 2.1).log_score(0, 2);
  double s3 = model.eval(b, 0.3).log_score(0, 2);
  CHECK(s1 != doctest::Approx(s2));
  CHECK(s1 != doctest::Approx(s3));
}

// Backprop contract: upstream is d(loss)/d(log s). Check against finite
// differences of a linear functional of the log scores.
TEST_CASE("mlp backprop matches finite differences of log scores") {
  TransitionSpec spec = TransitionSpec::uniform(3);
  MlpScore model(2, spec, MlpDims{4, 8, 4}, 13);
  Rng rng(6);
  for (double& v : model.params()) v += 0.3 * rng.normal();

  std::vector<int> seq{2, 0};
  const int S = spec.num_states();
  std::vector<double> upstream(static_cast<size_t>(2 * S));
  for (double& u : upstream) u = rng.normal();

  std::vector<double> grad(model.num_params(), 0.0);
  model.backprop(seq, 0.9, upstream, grad);

  std::vector<double> base(model.params().begin(), model.params().end());
  auto loss = [&](std::span<const double> p) {
    std::copy(p.begin(), p.end(), model.params().begin());
    ScoreEval ev = model.eval(seq, 0.9);
    double acc = 0.0;
    for (int pos = 0; pos < 2; ++pos)
      for (int dest = 0; dest < S; ++dest) {
        if (dest == seq[static_cast<size_t>(pos)] || ev.is_excluded(pos, dest)) continue;
        acc += upstream[static_cast<size_t>(pos * S + dest)] * ev.log_score(pos, dest);
      }
    return acc;
  };
  std::vector<double> fd = finite_difference_grad(loss, base, 1e-6);
  std::copy(base.begin(), base.end(), model.params().begin());

  double diff2 = 0, norm2 = 0;
  for (size_t i = 0; i < grad.size(); ++i) {
    diff2 += (fd[i] - grad[i]) * (fd[i] - grad[i]);
    norm2 += grad[i] * grad[i];
  }
  CHECK(std::sqrt(diff2) <= 1e-6 * std::max(std::sqrt(norm2), 1.0));
}

TEST_CASE("noise features are bounded and distinguish noise levels") {
  std::vector<double> a(6), b(6);
  noise_features(0.1, a);
  noise_features(2.0, b);
  bool differ = false;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i]) <= 1.0 + 1e-12);
    differ = differ || a[i] != b[i];
  }
  CHECK(differ);
}

TEST_CASE("score_from_mean closed form on the absorbing kernel") {
  TransitionSpec spec = TransitionSpec::absorbing(2, 1.0);
  EnumeratedDist p0(1, 2);
  p0.p = {0.25, 0.75};
  ExactPosteriorMeanModel mean(p0, spec);

  double sb = 0.6;
  std::vector<int> masked{2};
  ScoreEval ev = score_from_mean(mean, spec, sb, masked);
  // s(dest) = q(dest) * exp(-sb) / (1 - exp(-sb)) for a masked position
  double factor = std::exp(-sb) / (1 - std::exp(-sb));
  CHECK(ev.score(0, 0) == doctest::Approx(0.25 * factor).epsilon(1e-12));
  CHECK(ev.score(0, 1) == doctest::Approx(0.75 * factor).epsilon(1e-12));

  std::vector<int> clean{1};
  ScoreEval ev2 = score_from_mean(mean, spec, sb, clean);
  CHECK(ev2.is_excluded(0, 0));
  CHECK(ev2.is_excluded(0, 2));
}

TEST_CASE("mean mlp starts at the uniform posterior and excludes the impossible") {
  TransitionSpec spec = TransitionSpec::absorbing(3, 1.0);
  MeanMlpScore model(2, spec, MlpDims{4, 8, 4}, 3);

  std::vector<int> seq{3, 1};  // masked, unmasked
  std::vector<double> q(3);
  model.posterior(seq, 0.7, 0, q);
  for (double v : q) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  ScoreEval ev = model.eval(seq, 0.7);
  double factor = std::exp(-0.7) / (1 - std::exp(-0.7));
  CHECK(ev.score(0, 0) == doctest::Approx(factor / 3).epsilon(1e-10));
  CHECK(ev.is_excluded(1, 0));  // unmasked position cannot move
  CHECK(ev.is_excluded(1, 3));

  CHECK_THROWS_AS(model.eval(seq, 0.0), UndefinedScoreError);  // masked at zero noise
  CHECK_THROWS_AS(MeanMlpScore(2, TransitionSpec::uniform(3), MlpDims{4, 8, 4}, 3),
                  ArgumentError);
}

TEST_CASE("models reject malformed sequences") {
  TransitionSpec spec = TransitionSpec::uniform(3);
  MlpScore model(2, spec, MlpDims{4, 8, 4}, 1);
  std::vector<int> short_seq{0};
  CHECK_THROWS_AS(model.eval(short_seq, 0.5), ArgumentError);
  std::vector<int> bad_tok{0, 3};
  CHECK_THROWS_AS(model.eval(bad_tok, 0.5), ArgumentError);
}
