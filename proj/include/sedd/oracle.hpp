#pragma once

#include <functional>
#include <map>
#include <span>
#include <vector>

#include "sedd/enumerated.hpp"
#include "sedd/matrix.hpp"
#include "sedd/process.hpp"
#include "sedd/scores.hpp"

namespace sedd {

// Brute-force reference machinery over enumerable sequence spaces. Everything
// here trades speed for being independently checkable: dense matrices, full
// enumeration, no shared code paths with the factorized implementations they
// are used to validate.

// Dense exponentials and sequence-level generators are capped much lower than
// the enumeration limit; S^d beyond this is not worth a dense matrix.
inline constexpr int kMaxDenseDim = 4096;

// Token-level generator as a dense S x S matrix, entry (dest, src).
Matrix dense_rate_matrix(const TransitionSpec& spec);

// Sequence-level generator on S^d states: sum over positions of the token
// generator acting on that axis. Entry (dest, src) with mixed-radix indexing.
Matrix dense_sequence_generator(const TransitionSpec& spec, int d);

// exp(m) by scaling-and-squaring with a fixed-order Taylor kernel.
Matrix dense_expm(const Matrix& m);

// Push a sequence distribution through the token kernel exp(sigma_bar * Q)
// independently on every axis. With inverse=true applies exp(-sigma_bar * Q).
EnumeratedDist evolve(const EnumeratedDist& dist, const TransitionSpec& spec, double sigma_bar,
                      bool inverse = false);

// Embed a distribution over clean vocab sequences into the full state space
// (identity when they already match).
EnumeratedDist embed_clean(const EnumeratedDist& p0, const TransitionSpec& spec);

// Marginal of one position.
std::vector<double> axis_marginal(const EnumeratedDist& dist, int pos);

EnumeratedDist empirical_from_samples(const std::vector<std::vector<int>>& samples, int d, int S);

// True concrete score of `dist` at `seq`: ratios p(y)/p(x) over all single
// position edits y. Zero-probability destinations are excluded; absorbing
// exclusions applied so the result matches what models expose. Throws
// UndefinedScoreError when p(x) itself is zero.
ScoreEval exact_concrete_score(const EnumeratedDist& dist, const TransitionSpec& spec,
                               double sigma_bar, std::span<const int> seq);

// Total variation distance and KL divergence. kl() returns +infinity when a
// puts mass where b has none.
double tv(std::span<const double> a, std::span<const double> b);
double kl(std::span<const double> a, std::span<const double> b);
double tv(const EnumeratedDist& a, const EnumeratedDist& b);
double kl(const EnumeratedDist& a, const EnumeratedDist& b);

// Central finite differences of f at params.
std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& f,
                                           std::span<const double> params, double eps);

// Score model whose outputs are the true ratios of the forward marginals of a
// known data distribution. The marginal at each requested noise level is
// computed once and cached. Not thread safe.
class ExactScoreModel final : public ScoreModel {
 public:
  ExactScoreModel(EnumeratedDist p0, const TransitionSpec& spec);

  int seq_len() const override { return p0_.d; }
  int num_states() const override { return spec_.num_states(); }
  TransitionKind kind() const override { return spec_.kind(); }
  ScoreEval eval(std::span<const int> seq, double sigma_bar) const override;

  const EnumeratedDist& marginal(double sigma_bar) const;

 private:
  EnumeratedDist p0_;  // embedded into the full state space
  TransitionSpec spec_;
  mutable std::map<double, EnumeratedDist> cache_;
};

// True denoising posterior p(x0_pos = c | x_t) of a known data distribution
// under the token-factorized forward kernel.
class ExactPosteriorMeanModel final : public MeanModel {
 public:
  ExactPosteriorMeanModel(EnumeratedDist p0, const TransitionSpec& spec);

  int seq_len() const override { return p0_.d; }
  int vocab() const override { return spec_.vocab(); }
  void posterior(std::span<const int> seq, double sigma_bar, int pos,
                 std::span<double> out) const override;

 private:
  EnumeratedDist p0_;  // over clean vocab sequences
  TransitionSpec spec_;
};

// Where the reverse process starts at t = 1: the uniform product for the
// uniform kernel, the fully masked point mass for the absorbing kernel. The
// samplers initialize from the same distribution.
EnumeratedDist reverse_start_dist(const TransitionSpec& spec, int d);

struct ReverseSolveResult {
  EnumeratedDist dist;
  double clipped_mass = 0.0;  // total negative mass removed across steps
  int steps = 0;
};

// Integrate the model-induced reverse ODE dp/dtau = Qbar(t) p from t = 1 down
// to schedule.t_min() with fixed-step RK4 on the full enumerated state space.
// Qbar columns are only evaluated at states carrying mass, so the model is
// never queried where its scores are undefined. Small negative entries from
// integration error are clipped and tallied; past -1e-8 the run aborts with
// InstabilityError.
ReverseSolveResult exact_reverse_solve(const ScoreModel& model, const TransitionSpec& spec,
                                       const NoiseSchedule& schedule, int num_steps);

}  // namespace sedd
