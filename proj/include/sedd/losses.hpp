#pragma once

#include <functional>
#include <span>

#include "sedd/enumerated.hpp"
#include "sedd/process.hpp"
#include "sedd/rng.hpp"
#include "sedd/scores.hpp"

namespace sedd {

// K(a) = a (log a - 1), extended by K(0) = 0. Chosen so each score entropy
// term vanishes exactly at s = a.
double k_const(double a);

// w * (s - a log s + K(a)). Convex in s with minimum 0 at s = a. s = 0 is
// allowed only with a = 0 (term 0); with a > 0 it diverges to +infinity.
double se_term(double s, double a, double w);
double se_term_from_log(double log_s, double a, double w);

// w * (s - a)^2 / 2: the naive score matching objective, kept as a foil.
double csm_term(double s, double a, double w);

// Weight on the (pos, dest) edit of a given state. All losses below share
// this shape so their equivalence-up-to-constants can be exercised with one
// weight choice.
using WeightFn = std::function<double(std::span<const int> seq, int pos, int dest)>;

WeightFn unit_weights();

// sigma * rate(seq[pos] <- dest): the forward-generator weight of the
// denoising bound. Zero wherever the edit cannot occur under the process.
WeightFn forward_rate_weights(const TransitionSpec& spec, double sigma);

// Single-state sums over all off-self edits. True ratios come from exact_ev
// (excluded entries mean ratio zero); model entries that are excluded count
// as score zero.
double score_entropy(const ScoreEval& model_ev, const ScoreEval& exact_ev, const WeightFn& w);
double concrete_score_matching(const ScoreEval& model_ev, const ScoreEval& exact_ev,
                               const WeightFn& w);

// Implicit form: no true ratios, but the model is queried at every neighbor.
// ISE(x) = sum_y [w(x->y) s(x)_y - w(y->x) log s(y)_x].
double implicit_score_entropy(const ScoreModel& model, std::span<const int> seq,
                              double sigma_bar, const WeightFn& w);

// Denoising form at one (x0, x_t) pair: ratios replaced by the conditional
// kernel ratios, which are available in closed form.
double denoising_score_entropy(const ScoreEval& model_ev, const TransitionSpec& spec,
                               double sigma_bar, std::span<const int> x0, const WeightFn& w);

// Full-enumeration expectations of the three objectives at one noise level.
// p0 is the clean-data distribution (vocab alphabet); pt its forward marginal
// on the full state space. These agree up to theta-independent constants.
double expected_score_entropy(const ScoreModel& model, const EnumeratedDist& pt,
                              const TransitionSpec& spec, double sigma_bar, const WeightFn& w);
double expected_implicit_score_entropy(const ScoreModel& model, const EnumeratedDist& pt,
                                       double sigma_bar, const WeightFn& w);
double expected_denoising_score_entropy(const ScoreModel& model, const EnumeratedDist& p0,
                                        const TransitionSpec& spec, double sigma_bar,
                                        const WeightFn& w);

struct McEstimate {
  double value = 0.0;
  double std_err = 0.0;
  int samples = 0;
};

// Monte Carlo estimate of the time-integrated denoising bound term for one
// data sequence: t ~ U[t_min, 1], x_t ~ kernel, integrand weighted by the
// forward generator at t, scaled by (1 - t_min).
McEstimate dwdse_bound_integral(const ScoreModel& model, const TransitionSpec& spec,
                                const NoiseSchedule& schedule, std::span<const int> x0,
                                int num_samples, Rng& rng);

// Same integral by composite Simpson quadrature with the inner expectation
// over x_t enumerated exactly. Oracle-grade; cost scales with S^d.
double dwdse_integral_exact(const ScoreModel& model, const TransitionSpec& spec,
                            const NoiseSchedule& schedule, std::span<const int> x0,
                            int quad_intervals);

// One stochastic training draw: sample (t, x_t), return the scaled integrand,
// and when grad is nonempty accumulate its parameter gradient via the model.
double dwdse_sample(const ScoreModel& model, const TransitionSpec& spec,
                    const NoiseSchedule& schedule, std::span<const int> x0, Rng& rng,
                    std::span<double> grad);

// Fixed-noise-level counterpart: x_t ~ kernel(sigma_bar), forward-rate
// weights with multiplier sigma_weight, no time scaling.
double dse_fixed_sample(const ScoreModel& model, const TransitionSpec& spec, double sigma_bar,
                        double sigma_weight, std::span<const int> x0, Rng& rng,
                        std::span<double> grad);

// Exact loss and gradient of the fixed-level denoising objective under a
// clean-data distribution: every (x0, x_t) pair enumerated. Training on this
// removes all sampling noise from the optimization signal.
double expected_dse_with_grad(const ScoreModel& model, const EnumeratedDist& p0,
                              const TransitionSpec& spec, double sigma_bar, double sigma_weight,
                              std::span<double> grad);

// KL between the fully noised conditional p_{t=1|0}(.|x0) and the stationary
// token distribution, summed over positions. Both sides factorize.
double prior_kl(const TransitionSpec& spec, const NoiseSchedule& schedule,
                std::span<const int> x0);

}  // namespace sedd
