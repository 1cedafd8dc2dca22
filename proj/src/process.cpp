#include "sedd/process.hpp"

#include <cmath>
#include <string>

#include "sedd/errors.hpp"

namespace sedd {

TransitionSpec::TransitionSpec(TransitionKind kind, int n, double scale, double leak_eta)
    : kind_(kind), n_(n), scale_(scale), leak_eta_(leak_eta) {
  if (n < 2) throw ArgumentError("transition spec needs at least 2 tokens");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ArgumentError("scale must be positive");
  if (!(leak_eta >= 0.0) || leak_eta >= 1.0) throw ArgumentError("leak eta must be in [0, 1)");
}

TransitionSpec TransitionSpec::uniform(int n, double scale) {
  return TransitionSpec(TransitionKind::kUniform, n, scale, 0.0);
}

TransitionSpec TransitionSpec::absorbing(int n, double scale, double leak_eta) {
  return TransitionSpec(TransitionKind::kAbsorbing, n, scale, leak_eta);
}

void TransitionSpec::check_state(int s, const char* what) const {
  if (s < 0 || s >= num_states())
    throw ArgumentError(std::string(what) + " index " + std::to_string(s) + " out of range");
}

double TransitionSpec::rate(int dest, int src) const {
  check_state(dest, "dest");
  check_state(src, "src");
  if (kind_ == TransitionKind::kUniform) {
    return dest == src ? scale_ * (1.0 - n_) : scale_;
  }
  // Absorbing: real tokens decay into MASK; MASK emits nothing.
  const int mask = mask_state();
  if (src == mask) return 0.0;
  if (dest == src) return -scale_;
  if (dest == mask) return scale_;
  return 0.0;
}

double TransitionSpec::lambda(double sigma_bar) const {
  return kind_ == TransitionKind::kUniform ? sigma_bar * scale_ * n_ : sigma_bar * scale_;
}

double TransitionSpec::transition_prob(double sigma_bar, int dest, int src) const {
  check_state(dest, "dest");
  check_state(src, "src");
  if (!(sigma_bar >= 0.0)) throw ArgumentError("sigma_bar must be nonnegative");
  const double lam = lambda(sigma_bar);
  if (kind_ == TransitionKind::kUniform) {
    const double mix = -std::expm1(-lam);  // 1 - e^-lambda
    return (dest == src ? std::exp(-lam) : 0.0) + mix / n_;
  }
  const int mask = mask_state();
  if (src == mask) return dest == mask ? 1.0 : 0.0;
  if (dest == src) return std::exp(-lam);
  if (dest == mask) return -std::expm1(-lam);
  return 0.0;
}

void TransitionSpec::transition_column(double sigma_bar, int src, std::span<double> out) const {
  const int S = num_states();
  if (static_cast<int>(out.size()) != S) throw ArgumentError("output span size mismatch");
  for (int dest = 0; dest < S; ++dest) out[dest] = transition_prob(sigma_bar, dest, src);
}

void TransitionSpec::kernel_apply(double sigma_bar, std::span<const double> v,
                                  std::span<double> out, bool inverse) const {
  const int S = num_states();
  if (static_cast<int>(v.size()) != S || static_cast<int>(out.size()) != S)
    throw ArgumentError("kernel_apply span size mismatch");
  if (!(sigma_bar >= 0.0)) throw ArgumentError("sigma_bar must be nonnegative");
  const double lam = inverse ? -lambda(sigma_bar) : lambda(sigma_bar);
  const double self = std::exp(-lam);
  const double mix = -std::expm1(-lam);
  if (kind_ == TransitionKind::kUniform) {
    double sum = 0.0;
    for (double x : v) sum += x;
    for (int i = 0; i < S; ++i) out[i] = self * v[i] + mix * sum / n_;
    return;
  }
  const int mask = mask_state();
  double real_sum = 0.0;
  for (int i = 0; i < n_; ++i) real_sum += v[i];
  for (int i = 0; i < n_; ++i) out[i] = self * v[i];
  out[mask] = mix * real_sum + v[mask];
}

int TransitionSpec::sample_forward(double sigma_bar, int src, Rng& rng) const {
  check_state(src, "src");
  if (!(sigma_bar >= 0.0)) throw ArgumentError("sigma_bar must be nonnegative");
  const double lam = lambda(sigma_bar);
  if (kind_ == TransitionKind::kAbsorbing) {
    if (src == mask_state()) return src;
    return rng.uniform01() < std::exp(-lam) ? src : mask_state();
  }
  if (rng.uniform01() < std::exp(-lam)) return src;
  return static_cast<int>(rng.below(static_cast<uint64_t>(n_)));
}

std::vector<double> TransitionSpec::stationary() const {
  const int S = num_states();
  std::vector<double> pi(S, 0.0);
  if (kind_ == TransitionKind::kUniform) {
    for (auto& x : pi) x = 1.0 / n_;
    return pi;
  }
  for (int i = 0; i < n_; ++i) pi[i] = leak_eta_ / n_;
  pi[mask_state()] = 1.0 - leak_eta_;
  return pi;
}

NoiseSchedule NoiseSchedule::geometric(double sigma_min, double sigma_max, double t_min) {
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
    throw ArgumentError("geometric schedule needs 0 < sigma_min < sigma_max");
  if (!(t_min > 0.0) || t_min >= 1.0) throw ArgumentError("t_min must be in (0, 1)");
  NoiseSchedule s;
  s.kind_ = ScheduleKind::kGeometric;
  s.sigma_min_ = sigma_min;
  s.sigma_max_ = sigma_max;
  s.t_min_ = t_min;
  return s;
}

NoiseSchedule NoiseSchedule::log_linear(double eps, double t_min) {
  if (!(eps > 0.0) || eps >= 1.0) throw ArgumentError("log-linear eps must be in (0, 1)");
  if (!(t_min > 0.0) || t_min >= 1.0) throw ArgumentError("t_min must be in (0, 1)");
  NoiseSchedule s;
  s.kind_ = ScheduleKind::kLogLinear;
  s.eps_ = eps;
  s.t_min_ = t_min;
  return s;
}

namespace {
void check_time(double t) {
  if (!(t >= 0.0) || t > 1.0) throw ArgumentError("schedule time must be in [0, 1]");
}
}  // namespace

double NoiseSchedule::sigma_bar(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::kGeometric)
    return sigma_min_ * std::exp(t * std::log(sigma_max_ / sigma_min_));
  return -std::log1p(-(1.0 - eps_) * t);
}

double NoiseSchedule::sigma(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::kGeometric)
    return sigma_bar(t) * std::log(sigma_max_ / sigma_min_);
  return (1.0 - eps_) / (1.0 - (1.0 - eps_) * t);
}

double NoiseSchedule::time_of_sigma_bar(double sb) const {
  if (!(sb > 0.0)) throw ArgumentError("sigma_bar must be positive to invert");
  double t;
  if (kind_ == ScheduleKind::kGeometric) {
    t = std::log(sb / sigma_min_) / std::log(sigma_max_ / sigma_min_);
  } else {
    t = -std::expm1(-sb) / (1.0 - eps_);
  }
  if (t < 0.0 || t > 1.0 + 1e-12) throw ArgumentError("sigma_bar outside schedule range");
  return std::min(t, 1.0);
}

}  // namespace sedd
