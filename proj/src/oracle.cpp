#include "sedd/oracle.hpp"

#include <cmath>
#include <limits>

#include "sedd/errors.hpp"

namespace sedd {

Matrix dense_rate_matrix(const TransitionSpec& spec) {
  const int S = spec.num_states();
  Matrix q(S, S);
  for (int dest = 0; dest < S; ++dest)
    for (int src = 0; src < S; ++src) q(dest, src) = spec.rate(dest, src);
  return q;
}

Matrix dense_sequence_generator(const TransitionSpec& spec, int d) {
  const int S = spec.num_states();
  const size_t dim = pow_checked(S, d, static_cast<size_t>(kMaxDenseDim));
  Matrix g(static_cast<int>(dim), static_cast<int>(dim));
  std::vector<int> seq(static_cast<size_t>(d));
  for (size_t src = 0; src < dim; ++src) {
    decode_sequence(src, S, seq);
    double diag = 0.0;
    for (int pos = 0; pos < d; ++pos) {
      const int keep = seq[static_cast<size_t>(pos)];
      const size_t stride = dim / pow_checked(S, pos + 1, static_cast<size_t>(kMaxDenseDim));
      for (int dest = 0; dest < S; ++dest) {
        if (dest == keep) {
          diag += spec.rate(keep, keep);
          continue;
        }
        const double r = spec.rate(dest, keep);
        if (r == 0.0) continue;
        const size_t dst = src + (static_cast<size_t>(dest) - static_cast<size_t>(keep)) * stride;
        g(static_cast<int>(dst), static_cast<int>(src)) += r;
      }
    }
    g(static_cast<int>(src), static_cast<int>(src)) += diag;
  }
  return g;
}

Matrix dense_expm(const Matrix& m) {
  if (m.rows != m.cols) throw ArgumentError("dense_expm needs a square matrix");
  if (m.rows > kMaxDenseDim) throw CapacityError("matrix too large for dense_expm");
  const int n = m.rows;
  Matrix scaled = m;
  int squarings = 0;
  double norm = one_norm(m);
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const double f = std::ldexp(1.0, -squarings);
  for (double& v : scaled.a) v *= f;

  // Taylor to order 24; with one-norm <= 0.5 the truncation error is far
  // below double roundoff.
  Matrix result = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k <= 24; ++k) {
    term = matmul(term, scaled);
    const double inv = 1.0 / static_cast<double>(k);
    for (double& v : term.a) v *= inv;
    for (size_t i = 0; i < result.a.size(); ++i) result.a[i] += term.a[i];
  }
  for (int s = 0; s < squarings; ++s) result = matmul(result, result);
  return result;
}

EnumeratedDist evolve(const EnumeratedDist& dist, const TransitionSpec& spec, double sigma_bar,
                      bool inverse) {
  if (dist.S != spec.num_states()) throw ArgumentError("evolve: state count mismatch");
  EnumeratedDist out = dist;
  const int S = dist.S;
  const size_t dim = out.p.size();
  std::vector<double> fiber(static_cast<size_t>(S)), mixed(static_cast<size_t>(S));
  size_t stride = dim / static_cast<size_t>(S);  // position 0 is most significant
  for (int pos = 0; pos < dist.d; ++pos) {
    const size_t block = stride * static_cast<size_t>(S);
    for (size_t base = 0; base < dim; base += block) {
      for (size_t off = 0; off < stride; ++off) {
        const size_t lo = base + off;
        for (int k = 0; k < S; ++k) fiber[static_cast<size_t>(k)] = out.p[lo + static_cast<size_t>(k) * stride];
        spec.kernel_apply(sigma_bar, fiber, mixed, inverse);
        for (int k = 0; k < S; ++k) out.p[lo + static_cast<size_t>(k) * stride] = mixed[static_cast<size_t>(k)];
      }
    }
    stride /= static_cast<size_t>(S);
  }
  return out;
}

EnumeratedDist embed_clean(const EnumeratedDist& p0, const TransitionSpec& spec) {
  if (p0.S == spec.num_states()) return p0;
  if (p0.S != spec.vocab())
    throw ArgumentError("embed_clean: distribution alphabet matches neither vocab nor states");
  EnumeratedDist out(p0.d, spec.num_states());
  std::vector<int> seq(static_cast<size_t>(p0.d));
  for (size_t idx = 0; idx < p0.p.size(); ++idx) {
    if (p0.p[idx] == 0.0) continue;
    decode_sequence(idx, p0.S, seq);
    out.p[encode_sequence(seq, out.S)] = p0.p[idx];
  }
  return out;
}

std::vector<double> axis_marginal(const EnumeratedDist& dist, int pos) {
  if (pos < 0 || pos >= dist.d) throw ArgumentError("axis_marginal: position out of range");
  const int S = dist.S;
  std::vector<double> m(static_cast<size_t>(S), 0.0);
  size_t stride = dist.p.size() / static_cast<size_t>(S);
  for (int i = 0; i < pos; ++i) stride /= static_cast<size_t>(S);
  const size_t block = stride * static_cast<size_t>(S);
  for (size_t base = 0; base < dist.p.size(); base += block)
    for (size_t off = 0; off < stride; ++off)
      for (int k = 0; k < S; ++k)
        m[static_cast<size_t>(k)] += dist.p[base + off + static_cast<size_t>(k) * stride];
  return m;
}

EnumeratedDist empirical_from_samples(const std::vector<std::vector<int>>& samples, int d, int S) {
  if (samples.empty()) throw ArgumentError("empirical_from_samples: no samples");
  EnumeratedDist out(d, S);
  const double w = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) {
    if (static_cast<int>(s.size()) != d)
      throw ArgumentError("empirical_from_samples: sequence length mismatch");
    out.p[encode_sequence(s, S)] += w;
  }
  return out;
}

ScoreEval exact_concrete_score(const EnumeratedDist& dist, const TransitionSpec& spec,
                               double sigma_bar, std::span<const int> seq) {
  if (static_cast<int>(seq.size()) != dist.d)
    throw ArgumentError("exact_concrete_score: sequence length mismatch");
  if (dist.S != spec.num_states())
    throw ArgumentError("exact_concrete_score: state count mismatch");
  const double px = dist.at(seq);
  if (!(px > 0.0))
    throw UndefinedScoreError("concrete score undefined at a zero-probability state");
  const double log_px = std::log(px);
  ScoreEval ev(seq, dist.S, sigma_bar);
  std::vector<int> y(seq.begin(), seq.end());
  for (int pos = 0; pos < dist.d; ++pos) {
    const int keep = y[static_cast<size_t>(pos)];
    for (int dest = 0; dest < dist.S; ++dest) {
      if (dest == keep) continue;
      y[static_cast<size_t>(pos)] = dest;
      const double py = dist.at(y);
      if (py > 0.0)
        ev.set_log_score(pos, dest, std::log(py) - log_px);
      else
        ev.exclude(pos, dest);
    }
    y[static_cast<size_t>(pos)] = keep;
  }
  if (spec.is_absorbing()) ev.apply_absorbing_exclusions(spec.mask_state());
  return ev;
}

double tv(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("tv: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

double kl(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("kl: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    if (!(a[i] > 0.0)) throw ArgumentError("kl: negative entry");
    if (b[i] <= 0.0) return std::numeric_limits<double>::infinity();
    acc += a[i] * std::log(a[i] / b[i]);
  }
  return acc;
}

double tv(const EnumeratedDist& a, const EnumeratedDist& b) {
  if (a.d != b.d || a.S != b.S) throw ArgumentError("tv: shape mismatch");
  return tv(std::span<const double>(a.p), std::span<const double>(b.p));
}

double kl(const EnumeratedDist& a, const EnumeratedDist& b) {
  if (a.d != b.d || a.S != b.S) throw ArgumentError("kl: shape mismatch");
  return kl(std::span<const double>(a.p), std::span<const double>(b.p));
}

std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& f,
                                           std::span<const double> params, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("finite difference step must be positive");
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> grad(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double hi = f(x);
    x[i] = keep - eps;
    const double lo = f(x);
    x[i] = keep;
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

ExactScoreModel::ExactScoreModel(EnumeratedDist p0, const TransitionSpec& spec)
    : p0_(embed_clean(p0, spec)), spec_(spec) {
  p0_.validate();
}

const EnumeratedDist& ExactScoreModel::marginal(double sigma_bar) const {
  auto it = cache_.find(sigma_bar);
  if (it == cache_.end())
    it = cache_.emplace(sigma_bar, evolve(p0_, spec_, sigma_bar)).first;
  return it->second;
}

ScoreEval ExactScoreModel::eval(std::span<const int> seq, double sigma_bar) const {
  return exact_concrete_score(marginal(sigma_bar), spec_, sigma_bar, seq);
}

ExactPosteriorMeanModel::ExactPosteriorMeanModel(EnumeratedDist p0, const TransitionSpec& spec)
    : p0_(std::move(p0)), spec_(spec) {
  if (p0_.S != spec_.vocab())
    throw ArgumentError("posterior oracle wants a distribution over clean sequences");
  p0_.validate();
}

void ExactPosteriorMeanModel::posterior(std::span<const int> seq, double sigma_bar, int pos,
                                        std::span<double> out) const {
  if (static_cast<int>(seq.size()) != p0_.d)
    throw ArgumentError("posterior: sequence length mismatch");
  if (pos < 0 || pos >= p0_.d) throw ArgumentError("posterior: position out of range");
  if (static_cast<int>(out.size()) != p0_.S) throw ArgumentError("posterior span size mismatch");
  for (double& v : out) v = 0.0;
  std::vector<int> x0(static_cast<size_t>(p0_.d));
  double total = 0.0;
  for (size_t idx = 0; idx < p0_.p.size(); ++idx) {
    const double pw = p0_.p[idx];
    if (pw == 0.0) continue;
    decode_sequence(idx, p0_.S, x0);
    double like = pw;
    for (int i = 0; i < p0_.d && like > 0.0; ++i)
      like *= spec_.transition_prob(sigma_bar, seq[static_cast<size_t>(i)],
                                    x0[static_cast<size_t>(i)]);
    if (like == 0.0) continue;
    out[static_cast<size_t>(x0[static_cast<size_t>(pos)])] += like;
    total += like;
  }
  if (!(total > 0.0))
    throw UndefinedScoreError("posterior undefined: state unreachable from the data");
  for (double& v : out) v /= total;
}

EnumeratedDist reverse_start_dist(const TransitionSpec& spec, int d) {
  EnumeratedDist out(d, spec.num_states());
  if (spec.is_absorbing()) {
    std::vector<int> all_mask(static_cast<size_t>(d), spec.mask_state());
    out.p[encode_sequence(all_mask, out.S)] = 1.0;
  } else {
    const double u = 1.0 / static_cast<double>(out.p.size());
    for (double& v : out.p) v = u;
  }
  return out;
}

namespace {

// dp/dtau at reverse-clock time tau (forward time t = 1 - tau), scores taken
// from the model. Columns at mass-free states are skipped entirely.
void reverse_derivative(const ScoreModel& model, const TransitionSpec& spec,
                        const NoiseSchedule& schedule, double t,
                        std::span<const double> p, int d, std::span<double> dp) {
  const int S = spec.num_states();
  const double sig = schedule.sigma(t);
  const double sb = schedule.sigma_bar(t);
  for (double& v : dp) v = 0.0;
  std::vector<int> y(static_cast<size_t>(d));
  for (size_t src = 0; src < p.size(); ++src) {
    const double mass = p[src];
    if (mass == 0.0) continue;
    decode_sequence(src, S, y);
    const ScoreEval ev = model.eval(y, sb);
    size_t stride = p.size() / static_cast<size_t>(S);
    for (int pos = 0; pos < d; ++pos) {
      const int keep = y[static_cast<size_t>(pos)];
      const std::vector<double> col = ev.score_column(pos);
      for (int dest = 0; dest < S; ++dest) {
        if (dest == keep) continue;
        const double r = spec.rate(keep, dest);  // forward jump dest -> keep
        if (r == 0.0) continue;
        const double s = col[static_cast<size_t>(dest)];
        if (s == 0.0) continue;
        const double flux = sig * s * r * mass;
        const size_t dst =
            src + (static_cast<size_t>(dest) - static_cast<size_t>(keep)) * stride;
        dp[dst] += flux;
        dp[src] -= flux;
      }
      stride /= static_cast<size_t>(S);
    }
  }
}

}  // namespace

ReverseSolveResult exact_reverse_solve(const ScoreModel& model, const TransitionSpec& spec,
                                       const NoiseSchedule& schedule, int num_steps) {
  if (num_steps < 1) throw ArgumentError("reverse solve needs at least one step");
  if (model.num_states() != spec.num_states())
    throw ArgumentError("reverse solve: model/process state count mismatch");
  const int d = model.seq_len();
  pow_checked(spec.num_states(), d, static_cast<size_t>(kMaxDenseDim));

  ReverseSolveResult res;
  res.dist = reverse_start_dist(spec, d);
  res.steps = num_steps;
  auto& p = res.dist.p;
  const size_t dim = p.size();
  const double h = (1.0 - schedule.t_min()) / static_cast<double>(num_steps);

  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  auto deriv = [&](std::span<const double> state, double tau, std::span<double> out) {
    reverse_derivative(model, spec, schedule, 1.0 - tau, state, d, out);
  };

  for (int step = 0; step < num_steps; ++step) {
    const double tau = h * static_cast<double>(step);
    deriv(p, tau, k1);
    for (size_t i = 0; i < dim; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
    deriv(tmp, tau + 0.5 * h, k2);
    for (size_t i = 0; i < dim; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
    deriv(tmp, tau + 0.5 * h, k3);
    for (size_t i = 0; i < dim; ++i) tmp[i] = p[i] + h * k3[i];
    deriv(tmp, tau + h, k4);
    for (size_t i = 0; i < dim; ++i)
      p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

    double sum = 0.0;
    for (double& v : p) {
      if (v < 0.0) {
        if (v < -1e-8)
          throw InstabilityError("reverse solve produced significant negative mass");
        res.clipped_mass -= v;
        v = 0.0;
      }
      sum += v;
    }
    if (!(sum > 0.0)) throw InstabilityError("reverse solve lost all mass");
    for (double& v : p) v /= sum;
  }
  return res;
}

}  // namespace sedd
