#include "sedd/scores.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "sedd/enumerated.hpp"
#include "sedd/errors.hpp"
#include "sedd/rng.hpp"

namespace sedd {

ScoreEval::ScoreEval(std::span<const int> seq, int num_states, double sigma_bar)
    : d_(static_cast<int>(seq.size())),
      S_(num_states),
      sigma_bar_(sigma_bar),
      seq_(seq.begin(), seq.end()),
      log_s_(static_cast<size_t>(d_) * S_, 0.0),
      excluded_(static_cast<size_t>(d_) * S_, 0) {
  if (d_ == 0) throw ArgumentError("empty sequence");
  if (num_states < 2) throw ArgumentError("need at least 2 states");
  if (!(sigma_bar >= 0.0)) throw ArgumentError("sigma_bar must be nonnegative");
  for (int tok : seq_)
    if (tok < 0 || tok >= S_) throw ArgumentError("token out of range");
}

double ScoreEval::log_score(int pos, int dest) const {
  const size_t k = idx(pos, dest);
  if (excluded_[k]) throw ArgumentError("reading an excluded score entry");
  return log_s_[k];
}

double ScoreEval::score(int pos, int dest) const { return std::exp(log_score(pos, dest)); }

void ScoreEval::set_log_score(int pos, int dest, double v) {
  if (!std::isfinite(v)) throw ArgumentError("log score must be finite");
  const size_t k = idx(pos, dest);
  if (dest == seq_[static_cast<size_t>(pos)] && v != 0.0)
    throw ArgumentError("self entry is pinned to log score 0");
  log_s_[k] = v;
  excluded_[k] = 0;
}

void ScoreEval::exclude(int pos, int dest) {
  if (dest == seq_[static_cast<size_t>(pos)])
    throw ArgumentError("self entry cannot be excluded");
  const size_t k = idx(pos, dest);
  excluded_[k] = 1;
  log_s_[k] = 0.0;
}

void ScoreEval::apply_absorbing_exclusions(int mask_state) {
  for (int pos = 0; pos < d_; ++pos)
    if (seq_[static_cast<size_t>(pos)] != mask_state) exclude(pos, mask_state);
}

std::vector<double> ScoreEval::score_column(int pos) const {
  std::vector<double> col(static_cast<size_t>(S_), 0.0);
  for (int dest = 0; dest < S_; ++dest) {
    if (dest == token(pos))
      col[dest] = 1.0;
    else if (!is_excluded(pos, dest))
      col[dest] = std::exp(log_s_[idx(pos, dest)]);
  }
  return col;
}

void ScoreModel::backprop(std::span<const int>, double, std::span<const double>,
                          std::span<double>) const {
  throw ArgumentError("model has no trainable parameters");
}

namespace {

void check_upstream(std::span<const double> upstream, int d, int S) {
  if (upstream.size() != static_cast<size_t>(d) * S)
    throw ArgumentError("upstream gradient size mismatch");
  for (double u : upstream)
    if (!std::isfinite(u)) throw ArgumentError("upstream gradient is not finite");
}

// Upstream with self and excluded entries zeroed; those outputs never feed a
// loss, so their gradient contribution must vanish.
std::vector<double> effective_upstream(const ScoreEval& ev, std::span<const double> upstream) {
  const int d = ev.seq_len(), S = ev.num_states();
  std::vector<double> up(upstream.begin(), upstream.end());
  for (int pos = 0; pos < d; ++pos)
    for (int dest = 0; dest < S; ++dest)
      if (dest == ev.token(pos) || ev.is_excluded(pos, dest))
        up[static_cast<size_t>(pos) * S + dest] = 0.0;
  return up;
}

}  // namespace

TabularScore::TabularScore(int d, const TransitionSpec& spec)
    : d_(d), S_(spec.num_states()), mask_(spec.mask_state()), kind_(spec.kind()) {
  if (d < 1) throw ArgumentError("sequence length must be positive");
  const size_t n_seq = pow_checked(S_, d_, kMaxSequences);
  table_.assign(n_seq * d_ * S_, 0.0);
}

ScoreEval TabularScore::eval(std::span<const int> seq, double sigma_bar) const {
  if (static_cast<int>(seq.size()) != d_) throw ArgumentError("sequence length mismatch");
  const size_t base = encode_sequence(seq, S_) * d_ * S_;
  ScoreEval ev(seq, S_, sigma_bar);
  for (int pos = 0; pos < d_; ++pos)
    for (int dest = 0; dest < S_; ++dest)
      if (dest != seq[static_cast<size_t>(pos)])
        ev.set_log_score(pos, dest, table_[base + static_cast<size_t>(pos) * S_ + dest]);
  if (kind_ == TransitionKind::kAbsorbing) ev.apply_absorbing_exclusions(mask_);
  return ev;
}

void TabularScore::backprop(std::span<const int> seq, double sigma_bar,
                            std::span<const double> upstream, std::span<double> grad) const {
  check_upstream(upstream, d_, S_);
  if (grad.size() != table_.size()) throw ArgumentError("gradient size mismatch");
  const ScoreEval ev = eval(seq, sigma_bar);
  const auto up = effective_upstream(ev, upstream);
  const size_t base = encode_sequence(seq, S_) * d_ * S_;
  for (size_t k = 0; k < up.size(); ++k) grad[base + k] += up[k];
}

void noise_features(double sigma_bar, std::span<double> out) {
  const double u = std::log(std::max(sigma_bar, 1e-12));
  const size_t k = out.size();
  size_t i = 0;
  double freq = 1.0;
  while (i + 1 < k) {
    out[i] = std::sin(u * freq);
    out[i + 1] = std::cos(u * freq);
    i += 2;
    freq *= 0.5;
  }
  if (i < k) out[i] = 0.25 * u;
}

namespace {

// Shared trunk math for the two MLP models; all spans point into the flat
// parameter vector using the documented block layout.
struct TrunkDims {
  int d, e, h, k, input, head;  // head = per-position output width
};

struct TrunkOffsets {
  size_t emb, w1, b1, w2, b2, w3, b3, total;
};

TrunkOffsets trunk_offsets(const TrunkDims& t, int S) {
  TrunkOffsets o{};
  o.emb = 0;
  o.w1 = o.emb + static_cast<size_t>(S) * t.e;
  o.b1 = o.w1 + static_cast<size_t>(t.input) * t.h;
  o.w2 = o.b1 + t.h;
  o.b2 = o.w2 + static_cast<size_t>(t.h) * t.h;
  o.w3 = o.b2 + t.h;
  o.b3 = o.w3 + static_cast<size_t>(t.d) * t.h * t.head;
  o.total = o.b3 + static_cast<size_t>(t.d) * t.head;
  return o;
}

struct TrunkWork {
  std::vector<double> x, a1, z1, a2, z2, out;
};

void trunk_forward(std::span<const double> p, const TrunkOffsets& o, const TrunkDims& t,
                   std::span<const int> seq, double sigma_bar, TrunkWork& ws) {
  ws.x.assign(static_cast<size_t>(t.input), 0.0);
  for (int pos = 0; pos < t.d; ++pos) {
    const size_t src = o.emb + static_cast<size_t>(seq[static_cast<size_t>(pos)]) * t.e;
    for (int m = 0; m < t.e; ++m) ws.x[static_cast<size_t>(pos) * t.e + m] = p[src + m];
  }
  noise_features(sigma_bar,
                 std::span<double>(ws.x).subspan(static_cast<size_t>(t.d) * t.e, t.k));

  ws.a1.assign(p.begin() + o.b1, p.begin() + o.b1 + t.h);
  for (int i = 0; i < t.input; ++i) {
    const double xi = ws.x[static_cast<size_t>(i)];
    if (xi == 0.0) continue;
    const size_t row = o.w1 + static_cast<size_t>(i) * t.h;
    for (int j = 0; j < t.h; ++j) ws.a1[static_cast<size_t>(j)] += p[row + j] * xi;
  }
  ws.z1.resize(static_cast<size_t>(t.h));
  for (int j = 0; j < t.h; ++j) ws.z1[static_cast<size_t>(j)] = std::tanh(ws.a1[static_cast<size_t>(j)]);

  ws.a2.assign(p.begin() + o.b2, p.begin() + o.b2 + t.h);
  for (int i = 0; i < t.h; ++i) {
    const double zi = ws.z1[static_cast<size_t>(i)];
    const size_t row = o.w2 + static_cast<size_t>(i) * t.h;
    for (int j = 0; j < t.h; ++j) ws.a2[static_cast<size_t>(j)] += p[row + j] * zi;
  }
  ws.z2.resize(static_cast<size_t>(t.h));
  for (int j = 0; j < t.h; ++j) ws.z2[static_cast<size_t>(j)] = std::tanh(ws.a2[static_cast<size_t>(j)]);

  ws.out.assign(p.begin() + o.b3, p.begin() + o.b3 + static_cast<size_t>(t.d) * t.head);
  for (int pos = 0; pos < t.d; ++pos) {
    const size_t head = o.w3 + static_cast<size_t>(pos) * t.h * t.head;
    double* outp = ws.out.data() + static_cast<size_t>(pos) * t.head;
    for (int j = 0; j < t.h; ++j) {
      const double zj = ws.z2[static_cast<size_t>(j)];
      const size_t row = head + static_cast<size_t>(j) * t.head;
      for (int y = 0; y < t.head; ++y) outp[y] += p[row + y] * zj;
    }
  }
}

// head_up is d x head, already masked; accumulates into grad.
void trunk_backward(std::span<const double> p, const TrunkOffsets& o, const TrunkDims& t,
                    std::span<const int> seq, const TrunkWork& ws,
                    std::span<const double> head_up, std::span<double> grad) {
  std::vector<double> dz2(static_cast<size_t>(t.h), 0.0);
  for (int pos = 0; pos < t.d; ++pos) {
    const double* up = head_up.data() + static_cast<size_t>(pos) * t.head;
    const size_t head = o.w3 + static_cast<size_t>(pos) * t.h * t.head;
    double* gb3 = grad.data() + o.b3 + static_cast<size_t>(pos) * t.head;
    for (int y = 0; y < t.head; ++y) gb3[y] += up[y];
    for (int j = 0; j < t.h; ++j) {
      const double zj = ws.z2[static_cast<size_t>(j)];
      const size_t row = head + static_cast<size_t>(j) * t.head;
      double acc = 0.0;
      for (int y = 0; y < t.head; ++y) {
        grad[row + y] += zj * up[y];
        acc += p[row + y] * up[y];
      }
      dz2[static_cast<size_t>(j)] += acc;
    }
  }

  std::vector<double> da2(static_cast<size_t>(t.h));
  for (int j = 0; j < t.h; ++j) {
    const double z = ws.z2[static_cast<size_t>(j)];
    da2[static_cast<size_t>(j)] = dz2[static_cast<size_t>(j)] * (1.0 - z * z);
  }
  std::vector<double> dz1(static_cast<size_t>(t.h), 0.0);
  for (int i = 0; i < t.h; ++i) {
    const double zi = ws.z1[static_cast<size_t>(i)];
    const size_t row = o.w2 + static_cast<size_t>(i) * t.h;
    double acc = 0.0;
    for (int j = 0; j < t.h; ++j) {
      grad[row + j] += zi * da2[static_cast<size_t>(j)];
      acc += p[row + j] * da2[static_cast<size_t>(j)];
    }
    dz1[static_cast<size_t>(i)] = acc;
  }
  for (int j = 0; j < t.h; ++j) grad[o.b2 + j] += da2[static_cast<size_t>(j)];

  std::vector<double> da1(static_cast<size_t>(t.h));
  for (int j = 0; j < t.h; ++j) {
    const double z = ws.z1[static_cast<size_t>(j)];
    da1[static_cast<size_t>(j)] = dz1[static_cast<size_t>(j)] * (1.0 - z * z);
  }
  for (int i = 0; i < t.input; ++i) {
    const double xi = ws.x[static_cast<size_t>(i)];
    const size_t row = o.w1 + static_cast<size_t>(i) * t.h;
    for (int j = 0; j < t.h; ++j) grad[row + j] += xi * da1[static_cast<size_t>(j)];
  }
  for (int j = 0; j < t.h; ++j) grad[o.b1 + j] += da1[static_cast<size_t>(j)];

  // dx reaches only the embedding rows actually used
  for (int pos = 0; pos < t.d; ++pos) {
    const size_t dst = o.emb + static_cast<size_t>(seq[static_cast<size_t>(pos)]) * t.e;
    for (int m = 0; m < t.e; ++m) {
      const size_t i = static_cast<size_t>(pos) * t.e + m;
      double acc = 0.0;
      const size_t row = o.w1 + i * t.h;
      for (int j = 0; j < t.h; ++j) acc += p[row + j] * da1[static_cast<size_t>(j)];
      grad[dst + m] += acc;
    }
  }
}

}  // namespace

struct MlpScore::Workspace : TrunkWork {};

MlpScore::MlpScore(int d, const TransitionSpec& spec, const MlpDims& dims, uint64_t init_seed)
    : d_(d), S_(spec.num_states()), mask_(spec.mask_state()), kind_(spec.kind()), dims_(dims) {
  if (d < 1) throw ArgumentError("sequence length must be positive");
  if (dims.embed < 1 || dims.hidden < 1 || dims.noise_features < 1)
    throw ArgumentError("mlp dims must be positive");
  input_dim_ = d_ * dims_.embed + dims_.noise_features;
  TrunkDims t{d_, dims_.embed, dims_.hidden, dims_.noise_features, input_dim_, S_};
  const TrunkOffsets o = trunk_offsets(t, S_);
  off_emb_ = o.emb;
  off_w1_ = o.w1;
  off_b1_ = o.b1;
  off_w2_ = o.w2;
  off_b2_ = o.b2;
  off_w3_ = o.w3;
  off_b3_ = o.b3;
  params_.assign(o.total, 0.0);

  Rng rng(init_seed);
  const double emb_std = 0.5 / std::sqrt(static_cast<double>(dims_.embed));
  for (size_t i = off_emb_; i < off_w1_; ++i) params_[i] = emb_std * rng.normal();
  const double w1_std = 1.0 / std::sqrt(static_cast<double>(input_dim_));
  for (size_t i = off_w1_; i < off_b1_; ++i) params_[i] = w1_std * rng.normal();
  const double w2_std = 1.0 / std::sqrt(static_cast<double>(dims_.hidden));
  for (size_t i = off_w2_; i < off_b2_; ++i) params_[i] = w2_std * rng.normal();
  // b1, b2, W3, b3 stay zero: a fresh model scores every move at exactly 1.
}

void MlpScore::check_seq(std::span<const int> seq) const {
  if (static_cast<int>(seq.size()) != d_) throw ArgumentError("sequence length mismatch");
  for (int tok : seq)
    if (tok < 0 || tok >= S_) throw ArgumentError("token out of range");
}

void MlpScore::forward(std::span<const int> seq, double sigma_bar, Workspace& ws) const {
  TrunkDims t{d_, dims_.embed, dims_.hidden, dims_.noise_features, input_dim_, S_};
  TrunkOffsets o{off_emb_, off_w1_, off_b1_, off_w2_, off_b2_, off_w3_, off_b3_, params_.size()};
  trunk_forward(params_, o, t, seq, sigma_bar, ws);
}

ScoreEval MlpScore::eval(std::span<const int> seq, double sigma_bar) const {
  check_seq(seq);
  Workspace ws;
  forward(seq, sigma_bar, ws);
  ScoreEval ev(seq, S_, sigma_bar);
  for (int pos = 0; pos < d_; ++pos)
    for (int dest = 0; dest < S_; ++dest)
      if (dest != seq[static_cast<size_t>(pos)])
        ev.set_log_score(pos, dest, ws.out[static_cast<size_t>(pos) * S_ + dest]);
  if (kind_ == TransitionKind::kAbsorbing) ev.apply_absorbing_exclusions(mask_);
  return ev;
}

void MlpScore::backprop(std::span<const int> seq, double sigma_bar,
                        std::span<const double> upstream, std::span<double> grad) const {
  check_seq(seq);
  check_upstream(upstream, d_, S_);
  if (grad.size() != params_.size()) throw ArgumentError("gradient size mismatch");
  const ScoreEval ev = eval(seq, sigma_bar);
  const auto up = effective_upstream(ev, upstream);
  Workspace ws;
  forward(seq, sigma_bar, ws);
  TrunkDims t{d_, dims_.embed, dims_.hidden, dims_.noise_features, input_dim_, S_};
  TrunkOffsets o{off_emb_, off_w1_, off_b1_, off_w2_, off_b2_, off_w3_, off_b3_, params_.size()};
  trunk_backward(params_, o, t, seq, ws, up, grad);
}

ScoreEval score_from_mean(const MeanModel& mean, const TransitionSpec& spec, double sigma_bar,
                          std::span<const int> seq) {
  if (mean.vocab() != spec.vocab()) throw ArgumentError("mean model vocab mismatch");
  if (static_cast<int>(seq.size()) != mean.seq_len())
    throw ArgumentError("sequence length mismatch");
  const int d = mean.seq_len();
  const int n = mean.vocab();
  const int S = spec.num_states();
  ScoreEval ev(seq, S, sigma_bar);
  std::vector<double> q(static_cast<size_t>(n));
  for (int pos = 0; pos < d; ++pos) {
    const int x = seq[static_cast<size_t>(pos)];
    if (spec.is_absorbing() && x != spec.mask_state()) {
      // An unmasked token admits no move under absorption.
      for (int dest = 0; dest < S; ++dest)
        if (dest != x) ev.exclude(pos, dest);
      continue;
    }
    mean.posterior(seq, sigma_bar, pos, q);
    double qsum = 0.0;
    for (double v : q) {
      if (!(v >= 0.0)) throw ArgumentError("mean posterior has a negative entry");
      qsum += v;
    }
    if (std::abs(qsum - 1.0) > 1e-8) throw ArgumentError("mean posterior is not normalized");
    for (int c = 0; c < n; ++c)
      if (q[static_cast<size_t>(c)] > 0.0 && spec.transition_prob(sigma_bar, x, c) == 0.0)
        throw UndefinedScoreError("zero-probability transition in mean-to-score conversion");
    for (int dest = 0; dest < S; ++dest) {
      if (dest == x) continue;
      double val = 0.0;
      for (int c = 0; c < n; ++c) {
        const double qc = q[static_cast<size_t>(c)];
        if (qc == 0.0) continue;
        val += qc * spec.transition_prob(sigma_bar, dest, c) /
               spec.transition_prob(sigma_bar, x, c);
      }
      if (val > 0.0)
        ev.set_log_score(pos, dest, std::log(val));
      else
        ev.exclude(pos, dest);  // score exactly zero: unusable as a ratio
    }
  }
  return ev;
}

struct MeanMlpScore::Workspace : TrunkWork {};

MeanMlpScore::MeanMlpScore(int d, const TransitionSpec& spec, const MlpDims& dims,
                           uint64_t init_seed)
    : d_(d), n_(spec.vocab()), S_(spec.num_states()), scale_(spec.scale()), dims_(dims) {
  if (!spec.is_absorbing())
    throw ArgumentError("mean-parameterized model requires the absorbing process");
  if (d < 1) throw ArgumentError("sequence length must be positive");
  if (dims.embed < 1 || dims.hidden < 1 || dims.noise_features < 1)
    throw ArgumentError("mlp dims must be positive");
  input_dim_ = d_ * dims_.embed + dims_.noise_features;
  TrunkDims t{d_, dims_.embed, dims_.hidden, dims_.noise_features, input_dim_, n_};
  const TrunkOffsets o = trunk_offsets(t, S_);
  off_emb_ = o.emb;
  off_w1_ = o.w1;
  off_b1_ = o.b1;
  off_w2_ = o.w2;
  off_b2_ = o.b2;
  off_w3_ = o.w3;
  off_b3_ = o.b3;
  params_.assign(o.total, 0.0);

  Rng rng(init_seed);
  const double emb_std = 0.5 / std::sqrt(static_cast<double>(dims_.embed));
  for (size_t i = off_emb_; i < off_w1_; ++i) params_[i] = emb_std * rng.normal();
  const double w1_std = 1.0 / std::sqrt(static_cast<double>(input_dim_));
  for (size_t i = off_w1_; i < off_b1_; ++i) params_[i] = w1_std * rng.normal();
  const double w2_std = 1.0 / std::sqrt(static_cast<double>(dims_.hidden));
  for (size_t i = off_w2_; i < off_b2_; ++i) params_[i] = w2_std * rng.normal();
}

void MeanMlpScore::forward(std::span<const int> seq, double sigma_bar, Workspace& ws) const {
  TrunkDims t{d_, dims_.embed, dims_.hidden, dims_.noise_features, input_dim_, n_};
  TrunkOffsets o{off_emb_, off_w1_, off_b1_, off_w2_, off_b2_, off_w3_, off_b3_, params_.size()};
  trunk_forward(params_, o, t, seq, sigma_bar, ws);
}

void MeanMlpScore::posterior(std::span<const int> seq, double sigma_bar, int pos,
                             std::span<double> out) const {
  if (static_cast<int>(out.size()) != n_) throw ArgumentError("posterior span size mismatch");
  Workspace ws;
  forward(seq, sigma_bar, ws);
  const double* logits = ws.out.data() + static_cast<size_t>(pos) * n_;
  double mx = logits[0];
  for (int c = 1; c < n_; ++c) mx = std::max(mx, logits[c]);
  double z = 0.0;
  for (int c = 0; c < n_; ++c) {
    out[static_cast<size_t>(c)] = std::exp(logits[c] - mx);
    z += out[static_cast<size_t>(c)];
  }
  for (int c = 0; c < n_; ++c) out[static_cast<size_t>(c)] /= z;
}

ScoreEval MeanMlpScore::eval(std::span<const int> seq, double sigma_bar) const {
  if (static_cast<int>(seq.size()) != d_) throw ArgumentError("sequence length mismatch");
  for (int tok : seq)
    if (tok < 0 || tok >= S_) throw ArgumentError("token out of range");
  const int mask = n_;
  const double lam = sigma_bar * scale_;
  Workspace ws;
  forward(seq, sigma_bar, ws);
  ScoreEval ev(seq, S_, sigma_bar);
  std::vector<double> q(static_cast<size_t>(n_));
  for (int pos = 0; pos < d_; ++pos) {
    const int x = seq[static_cast<size_t>(pos)];
    if (x != mask) {
      for (int dest = 0; dest < S_; ++dest)
        if (dest != x) ev.exclude(pos, dest);
      continue;
    }
    if (!(lam > 0.0))
      throw UndefinedScoreError("zero-probability transition in mean-to-score conversion");
    // log of e^-lam / (1 - e^-lam): the masked-position ratio scale
    const double log_factor = -lam - std::log(-std::expm1(-lam));
    const double* logits = ws.out.data() + static_cast<size_t>(pos) * n_;
    double mx = logits[0];
    for (int c = 1; c < n_; ++c) mx = std::max(mx, logits[c]);
    double z = 0.0;
    for (int c = 0; c < n_; ++c) z += std::exp(logits[c] - mx);
    const double log_z = std::log(z) + mx;
    for (int dest = 0; dest < n_; ++dest)
      ev.set_log_score(pos, dest, logits[dest] - log_z + log_factor);
  }
  return ev;
}

void MeanMlpScore::backprop(std::span<const int> seq, double sigma_bar,
                            std::span<const double> upstream, std::span<double> grad) const {
  check_upstream(upstream, d_, S_);
  if (grad.size() != params_.size()) throw ArgumentError("gradient size mismatch");
  const ScoreEval ev = eval(seq, sigma_bar);
  const auto up = effective_upstream(ev, upstream);
  Workspace ws;
  forward(seq, sigma_bar, ws);
  const int mask = n_;
  // log s = log softmax(logits) + const, so d log s_y / d logit_c = delta - q_c.
  std::vector<double> head_up(static_cast<size_t>(d_) * n_, 0.0);
  std::vector<double> q(static_cast<size_t>(n_));
  for (int pos = 0; pos < d_; ++pos) {
    if (seq[static_cast<size_t>(pos)] != mask) continue;
    const double* logits = ws.out.data() + static_cast<size_t>(pos) * n_;
    double mx = logits[0];
    for (int c = 1; c < n_; ++c) mx = std::max(mx, logits[c]);
    double z = 0.0;
    for (int c = 0; c < n_; ++c) {
      q[static_cast<size_t>(c)] = std::exp(logits[c] - mx);
      z += q[static_cast<size_t>(c)];
    }
    for (int c = 0; c < n_; ++c) q[static_cast<size_t>(c)] /= z;
    double up_sum = 0.0;
    for (int y = 0; y < n_; ++y) up_sum += up[static_cast<size_t>(pos) * S_ + y];
    for (int c = 0; c < n_; ++c)
      head_up[static_cast<size_t>(pos) * n_ + c] =
          up[static_cast<size_t>(pos) * S_ + c] - q[static_cast<size_t>(c)] * up_sum;
  }
  TrunkDims t{d_, dims_.embed, dims_.hidden, dims_.noise_features, input_dim_, n_};
  TrunkOffsets o{off_emb_, off_w1_, off_b1_, off_w2_, off_b2_, off_w3_, off_b3_, params_.size()};
  trunk_backward(params_, o, t, seq, ws, head_up, grad);
}

}  // namespace sedd
