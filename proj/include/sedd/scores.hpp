#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sedd/process.hpp"

namespace sedd {

// One model evaluation: a d x S table of log score ratios
// log s(x)_{pos,dest} ~= log p_t(x with dest at pos) / p_t(x).
// Self entries (dest == x[pos]) are exactly zero. Entries flagged excluded
// carry no value and must not be read; every consumer in this codebase gives
// them zero weight. Two exclusion patterns occur:
//   - absorbing models: (pos, MASK) for every unmasked position (the forward
//     process cannot produce that move, so no loss or sampler touches it);
//   - ratios that are exactly zero (unreachable states under absorption),
//     which behave as score zero everywhere they could be consumed.
class ScoreEval {
 public:
  ScoreEval(std::span<const int> seq, int num_states, double sigma_bar);

  int seq_len() const { return d_; }
  int num_states() const { return S_; }
  double sigma_bar() const { return sigma_bar_; }
  std::span<const int> seq() const { return seq_; }
  int token(int pos) const { return seq_[static_cast<size_t>(pos)]; }

  double log_score(int pos, int dest) const;
  double score(int pos, int dest) const;
  bool is_excluded(int pos, int dest) const { return excluded_[idx(pos, dest)] != 0; }

  void set_log_score(int pos, int dest, double v);
  void exclude(int pos, int dest);
  // Standard absorbing pattern: flag (pos, MASK) wherever x[pos] != MASK.
  void apply_absorbing_exclusions(int mask_state);

  // Score column for one position with the self entry pinned to exactly 1 and
  // excluded entries contributing zero; this is the vector samplers consume.
  std::vector<double> score_column(int pos) const;

 private:
  size_t idx(int pos, int dest) const { return static_cast<size_t>(pos) * S_ + dest; }

  int d_;
  int S_;
  double sigma_bar_;
  std::vector<int> seq_;
  std::vector<double> log_s_;
  std::vector<uint8_t> excluded_;
};

// A concrete-score network: maps (sequence, sigma_bar) to a ScoreEval.
// Trainable models expose a flat parameter vector and accumulate gradients
// through backprop(); upstream is d(loss)/d(log s), laid out d x S row-major,
// and entries at self or excluded positions are ignored.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual int seq_len() const = 0;
  virtual int num_states() const = 0;
  virtual TransitionKind kind() const = 0;
  virtual ScoreEval eval(std::span<const int> seq, double sigma_bar) const = 0;

  virtual size_t num_params() const { return 0; }
  virtual std::span<double> params() { return {}; }
  virtual std::span<const double> params() const { return {}; }
  virtual void backprop(std::span<const int> seq, double sigma_bar,
                        std::span<const double> upstream, std::span<double> grad) const;
};

// Lookup-table scores over (sequence index, position, destination); exact
// representation class for enumerable toys. Not noise-conditioned: one table
// serves a single fixed sigma_bar regime. Capacity-gated at 2^16 sequences.
class TabularScore final : public ScoreModel {
 public:
  static constexpr size_t kMaxSequences = size_t{1} << 16;

  TabularScore(int d, const TransitionSpec& spec);

  int seq_len() const override { return d_; }
  int num_states() const override { return S_; }
  TransitionKind kind() const override { return kind_; }
  ScoreEval eval(std::span<const int> seq, double sigma_bar) const override;

  size_t num_params() const override { return table_.size(); }
  std::span<double> params() override { return table_; }
  std::span<const double> params() const override { return table_; }
  void backprop(std::span<const int> seq, double sigma_bar, std::span<const double> upstream,
                std::span<double> grad) const override;

 private:
  int d_;
  int S_;
  int mask_;
  TransitionKind kind_;
  std::vector<double> table_;  // [seq_index][pos][dest] log scores
};

struct MlpDims {
  int embed = 16;
  int hidden = 64;
  int noise_features = 8;
};

// Two-hidden-layer tanh MLP over concatenated position embeddings plus fixed
// sinusoidal features of log sigma_bar, with an independent output head per
// position (no positional weight sharing). The output head is zero at
// initialization so a fresh model scores every move at exactly 1.
//
// Flat parameter layout (also the checkpoint payload order, little-endian
// float32 on disk):
//   emb[S][e], W1[d*e+k][h], b1[h], W2[h][h], b2[h], W3[d][h][S], b3[d][S]
class MlpScore final : public ScoreModel {
 public:
  MlpScore(int d, const TransitionSpec& spec, const MlpDims& dims, uint64_t init_seed);

  int seq_len() const override { return d_; }
  int num_states() const override { return S_; }
  TransitionKind kind() const override { return kind_; }
  ScoreEval eval(std::span<const int> seq, double sigma_bar) const override;

  size_t num_params() const override { return params_.size(); }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }
  void backprop(std::span<const int> seq, double sigma_bar, std::span<const double> upstream,
                std::span<double> grad) const override;

  const MlpDims& dims() const { return dims_; }

 private:
  struct Workspace;
  void forward(std::span<const int> seq, double sigma_bar, Workspace& ws) const;
  void check_seq(std::span<const int> seq) const;

  int d_;
  int S_;
  int mask_;
  TransitionKind kind_;
  MlpDims dims_;
  int input_dim_;
  // parameter block offsets
  size_t off_emb_, off_w1_, off_b1_, off_w2_, off_b2_, off_w3_, off_b3_;
  std::vector<double> params_;
};

// Per-position posterior over clean tokens given a noised sequence; the
// mean-parameterized counterpart of a score network.
class MeanModel {
 public:
  virtual ~MeanModel() = default;
  virtual int seq_len() const = 0;
  // Number of clean-token outcomes (the vocab; MASK is never a clean token).
  virtual int vocab() const = 0;
  virtual void posterior(std::span<const int> seq, double sigma_bar, int pos,
                         std::span<double> out) const = 0;
};

// Converts per-position posteriors over clean tokens into concrete scores:
//   s(x)_{pos,dest} = sum_c q_pos(c) * p(dest | c) / p(x[pos] | c)
// where p is the token transition kernel at sigma_bar. Requires
// p(x[pos] | c) > 0 wherever q_pos(c) > 0. For the absorbing process an
// unmasked position admits no move at all, so its whole off-self column is
// flagged excluded (a mean model cannot move an unmasked token).
ScoreEval score_from_mean(const MeanModel& mean, const TransitionSpec& spec, double sigma_bar,
                          std::span<const int> seq);

// Trainable mean-parameterized model for the absorbing process: shares the
// MlpScore trunk, but each position's head emits vocab() logits which are
// softmaxed into a clean-token posterior and then routed through
// score_from_mean's closed form. Same flat layout as MlpScore with head
// width vocab() instead of num_states().
class MeanMlpScore final : public ScoreModel, public MeanModel {
 public:
  MeanMlpScore(int d, const TransitionSpec& spec, const MlpDims& dims, uint64_t init_seed);

  int seq_len() const override { return d_; }
  int num_states() const override { return S_; }
  TransitionKind kind() const override { return TransitionKind::kAbsorbing; }
  ScoreEval eval(std::span<const int> seq, double sigma_bar) const override;

  int vocab() const override { return n_; }
  void posterior(std::span<const int> seq, double sigma_bar, int pos,
                 std::span<double> out) const override;

  size_t num_params() const override { return params_.size(); }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }
  void backprop(std::span<const int> seq, double sigma_bar, std::span<const double> upstream,
                std::span<double> grad) const override;

 private:
  struct Workspace;
  void forward(std::span<const int> seq, double sigma_bar, Workspace& ws) const;

  int d_;
  int n_;
  int S_;
  double scale_;
  MlpDims dims_;
  int input_dim_;
  size_t off_emb_, off_w1_, off_b1_, off_w2_, off_b2_, off_w3_, off_b3_;
  std::vector<double> params_;
};

// Fixed sinusoidal embedding of u = log sigma_bar shared by the MLP models.
void noise_features(double sigma_bar, std::span<double> out);

}  // namespace sedd
