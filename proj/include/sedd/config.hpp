#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "sedd/process.hpp"
#include "sedd/samplers.hpp"
#include "sedd/scores.hpp"

namespace sedd {

// Configuration mirrors a single JSON document. Parsing is strict: unknown
// keys anywhere are rejected so typos fail loudly instead of silently running
// defaults. Serialization is canonical (sorted keys, two-space indent), so
// save(parse(x)) is a fixed point.

struct ProcessConfig {
  std::string kind = "absorbing";  // "uniform" | "absorbing"
  int n = 4;
  double scale = 0.0;  // 0 means the kind's default: 1/n uniform, 1 absorbing
  double leak_eta = 1e-5;
};

struct ScheduleConfig {
  std::string kind = "geometric";  // "geometric" | "loglinear"
  double sigma_min = 1e-3;
  double sigma_max = 16.0;
  double eps = 1e-3;
  double t_min = 1e-3;
};

struct ModelConfig {
  std::string backend = "mlp";  // "mlp" | "mean_mlp" | "tabular"
  int embed = 16;
  int hidden = 64;
  int noise_features = 8;
  uint64_t init_seed = 7;
};

enum class TrainLoss { kDwdse, kDseFixed };

struct TrainConfig {
  int steps = 400;
  int batch_size = 0;  // 0 = the whole corpus every step
  double lr = 2e-3;
  int warmup = 20;
  double clip_norm = 1.0;
  double ema_decay = 0.999;
  uint64_t seed = 1;
  TrainLoss loss = TrainLoss::kDwdse;
  bool exact = false;       // full-enumeration objective; kDseFixed only
  double sigma_bar = 1.0;   // noise level for kDseFixed
  double sigma_weight = 1.0;
  int val_sequences = 32;
  int val_every = 100;  // 0 disables validation
  int val_draws = 4;    // loss draws per validation sequence
};

struct SamplingConfig {
  std::string method = "tweedie";  // "euler" | "tweedie" | "exact-tweedie"
  int steps = 64;
  int num_samples = 16;
  uint64_t seed = 2;
  std::string grid = "uniform";  // "uniform" | "geometric-sigma"
};

struct CorpusConfig {
  std::string kind = "iid";  // "iid" | "markov" | "file" | "text"
  std::string path;          // file and text kinds
  int count = 2048;          // synthetic kinds
  uint64_t seed = 3;
};

struct RunConfig {
  int seq_len = 4;
  std::string output_dir = "out";
  ProcessConfig process;
  ScheduleConfig schedule;
  ModelConfig model;
  TrainConfig training;
  SamplingConfig sampling;
  CorpusConfig corpus;

  void validate() const;  // throws ConfigError
};

RunConfig parse_run_config(const std::string& json_text);
std::string serialize_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

TransitionSpec make_transition_spec(const ProcessConfig& cfg);
NoiseSchedule make_schedule(const ScheduleConfig& cfg);
std::unique_ptr<ScoreModel> make_model(const ModelConfig& cfg, int seq_len,
                                       const TransitionSpec& spec);

SampleMethod parse_sample_method(const std::string& name);
TimeGridKind parse_time_grid(const std::string& name);

}  // namespace sedd
