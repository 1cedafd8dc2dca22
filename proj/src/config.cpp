#include "sedd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sedd/errors.hpp"

namespace sedd {

using nlohmann::json;

namespace {

// Strict object access: every key must be consumed exactly once.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  ~ObjectReader() = default;

  template <typename T>
  void get(const char* key, T& out) {
    if (auto it = j_.find(key); it != j_.end()) {
      read(*it, key, out);
      seen_.insert(key);
    }
  }

  template <typename T>
  void require(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) throw ConfigError(where_ + " is missing required key '" + key + "'");
    read(*it, key, out);
    seen_.insert(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError(where_ + " has unknown key '" + it.key() + "'");
  }

  bool has(const char* key) const { return j_.contains(key); }
  void mark(const char* key) { seen_.insert(key); }

 private:
  template <typename T>
  void read(const json& v, const char* key, T& out) {
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + " key '" + key + "' has the wrong type");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ProcessConfig parse_process(const json& j) {
  ProcessConfig c;
  ObjectReader r(j, "process");
  r.require("kind", c.kind);
  r.require("n", c.n);
  r.get("scale", c.scale);
  if (c.kind == "absorbing") r.get("leak_eta", c.leak_eta);
  r.finish();
  return c;
}

ScheduleConfig parse_schedule(const json& j) {
  ScheduleConfig c;
  ObjectReader r(j, "schedule");
  r.require("kind", c.kind);
  if (c.kind == "geometric") {
    r.get("sigma_min", c.sigma_min);
    r.get("sigma_max", c.sigma_max);
  } else if (c.kind == "loglinear") {
    r.get("eps", c.eps);
  }
  r.get("t_min", c.t_min);
  r.finish();
  return c;
}

ModelConfig parse_model(const json& j) {
  ModelConfig c;
  ObjectReader r(j, "model");
  r.get("backend", c.backend);
  r.get("embed", c.embed);
  r.get("hidden", c.hidden);
  r.get("noise_features", c.noise_features);
  r.get("init_seed", c.init_seed);
  r.finish();
  return c;
}

TrainLoss parse_train_loss(const std::string& name) {
  if (name == "dwdse") return TrainLoss::kDwdse;
  if (name == "dse_fixed") return TrainLoss::kDseFixed;
  throw ConfigError("unknown training loss '" + name + "'");
}

std::string train_loss_name(TrainLoss loss) {
  return loss == TrainLoss::kDwdse ? "dwdse" : "dse_fixed";
}

TrainConfig parse_training(const json& j) {
  TrainConfig c;
  ObjectReader r(j, "training");
  r.get("steps", c.steps);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("warmup", c.warmup);
  r.get("clip_norm", c.clip_norm);
  r.get("ema_decay", c.ema_decay);
  r.get("seed", c.seed);
  std::string loss = train_loss_name(c.loss);
  r.get("loss", loss);
  c.loss = parse_train_loss(loss);
  r.get("exact", c.exact);
  r.get("sigma_bar", c.sigma_bar);
  r.get("sigma_weight", c.sigma_weight);
  r.get("val_sequences", c.val_sequences);
  r.get("val_every", c.val_every);
  r.get("val_draws", c.val_draws);
  r.finish();
  return c;
}

SamplingConfig parse_sampling(const json& j) {
  SamplingConfig c;
  ObjectReader r(j, "sampling");
  r.get("method", c.method);
  r.get("steps", c.steps);
  r.get("num_samples", c.num_samples);
  r.get("seed", c.seed);
  r.get("grid", c.grid);
  r.finish();
  return c;
}

CorpusConfig parse_corpus(const json& j) {
  CorpusConfig c;
  ObjectReader r(j, "corpus");
  r.require("kind", c.kind);
  if (c.kind == "file" || c.kind == "text") {
    r.require("path", c.path);
  } else {
    r.get("count", c.count);
    r.get("seed", c.seed);
  }
  r.finish();
  return c;
}

json process_json(const ProcessConfig& c) {
  json j{{"kind", c.kind}, {"n", c.n}, {"scale", c.scale}};
  if (c.kind == "absorbing") j["leak_eta"] = c.leak_eta;
  return j;
}

json schedule_json(const ScheduleConfig& c) {
  json j{{"kind", c.kind}, {"t_min", c.t_min}};
  if (c.kind == "geometric") {
    j["sigma_min"] = c.sigma_min;
    j["sigma_max"] = c.sigma_max;
  } else {
    j["eps"] = c.eps;
  }
  return j;
}

json model_json(const ModelConfig& c) {
  return json{{"backend", c.backend},
              {"embed", c.embed},
              {"hidden", c.hidden},
              {"noise_features", c.noise_features},
              {"init_seed", c.init_seed}};
}

json training_json(const TrainConfig& c) {
  return json{{"steps", c.steps},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"warmup", c.warmup},
              {"clip_norm", c.clip_norm},
              {"ema_decay", c.ema_decay},
              {"seed", c.seed},
              {"loss", train_loss_name(c.loss)},
              {"exact", c.exact},
              {"sigma_bar", c.sigma_bar},
              {"sigma_weight", c.sigma_weight},
              {"val_sequences", c.val_sequences},
              {"val_every", c.val_every},
              {"val_draws", c.val_draws}};
}

json sampling_json(const SamplingConfig& c) {
  return json{{"method", c.method},
              {"steps", c.steps},
              {"num_samples", c.num_samples},
              {"seed", c.seed},
              {"grid", c.grid}};
}

json corpus_json(const CorpusConfig& c) {
  json j{{"kind", c.kind}};
  if (c.kind == "file" || c.kind == "text") {
    j["path"] = c.path;
  } else {
    j["count"] = c.count;
    j["seed"] = c.seed;
  }
  return j;
}

}  // namespace

void RunConfig::validate() const {
  if (seq_len < 1) throw ConfigError("seq_len must be positive");
  if (process.kind != "uniform" && process.kind != "absorbing")
    throw ConfigError("unknown process kind '" + process.kind + "'");
  if (process.n < 2) throw ConfigError("process.n must be at least 2");
  if (process.scale < 0.0) throw ConfigError("process.scale must be nonnegative");
  if (schedule.kind != "geometric" && schedule.kind != "loglinear")
    throw ConfigError("unknown schedule kind '" + schedule.kind + "'");
  if (!(schedule.t_min > 0.0) || !(schedule.t_min < 1.0))
    throw ConfigError("schedule.t_min must lie in (0, 1)");
  if (schedule.kind == "geometric" &&
      (!(schedule.sigma_min > 0.0) || !(schedule.sigma_max > schedule.sigma_min)))
    throw ConfigError("geometric schedule needs 0 < sigma_min < sigma_max");
  if (schedule.kind == "loglinear" && (!(schedule.eps > 0.0) || !(schedule.eps < 1.0)))
    throw ConfigError("loglinear schedule needs eps in (0, 1)");
  if (model.backend != "mlp" && model.backend != "mean_mlp" && model.backend != "tabular")
    throw ConfigError("unknown model backend '" + model.backend + "'");
  if (model.backend == "mean_mlp" && process.kind != "absorbing")
    throw ConfigError("mean_mlp requires the absorbing process");
  if (model.embed < 1 || model.hidden < 1 || model.noise_features < 1)
    throw ConfigError("model dimensions must be positive");
  if (training.steps < 0) throw ConfigError("training.steps must be nonnegative");
  if (training.batch_size < 0) throw ConfigError("training.batch_size must be nonnegative");
  if (!(training.lr > 0.0)) throw ConfigError("training.lr must be positive");
  if (training.warmup < 0) throw ConfigError("training.warmup must be nonnegative");
  if (!(training.clip_norm > 0.0)) throw ConfigError("training.clip_norm must be positive");
  if (!(training.ema_decay >= 0.0) || !(training.ema_decay < 1.0))
    throw ConfigError("training.ema_decay must lie in [0, 1)");
  if (training.exact && training.loss != TrainLoss::kDseFixed)
    throw ConfigError("training.exact requires loss dse_fixed");
  if (training.loss == TrainLoss::kDseFixed && !(training.sigma_bar > 0.0))
    throw ConfigError("training.sigma_bar must be positive");
  if (training.val_sequences < 1) throw ConfigError("training.val_sequences must be positive");
  if (training.val_every < 0) throw ConfigError("training.val_every must be nonnegative");
  if (training.val_draws < 1) throw ConfigError("training.val_draws must be positive");
  parse_sample_method(sampling.method);
  parse_time_grid(sampling.grid);
  if (sampling.steps < 1) throw ConfigError("sampling.steps must be positive");
  if (sampling.num_samples < 1) throw ConfigError("sampling.num_samples must be positive");
  if (corpus.kind == "file" || corpus.kind == "text") {
    if (corpus.path.empty()) throw ConfigError("corpus.path must not be empty");
  } else if (corpus.kind == "iid" || corpus.kind == "markov") {
    if (corpus.count < 1) throw ConfigError("corpus.count must be positive");
  } else {
    throw ConfigError("unknown corpus kind '" + corpus.kind + "'");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  RunConfig c;
  ObjectReader r(j, "config");
  r.get("seq_len", c.seq_len);
  r.get("output_dir", c.output_dir);
  const auto section = [&](const char* key, auto parse, auto& out) {
    if (r.has(key)) {
      out = parse(j.at(key));
      r.mark(key);
    }
  };
  section("process", parse_process, c.process);
  section("schedule", parse_schedule, c.schedule);
  section("model", parse_model, c.model);
  section("training", parse_training, c.training);
  section("sampling", parse_sampling, c.sampling);
  section("corpus", parse_corpus, c.corpus);
  r.finish();
  c.validate();
  return c;
}

std::string serialize_run_config(const RunConfig& cfg) {
  json j{{"seq_len", cfg.seq_len},     {"output_dir", cfg.output_dir},
         {"process", process_json(cfg.process)},
         {"schedule", schedule_json(cfg.schedule)},
         {"model", model_json(cfg.model)},
         {"training", training_json(cfg.training)},
         {"sampling", sampling_json(cfg.sampling)},
         {"corpus", corpus_json(cfg.corpus)}};
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << serialize_run_config(cfg);
  if (!out) throw IoError("failed writing config file: " + path);
}

TransitionSpec make_transition_spec(const ProcessConfig& cfg) {
  if (cfg.kind == "uniform") {
    const double scale = cfg.scale > 0.0 ? cfg.scale : 1.0 / cfg.n;
    return TransitionSpec::uniform(cfg.n, scale);
  }
  if (cfg.kind == "absorbing") {
    const double scale = cfg.scale > 0.0 ? cfg.scale : 1.0;
    return TransitionSpec::absorbing(cfg.n, scale, cfg.leak_eta);
  }
  throw ConfigError("unknown process kind '" + cfg.kind + "'");
}

NoiseSchedule make_schedule(const ScheduleConfig& cfg) {
  if (cfg.kind == "geometric")
    return NoiseSchedule::geometric(cfg.sigma_min, cfg.sigma_max, cfg.t_min);
  if (cfg.kind == "loglinear") return NoiseSchedule::log_linear(cfg.eps, cfg.t_min);
  throw ConfigError("unknown schedule kind '" + cfg.kind + "'");
}

std::unique_ptr<ScoreModel> make_model(const ModelConfig& cfg, int seq_len,
                                       const TransitionSpec& spec) {
  const MlpDims dims{cfg.embed, cfg.hidden, cfg.noise_features};
  if (cfg.backend == "mlp") return std::make_unique<MlpScore>(seq_len, spec, dims, cfg.init_seed);
  if (cfg.backend == "mean_mlp")
    return std::make_unique<MeanMlpScore>(seq_len, spec, dims, cfg.init_seed);
  if (cfg.backend == "tabular") return std::make_unique<TabularScore>(seq_len, spec);
  throw ConfigError("unknown model backend '" + cfg.backend + "'");
}

SampleMethod parse_sample_method(const std::string& name) {
  if (name == "euler") return SampleMethod::kEuler;
  if (name == "tweedie") return SampleMethod::kTweedie;
  if (name == "exact-tweedie") return SampleMethod::kExactTweedie;
  throw ConfigError("unknown sampling method '" + name + "'");
}

TimeGridKind parse_time_grid(const std::string& name) {
  if (name == "uniform") return TimeGridKind::kUniform;
  if (name == "geometric-sigma") return TimeGridKind::kGeometricSigma;
  throw ConfigError("unknown time grid '" + name + "'");
}

}  // namespace sedd
