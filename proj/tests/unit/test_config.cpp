#include <string>

#include "doctest.h"
#include "sedd/config.hpp"
#include "sedd/errors.hpp"

using namespace sedd;

TEST_CASE("empty object yields defaults and serializes canonically") {
  RunConfig cfg = parse_run_config("{}");
  CHECK(cfg.seq_len == 4);
  CHECK(cfg.process.kind == "absorbing");
  CHECK(cfg.training.loss == TrainLoss::kDwdse);
  cfg.validate();

  std::string text = serialize_run_config(cfg);
  RunConfig back = parse_run_config(text);
  CHECK(serialize_run_config(back) == text);  // fixed point
}

TEST_CASE("round trip preserves every field") {
  std::string text = R"({
    "seq_len": 6,
    "output_dir": "runs/x",
    "process": {"kind": "absorbing", "n": 5, "scale": 0.3},
    "schedule": {"kind": "loglinear", "eps": 0.01, "t_min": 0.002},
    "model": {"backend": "mean_mlp", "embed": 4, "hidden": 12, "noise_features": 2, "init_seed": 44},
    "training": {"steps": 10, "batch_size": 3, "lr": 0.01, "warmup": 2, "clip_norm": 0.5,
                 "ema_decay": 0.99, "seed": 5, "loss": "dse_fixed", "exact": true,
                 "sigma_bar": 0.7, "sigma_weight": 2.0, "val_sequences": 4, "val_every": 5,
                 "val_draws": 2},
    "sampling": {"method": "euler", "steps": 12, "num_samples": 3, "seed": 8, "grid": "geometric-sigma"},
    "corpus": {"kind": "markov", "count": 64, "seed": 21}
  })";
  RunConfig cfg = parse_run_config(text);
  CHECK(cfg.process.scale == doctest::Approx(0.3));
  CHECK(cfg.schedule.kind == "loglinear");
  CHECK(cfg.training.loss == TrainLoss::kDseFixed);
  CHECK(cfg.training.exact);
  CHECK(cfg.sampling.grid == "geometric-sigma");
  CHECK(cfg.corpus.kind == "markov");

  RunConfig back = parse_run_config(serialize_run_config(cfg));
  CHECK(serialize_run_config(back) == serialize_run_config(cfg));
  CHECK(back.training.sigma_bar == doctest::Approx(0.7));
  CHECK(back.model.init_seed == 44);
}

TEST_CASE("unknown keys are rejected everywhere") {
  CHECK_THROWS_AS(parse_run_config(R"({"sequence_length": 4})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"process": {"kind": "uniform", "N": 4}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schedule": {"kind": "geometric", "sigma": 1}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"training": {"learning_rate": 0.1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"sampling": {"method": "tweedie", "n": 2}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"corpus": {"kind": "iid", "file": "x"}})"), ConfigError);
}

TEST_CASE("schedule keys are kind conditional") {
  // loglinear rejects geometric-only keys
  CHECK_THROWS_AS(parse_run_config(R"({"schedule": {"kind": "loglinear", "sigma_min": 0.1}})"),
                  ConfigError);
  // geometric rejects eps
  CHECK_THROWS_AS(parse_run_config(R"({"schedule": {"kind": "geometric", "eps": 0.1}})"),
                  ConfigError);
  // serialized geometric config carries no eps key
  RunConfig cfg = parse_run_config(R"({"schedule": {"kind": "geometric"}})");
  CHECK(serialize_run_config(cfg).find("\"eps\"") == std::string::npos);
}

TEST_CASE("type errors surface as config errors") {
  CHECK_THROWS_AS(parse_run_config(R"({"seq_len": "four"})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"process": []})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("not json"), ConfigError);
}

TEST_CASE("validation catches cross-field mistakes") {
  RunConfig cfg = parse_run_config("{}");
  cfg.model.backend = "mean_mlp";
  cfg.process.kind = "uniform";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = parse_run_config("{}");
  cfg.training.exact = true;  // exact mode needs the fixed-level loss
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = parse_run_config("{}");
  cfg.seq_len = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = parse_run_config("{}");
  cfg.sampling.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = parse_run_config("{}");
  cfg.corpus.kind = "file";  // file kind needs a path
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("factories honor the kind defaults") {
  ProcessConfig p;
  p.kind = "uniform";
  p.n = 4;
  p.scale = 0.0;
  TransitionSpec uni = make_transition_spec(p);
  CHECK(uni.scale() == doctest::Approx(0.25));

  p.kind = "absorbing";
  TransitionSpec ab = make_transition_spec(p);
  CHECK(ab.scale() == doctest::Approx(1.0));
  CHECK(ab.num_states() == 5);

  ScheduleConfig s;
  s.kind = "loglinear";
  NoiseSchedule sched = make_schedule(s);
  CHECK(sched.kind() == ScheduleKind::kLogLinear);
}

TEST_CASE("model factory builds each backend") {
  TransitionSpec ab = TransitionSpec::absorbing(3, 1.0);
  ModelConfig m;
  m.backend = "mlp";
  CHECK(make_model(m, 3, ab)->num_params() > 0);
  m.backend = "mean_mlp";
  CHECK(make_model(m, 3, ab)->kind() == TransitionKind::kAbsorbing);
  m.backend = "tabular";
  CHECK(make_model(m, 2, ab)->num_params() == 16 * 2 * 4);
  m.backend = "nope";
  CHECK_THROWS_AS(make_model(m, 2, ab), ConfigError);
}

TEST_CASE("method and grid parsing") {
  CHECK(parse_sample_method("euler") == SampleMethod::kEuler);
  CHECK(parse_sample_method("tweedie") == SampleMethod::kTweedie);
  CHECK(parse_sample_method("exact-tweedie") == SampleMethod::kExactTweedie);
  CHECK_THROWS_AS(parse_sample_method("rk4"), ConfigError);
  CHECK(parse_time_grid("uniform") == TimeGridKind::kUniform);
  CHECK(parse_time_grid("geometric-sigma") == TimeGridKind::kGeometricSigma);
  CHECK_THROWS_AS(parse_time_grid("log"), ConfigError);
}
