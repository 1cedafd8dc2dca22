// Python bindings for the core operations: processes, schedules, score
// models, losses, training, sampling, likelihood bounds and the self-check
// suite. Numpy arrays at the boundary, plain dicts for result bundles.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sedd/checkpoint.hpp"
#include "sedd/config.hpp"
#include "sedd/corpus.hpp"
#include "sedd/enumerated.hpp"
#include "sedd/errors.hpp"
#include "sedd/likelihood.hpp"
#include "sedd/losses.hpp"
#include "sedd/oracle.hpp"
#include "sedd/process.hpp"
#include "sedd/samplers.hpp"
#include "sedd/scores.hpp"
#include "sedd/training.hpp"
#include "sedd/verify.hpp"

namespace py = pybind11;
using namespace sedd;

namespace {

using IntRows = py::array_t<int, py::array::c_style | py::array::forcecast>;
using DoubleVec = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_array(std::span<const double> v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<float> to_array_f32(std::span<const float> v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<int> rows_to_array(const std::vector<std::vector<int>>& rows, int d) {
  py::array_t<int> out({static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(d)});
  auto view = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < view.shape(0); ++i)
    for (py::ssize_t j = 0; j < view.shape(1); ++j) view(i, j) = rows[(size_t)i][(size_t)j];
  return out;
}

std::vector<std::vector<int>> rows_from_array(const IntRows& rows) {
  if (rows.ndim() != 2) throw ArgumentError("sequences must be a 2-d integer array");
  auto view = rows.unchecked<2>();
  std::vector<std::vector<int>> out((size_t)view.shape(0),
                                    std::vector<int>((size_t)view.shape(1)));
  for (py::ssize_t i = 0; i < view.shape(0); ++i)
    for (py::ssize_t j = 0; j < view.shape(1); ++j) out[(size_t)i][(size_t)j] = view(i, j);
  return out;
}

Corpus corpus_from_rows(const IntRows& rows, const TransitionSpec& spec) {
  Corpus c;
  c.vocab = spec.vocab();
  c.sequences = rows_from_array(rows);
  if (c.sequences.empty()) throw ArgumentError("sequences array is empty");
  c.seq_len = static_cast<int>(c.sequences.front().size());
  c.validate();
  return c;
}

// Excluded entries come back as NaN so numpy consumers cannot read them by
// accident without noticing.
py::array_t<double> eval_to_array(const ScoreEval& ev) {
  const int d = ev.seq_len(), S = ev.num_states();
  py::array_t<double> out({static_cast<py::ssize_t>(d), static_cast<py::ssize_t>(S)});
  auto view = out.mutable_unchecked<2>();
  for (int pos = 0; pos < d; ++pos)
    for (int dest = 0; dest < S; ++dest)
      view(pos, dest) = ev.is_excluded(pos, dest) ? std::numeric_limits<double>::quiet_NaN()
                                                  : ev.score(pos, dest);
  return out;
}

WeightFn weights_from(const std::string& kind, const std::optional<TransitionSpec>& spec,
                      double sigma) {
  if (kind == "unit") return unit_weights();
  if (kind == "forward_rate") {
    if (!spec) throw ArgumentError("forward_rate weights need a transition spec");
    return forward_rate_weights(*spec, sigma);
  }
  throw ArgumentError("weights must be 'unit' or 'forward_rate', got '" + kind + "'");
}

SamplerConfig sampler_config(const std::string& method, const std::string& grid, int steps) {
  SamplerConfig cfg;
  cfg.method = parse_sample_method(method);
  cfg.grid = parse_time_grid(grid);
  cfg.steps = steps;
  return cfg;
}

py::dict sample_result_dict(const SampleResult& res, int d) {
  py::dict out;
  out["sequences"] = rows_to_array(res.sequences, d);
  out["clipped_mass"] = res.clipped_mass;
  return out;
}

}  // namespace

PYBIND11_MODULE(_sedd, m) {
  m.doc() = "Desk-scale lab for score-entropy discrete diffusion over token sequences";

  py::class_<TransitionSpec>(m, "TransitionSpec",
                             "Structured token-level CTMC generator (uniform or absorbing)")
      .def_static(
          "uniform",
          [](int n, std::optional<double> scale) {
            return scale ? TransitionSpec::uniform(n, *scale) : TransitionSpec::uniform(n);
          },
          py::arg("n"), py::arg("scale") = std::nullopt)
      .def_static("absorbing", &TransitionSpec::absorbing, py::arg("n"), py::arg("scale") = 1.0,
                  py::arg("leak_eta") = 1e-5)
      .def_property_readonly("kind",
                             [](const TransitionSpec& s) {
                               return std::string(s.is_absorbing() ? "absorbing" : "uniform");
                             })
      .def_property_readonly("is_absorbing", &TransitionSpec::is_absorbing)
      .def_property_readonly("vocab", &TransitionSpec::vocab)
      .def_property_readonly("num_states", &TransitionSpec::num_states)
      .def_property_readonly("mask_state", &TransitionSpec::mask_state)
      .def_property_readonly("scale", &TransitionSpec::scale)
      .def("rate", &TransitionSpec::rate, py::arg("dest"), py::arg("src"))
      .def("transition_prob", &TransitionSpec::transition_prob, py::arg("sigma_bar"),
           py::arg("dest"), py::arg("src"))
      .def(
          "transition_matrix",
          [](const TransitionSpec& s, double sigma_bar) {
            const int S = s.num_states();
            py::array_t<double> out({(py::ssize_t)S, (py::ssize_t)S});
            auto view = out.mutable_unchecked<2>();
            for (int dest = 0; dest < S; ++dest)
              for (int src = 0; src < S; ++src)
                view(dest, src) = s.transition_prob(sigma_bar, dest, src);
            return out;
          },
          py::arg("sigma_bar"), "Dense exp(sigma_bar * Q), entry [dest, src]")
      .def("stationary",
           [](const TransitionSpec& s) {
             std::vector<double> v = s.stationary();
             return to_array(v);
           })
      .def("__repr__", [](const TransitionSpec& s) {
        return "TransitionSpec(" + std::string(s.is_absorbing() ? "absorbing" : "uniform") +
               ", n=" + std::to_string(s.vocab()) + ")";
      });

  py::class_<NoiseSchedule>(m, "NoiseSchedule", "Accumulated noise sigma_bar(t) on [0, 1]")
      .def_static("geometric", &NoiseSchedule::geometric, py::arg("sigma_min"),
                  py::arg("sigma_max"), py::arg("t_min") = 1e-3)
      .def_static("log_linear", &NoiseSchedule::log_linear, py::arg("eps"),
                  py::arg("t_min") = 1e-3)
      .def("sigma_bar", &NoiseSchedule::sigma_bar, py::arg("t"))
      .def("sigma", &NoiseSchedule::sigma, py::arg("t"))
      .def("time_of_sigma_bar", &NoiseSchedule::time_of_sigma_bar, py::arg("sigma_bar"))
      .def_property_readonly("t_min", &NoiseSchedule::t_min);

  py::class_<EnumeratedDist>(m, "EnumeratedDist",
                             "Exhaustive distribution over all num_states^d sequences")
      .def(py::init([](int d, int num_states, std::optional<DoubleVec> p) {
             EnumeratedDist e(d, num_states);
             if (p) {
               if ((size_t)p->size() != e.p.size())
                 throw ArgumentError("probability array has the wrong length");
               std::copy(p->data(), p->data() + p->size(), e.p.begin());
             }
             return e;
           }),
           py::arg("d"), py::arg("num_states"), py::arg("p") = std::nullopt)
      .def_readonly("d", &EnumeratedDist::d)
      .def_property_readonly("num_states", [](const EnumeratedDist& e) { return e.S; })
      .def_property(
          "p", [](const EnumeratedDist& e) { return to_array(e.p); },
          [](EnumeratedDist& e, const DoubleVec& arr) {
            if ((size_t)arr.size() != e.p.size())
              throw ArgumentError("probability array has the wrong length");
            std::copy(arr.data(), arr.data() + arr.size(), e.p.begin());
          })
      .def("at", [](const EnumeratedDist& e, const std::vector<int>& seq) { return e.at(seq); },
           py::arg("seq"))
      .def("normalize", &EnumeratedDist::normalize)
      .def("validate", &EnumeratedDist::validate, py::arg("tol") = 1e-9);

  py::class_<ScoreModel>(m, "ScoreModel", "Concrete-score network interface")
      .def_property_readonly("seq_len", &ScoreModel::seq_len)
      .def_property_readonly("num_states", &ScoreModel::num_states)
      .def_property_readonly("num_params", &ScoreModel::num_params)
      .def("get_params",
           [](const ScoreModel& mdl) { return to_array(mdl.params()); })
      .def("set_params",
           [](ScoreModel& mdl, const DoubleVec& arr) {
             auto dst = mdl.params();
             if ((size_t)arr.size() != dst.size())
               throw ArgumentError("parameter array has the wrong length");
             std::copy(arr.data(), arr.data() + arr.size(), dst.begin());
           },
           py::arg("params"))
      .def(
          "scores",
          [](const ScoreModel& mdl, const std::vector<int>& seq, double sigma_bar) {
            return eval_to_array(mdl.eval(seq, sigma_bar));
          },
          py::arg("seq"), py::arg("sigma_bar"),
          "Score ratios as a (seq_len, num_states) array; excluded entries are NaN");

  py::class_<TabularScore, ScoreModel>(m, "TabularScore",
                                       "Lookup-table scores for one fixed noise level")
      .def(py::init<int, const TransitionSpec&>(), py::arg("d"), py::arg("spec"));

  py::class_<MlpScore, ScoreModel>(m, "MlpScore", "Noise-conditioned MLP score network")
      .def(py::init([](int d, const TransitionSpec& spec, int embed, int hidden,
                       int noise_features, uint64_t init_seed) {
             return MlpScore(d, spec, MlpDims{embed, hidden, noise_features}, init_seed);
           }),
           py::arg("d"), py::arg("spec"), py::arg("embed") = 16, py::arg("hidden") = 64,
           py::arg("noise_features") = 8, py::arg("init_seed") = 7);

  py::class_<MeanMlpScore, ScoreModel>(
      m, "MeanMlpScore", "Mean-parameterized MLP (absorbing process only)")
      .def(py::init([](int d, const TransitionSpec& spec, int embed, int hidden,
                       int noise_features, uint64_t init_seed) {
             return MeanMlpScore(d, spec, MlpDims{embed, hidden, noise_features}, init_seed);
           }),
           py::arg("d"), py::arg("spec"), py::arg("embed") = 16, py::arg("hidden") = 64,
           py::arg("noise_features") = 8, py::arg("init_seed") = 7);

  py::class_<ExactScoreModel, ScoreModel>(
      m, "ExactScoreModel", "True score ratios of a known data distribution")
      .def(py::init<EnumeratedDist, const TransitionSpec&>(), py::arg("p0"), py::arg("spec"));

  // oracle-side distribution machinery
  m.def("evolve", &evolve, py::arg("dist"), py::arg("spec"), py::arg("sigma_bar"),
        py::arg("inverse") = false,
        "Push a sequence distribution through the forward kernel on every axis");
  m.def("embed_clean", &embed_clean, py::arg("p0"), py::arg("spec"),
        "Embed a clean-vocab distribution into the full state space");
  m.def(
      "axis_marginal",
      [](const EnumeratedDist& dist, int pos) {
        std::vector<double> v = axis_marginal(dist, pos);
        return to_array(v);
      },
      py::arg("dist"), py::arg("pos"));
  m.def(
      "empirical_from_samples",
      [](const IntRows& rows, int num_states) {
        std::vector<std::vector<int>> seqs = rows_from_array(rows);
        if (seqs.empty()) throw ArgumentError("sequences array is empty");
        return empirical_from_samples(seqs, (int)seqs.front().size(), num_states);
      },
      py::arg("sequences"), py::arg("num_states"));
  m.def(
      "exact_concrete_score",
      [](const EnumeratedDist& dist, const TransitionSpec& spec, double sigma_bar,
         const std::vector<int>& seq) {
        return eval_to_array(exact_concrete_score(dist, spec, sigma_bar, seq));
      },
      py::arg("dist"), py::arg("spec"), py::arg("sigma_bar"), py::arg("seq"));
  m.def("tv", py::overload_cast<const EnumeratedDist&, const EnumeratedDist&>(&tv),
        py::arg("a"), py::arg("b"), "Total variation distance");
  m.def("kl", py::overload_cast<const EnumeratedDist&, const EnumeratedDist&>(&kl),
        py::arg("a"), py::arg("b"), "KL divergence; +inf when unsupported mass appears");

  // pointwise loss terms and enumerated expected losses
  m.def("k_const", &k_const, py::arg("a"), "a (log a - 1), the score-entropy floor term");
  m.def("se_term", &se_term, py::arg("s"), py::arg("a"), py::arg("w") = 1.0);
  m.def("csm_term", &csm_term, py::arg("s"), py::arg("a"), py::arg("w") = 1.0);
  m.def(
      "expected_score_entropy",
      [](const ScoreModel& model, const EnumeratedDist& pt, const TransitionSpec& spec,
         double sigma_bar, const std::string& weights, double weight_sigma) {
        return expected_score_entropy(model, pt, spec, sigma_bar,
                                      weights_from(weights, spec, weight_sigma));
      },
      py::arg("model"), py::arg("pt"), py::arg("spec"), py::arg("sigma_bar"),
      py::arg("weights") = "unit", py::arg("weight_sigma") = 1.0);
  m.def(
      "expected_implicit_score_entropy",
      [](const ScoreModel& model, const EnumeratedDist& pt, double sigma_bar,
         const std::string& weights, const std::optional<TransitionSpec>& spec,
         double weight_sigma) {
        return expected_implicit_score_entropy(model, pt, sigma_bar,
                                               weights_from(weights, spec, weight_sigma));
      },
      py::arg("model"), py::arg("pt"), py::arg("sigma_bar"), py::arg("weights") = "unit",
      py::arg("spec") = std::nullopt, py::arg("weight_sigma") = 1.0);
  m.def(
      "expected_denoising_score_entropy",
      [](const ScoreModel& model, const EnumeratedDist& p0, const TransitionSpec& spec,
         double sigma_bar, const std::string& weights, double weight_sigma) {
        return expected_denoising_score_entropy(model, p0, spec, sigma_bar,
                                                weights_from(weights, spec, weight_sigma));
      },
      py::arg("model"), py::arg("p0"), py::arg("spec"), py::arg("sigma_bar"),
      py::arg("weights") = "unit", py::arg("weight_sigma") = 1.0);

  // training
  m.def(
      "train",
      [](ScoreModel& model, const TransitionSpec& spec, const NoiseSchedule& schedule,
         const IntRows& sequences, int steps, int batch_size, double lr, int warmup,
         double clip_norm, double ema_decay, uint64_t seed, const std::string& loss, bool exact,
         double sigma_bar, double sigma_weight, bool apply_ema) {
        Corpus corpus = corpus_from_rows(sequences, spec);
        TrainConfig cfg;
        cfg.steps = steps;
        cfg.batch_size = batch_size;
        cfg.lr = lr;
        cfg.warmup = warmup;
        cfg.clip_norm = clip_norm;
        cfg.ema_decay = ema_decay;
        cfg.seed = seed;
        if (loss == "dwdse")
          cfg.loss = TrainLoss::kDwdse;
        else if (loss == "dse_fixed")
          cfg.loss = TrainLoss::kDseFixed;
        else
          throw ArgumentError("loss must be 'dwdse' or 'dse_fixed', got '" + loss + "'");
        cfg.exact = exact;
        cfg.sigma_bar = sigma_bar;
        cfg.sigma_weight = sigma_weight;
        cfg.val_every = 0;
        TrainResult res;
        {
          py::gil_scoped_release release;
          res = train(model, spec, schedule, corpus, cfg, nullptr);
          if (apply_ema) std::copy(res.ema.begin(), res.ema.end(), model.params().begin());
        }
        py::dict out;
        out["steps"] = res.steps;
        out["final_loss"] = res.final_loss;
        out["ema"] = to_array(res.ema);
        return out;
      },
      py::arg("model"), py::arg("spec"), py::arg("schedule"), py::arg("sequences"),
      py::arg("steps") = 400, py::arg("batch_size") = 0, py::arg("lr") = 2e-3,
      py::arg("warmup") = 20, py::arg("clip_norm") = 1.0, py::arg("ema_decay") = 0.999,
      py::arg("seed") = 1, py::arg("loss") = "dwdse", py::arg("exact") = false,
      py::arg("sigma_bar") = 1.0, py::arg("sigma_weight") = 1.0, py::arg("apply_ema") = false,
      "Adam on the weighted denoising score entropy; returns steps, final_loss and the EMA");

  // sampling
  m.def(
      "sample",
      [](const ScoreModel& model, const TransitionSpec& spec, const NoiseSchedule& schedule,
         int num_samples, int steps, const std::string& method, const std::string& grid,
         uint64_t seed) {
        SamplerConfig cfg = sampler_config(method, grid, steps);
        SampleResult res;
        {
          py::gil_scoped_release release;
          Rng rng(seed);
          res = sample(model, spec, schedule, cfg, num_samples, rng);
        }
        return sample_result_dict(res, model.seq_len());
      },
      py::arg("model"), py::arg("spec"), py::arg("schedule"), py::arg("num_samples"),
      py::arg("steps") = 64, py::arg("method") = "tweedie", py::arg("grid") = "uniform",
      py::arg("seed") = 0);
  m.def(
      "infill",
      [](const ScoreModel& model, const TransitionSpec& spec, const NoiseSchedule& schedule,
         const std::vector<std::pair<int, int>>& pinned, int num_samples, int steps,
         const std::string& method, const std::string& grid, uint64_t seed) {
        SamplerConfig cfg = sampler_config(method, grid, steps);
        PromptSpec prompt;
        prompt.pinned = pinned;
        SampleResult res;
        {
          py::gil_scoped_release release;
          Rng rng(seed);
          res = infill(model, spec, schedule, cfg, prompt, num_samples, rng);
        }
        return sample_result_dict(res, model.seq_len());
      },
      py::arg("model"), py::arg("spec"), py::arg("schedule"), py::arg("pinned"),
      py::arg("num_samples"), py::arg("steps") = 64, py::arg("method") = "tweedie",
      py::arg("grid") = "uniform", py::arg("seed") = 0,
      "Sample with (position, token) pairs held fixed");

  // likelihood
  m.def(
      "nll_bound",
      [](const ScoreModel& model, const TransitionSpec& spec, const NoiseSchedule& schedule,
         const std::vector<int>& x0, int num_samples, uint64_t seed) {
        NllBound b;
        {
          py::gil_scoped_release release;
          Rng rng(seed);
          b = nll_bound(model, spec, schedule, x0, num_samples, rng);
        }
        py::dict out;
        out["bound"] = b.bound;
        out["integral"] = b.integral;
        out["integral_std_err"] = b.integral_std_err;
        out["prior"] = b.prior;
        out["samples"] = b.samples;
        return out;
      },
      py::arg("model"), py::arg("spec"), py::arg("schedule"), py::arg("x0"),
      py::arg("num_samples") = 128, py::arg("seed") = 0);
  m.def(
      "corpus_eval",
      [](const ScoreModel& model, const TransitionSpec& spec, const NoiseSchedule& schedule,
         const IntRows& sequences, int samples_per_sequence, uint64_t seed) {
        Corpus corpus = corpus_from_rows(sequences, spec);
        EvalReport rep;
        {
          py::gil_scoped_release release;
          Rng rng(seed);
          rep = corpus_eval(model, spec, schedule, corpus, samples_per_sequence, rng);
        }
        py::dict out;
        out["avg_bound"] = rep.avg_bound;
        out["std_err"] = rep.std_err;
        out["perplexity"] = rep.perplexity;
        out["bits_per_token"] = rep.bits_per_token;
        out["avg_prior"] = rep.avg_prior;
        out["sequences"] = rep.sequences;
        out["samples_per_sequence"] = rep.samples_per_sequence;
        return out;
      },
      py::arg("model"), py::arg("spec"), py::arg("schedule"), py::arg("sequences"),
      py::arg("samples_per_sequence") = 128, py::arg("seed") = 0);
  m.def("prior_kl", &prior_kl, py::arg("spec"), py::arg("schedule"), py::arg("x0"),
        "KL from the fully noised point mass to the reverse start distribution");
  m.def(
      "exact_reverse_solve",
      [](const ScoreModel& model, const TransitionSpec& spec, const NoiseSchedule& schedule,
         int num_steps) {
        ReverseSolveResult res;
        {
          py::gil_scoped_release release;
          res = exact_reverse_solve(model, spec, schedule, num_steps);
        }
        py::dict out;
        out["dist"] = res.dist;
        out["clipped_mass"] = res.clipped_mass;
        out["steps"] = res.steps;
        return out;
      },
      py::arg("model"), py::arg("spec"), py::arg("schedule"), py::arg("num_steps"),
      "Integrate the model-induced reverse process on the enumerated state space");

  // self-checks
  m.def(
      "verify",
      [](uint64_t seed) {
        std::vector<CheckRecord> records;
        {
          py::gil_scoped_release release;
          records = run_verification(seed);
        }
        py::list out;
        for (const CheckRecord& r : records) {
          py::dict row;
          row["name"] = r.name;
          row["metric"] = r.metric;
          row["threshold"] = r.threshold;
          row["pass"] = r.pass;
          out.append(row);
        }
        return out;
      },
      py::arg("seed") = 0, "Run the oracle-backed consistency sweep");

  // toy corpora
  m.def(
      "gen_iid",
      [](int n, int d, uint64_t spec_seed, int count, uint64_t seed) {
        Corpus c = gen_iid(iid_spec(n, d, spec_seed), count, seed);
        return rows_to_array(c.sequences, d);
      },
      py::arg("n"), py::arg("d"), py::arg("spec_seed"), py::arg("count"), py::arg("seed"),
      "Draw sequences with independent positions from a seeded random token law");
  m.def(
      "iid_ground_truth",
      [](int n, int d, uint64_t spec_seed) { return iid_ground_truth(iid_spec(n, d, spec_seed)); },
      py::arg("n"), py::arg("d"), py::arg("spec_seed"));

  // checkpoint interop with the command line tool
  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        Checkpoint cp = load_checkpoint(path);
        py::dict out;
        out["step"] = cp.step;
        out["seq_len"] = cp.seq_len;
        out["rng_state"] = cp.rng_state;
        out["params"] = to_array_f32(cp.params);
        out["ema"] = to_array_f32(cp.ema);
        out["config"] = serialize_run_config(cp.config);
        return out;
      },
      py::arg("path"), "Read a training checkpoint; config comes back as a JSON string");
}
