// Command line front end: train / sample / infill / eval / verify / landscape.
//
// Exit codes: 0 success, 2 usage, 3 invalid configuration or arguments,
// 4 io or checkpoint failure, 5 verification failure, 6 numerical abort.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sedd/checkpoint.hpp"
#include "sedd/config.hpp"
#include "sedd/corpus.hpp"
#include "sedd/errors.hpp"
#include "sedd/likelihood.hpp"
#include "sedd/losses.hpp"
#include "sedd/samplers.hpp"
#include "sedd/training.hpp"
#include "sedd/verify.hpp"

namespace {

using nlohmann::json;

// Flag > SEDD_OUTPUT_DIR > config value.
std::string resolve_output_dir(const std::string& flag_value, const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SEDD_OUTPUT_DIR"); env && *env) return env;
  return config_value;
}

struct LoadedModel {
  sedd::Checkpoint cp;
  sedd::TransitionSpec spec = sedd::TransitionSpec::uniform(2);
  sedd::NoiseSchedule schedule = sedd::NoiseSchedule::geometric(1e-3, 16.0);
  std::unique_ptr<sedd::ScoreModel> model;
};

LoadedModel load_model(const std::string& path, bool use_raw) {
  LoadedModel lm;
  lm.cp = sedd::load_checkpoint(path);
  lm.spec = sedd::make_transition_spec(lm.cp.config.process);
  lm.schedule = sedd::make_schedule(lm.cp.config.schedule);
  lm.model = sedd::make_model(lm.cp.config.model, lm.cp.seq_len, lm.spec);
  const std::vector<float>& src = use_raw ? lm.cp.params : lm.cp.ema;
  auto dst = lm.model->params();
  if (src.size() != dst.size())
    throw sedd::CheckpointFormatError("checkpoint parameter count does not match the model");
  for (size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]);
  return lm;
}

sedd::PromptSpec parse_prompt_string(const std::string& text) {
  sedd::PromptSpec prompt;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw sedd::ArgumentError("prompt entry '" + item + "' is not pos:token");
    try {
      int pos = std::stoi(item.substr(0, colon));
      int tok = std::stoi(item.substr(colon + 1));
      prompt.pinned.emplace_back(pos, tok);
    } catch (const std::exception&) {
      throw sedd::ArgumentError("prompt entry '" + item + "' is not pos:token");
    }
  }
  if (prompt.pinned.empty()) throw sedd::ArgumentError("prompt is empty");
  return prompt;
}

sedd::PromptSpec parse_prompt_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sedd::IoError("cannot open prompt file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw sedd::ArgumentError("prompt file '" + path + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("pinned") || !doc["pinned"].is_array())
    throw sedd::ArgumentError("prompt file must be {\"pinned\": [[pos, token], ...]}");
  sedd::PromptSpec prompt;
  for (const auto& pair : doc["pinned"]) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer())
      throw sedd::ArgumentError("prompt file entries must be [pos, token] integer pairs");
    prompt.pinned.emplace_back(pair[0].get<int>(), pair[1].get<int>());
  }
  if (prompt.pinned.empty()) throw sedd::ArgumentError("prompt is empty");
  return prompt;
}

void write_sequences(std::ostream& out, const sedd::SampleResult& result, bool as_text,
                     const std::vector<uint32_t>& vocab) {
  for (const auto& seq : result.sequences) {
    if (as_text) {
      out << sedd::text_from_tokens(seq, vocab) << "\n";
    } else {
      for (size_t i = 0; i < seq.size(); ++i) out << (i ? " " : "") << seq[i];
      out << "\n";
    }
  }
}

int cmd_train(const std::string& config_path, const std::string& output_flag) {
  sedd::RunConfig cfg = sedd::load_run_config(config_path);
  cfg.output_dir = resolve_output_dir(output_flag, cfg.output_dir);
  cfg.validate();

  sedd::TransitionSpec spec = sedd::make_transition_spec(cfg.process);
  sedd::NoiseSchedule schedule = sedd::make_schedule(cfg.schedule);
  std::unique_ptr<sedd::ScoreModel> model = sedd::make_model(cfg.model, cfg.seq_len, spec);
  sedd::Corpus corpus = sedd::make_corpus(cfg.corpus, spec.vocab(), cfg.seq_len);

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw sedd::IoError("cannot create output directory '" + cfg.output_dir + "'");
  const std::string metrics_path = cfg.output_dir + "/metrics.jsonl";
  std::ofstream metrics(metrics_path);
  if (!metrics) throw sedd::IoError("cannot open '" + metrics_path + "' for writing");

  sedd::TrainResult result = sedd::train(*model, spec, schedule, corpus, cfg.training, &metrics);
  metrics.close();

  sedd::save_run_config(cfg, cfg.output_dir + "/config.json");

  sedd::Checkpoint cp;
  cp.config = cfg;
  cp.step = result.steps;
  cp.seq_len = cfg.seq_len;
  cp.rng_state = result.rng_state;
  cp.params.reserve(model->num_params());
  for (double v : model->params()) cp.params.push_back(static_cast<float>(v));
  cp.ema.reserve(result.ema.size());
  for (double v : result.ema) cp.ema.push_back(static_cast<float>(v));
  const std::string ckpt_path = cfg.output_dir + "/checkpoint.bin";
  sedd::save_checkpoint(cp, ckpt_path);

  json summary{{"steps", result.steps},
               {"final_loss", result.final_loss},
               {"checkpoint", ckpt_path},
               {"metrics", metrics_path},
               {"config", cfg.output_dir + "/config.json"}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

struct GenFlags {
  std::string checkpoint;
  std::string method, grid, out_path, vocab_path, prompt, prompt_file;
  int steps = -1;
  int num_samples = -1;
  uint64_t seed = 0;
  bool seed_set = false;
  bool raw = false;
  bool text = false;
};

int cmd_generate(const GenFlags& flags, bool infill_mode) {
  LoadedModel lm = load_model(flags.checkpoint, flags.raw);
  const sedd::SamplingConfig& defaults = lm.cp.config.sampling;

  sedd::SamplerConfig scfg;
  scfg.method = sedd::parse_sample_method(flags.method.empty() ? defaults.method : flags.method);
  scfg.grid = sedd::parse_time_grid(flags.grid.empty() ? defaults.grid : flags.grid);
  scfg.steps = flags.steps >= 0 ? flags.steps : defaults.steps;
  int num_samples = flags.num_samples >= 0 ? flags.num_samples : defaults.num_samples;
  uint64_t seed = flags.seed_set ? flags.seed : defaults.seed;

  sedd::PromptSpec prompt;
  if (infill_mode) {
    if (!flags.prompt.empty() && !flags.prompt_file.empty())
      throw sedd::ArgumentError("give either --prompt or --prompt-file, not both");
    if (!flags.prompt.empty())
      prompt = parse_prompt_string(flags.prompt);
    else if (!flags.prompt_file.empty())
      prompt = parse_prompt_file(flags.prompt_file);
    else
      throw sedd::ArgumentError("infill needs --prompt or --prompt-file");
  }

  std::vector<uint32_t> vocab;
  if (flags.text) {
    if (flags.vocab_path.empty()) throw sedd::ArgumentError("--text needs --vocab");
    vocab = sedd::load_vocab(flags.vocab_path);
  }

  sedd::Rng rng(seed);
  sedd::SampleResult result =
      sedd::infill(*lm.model, lm.spec, lm.schedule, scfg, prompt, num_samples, rng);

  if (!flags.out_path.empty()) {
    std::ofstream out(flags.out_path);
    if (!out) throw sedd::IoError("cannot open '" + flags.out_path + "' for writing");
    write_sequences(out, result, flags.text, vocab);
  } else {
    write_sequences(std::cout, result, flags.text, vocab);
  }
  if (result.clipped_mass > 0)
    std::cerr << "clipped probability mass: " << result.clipped_mass << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, int samples, uint64_t seed, bool raw, int limit) {
  LoadedModel lm = load_model(checkpoint, raw);
  sedd::Corpus corpus =
      sedd::make_corpus(lm.cp.config.corpus, lm.spec.vocab(), lm.cp.config.seq_len);
  if (limit > 0 && static_cast<size_t>(limit) < corpus.sequences.size())
    corpus.sequences.resize(static_cast<size_t>(limit));

  sedd::Rng rng(seed);
  sedd::EvalReport report = sedd::corpus_eval(*lm.model, lm.spec, lm.schedule, corpus, samples, rng);
  json doc{{"avg_bound", report.avg_bound},
           {"std_err", report.std_err},
           {"perplexity", report.perplexity},
           {"bits_per_token", report.bits_per_token},
           {"avg_prior", report.avg_prior},
           {"sequences", report.sequences},
           {"samples_per_sequence", report.samples_per_sequence}};
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_verify(uint64_t seed) {
  std::vector<sedd::CheckRecord> records = sedd::run_verification(seed);
  bool all_pass = true;
  for (const auto& r : records) {
    json line{{"name", r.name}, {"metric", r.metric}, {"threshold", r.threshold}, {"pass", r.pass}};
    std::cout << line.dump() << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 5;
}

int cmd_landscape(const std::string& out_path, double a, double s_min, double s_max, int points) {
  if (!(s_min > 0) || !(s_max > s_min)) throw sedd::ArgumentError("need 0 < s-min < s-max");
  if (points < 2) throw sedd::ArgumentError("need at least 2 points");
  if (a < 0) throw sedd::ArgumentError("ground-truth score must be nonnegative");

  std::ostringstream table;
  table << "s\tcsm\tse\n";
  for (int i = 0; i < points; ++i) {
    double s = s_min + (s_max - s_min) * i / (points - 1);
    table << s << "\t" << sedd::csm_term(s, a, 1.0) << "\t" << sedd::se_term(s, a, 1.0) << "\n";
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw sedd::IoError("cannot open '" + out_path + "' for writing");
    out << table.str();
  } else {
    std::cout << table.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete diffusion lab: score-entropy losses, CTMC kernels, samplers"};
  app.require_subcommand(1);

  std::string train_config, train_output;
  CLI::App* train = app.add_subcommand("train", "Optimize a model per a run configuration");
  train->add_option("--config", train_config, "Run configuration JSON")->required();
  train->add_option("--output-dir", train_output,
                    "Override the configured output directory (also: SEDD_OUTPUT_DIR)");

  GenFlags sample_flags, infill_flags;
  auto add_gen_flags = [](CLI::App* cmd, GenFlags& f) {
    cmd->add_option("checkpoint", f.checkpoint, "Checkpoint file")->required();
    cmd->add_option("--method", f.method, "euler | tweedie | exact-tweedie");
    cmd->add_option("--grid", f.grid, "uniform | geometric-sigma");
    cmd->add_option("--steps", f.steps, "Reverse integration steps");
    cmd->add_option("--num-samples", f.num_samples, "Sequences to generate");
    cmd->add_option("--seed", f.seed, "Sampling seed");
    cmd->add_flag("--raw", f.raw, "Use raw parameters instead of the EMA");
    cmd->add_option("--out", f.out_path, "Write sequences here instead of stdout");
    cmd->add_option("--vocab", f.vocab_path, "Vocabulary JSON for detokenization");
    cmd->add_flag("--text", f.text, "Emit detokenized text (needs --vocab)");
  };
  CLI::App* sample = app.add_subcommand("sample", "Generate sequences from a checkpoint");
  add_gen_flags(sample, sample_flags);
  CLI::App* infill = app.add_subcommand("infill", "Generate with pinned positions");
  add_gen_flags(infill, infill_flags);
  infill->add_option("--prompt", infill_flags.prompt, "Inline prompt pos:token,pos:token");
  infill->add_option("--prompt-file", infill_flags.prompt_file,
                     "JSON prompt {\"pinned\": [[pos, token], ...]}");

  std::string eval_checkpoint;
  int eval_samples = 128, eval_limit = 0;
  uint64_t eval_seed = 9;
  bool eval_raw = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Likelihood-bound report over the corpus");
  eval_cmd->add_option("checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--samples", eval_samples, "MC samples per sequence");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--limit", eval_limit, "Evaluate at most this many sequences (0 = all)");
  eval_cmd->add_flag("--raw", eval_raw, "Use raw parameters instead of the EMA");

  uint64_t verify_seed = 0;
  CLI::App* verify = app.add_subcommand("verify", "Run the oracle self-check suite");
  verify->add_option("--seed", verify_seed, "Suite seed");

  std::string land_out;
  double land_a = 0.2, land_smin = 0.02, land_smax = 2.0;
  int land_points = 200;
  CLI::App* landscape =
      app.add_subcommand("landscape", "Tabulate score-matching vs score-entropy loss terms");
  landscape->add_option("--out", land_out, "Write the TSV here instead of stdout");
  landscape->add_option("--a", land_a, "Ground-truth score");
  landscape->add_option("--s-min", land_smin, "Smallest score value");
  landscape->add_option("--s-max", land_smax, "Largest score value");
  landscape->add_option("--points", land_points, "Number of rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_config, train_output);
    if (sample->parsed()) {
      sample_flags.seed_set = sample->count("--seed") > 0;
      return cmd_generate(sample_flags, false);
    }
    if (infill->parsed()) {
      infill_flags.seed_set = infill->count("--seed") > 0;
      return cmd_generate(infill_flags, true);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_checkpoint, eval_samples, eval_seed, eval_raw, eval_limit);
    if (verify->parsed()) return cmd_verify(verify_seed);
    if (landscape->parsed())
      return cmd_landscape(land_out, land_a, land_smin, land_smax, land_points);
  } catch (const sedd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const sedd::IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return 4;
  } catch (const sedd::ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 3;
  } catch (const sedd::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 3;
  } catch (const sedd::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 4;
  } catch (const sedd::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const sedd::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 6;
  } catch (const sedd::InstabilityError& e) {
    std::cerr << "instability: " << e.what() << "\n";
    return 6;
  } catch (const sedd::SamplerError& e) {
    std::cerr << "sampler error: " << e.what() << "\n";
    return 6;
  } catch (const sedd::UndefinedScoreError& e) {
    std::cerr << "undefined score: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
