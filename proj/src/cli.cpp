#include "weakdiff/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "weakdiff/config.hpp"
#include "weakdiff/gm_oracle.hpp"
#include "weakdiff/io.hpp"
#include "weakdiff/pipeline.hpp"
#include "weakdiff/rng.hpp"

namespace weakdiff {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kSampleStream = 106;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const GlobalFlags& g) {
  RunConfig cfg = RunConfig::defaults();
  if (!g.config_path.empty()) cfg.merge_file(g.config_path);
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

Metadata base_meta(const RunConfig& cfg) { return {{"config_hash", cfg.hash()}, {"seed", std::to_string(cfg.seed)}}; }

std::string join_tokens(const TokenList& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? "," : "") + tokens[i];
  return out;
}

std::vector<DataRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(in, path);
}

std::string dataset_text(std::span<const DataRecord> records) {
  std::ostringstream ss;
  write_dataset(ss, records);
  return ss.str();
}

// gen-data ---------------------------------------------------------------

struct GenDataFlags {
  std::optional<std::size_t> n;
  std::optional<double> corruption_rate;
  std::optional<double> noise_level;
  std::string file = "dataset.jsonl";
};

int cmd_gen_data(const GlobalFlags& g, const GenDataFlags& f, std::ostream& out) {
  RunConfig cfg = resolve_config(g);
  if (f.n) cfg.data_n = *f.n;
  if (f.corruption_rate) cfg.corruption_rate = *f.corruption_rate;
  if (f.noise_level) cfg.noise_level = *f.noise_level;
  cfg.validate();

  const EncoderSuite suite = make_encoders(cfg);
  const auto records =
      generate_dataset(suite, cfg.generator(cfg.data_n, cfg.corruption_rate, derive_seed(cfg.seed, kWeakDataStream)));
  std::size_t corrupted = 0;
  for (const DataRecord& r : records) corrupted += r.corrupted.value_or(false) ? 1 : 0;

  const fs::path dir(g.out_dir);
  const fs::path data_path = dir / f.file;
  write_file(data_path, dataset_text(records));
  json summary;
  summary["config_hash"] = cfg.hash();
  summary["seed"] = cfg.seed;
  summary["n"] = records.size();
  summary["corrupted"] = corrupted;
  summary["corruption_rate"] = cfg.corruption_rate;
  summary["noise_level"] = cfg.noise_level;
  summary["image_dim"] = cfg.image_dim;
  summary["vocab_size"] = suite.vocab.size();
  write_file(dir / (data_path.stem().string() + "_summary.json"), summary.dump(2) + "\n");
  write_file(dir / "resolved_config.txt", cfg.to_text());
  out << "wrote " << records.size() << " records (" << corrupted << " corrupted) to " << data_path.string() << "\n";
  return kExitOk;
}

// filter -----------------------------------------------------------------

struct FilterFlags {
  std::string input;
  std::optional<double> tau;
  std::optional<std::string> policy;
  std::optional<double> percentile;
  std::optional<std::size_t> valley_bins;
  std::string report_out;
  std::string output = "filtered.jsonl";
  std::string scores_out = "filter_scores.csv";
  bool fail_on_empty = false;
};

int cmd_filter(const GlobalFlags& g, const FilterFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(g);
  if (f.tau) cfg.train.tau = *f.tau;
  if (f.policy) cfg.set("filter.policy", *f.policy);
  if (f.percentile) cfg.train.tau_percentile = *f.percentile;
  if (f.valley_bins) cfg.train.valley_bins = *f.valley_bins;
  cfg.validate();

  const EncoderSuite suite = make_encoders(cfg);
  const auto records = load_dataset(f.input);
  if (!records.empty()) require_same_size(records.front().image.size(), cfg.image_dim, "dataset image dimension vs image.dim");
  const FilterResult result = filter_dataset(suite, records, cfg.train.filter_policy());

  const fs::path dir(g.out_dir);
  Metadata meta = base_meta(cfg);
  meta["tau_policy"] = std::string(tau_policy_name(cfg.train.tau_policy));
  write_file(dir / f.output, dataset_text(result.kept));
  write_file(f.report_out.empty() ? dir / "filter_report.json" : fs::path(f.report_out),
             filter_report_json(result.report, meta));
  std::ostringstream scores;
  write_filter_scores(scores, meta, records, result.report);
  write_file(dir / f.scores_out, scores.str());

  out << "tau=" << format_double(result.report.tau) << " kept " << result.report.kept << " of "
      << result.report.total << "\n";
  if (result.report.kept == 0) {
    err << "warning: no records passed the filter\n";
    if (f.fail_on_empty) return kExitRuntime;
  }
  return kExitOk;
}

// train ------------------------------------------------------------------

struct TrainFlags {
  std::string data;
  std::string pretrain;
  std::optional<std::size_t> phase1_steps;
  std::optional<std::size_t> phase2_steps;
};

std::string checkpoint_text(const RunConfig& cfg, const std::string& stage, const CrossAttentionMLP& model,
                            const LinearCodec& codec) {
  const Checkpoint ckpt{cfg.hash(), stage, model.shape(), cfg.beta_start, cfg.beta_end,
                        std::vector<double>(model.parameters().begin(), model.parameters().end()), codec};
  std::ostringstream ss;
  write_checkpoint(ss, ckpt);
  return ss.str();
}

int cmd_train(const GlobalFlags& g, const TrainFlags& f, std::ostream& out) {
  RunConfig cfg = resolve_config(g);
  if (f.phase1_steps) cfg.train.phase1_steps = *f.phase1_steps;
  if (f.phase2_steps) cfg.train.phase2_steps = *f.phase2_steps;
  cfg.validate();

  const EncoderSuite suite = make_encoders(cfg);
  const auto refiner = make_refiner(cfg, suite.vocab);
  const auto pretrain =
      f.pretrain.empty()
          ? generate_dataset(suite, cfg.generator(cfg.pretrain_n, 0.0, derive_seed(cfg.seed, kPretrainDataStream)))
          : load_dataset(f.pretrain);
  const auto weak = f.data.empty() ? generate_dataset(suite, cfg.generator(cfg.data_n, cfg.corruption_rate,
                                                                           derive_seed(cfg.seed, kWeakDataStream)))
                                   : load_dataset(f.data);
  for (const auto* set : {&pretrain, &weak}) {
    if (!set->empty()) require_same_size(set->front().image.size(), cfg.image_dim, "dataset image dimension vs image.dim");
  }

  const fs::path dir(g.out_dir);
  write_file(dir / "resolved_config.txt", cfg.to_text());
  const TrainingRun run = train_pipeline(cfg, suite, pretrain, weak, refiner.get());

  write_file(dir / "checkpoint_initial.ckpt", checkpoint_text(cfg, "initial", run.initial, run.codec));
  if (cfg.train.phase1_steps > 0) {
    write_file(dir / "checkpoint_phase1.ckpt", checkpoint_text(cfg, "phase1", run.phase1.model, run.codec));
  }
  std::vector<TrainLogEntry> log = run.phase1.log;
  Metadata meta = base_meta(cfg);
  meta["gradient_mode"] = std::string(gradient_mode_name(cfg.train.gradient_mode));
  if (run.phase2) {
    write_file(dir / "checkpoint_phase2.ckpt", checkpoint_text(cfg, "phase2", run.phase2->model, run.codec));
    log.insert(log.end(), run.phase2->log.begin(), run.phase2->log.end());
    meta["selected_step"] = std::to_string(run.phase2->selected_step);
    if (run.phase2->filter_report) {
      write_file(dir / "filter_report.json", filter_report_json(*run.phase2->filter_report, base_meta(cfg)));
    }
  }
  std::ostringstream log_text;
  write_train_log(log_text, meta, log);
  write_file(dir / "train_log.csv", log_text.str());
  out << "trained: phase1 " << cfg.train.phase1_steps << " steps, phase2 " << cfg.train.phase2_steps
      << " steps; outputs in " << dir.string() << "\n";
  return kExitOk;
}

// sample -----------------------------------------------------------------

struct SampleFlags {
  std::string checkpoint;
  std::string prompt;
  std::optional<std::size_t> n;
  bool no_refine = false;
  bool oracle = false;
  bool pgm = false;
  std::string file = "samples.csv";
};

int cmd_sample(const GlobalFlags& g, const SampleFlags& f, std::ostream& out) {
  RunConfig cfg = resolve_config(g);
  if (f.n) cfg.sample_n = *f.n;
  if (f.no_refine) cfg.refine_enabled = false;
  cfg.validate();
  if (!f.oracle && f.checkpoint.empty()) throw UsageError("sample: --checkpoint is required unless --oracle is given");

  const NoiseSchedule schedule = cfg.schedule();
  const std::uint64_t sample_seed = derive_seed(cfg.seed, kSampleStream);
  Metadata meta = base_meta(cfg);
  const fs::path dir(g.out_dir);
  const TokenList user = split_tokens(f.prompt);

  if (f.oracle) {
    const GMOracleDenoiser oracle(cfg.oracle_mixture(), schedule);
    const auto latents = sample_many(oracle, ConditioningVector::unconditional(), schedule, cfg.reverse(), sample_seed,
                                     cfg.sample_n);
    meta["source"] = "oracle";
    std::ostringstream ss;
    write_samples(ss, meta, oracle.latent_dim(), 0, latents, {});
    write_file(dir / f.file, ss.str());
    out << "wrote " << latents.size() << " oracle samples to " << (dir / f.file).string() << "\n";
    return kExitOk;
  }

  std::ifstream in(f.checkpoint);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + f.checkpoint + "'");
  const Checkpoint ckpt = read_checkpoint(in, f.checkpoint);
  if (ckpt.shape.latent_dim != cfg.latent_dim || ckpt.shape.steps != cfg.schedule_steps ||
      ckpt.shape.token_dim != cfg.embedding_dim || ckpt.beta_start != cfg.beta_start || ckpt.beta_end != cfg.beta_end) {
    throw UsageError("checkpoint/config mismatch: checkpoint has d=" + std::to_string(ckpt.shape.latent_dim) +
                     " T=" + std::to_string(ckpt.shape.steps) + " e=" + std::to_string(ckpt.shape.token_dim) +
                     " betas=[" + format_double(ckpt.beta_start) + ", " + format_double(ckpt.beta_end) +
                     "], config has d=" + std::to_string(cfg.latent_dim) + " T=" + std::to_string(cfg.schedule_steps) +
                     " e=" + std::to_string(cfg.embedding_dim) + " betas=[" + format_double(cfg.beta_start) + ", " +
                     format_double(cfg.beta_end) + "]");
  }
  CrossAttentionMLP model = CrossAttentionMLP::zeros(ckpt.shape);
  model.set_parameters(ckpt.parameters);

  const EncoderSuite suite = make_encoders(cfg);
  require_same_size(ckpt.codec.image_dim(), suite.attributes.image_dim(), "checkpoint codec image dimension vs image.dim");
  TokenList prompt = user;
  if (!user.empty()) {
    if (const auto refiner = make_refiner(cfg, suite.vocab)) prompt = refine_prompt(*refiner, user, suite.vocab);
  }
  const ConditioningVector cond = condition_on(suite, prompt);
  const auto latents = sample_many(model, cond, schedule, cfg.reverse(), sample_seed, cfg.sample_n);
  std::vector<ImageVector> images;
  for (const LatentVector& z : latents) images.push_back(ckpt.codec.decode(z));

  meta["source"] = ckpt.stage;
  if (!user.empty()) meta["prompt"] = join_tokens(user);
  if (!prompt.empty()) meta["refined"] = join_tokens(prompt);
  std::ostringstream ss;
  write_samples(ss, meta, ckpt.codec.latent_dim(), ckpt.codec.image_dim(), latents, images);
  write_file(dir / f.file, ss.str());
  if (f.pgm && !images.empty()) write_file(dir / (fs::path(f.file).stem().string() + ".pgm"), pgm_grid(images, 8));
  out << "wrote " << latents.size() << " samples to " << (dir / f.file).string() << "\n";
  return kExitOk;
}

// eval -------------------------------------------------------------------

struct EvalFlags {
  std::vector<std::string> samples;
  std::string reference;
  std::optional<std::size_t> k;
};

SampleTable load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sample file '" + path + "'");
  return read_samples(in, path);
}

int cmd_eval(const GlobalFlags& g, const EvalFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(g);
  if (f.k) cfg.eval_k = *f.k;
  cfg.validate();

  std::optional<SampleTable> reference;
  std::optional<GaussianFit> reference_fit;
  if (!f.reference.empty()) {
    reference = load_samples(f.reference);
    reference_fit = fit_gaussian(reference->latents);
  }

  json report;
  report["config_hash"] = cfg.hash();
  report["seed"] = cfg.seed;
  report["metric_space"] = "latent";
  std::string csv = metadata_line(base_meta(cfg)) + "\nfile,n,fd_latent,diversity,alignment_matched,alignment_shuffled\n";
  std::vector<AlignmentInput> alignment_inputs;
  std::vector<std::string> names;
  for (const std::string& path : f.samples) {
    const SampleTable table = load_samples(path);
    json entry;
    entry["file"] = path;
    entry["n"] = table.latents.size();
    std::string fd_cell, div_cell;
    if (reference_fit) {
      if (table.latent_dim != reference->latent_dim) {
        throw UsageError("eval: latent dimension mismatch: " + path + " has " + std::to_string(table.latent_dim) +
                         ", reference " + f.reference + " has " + std::to_string(reference->latent_dim));
      }
      const FrechetDetail fd = frechet_distance_detail(fit_gaussian(table.latents), *reference_fit);
      if (fd.clipped_eigenvalues > 0) {
        err << "warning: " << fd.clipped_eigenvalues << " negative eigenvalue(s) clipped in FD-latent for " << path
            << " (most negative " << format_double(fd.most_negative_eigenvalue) << ")\n";
      }
      entry["fd_latent"] = fd.distance;
      fd_cell = format_double(fd.distance);
    }
    if (table.latents.size() >= cfg.eval_k) {
      const DiversityResult div = diversity_proxy(table.latents, cfg.eval_k, cfg.seed);
      entry["diversity_proxy"] = div.value;
      entry["diversity_degenerate"] = div.degenerate;
      div_cell = format_double(div.value);
    }
    const auto prompt = table.meta.find("prompt");
    if (prompt != table.meta.end() && table.image_dim > 0) {
      AlignmentInput in{fs::path(path).stem().string(), {}, table.images};
      in.prompts.assign(table.images.size(), split_tokens(prompt->second));
      alignment_inputs.push_back(std::move(in));
    }
    names.push_back(path);
    report["files"].push_back(entry);
    csv += path + "," + std::to_string(table.latents.size()) + "," + fd_cell + "," + div_cell + ",,\n";
  }

  if (!alignment_inputs.empty()) {
    const EncoderSuite suite = make_encoders(cfg);
    for (const AlignmentInput& in : alignment_inputs) {
      require_same_size(in.images.front().size(), suite.attributes.image_dim(), "eval: sample image dimension vs image.dim");
    }
    // Pool all prompt-tagged files into one method so the shuffled baseline
    // can draw prompts from other files.
    AlignmentInput pooled{"samples", {}, {}};
    for (const AlignmentInput& in : alignment_inputs) {
      pooled.prompts.insert(pooled.prompts.end(), in.prompts.begin(), in.prompts.end());
      pooled.images.insert(pooled.images.end(), in.images.begin(), in.images.end());
    }
    const BootstrapOptions boot{cfg.bootstrap_resamples, cfg.bootstrap_confidence, cfg.seed};
    const AlignmentRow row = alignment_table(suite, std::span<const AlignmentInput>(&pooled, 1), boot).front();
    report["alignment"] = {{"n", row.n},
                           {"mean_matched", row.mean_matched},
                           {"mean_shuffled", row.mean_shuffled},
                           {"difference_ci", {row.difference_lower, row.difference_upper}},
                           {"confidence", cfg.bootstrap_confidence}};
    csv += "pooled," + std::to_string(row.n) + ",,," + format_double(row.mean_matched) + "," +
           format_double(row.mean_shuffled) + "\n";
  }

  const fs::path dir(g.out_dir);
  write_file(dir / "eval_report.json", report.dump(2) + "\n");
  write_file(dir / "eval_report.csv", csv);
  out << report.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly-supervised latent diffusion toolkit"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config_path, "Run config file (key = value lines)");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic weakly-labeled dataset");
  gen_cmd->add_option("--n", gen.n, "Number of records")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--corruption-rate", gen.corruption_rate, "Fraction of captions replaced")
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--noise-level", gen.noise_level, "Image noise standard deviation")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--file", gen.file, "Dataset file name inside --out")->capture_default_str();

  FilterFlags filt;
  auto* filter_cmd = app.add_subcommand("filter", "Score a dataset and keep records with score > tau");
  filter_cmd->add_option("--input", filt.input, "Dataset JSONL")->required();
  filter_cmd->add_option("--tau", filt.tau, "Threshold for the fixed policy")->check(CLI::Range(-1.0, 1.0));
  filter_cmd->add_option("--tau-policy", filt.policy, "fixed, percentile or valley")
      ->check(CLI::IsMember({"fixed", "percentile", "valley"}));
  filter_cmd->add_option("--tau-percentile", filt.percentile, "Percentile for the percentile policy")
      ->check(CLI::Range(0.0, 100.0));
  filter_cmd->add_option("--valley-bins", filt.valley_bins, "Histogram bins for the valley policy");
  filter_cmd->add_option("--report-out", filt.report_out, "Report path (default <out>/filter_report.json)");
  filter_cmd->add_option("--output", filt.output, "Filtered dataset name inside --out")->capture_default_str();
  filter_cmd->add_option("--scores-out", filt.scores_out, "Score table name inside --out")->capture_default_str();
  filter_cmd->add_flag("--fail-on-empty", filt.fail_on_empty, "Exit 1 when nothing passes");

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "Run phase 1 and phase 2 training");
  train_cmd->add_option("--data", train.data, "Weakly-labeled dataset JSONL (default: generated)");
  train_cmd->add_option("--pretrain", train.pretrain, "Pretraining dataset JSONL (default: generated)");
  train_cmd->add_option("--phase1-steps", train.phase1_steps, "Phase 1 optimizer steps");
  train_cmd->add_option("--phase2-steps", train.phase2_steps, "Phase 2 optimizer steps");

  SampleFlags samp;
  auto* sample_cmd = app.add_subcommand("sample", "Generate samples from a checkpoint or the mixture oracle");
  sample_cmd->add_option("--checkpoint", samp.checkpoint, "Checkpoint file");
  sample_cmd->add_option("--prompt", samp.prompt, "Prompt tokens (comma or space separated)");
  sample_cmd->add_option("--n", samp.n, "Number of samples");
  sample_cmd->add_flag("--no-refine", samp.no_refine, "Condition on the prompt as given");
  sample_cmd->add_flag("--oracle", samp.oracle, "Use the analytic Gaussian-mixture denoiser");
  sample_cmd->add_flag("--pgm", samp.pgm, "Also write a PGM grid of decoded images");
  sample_cmd->add_option("--file", samp.file, "Sample file name inside --out")->capture_default_str();

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "FD-latent, diversity proxy and alignment for sample files");
  eval_cmd->add_option("--samples", ev.samples, "Sample CSV (repeatable)")->required();
  eval_cmd->add_option("--reference", ev.reference, "Reference sample CSV for FD-latent");
  eval_cmd->add_option("--k", ev.k, "Clusters for the diversity proxy");

  std::vector<const char*> argv{"weakdiff"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(g, gen, out);
    if (filter_cmd->parsed()) return cmd_filter(g, filt, out, err);
    if (train_cmd->parsed()) return cmd_train(g, train, out);
    if (sample_cmd->parsed()) return cmd_sample(g, samp, out);
    if (eval_cmd->parsed()) return cmd_eval(g, ev, out, err);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace weakdiff
