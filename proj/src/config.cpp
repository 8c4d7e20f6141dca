#include "weakdiff/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace weakdiff {
namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

template <class Int>
Int to_integer(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean (true/false)");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) bad_value(key, v, "a comma-separated list of numbers");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

template <class Fn>
auto rethrow_as_config(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define WD_DOUBLE(name, member) \
  Field{name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
        [](const RunConfig& c) { return format_double(c.member); }}
#define WD_INT(name, member, type) \
  Field{name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_integer<type>(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define WD_BOOL(name, member) \
  Field{name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define WD_STRING(name, member) \
  Field{name, [](RunConfig& c, const std::string&, const std::string& v) { c.member = v; }, \
        [](const RunConfig& c) { return c.member; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      WD_INT("seed", seed, std::uint64_t),
      WD_INT("schedule.steps", schedule_steps, int),
      WD_DOUBLE("schedule.beta_start", beta_start),
      WD_DOUBLE("schedule.beta_end", beta_end),
      Field{"reverse.variance",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "fixed_beta") c.variance_mode = VarianceMode::fixed_beta;
              else if (v == "fixed_beta_tilde") c.variance_mode = VarianceMode::fixed_beta_tilde;
              else bad_value(k, v, "fixed_beta or fixed_beta_tilde");
            },
            [](const RunConfig& c) {
              return std::string(c.variance_mode == VarianceMode::fixed_beta ? "fixed_beta" : "fixed_beta_tilde");
            }},
      WD_BOOL("reverse.final_step_noiseless", final_step_noiseless),
      WD_STRING("vocab.file", vocab_file),
      WD_INT("embedding.dim", embedding_dim, std::size_t),
      WD_INT("embedding.seed", embedding_seed, std::uint64_t),
      WD_INT("image.dim", image_dim, std::size_t),
      WD_INT("data.n", data_n, std::size_t),
      WD_INT("data.pretrain_n", pretrain_n, std::size_t),
      WD_DOUBLE("data.corruption_rate", corruption_rate),
      WD_DOUBLE("data.noise_level", noise_level),
      WD_INT("codec.latent_dim", latent_dim, std::size_t),
      WD_INT("model.hidden_dim", hidden_dim, std::size_t),
      WD_BOOL("refine.enabled", refine_enabled),
      WD_STRING("refine.rules_file", rules_file),
      WD_STRING("refine.endpoint", refine_endpoint),
      WD_INT("refine.timeout_ms", refine_timeout_ms, int),
      WD_INT("refine.max_retries", refine_max_retries, int),
      WD_BOOL("refine.fallback", refine_fallback),
      WD_DOUBLE("train.lambda_denoise", train.lambda_denoise),
      WD_DOUBLE("train.lambda_prompt", train.lambda_prompt),
      WD_DOUBLE("train.lambda_recon", train.lambda_recon),
      WD_BOOL("filter.enabled", train.apply_filter),
      WD_DOUBLE("filter.tau", train.tau),
      Field{"filter.policy",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.tau_policy = rethrow_as_config(k, [&] { return parse_tau_policy(v); });
            },
            [](const RunConfig& c) { return std::string(tau_policy_name(c.train.tau_policy)); }},
      WD_DOUBLE("filter.percentile", train.tau_percentile),
      WD_INT("filter.valley_bins", train.valley_bins, std::size_t),
      WD_DOUBLE("train.lr", train.lr),
      Field{"train.optimizer",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.optimizer = rethrow_as_config(k, [&] { return parse_optimizer_kind(v); });
            },
            [](const RunConfig& c) { return std::string(optimizer_kind_name(c.train.optimizer)); }},
      WD_INT("train.batch_size", train.batch_size, std::size_t),
      WD_INT("train.phase1_steps", train.phase1_steps, std::size_t),
      WD_INT("train.phase2_steps", train.phase2_steps, std::size_t),
      WD_INT("train.log_every", train.log_every, std::size_t),
      WD_INT("train.eval_every", train.eval_every, std::size_t),
      WD_INT("train.eval_samples", train.eval_samples, std::size_t),
      WD_INT("train.eval_denoise_examples", train.eval_denoise_examples, std::size_t),
      WD_BOOL("train.select_best", train.select_best),
      Field{"train.gradient_mode",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.train.gradient_mode = rethrow_as_config(k, [&] { return parse_gradient_mode(v); });
            },
            [](const RunConfig& c) { return std::string(gradient_mode_name(c.train.gradient_mode)); }},
      WD_INT("train.chain_steps", train.chain_steps, int),
      WD_INT("train.chain_batch", train.chain_batch, std::size_t),
      WD_BOOL("train.record_wallclock", train.record_wallclock),
      WD_INT("sample.n", sample_n, std::size_t),
      WD_INT("eval.k", eval_k, std::size_t),
      WD_INT("eval.bootstrap_resamples", bootstrap_resamples, std::size_t),
      WD_DOUBLE("eval.confidence", bootstrap_confidence),
      Field{"oracle.mean_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.oracle_mean_a = to_doubles(k, v); },
            [](const RunConfig& c) { return join(c.oracle_mean_a); }},
      Field{"oracle.mean_b", [](RunConfig& c, const std::string& k, const std::string& v) { c.oracle_mean_b = to_doubles(k, v); },
            [](const RunConfig& c) { return join(c.oracle_mean_b); }},
      WD_DOUBLE("oracle.weight_a", oracle_weight_a),
  };
  return table;
}

#undef WD_DOUBLE
#undef WD_INT
#undef WD_BOOL
#undef WD_STRING

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::merge(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  merge(in, path.string());
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(*this));
  std::sort(out.begin(), out.end());
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& [k, v] : entries()) {
    for (char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::validate() const {
  const auto wrap = [](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(what) + ": " + e.what());
    }
  };
  wrap("schedule", [&] { (void)schedule(); });
  wrap("model", [&] { mlp_shape().validate(); });
  wrap("train", [&] { train.validate(); });
  wrap("oracle", [&] { oracle_mixture().validate(); });
  if (embedding_dim == 0) throw ConfigError("embedding.dim must be >= 1");
  if (latent_dim > image_dim) throw ConfigError("codec.latent_dim must not exceed image.dim");
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) throw ConfigError("data.corruption_rate must lie in [0, 1]");
  if (!(noise_level >= 0.0)) throw ConfigError("data.noise_level must be >= 0");
  if (pretrain_n < latent_dim + 1) throw ConfigError("data.pretrain_n must exceed codec.latent_dim");
  if (eval_k < 2) throw ConfigError("eval.k must be >= 2");
  if (!(bootstrap_confidence > 0.0 && bootstrap_confidence < 1.0)) throw ConfigError("eval.confidence must lie in (0, 1)");
  if (bootstrap_resamples == 0) throw ConfigError("eval.bootstrap_resamples must be >= 1");
  if (refine_timeout_ms <= 0) throw ConfigError("refine.timeout_ms must be positive");
  if (refine_max_retries < 0) throw ConfigError("refine.max_retries must be >= 0");
}

NoiseSchedule RunConfig::schedule() const { return NoiseSchedule::linear(schedule_steps, beta_start, beta_end); }

ReverseStepConfig RunConfig::reverse() const { return ReverseStepConfig{variance_mode, final_step_noiseless}; }

MlpShape RunConfig::mlp_shape() const { return MlpShape{latent_dim, embedding_dim, hidden_dim, schedule_steps}; }

GeneratorConfig RunConfig::generator(std::size_t n, double rate, std::uint64_t gen_seed) const {
  return GeneratorConfig{n, rate, noise_level, gen_seed};
}

GaussianMixture RunConfig::oracle_mixture() const {
  return GaussianMixture{{LatentVector(oracle_mean_a), LatentVector(oracle_mean_b)},
                         {oracle_weight_a, 1.0 - oracle_weight_a}};
}

ExternalRefinerConfig RunConfig::external_refiner() const {
  return ExternalRefinerConfig{refine_endpoint, std::chrono::milliseconds(refine_timeout_ms), refine_max_retries,
                               refine_fallback};
}

}  // namespace weakdiff
