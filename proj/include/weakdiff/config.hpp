#pragma once

// Flat "key = value" run configuration shared by every subcommand.
//
// Every key has a default, so the resolved config written next to each
// output is complete. Unknown keys and unparsable values are rejected with a
// ConfigError naming the key. The hash is FNV-1a over the canonical
// "key=value" lines in key order, so it ignores file layout and ordering.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "weakdiff/cross_attention_mlp.hpp"
#include "weakdiff/diffusion.hpp"
#include "weakdiff/gm_oracle.hpp"
#include "weakdiff/promptref.hpp"
#include "weakdiff/schedule.hpp"
#include "weakdiff/training.hpp"
#include "weakdiff/weaksup.hpp"

namespace weakdiff {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::uint64_t seed = 0;

  int schedule_steps = 200;
  double beta_start = 5e-4;
  double beta_end = 0.1;
  VarianceMode variance_mode = VarianceMode::fixed_beta;
  bool final_step_noiseless = true;

  std::string vocab_file;  // empty: built-in vocabulary
  std::size_t embedding_dim = 32;
  std::uint64_t embedding_seed = 7;
  std::size_t image_dim = 64;

  std::size_t data_n = 1000;
  std::size_t pretrain_n = 2000;
  double corruption_rate = 0.3;
  double noise_level = 0.1;

  std::size_t latent_dim = 8;
  std::size_t hidden_dim = 64;

  bool refine_enabled = true;
  std::string rules_file;  // empty: built-in rules
  std::string refine_endpoint;  // empty: rule-based refiner only
  int refine_timeout_ms = 2000;
  int refine_max_retries = 2;
  bool refine_fallback = true;

  TrainConfig train;

  std::size_t sample_n = 100;
  std::size_t eval_k = 8;
  std::size_t bootstrap_resamples = 2000;
  double bootstrap_confidence = 0.99;

  // Two-component oracle target (sample --oracle).
  std::vector<double> oracle_mean_a{-1.5, 0.0};
  std::vector<double> oracle_mean_b{1.5, 0.0};
  double oracle_weight_a = 0.5;

  static RunConfig defaults() { return {}; }

  // Applies one override; throws ConfigError on an unknown key or bad value.
  void set(const std::string& key, const std::string& value);
  // Reads "key = value" lines ('#' comments, blank lines ignored).
  void merge(std::istream& in, const std::string& source_name);
  void merge_file(const std::filesystem::path& path);

  // Canonical resolved entries, sorted by key.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
  // 16 lowercase hex digits.
  std::string hash() const;

  // Cross-field checks; throws ConfigError.
  void validate() const;

  NoiseSchedule schedule() const;
  ReverseStepConfig reverse() const;
  MlpShape mlp_shape() const;
  GeneratorConfig generator(std::size_t n, double rate, std::uint64_t seed) const;
  GaussianMixture oracle_mixture() const;
  ExternalRefinerConfig external_refiner() const;
};

std::string format_double(double v);

}  // namespace weakdiff
