#pragma once

// End-to-end assembly from a RunConfig: encoders, refiner, synthetic data,
// codec, the two training phases, and the per-style ablation evaluation.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "weakdiff/codec.hpp"
#include "weakdiff/config.hpp"
#include "weakdiff/evalmetrics.hpp"
#include "weakdiff/promptref.hpp"
#include "weakdiff/training.hpp"
#include "weakdiff/weaksup.hpp"

namespace weakdiff {

// Stream indices for derive_seed(cfg.seed, ...).
inline constexpr std::uint64_t kPretrainDataStream = 101;
inline constexpr std::uint64_t kWeakDataStream = 102;
inline constexpr std::uint64_t kHeldoutDataStream = 103;
inline constexpr std::uint64_t kModelInitStream = 104;
inline constexpr std::uint64_t kEvalSamplingStream = 105;

EncoderSuite make_encoders(const RunConfig& cfg);
// Rule-based refiner from refine.rules_file (or the built-in rules), wrapped
// in an external refiner when refine.endpoint is set. Null when disabled.
std::shared_ptr<const RefinerClient> make_refiner(const RunConfig& cfg, const Vocabulary& vocab);

struct TrainingRun {
  LinearCodec codec;
  CrossAttentionMLP initial;
  PhaseResult phase1;
  std::optional<PhaseResult> phase2;
};

// Fits the codec on the pretraining images, then runs phase 1 and (when
// phase2_steps > 0) phase 2.
TrainingRun train_pipeline(const RunConfig& cfg, const EncoderSuite& suite, std::span<const DataRecord> pretrain,
                           std::span<const DataRecord> weak, const RefinerClient* refiner);

struct AblationVariant {
  std::string name;
  bool filter = true;
  bool refine = true;
};

std::vector<AblationVariant> default_ablation_variants();

struct AblationOptions {
  std::size_t heldout_n = 4000;
  std::size_t samples_per_style = 200;
  std::vector<AblationVariant> variants = default_ablation_variants();
};

struct VariantReport {
  std::string name;
  // Mean over styles of FD-latent(generated | style prompt, held-out | style).
  double fd_latent = 0.0;
  std::vector<double> per_style_fd;
  double diversity = 0.0;
  AlignmentRow alignment;
  std::size_t kept_records = 0;
  std::size_t selected_step = 0;
};

struct AblationReport {
  std::vector<VariantReport> variants;
  const VariantReport& get(const std::string& name) const;
};

// User prompts are the bare garment token of each style. Variants with
// refinement condition on the refined prompt. Alignment is scored against the
// rule-refined prompt for every variant, so all variants share one target.
AblationReport run_ablation(const RunConfig& cfg, const AblationOptions& options);

// Generates `per_style` latents for each style's garment prompt.
struct StyleSamples {
  std::vector<TokenList> user_prompts;
  std::vector<std::vector<LatentVector>> latents;  // [style][i]
};
StyleSamples sample_styles(const RunConfig& cfg, const EncoderSuite& suite, const CrossAttentionMLP& model,
                           const RefinerClient* refiner, std::size_t per_style);

}  // namespace weakdiff
