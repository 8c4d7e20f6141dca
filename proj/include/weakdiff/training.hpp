#pragma once

// Losses and the two-phase training loop.
//
//   L_denoise = E ||eps - eps_theta(z_t, t, c)||^2
//   L_prompt  = 1 - cos(Enc_text(y), Enc_img(x_hat))
//   L_recon   = ||x0 - x_hat||^2
//   L_total   = l_d L_denoise + l_p L_prompt + l_r L_recon
//
// Phase 1 trains an unconditional denoiser on clean data with L_denoise.
// Phase 2 filters the weakly-labeled set once, then trains conditionally.
// x_hat comes from running the sampler, so L_prompt and L_recon reach the
// parameters in one of two ways:
//   selection       they are measured on periodic evaluation samples and
//                   the snapshot with the lowest L_total is returned
//   differentiable  a short chain (noise the record's latent to step T',
//                   then T' reverse steps) is backpropagated every step

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "weakdiff/codec.hpp"
#include "weakdiff/cross_attention_mlp.hpp"
#include "weakdiff/diffusion.hpp"
#include "weakdiff/embedding.hpp"
#include "weakdiff/optimizer.hpp"
#include "weakdiff/promptref.hpp"
#include "weakdiff/schedule.hpp"
#include "weakdiff/weaksup.hpp"

namespace weakdiff {

enum class GradientMode { selection, differentiable };

GradientMode parse_gradient_mode(std::string_view name);
std::string_view gradient_mode_name(GradientMode mode);

struct TrainConfig {
  double lambda_denoise = 1.0;
  double lambda_prompt = 0.1;
  double lambda_recon = 0.1;

  bool apply_filter = true;
  double tau = 0.8;
  TauPolicyKind tau_policy = TauPolicyKind::fixed;
  double tau_percentile = 10.0;
  std::size_t valley_bins = 40;

  double lr = 2e-3;
  OptimizerKind optimizer = OptimizerKind::rmsprop;
  std::size_t batch_size = 32;
  std::size_t phase1_steps = 1000;
  std::size_t phase2_steps = 1000;

  std::size_t log_every = 100;   // phase 1 logging period
  std::size_t eval_every = 250;  // phase 2 evaluation period
  std::size_t eval_samples = 16;           // records sampled for L_prompt / L_recon
  std::size_t eval_denoise_examples = 256; // fixed (record, t, noise) triples for L_denoise
  bool select_best = true;

  GradientMode gradient_mode = GradientMode::selection;
  int chain_steps = 5;           // T' for the differentiable chain, 1..10
  std::size_t chain_batch = 4;

  bool record_wallclock = false;
  std::uint64_t seed = 0;

  TauPolicy filter_policy() const;
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct TrainLogEntry {
  std::size_t step = 0;
  int phase = 1;
  double l_denoise = 0.0;
  double l_prompt = 0.0;
  double l_recon = 0.0;
  double l_total = 0.0;
  double wallclock = 0.0;  // seconds since phase start; 0 unless recorded
};

// 1 - alignment_score(caption, x_hat), in [0, 2].
double prompt_consistency_loss(const EncoderSuite& suite, std::span<const std::string> caption,
                               const ImageVector& x_hat);
// Sum of squared coordinate differences.
double reconstruction_loss(const ImageVector& x0, const ImageVector& x_hat);
double total_loss(const TrainConfig& cfg, double l_denoise, double l_prompt, double l_recon);

struct PhaseResult {
  CrossAttentionMLP model;
  std::vector<TrainLogEntry> log;
  std::optional<FilterReport> filter_report;
  std::size_t selected_step = 0;
  std::size_t kept_records = 0;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::optional<FilterReport> report = std::nullopt)
      : std::runtime_error(what), report_(std::move(report)) {}
  const std::optional<FilterReport>& report() const { return report_; }

 private:
  std::optional<FilterReport> report_;
};

PhaseResult run_phase1(const TrainConfig& cfg, const CrossAttentionMLP& model, const LinearCodec& codec,
                       const NoiseSchedule& schedule, std::span<const DataRecord> pretrain_data);

// `refiner` may be null (captions used as given).
PhaseResult run_phase2(const TrainConfig& cfg, const CrossAttentionMLP& model, const LinearCodec& codec,
                       const NoiseSchedule& schedule, const ReverseStepConfig& reverse, const EncoderSuite& suite,
                       std::span<const DataRecord> weak_data, const RefinerClient* refiner);

// One differentiable-chain example.
struct ChainExample {
  LatentVector z0;
  ImageVector x0;
  TokenList caption;
  const ConditioningVector* cond = nullptr;
};

struct ChainLoss {
  double l_prompt = 0.0;
  double l_recon = 0.0;
  std::vector<double> grad;  // of (l_p L_prompt + l_r L_recon), batch mean
};

// Noises each z0 to step T' with noise drawn from `seed`, runs T' reverse
// steps (injected noise also from `seed`), decodes, and backpropagates the
// weighted prompt and reconstruction losses to the parameters.
ChainLoss chain_loss_and_gradient(const CrossAttentionMLP& model, const LinearCodec& codec,
                                  const NoiseSchedule& schedule, const ReverseStepConfig& reverse,
                                  const EncoderSuite& suite, std::span<const ChainExample> batch, int chain_steps,
                                  double lambda_prompt, double lambda_recon, std::uint64_t seed);

}  // namespace weakdiff
