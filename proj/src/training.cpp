#include "weakdiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "weakdiff/rng.hpp"
#include "weakdiff/simd.hpp"

namespace weakdiff {
namespace {

using Clock = std::chrono::steady_clock;

// Stream indices for derive_seed(cfg.seed, ...).
constexpr std::uint64_t kPhase1Batches = 1;
constexpr std::uint64_t kPhase1EvalBatch = 11;
constexpr std::uint64_t kPhase2Batches = 2;
constexpr std::uint64_t kPhase2EvalRecords = 21;
constexpr std::uint64_t kPhase2EvalBatch = 22;
constexpr std::uint64_t kPhase2EvalSampling = 23;
constexpr std::uint64_t kPhase2Chain = 24;
constexpr std::uint64_t kPhase2ChainNoise = 25;

std::vector<DenoisingExample> draw_examples(Rng& rng, std::span<const LatentVector> latents,
                                            std::span<const ConditioningVector> conds, std::size_t count, int steps) {
  std::vector<DenoisingExample> out(count);
  const std::size_t d = latents.front().size();
  for (DenoisingExample& ex : out) {
    const std::size_t i = rng.index(latents.size());
    ex.z0 = latents[i];
    ex.t = rng.integer(1, steps);
    ex.noise = LatentVector::zeros(d);
    rng.fill_normal(ex.noise.span());
    ex.cond = conds.empty() ? nullptr : &conds[i];
  }
  return out;
}

double denoise_loss(const CrossAttentionMLP& model, std::span<const DenoisingExample> batch,
                    const NoiseSchedule& schedule) {
  const ConditioningVector none;
  double total = 0.0;
  for (const DenoisingExample& ex : batch) {
    const LatentVector z_t = q_sample(ex.z0, ex.t, schedule, ex.noise);
    const LatentVector eps = model.predict_eps(z_t, ex.t, ex.cond != nullptr ? *ex.cond : none);
    for (std::size_t i = 0; i < eps.size(); ++i) total += (eps[i] - ex.noise[i]) * (eps[i] - ex.noise[i]);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<LatentVector> encode_all(const LinearCodec& codec, std::span<const DataRecord> records) {
  std::vector<LatentVector> out;
  out.reserve(records.size());
  for (const DataRecord& r : records) out.push_back(codec.encode(r.image));
  return out;
}

void check_compatible(const CrossAttentionMLP& model, const LinearCodec& codec, const NoiseSchedule& schedule) {
  if (model.latent_dim() != codec.latent_dim()) {
    throw std::invalid_argument("training: model latent dimension " + std::to_string(model.latent_dim()) +
                                " does not match codec latent dimension " + std::to_string(codec.latent_dim()));
  }
  if (model.steps() != schedule.steps()) {
    throw std::invalid_argument("training: model has " + std::to_string(model.steps()) +
                                " timesteps, schedule has " + std::to_string(schedule.steps()));
  }
}

double seconds_since(Clock::time_point start, bool record) {
  return record ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
}

}  // namespace

GradientMode parse_gradient_mode(std::string_view name) {
  if (name == "selection") return GradientMode::selection;
  if (name == "differentiable") return GradientMode::differentiable;
  throw std::invalid_argument("unknown gradient mode '" + std::string(name) +
                              "' (expected selection or differentiable)");
}

std::string_view gradient_mode_name(GradientMode mode) {
  return mode == GradientMode::selection ? "selection" : "differentiable";
}

TauPolicy TrainConfig::filter_policy() const {
  TauPolicy p;
  p.kind = tau_policy;
  p.value = tau_policy == TauPolicyKind::percentile ? tau_percentile : tau;
  p.bins = valley_bins;
  return p;
}

void TrainConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  for (double l : {lambda_denoise, lambda_prompt, lambda_recon}) {
    if (!(l >= 0.0) || !std::isfinite(l)) fail("lambda weights must be finite and >= 0");
  }
  if (!(lambda_denoise + lambda_prompt + lambda_recon > 0.0)) fail("at least one lambda must be positive");
  if (gradient_mode == GradientMode::selection && !(lambda_denoise > 0.0)) {
    fail("lambda_denoise must be positive in selection mode (it is the only gradient source)");
  }
  if (!(tau >= -1.0 && tau <= 1.0)) fail("tau must lie in [-1, 1]");
  if (!(tau_percentile >= 0.0 && tau_percentile <= 100.0)) fail("tau_percentile must lie in [0, 100]");
  if (valley_bins < 3) fail("valley_bins must be >= 3");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (log_every == 0) fail("log_every must be >= 1");
  if (eval_every == 0) fail("eval_every must be >= 1");
  if (eval_samples == 0) fail("eval_samples must be >= 1");
  if (eval_denoise_examples == 0) fail("eval_denoise_examples must be >= 1");
  if (chain_steps < 1 || chain_steps > 10) fail("chain_steps must lie in [1, 10]");
  if (chain_batch == 0) fail("chain_batch must be >= 1");
}

double prompt_consistency_loss(const EncoderSuite& suite, std::span<const std::string> caption,
                               const ImageVector& x_hat) {
  return 1.0 - alignment_score(suite, caption, x_hat);
}

double reconstruction_loss(const ImageVector& x0, const ImageVector& x_hat) {
  require_same_size(x0.size(), x_hat.size(), "reconstruction_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) s += (x0[i] - x_hat[i]) * (x0[i] - x_hat[i]);
  return s;
}

double total_loss(const TrainConfig& cfg, double l_denoise, double l_prompt, double l_recon) {
  if (!std::isfinite(l_denoise) || !std::isfinite(l_prompt) || !std::isfinite(l_recon)) {
    throw std::invalid_argument("total_loss: non-finite component");
  }
  return cfg.lambda_denoise * l_denoise + cfg.lambda_prompt * l_prompt + cfg.lambda_recon * l_recon;
}

PhaseResult run_phase1(const TrainConfig& cfg, const CrossAttentionMLP& model, const LinearCodec& codec,
                       const NoiseSchedule& schedule, std::span<const DataRecord> pretrain_data) {
  cfg.validate();
  check_compatible(model, codec, schedule);
  if (pretrain_data.empty()) throw std::invalid_argument("run_phase1: no pretraining data");

  PhaseResult result{model, {}, std::nullopt, 0, pretrain_data.size()};
  if (cfg.phase1_steps == 0) return result;

  const auto start = Clock::now();
  const std::vector<LatentVector> latents = encode_all(codec, pretrain_data);
  Rng eval_rng(derive_seed(cfg.seed, kPhase1EvalBatch));
  const std::vector<DenoisingExample> eval_batch =
      draw_examples(eval_rng, latents, {}, cfg.eval_denoise_examples, schedule.steps());

  const auto log_now = [&](std::size_t step) {
    const double ld = denoise_loss(result.model, eval_batch, schedule);
    result.log.push_back({step, 1, ld, 0.0, 0.0, total_loss(cfg, ld, 0.0, 0.0), seconds_since(start, cfg.record_wallclock)});
  };

  log_now(0);
  Rng rng(derive_seed(cfg.seed, kPhase1Batches));
  Optimizer opt(cfg.optimizer);
  for (std::size_t step = 1; step <= cfg.phase1_steps; ++step) {
    const std::vector<DenoisingExample> batch = draw_examples(rng, latents, {}, cfg.batch_size, schedule.steps());
    const LossAndGradient lg = result.model.loss_and_gradient(batch, schedule);
    opt.step(result.model.mutable_parameters(), lg.grad, cfg.lr);
    if (step % cfg.log_every == 0 || step == cfg.phase1_steps) log_now(step);
  }
  result.selected_step = cfg.phase1_steps;
  return result;
}

ChainLoss chain_loss_and_gradient(const CrossAttentionMLP& model, const LinearCodec& codec,
                                  const NoiseSchedule& schedule, const ReverseStepConfig& reverse,
                                  const EncoderSuite& suite, std::span<const ChainExample> batch, int chain_steps,
                                  double lambda_prompt, double lambda_recon, std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("chain loss: empty batch");
  if (chain_steps < 1 || chain_steps > schedule.steps()) throw std::invalid_argument("chain loss: bad chain length");
  check_compatible(model, codec, schedule);

  const std::size_t d = model.latent_dim();
  const std::size_t m = codec.image_dim();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const ConditioningVector none;
  const auto& kern = simd::kernels();

  ChainLoss out;
  out.grad.assign(model.parameters().size(), 0.0);
  Rng rng(seed);
  std::vector<CrossAttentionMLP::Cache> caches(static_cast<std::size_t>(chain_steps));

  for (const ChainExample& ex : batch) {
    const ConditioningVector& cond = ex.cond != nullptr ? *ex.cond : none;
    LatentVector noise = LatentVector::zeros(d);
    rng.fill_normal(noise.span());
    LatentVector z = q_sample(ex.z0, chain_steps, schedule, noise);
    for (int t = chain_steps; t >= 1; --t) {
      const LatentVector eps = model.forward(z, t, cond, &caches[static_cast<std::size_t>(chain_steps - t)]);
      rng.fill_normal(noise.span());
      z = reverse_step(z, eps, t, schedule, reverse, noise);
    }
    const ImageVector x_hat = codec.decode(z);

    // Prompt term through w = P A x_hat.
    const std::vector<double> text = embed_text(suite.space, suite.vocab, ex.caption);
    const std::vector<double> w = suite.space.project(suite.attributes.activations(x_hat));
    const double w_norm = std::sqrt(simd::squared_norm(w));
    if (!(w_norm > 0.0)) throw std::runtime_error("chain loss: generated image has zero embedding");
    const double cos = simd::dot(text, w) / w_norm;
    const double lp = 1.0 - cos;
    const double lr = reconstruction_loss(ex.x0, x_hat);
    out.l_prompt += lp * inv_b;
    out.l_recon += lr * inv_b;

    std::vector<double> dcos_dw(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) dcos_dw[i] = (text[i] - cos * w[i] / w_norm) / w_norm;
    const ImageVector dcos_dx = suite.attributes.render(suite.space.project_transpose(dcos_dw));
    std::vector<double> gx(m);
    for (std::size_t j = 0; j < m; ++j) {
      gx[j] = inv_b * (-lambda_prompt * dcos_dx[j] + 2.0 * lambda_recon * (x_hat[j] - ex.x0[j]));
    }
    LatentVector gz = LatentVector::zeros(d);
    kern.gemv_t(codec.decoder().data(), m, d, gx.data(), gz.data());

    std::vector<double> grad_eps(d);
    for (int t = 1; t <= chain_steps; ++t) {
      const StepCoefficients c = schedule.query(t);
      const double inv_sqrt_alpha = 1.0 / std::sqrt(c.alpha);
      const double coef = c.beta / std::sqrt(1.0 - c.alpha_bar);
      for (std::size_t i = 0; i < d; ++i) grad_eps[i] = -coef * inv_sqrt_alpha * gz[i];
      const LatentVector via_eps =
          model.backward(caches[static_cast<std::size_t>(chain_steps - t)], grad_eps, out.grad);
      for (std::size_t i = 0; i < d; ++i) gz[i] = inv_sqrt_alpha * gz[i] + via_eps[i];
    }
  }
  return out;
}

PhaseResult run_phase2(const TrainConfig& cfg, const CrossAttentionMLP& model, const LinearCodec& codec,
                       const NoiseSchedule& schedule, const ReverseStepConfig& reverse, const EncoderSuite& suite,
                       std::span<const DataRecord> weak_data, const RefinerClient* refiner) {
  cfg.validate();
  check_compatible(model, codec, schedule);
  if (weak_data.empty()) throw std::invalid_argument("run_phase2: no weakly-labeled data");
  const auto start = Clock::now();

  PhaseResult result{model, {}, std::nullopt, 0, 0};
  std::vector<DataRecord> kept;
  if (cfg.apply_filter) {
    FilterResult filtered = filter_dataset(suite, weak_data, cfg.filter_policy());
    result.filter_report = std::move(filtered.report);
    kept = std::move(filtered.kept);
    if (kept.empty()) {
      throw TrainingError("run_phase2: no records survive the filter (tau = " +
                              std::to_string(result.filter_report->tau) + ", " +
                              std::to_string(result.filter_report->total) + " scored)",
                          result.filter_report);
    }
  } else {
    kept.assign(weak_data.begin(), weak_data.end());
  }
  result.kept_records = kept.size();

  std::vector<TokenList> captions;
  std::vector<ConditioningVector> conds;
  captions.reserve(kept.size());
  conds.reserve(kept.size());
  for (const DataRecord& r : kept) {
    captions.push_back(refiner != nullptr ? refine_prompt(*refiner, r.caption, suite.vocab) : r.caption);
    conds.push_back(condition_on(suite, captions.back()));
  }
  const std::vector<LatentVector> latents = encode_all(codec, kept);

  std::vector<std::size_t> eval_ids(kept.size());
  std::iota(eval_ids.begin(), eval_ids.end(), 0);
  {
    Rng pick(derive_seed(cfg.seed, kPhase2EvalRecords));
    const std::size_t count = std::min(cfg.eval_samples, kept.size());
    for (std::size_t i = 0; i < count; ++i) std::swap(eval_ids[i], eval_ids[i + pick.index(kept.size() - i)]);
    eval_ids.resize(count);
  }
  Rng eval_rng(derive_seed(cfg.seed, kPhase2EvalBatch));
  const std::vector<DenoisingExample> eval_batch =
      draw_examples(eval_rng, latents, conds, cfg.eval_denoise_examples, schedule.steps());
  const std::uint64_t sampling_seed = derive_seed(cfg.seed, kPhase2EvalSampling);

  std::vector<double> best_params;
  double best_total = 0.0;
  const auto evaluate = [&](std::size_t step) {
    const double ld = denoise_loss(result.model, eval_batch, schedule);
    double lp = 0.0;
    double lr = 0.0;
    for (std::size_t j = 0; j < eval_ids.size(); ++j) {
      const std::size_t i = eval_ids[j];
      const LatentVector z = sample_loop(result.model, conds[i], schedule, reverse, derive_seed(sampling_seed, j));
      const ImageVector x_hat = codec.decode(z);
      lp += prompt_consistency_loss(suite, captions[i], x_hat);
      lr += reconstruction_loss(kept[i].image, x_hat);
    }
    lp /= static_cast<double>(eval_ids.size());
    lr /= static_cast<double>(eval_ids.size());
    const double lt = total_loss(cfg, ld, lp, lr);
    result.log.push_back({step, 2, ld, lp, lr, lt, seconds_since(start, cfg.record_wallclock)});
    if (best_params.empty() || lt < best_total) {
      best_total = lt;
      best_params.assign(result.model.parameters().begin(), result.model.parameters().end());
      result.selected_step = step;
    }
  };

  if (cfg.phase2_steps == 0) return result;
  evaluate(0);

  Rng rng(derive_seed(cfg.seed, kPhase2Batches));
  Rng chain_rng(derive_seed(cfg.seed, kPhase2Chain));
  const std::uint64_t chain_noise_seed = derive_seed(cfg.seed, kPhase2ChainNoise);
  const bool use_chain =
      cfg.gradient_mode == GradientMode::differentiable && (cfg.lambda_prompt > 0.0 || cfg.lambda_recon > 0.0);
  Optimizer opt(cfg.optimizer);
  std::vector<ChainExample> chain_batch(cfg.chain_batch);
  for (std::size_t step = 1; step <= cfg.phase2_steps; ++step) {
    const std::vector<DenoisingExample> batch = draw_examples(rng, latents, conds, cfg.batch_size, schedule.steps());
    LossAndGradient lg = result.model.loss_and_gradient(batch, schedule);
    for (double& g : lg.grad) g *= cfg.lambda_denoise;
    if (use_chain) {
      for (ChainExample& ex : chain_batch) {
        const std::size_t i = chain_rng.index(kept.size());
        ex = ChainExample{latents[i], kept[i].image, captions[i], &conds[i]};
      }
      const ChainLoss cl = chain_loss_and_gradient(result.model, codec, schedule, reverse, suite, chain_batch,
                                                   cfg.chain_steps, cfg.lambda_prompt, cfg.lambda_recon,
                                                   derive_seed(chain_noise_seed, step));
      simd::axpy(1.0, cl.grad, lg.grad);
    }
    opt.step(result.model.mutable_parameters(), lg.grad, cfg.lr);
    if (step % cfg.eval_every == 0 || step == cfg.phase2_steps) evaluate(step);
  }

  if (cfg.select_best) {
    result.model.set_parameters(std::move(best_params));
  } else {
    result.selected_step = cfg.phase2_steps;
  }
  return result;
}

}  // namespace weakdiff
