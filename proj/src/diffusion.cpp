#include "weakdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "weakdiff/rng.hpp"
#include "weakdiff/simd.hpp"

namespace weakdiff {
namespace {

LatentVector combine(double a, const LatentVector& x, double b, const LatentVector& y) {
  LatentVector out = LatentVector::zeros(x.size());
  simd::kernels().axpby(a, x.data(), b, y.data(), out.data(), x.size());
  return out;
}

}  // namespace

LatentVector forward_step(const LatentVector& z_prev, int t, const NoiseSchedule& schedule,
                          const LatentVector& noise) {
  require_same_size(z_prev.size(), noise.size(), "forward_step");
  const double beta = schedule.beta(t);
  return combine(std::sqrt(1.0 - beta), z_prev, std::sqrt(beta), noise);
}

LatentVector q_sample(const LatentVector& z0, int t, const NoiseSchedule& schedule, const LatentVector& noise) {
  require_same_size(z0.size(), noise.size(), "q_sample");
  const double abar = schedule.alpha_bar(t);
  return combine(std::sqrt(abar), z0, std::sqrt(1.0 - abar), noise);
}

LatentVector posterior_mean(const LatentVector& z_t, const LatentVector& eps_hat, int t,
                            const NoiseSchedule& schedule) {
  require_same_size(z_t.size(), eps_hat.size(), "posterior_mean");
  const StepCoefficients c = schedule.query(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(c.alpha);
  const double eps_coef = c.beta / std::sqrt(1.0 - c.alpha_bar);
  return combine(inv_sqrt_alpha, z_t, -inv_sqrt_alpha * eps_coef, eps_hat);
}

double reverse_sigma(int t, const NoiseSchedule& schedule, const ReverseStepConfig& cfg) {
  const StepCoefficients c = schedule.query(t);
  if (t == 1 && cfg.final_step_noiseless) return 0.0;
  switch (cfg.variance_mode) {
    case VarianceMode::fixed_beta:
      return std::sqrt(c.beta);
    case VarianceMode::fixed_beta_tilde:
      return std::sqrt(c.beta * (1.0 - schedule.alpha_bar_prev(t)) / (1.0 - c.alpha_bar));
  }
  return 0.0;
}

LatentVector reverse_step(const LatentVector& z_t, const LatentVector& eps_hat, int t,
                          const NoiseSchedule& schedule, const ReverseStepConfig& cfg, const LatentVector& noise) {
  require_same_size(z_t.size(), noise.size(), "reverse_step");
  LatentVector mean = posterior_mean(z_t, eps_hat, t, schedule);
  const double sigma = reverse_sigma(t, schedule, cfg);
  if (sigma == 0.0) return mean;
  simd::kernels().axpy(sigma, noise.data(), mean.data(), mean.size());
  return mean;
}

LatentVector sample_loop(const Denoiser& denoiser, const ConditioningVector& cond, const NoiseSchedule& schedule,
                         const ReverseStepConfig& cfg, std::uint64_t rng_seed) {
  if (denoiser.steps() < schedule.steps()) {
    throw std::invalid_argument("sample_loop: denoiser supports fewer timesteps than the schedule");
  }
  const std::size_t d = denoiser.latent_dim();
  Rng rng(rng_seed);
  LatentVector z = LatentVector::zeros(d);
  rng.fill_normal(z.span());
  LatentVector noise = LatentVector::zeros(d);
  for (int t = schedule.steps(); t >= 1; --t) {
    const LatentVector eps = denoiser.predict_eps(z, t, cond);
    if (reverse_sigma(t, schedule, cfg) != 0.0) rng.fill_normal(noise.span());
    z = reverse_step(z, eps, t, schedule, cfg, noise);
  }
  return z;
}

std::vector<LatentVector> sample_many(const Denoiser& denoiser, const ConditioningVector& cond,
                                      const NoiseSchedule& schedule, const ReverseStepConfig& cfg,
                                      std::uint64_t base_seed, std::size_t n) {
  std::vector<LatentVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_loop(denoiser, cond, schedule, cfg, derive_seed(base_seed, i)));
  return out;
}

}  // namespace weakdiff
