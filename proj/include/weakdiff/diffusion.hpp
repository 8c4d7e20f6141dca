#pragma once

// Forward noising and ancestral reverse sampling over a latent space.
//
// Every operation takes its Gaussian noise as an explicit argument (or a seed
// for the whole chain) so results are reproducible and moment-testable.

#include <cstdint>
#include <vector>

#include "weakdiff/denoiser.hpp"
#include "weakdiff/schedule.hpp"
#include "weakdiff/vector.hpp"

namespace weakdiff {

enum class VarianceMode {
  fixed_beta,        // sigma_t^2 = beta_t
  fixed_beta_tilde,  // sigma_t^2 = beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
};

struct ReverseStepConfig {
  VarianceMode variance_mode = VarianceMode::fixed_beta;
  // Return the posterior mean at t = 1 instead of adding noise.
  bool final_step_noiseless = true;
};

// One Markov step q(z_t | z_{t-1}): sqrt(1 - beta_t) z_prev + sqrt(beta_t) noise.
LatentVector forward_step(const LatentVector& z_prev, int t, const NoiseSchedule& schedule,
                          const LatentVector& noise);

// Closed-form marginal q(z_t | z_0): sqrt(abar_t) z0 + sqrt(1 - abar_t) noise.
LatentVector q_sample(const LatentVector& z0, int t, const NoiseSchedule& schedule, const LatentVector& noise);

// mu_theta(z_t, t) = (z_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t)
LatentVector posterior_mean(const LatentVector& z_t, const LatentVector& eps_hat, int t,
                            const NoiseSchedule& schedule);

// Standard deviation injected at step t (0 at t = 1 when the final step is noiseless).
double reverse_sigma(int t, const NoiseSchedule& schedule, const ReverseStepConfig& cfg);

LatentVector reverse_step(const LatentVector& z_t, const LatentVector& eps_hat, int t,
                          const NoiseSchedule& schedule, const ReverseStepConfig& cfg, const LatentVector& noise);

// Full reverse chain from z_T ~ N(0, I) down to a z_0 estimate. All noise
// comes from a generator seeded with rng_seed.
LatentVector sample_loop(const Denoiser& denoiser, const ConditioningVector& cond, const NoiseSchedule& schedule,
                         const ReverseStepConfig& cfg, std::uint64_t rng_seed);

// n independent chains; chain i uses derive_seed(base_seed, i), so the result
// does not depend on how the chains are scheduled.
std::vector<LatentVector> sample_many(const Denoiser& denoiser, const ConditioningVector& cond,
                                      const NoiseSchedule& schedule, const ReverseStepConfig& cfg,
                                      std::uint64_t base_seed, std::size_t n);

}  // namespace weakdiff
