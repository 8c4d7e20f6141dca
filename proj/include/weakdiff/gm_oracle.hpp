#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "weakdiff/denoiser.hpp"
#include "weakdiff/schedule.hpp"
#include "weakdiff/vector.hpp"

namespace weakdiff {

// Data distribution sum_k pi_k N(mu_k, I) used as an analytic target.
struct GaussianMixture {
  std::vector<LatentVector> means;
  std::vector<double> weights;

  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  // Throws unless K >= 1, all means share a dimension, pi_k > 0 and sum to 1 (1e-12).
  void validate() const;

  // i.i.d. draws.
  std::vector<LatentVector> sample(std::size_t n, std::uint64_t seed) const;

  // Stratified low-discrepancy sample: component k receives round(n pi_k)
  // points (remainder to the heaviest components) laid out by a Halton
  // sequence pushed through the standard normal quantile.
  std::vector<LatentVector> quasi_random_sample(std::size_t n) const;
};

// Bayes-optimal noise predictor for a Gaussian-mixture target:
//
//   eps*(z_t, t) = (z_t - sqrt(abar_t) E[z0 | z_t]) / sqrt(1 - abar_t)
//
// with E[z0 | z_t] = sum_k r_k(z_t) m_k(z_t), where r_k are the posterior
// responsibilities under the noised components N(sqrt(abar_t) mu_k, I) and
// m_k = mu_k + sqrt(abar_t) (z_t - sqrt(abar_t) mu_k) is each component's
// Gaussian posterior mean. Conditioning is ignored.
class GMOracleDenoiser final : public Denoiser {
 public:
  GMOracleDenoiser(GaussianMixture mixture, NoiseSchedule schedule);

  const GaussianMixture& mixture() const { return mixture_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  std::size_t latent_dim() const override { return mixture_.dim(); }
  int steps() const override { return schedule_.steps(); }
  LatentVector predict_eps(const LatentVector& z_t, int t, const ConditioningVector& cond) const override;

  // E[z0 | z_t] under the mixture prior.
  LatentVector posterior_z0(const LatentVector& z_t, int t) const;

 private:
  GaussianMixture mixture_;
  NoiseSchedule schedule_;
};

}  // namespace weakdiff
