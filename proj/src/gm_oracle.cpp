#include "weakdiff/gm_oracle.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "weakdiff/rng.hpp"

namespace weakdiff {
namespace {

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace

void GaussianMixture::validate() const {
  if (means.empty()) throw std::invalid_argument("mixture: at least one component required");
  if (weights.size() != means.size()) throw std::invalid_argument("mixture: one weight per component required");
  const std::size_t d = means.front().size();
  if (d == 0) throw std::invalid_argument("mixture: zero-dimensional means");
  double total = 0.0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    require_same_size(means[k].size(), d, "mixture means");
    if (!(weights[k] > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights must sum to 1");
}

std::vector<LatentVector> GaussianMixture::sample(std::size_t n, std::uint64_t seed) const {
  validate();
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::mt19937_64 component_engine(derive_seed(seed, 1));
  std::vector<LatentVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LatentVector& mu = means[pick(component_engine)];
    LatentVector x = mu;
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += rng.normal();
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<LatentVector> GaussianMixture::quasi_random_sample(std::size_t n) const {
  validate();
  const std::size_t d = dim();
  if (d > std::size(kPrimes)) throw std::invalid_argument("quasi_random_sample: dimension too large");

  std::vector<std::size_t> counts(means.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    counts[k] = static_cast<std::size_t>(std::floor(weights[k] * static_cast<double>(n)));
    assigned += counts[k];
  }
  std::vector<std::size_t> order(means.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % order.size()]];

  const boost::math::normal_distribution<double> standard;
  std::vector<LatentVector> out;
  out.reserve(n);
  for (std::size_t k = 0; k < means.size(); ++k) {
    for (std::size_t i = 1; i <= counts[k]; ++i) {
      LatentVector x = means[k];
      for (std::size_t j = 0; j < d; ++j) x[j] += boost::math::quantile(standard, radical_inverse(i, kPrimes[j]));
      out.push_back(std::move(x));
    }
  }
  return out;
}

GMOracleDenoiser::GMOracleDenoiser(GaussianMixture mixture, NoiseSchedule schedule)
    : mixture_(std::move(mixture)), schedule_(std::move(schedule)) {
  mixture_.validate();
}

LatentVector GMOracleDenoiser::posterior_z0(const LatentVector& z_t, int t) const {
  require_same_size(z_t.size(), mixture_.dim(), "oracle latent");
  const double abar = schedule_.alpha_bar(t);
  const double s = std::sqrt(abar);
  const std::size_t K = mixture_.means.size();
  const std::size_t d = z_t.size();

  // Noised components all have covariance (abar + 1 - abar) I = I.
  std::vector<double> log_r(K);
  for (std::size_t k = 0; k < K; ++k) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = z_t[j] - s * mixture_.means[k][j];
      sq += diff * diff;
    }
    log_r[k] = std::log(mixture_.weights[k]) - 0.5 * sq;
  }
  const double top = *std::max_element(log_r.begin(), log_r.end());
  double total = 0.0;
  for (double& v : log_r) {
    v = std::exp(v - top);
    total += v;
  }

  LatentVector mean = LatentVector::zeros(d);
  for (std::size_t k = 0; k < K; ++k) {
    const double r = log_r[k] / total;
    for (std::size_t j = 0; j < d; ++j) {
      const double mu = mixture_.means[k][j];
      mean[j] += r * (mu + s * (z_t[j] - s * mu));
    }
  }
  return mean;
}

LatentVector GMOracleDenoiser::predict_eps(const LatentVector& z_t, int t, const ConditioningVector&) const {
  const double abar = schedule_.alpha_bar(t);
  const LatentVector z0 = posterior_z0(z_t, t);
  const double s = std::sqrt(abar);
  const double inv = 1.0 / std::sqrt(1.0 - abar);
  LatentVector eps = LatentVector::zeros(z_t.size());
  for (std::size_t j = 0; j < z_t.size(); ++j) eps[j] = (z_t[j] - s * z0[j]) * inv;
  return eps;
}

}  // namespace weakdiff
