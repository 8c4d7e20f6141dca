#pragma once

// Sample-set metrics computed directly in latent (or any feature) space:
//   FD-latent        Frechet distance between Gaussian fits
//   diversity proxy  exp(entropy) of k-means cluster occupancy, in [1, k]
//   alignment table  mean caption/image cosine per method, with a
//                    shuffled-prompt baseline and a paired bootstrap

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weakdiff/embedding.hpp"
#include "weakdiff/vector.hpp"

namespace weakdiff {

struct GaussianFit {
  std::vector<double> mean;
  Matrix covariance;  // unbiased sample covariance + reg * I
  std::size_t n = 0;
  double reg = 0.0;

  std::size_t dim() const { return mean.size(); }
};

// Rows of `samples` are observations. Needs n >= 2. reg = 1e-6 * mean of the
// unregularized diagonal (falls back to 1e-12 when that diagonal is zero).
GaussianFit fit_gaussian(const Matrix& samples);
GaussianFit fit_gaussian(std::span<const LatentVector> samples);
// Explicit moments, for closed-form checks. reg is recorded but not added.
GaussianFit gaussian_from_moments(std::vector<double> mean, Matrix covariance);

struct FrechetDetail {
  double distance = 0.0;
  double mean_term = 0.0;   // ||mu_a - mu_b||^2
  double trace_term = 0.0;  // tr(Sa + Sb - 2 (Sa Sb)^{1/2})
  std::size_t clipped_eigenvalues = 0;
  double most_negative_eigenvalue = 0.0;
};

// tr((Sa Sb)^{1/2}) is evaluated as sum sqrt(eig(Sa^{1/2} Sb Sa^{1/2})) with
// the symmetrized product; negative eigenvalues are clipped to 0 and counted.
FrechetDetail frechet_distance_detail(const GaussianFit& a, const GaussianFit& b);
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

struct DiversityResult {
  double value = 1.0;
  bool degenerate = false;  // all samples identical
  std::vector<std::size_t> occupancy;
};

// k-means over the lexicographically sorted samples (so the result does not
// depend on input order): seeded k-means++ seeding, Lloyd iterations until
// assignments stop changing, best of several restarts by inertia.
DiversityResult diversity_proxy(std::span<const LatentVector> samples, std::size_t k, std::uint64_t seed = 0);

struct AlignmentRow {
  std::string method;
  std::size_t n = 0;
  double mean_matched = 0.0;
  double mean_shuffled = 0.0;
  // Paired bootstrap on matched - shuffled.
  double difference_lower = 0.0;
  double difference_upper = 0.0;
};

struct AlignmentInput {
  std::string method;
  std::vector<TokenList> prompts;   // prompts[i] produced images[i]
  std::vector<ImageVector> images;
};

struct BootstrapOptions {
  std::size_t resamples = 2000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
};

// Shuffled baseline: each image is scored against the prompt of a seeded
// random derangement partner whose prompt differs, when one exists.
std::vector<AlignmentRow> alignment_table(const EncoderSuite& suite, std::span<const AlignmentInput> methods,
                                          const BootstrapOptions& options = {});

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Percentile bootstrap interval for the mean of `values`.
Interval bootstrap_mean_interval(std::span<const double> values, const BootstrapOptions& options);

}  // namespace weakdiff
