#include "weakdiff/evalmetrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "weakdiff/rng.hpp"
#include "weakdiff/simd.hpp"

namespace weakdiff {
namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  }
  return out;
}

void check_fit(const GaussianFit& f, const char* which) {
  const std::size_t d = f.dim();
  if (d == 0 || f.covariance.rows() != d || f.covariance.cols() != d) {
    throw std::invalid_argument(std::string("frechet_distance: malformed fit ") + which);
  }
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(f.mean.begin(), f.mean.end(), finite) ||
      !std::all_of(f.covariance.storage().begin(), f.covariance.storage().end(), finite)) {
    throw std::invalid_argument(std::string("frechet_distance: non-finite fit ") + which);
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

GaussianFit fit_gaussian(const Matrix& samples) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  if (n < 2) throw std::invalid_argument("fit_gaussian: need at least 2 samples");
  if (d == 0) throw std::invalid_argument("fit_gaussian: zero-dimensional samples");
  if (!std::all_of(samples.storage().begin(), samples.storage().end(), [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("fit_gaussian: non-finite sample");
  }

  GaussianFit fit;
  fit.n = n;
  fit.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) simd::axpy(1.0, samples.row(i), fit.mean);
  for (double& v : fit.mean) v /= static_cast<double>(n);

  fit.covariance = Matrix(d, d);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = samples.row(i);
    for (std::size_t j = 0; j < d; ++j) centered[j] = row[j] - fit.mean[j];
    simd::kernels().ger(1.0, centered.data(), d, centered.data(), d, fit.covariance.data());
  }
  double diag = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) fit.covariance(r, c) /= static_cast<double>(n - 1);
    diag += fit.covariance(r, r);
  }
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = r + 1; c < d; ++c) {
      const double sym = 0.5 * (fit.covariance(r, c) + fit.covariance(c, r));
      fit.covariance(r, c) = fit.covariance(c, r) = sym;
    }
  }
  diag /= static_cast<double>(d);
  fit.reg = diag > 0.0 ? 1e-6 * diag : 1e-12;
  for (std::size_t r = 0; r < d; ++r) fit.covariance(r, r) += fit.reg;
  return fit;
}

GaussianFit fit_gaussian(std::span<const LatentVector> samples) {
  if (samples.empty()) throw std::invalid_argument("fit_gaussian: need at least 2 samples");
  const std::size_t d = samples.front().size();
  Matrix m(samples.size(), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require_same_size(samples[i].size(), d, "fit_gaussian sample");
    std::copy(samples[i].begin(), samples[i].end(), m.row(i).begin());
  }
  return fit_gaussian(m);
}

GaussianFit gaussian_from_moments(std::vector<double> mean, Matrix covariance) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw std::invalid_argument("gaussian_from_moments: covariance shape does not match mean");
  }
  GaussianFit fit;
  fit.mean = std::move(mean);
  fit.covariance = std::move(covariance);
  return fit;
}

FrechetDetail frechet_distance_detail(const GaussianFit& a, const GaussianFit& b) {
  check_fit(a, "a");
  check_fit(b, "b");
  require_same_size(a.dim(), b.dim(), "frechet_distance");

  FrechetDetail out;
  out.mean_term = squared_distance(a.mean, b.mean);

  const Eigen::MatrixXd sa = to_eigen(a.covariance);
  const Eigen::MatrixXd sb = to_eigen(b.covariance);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(0.5 * (sa + sa.transpose()));
  if (ea.info() != Eigen::Success) throw std::runtime_error("frechet_distance: eigendecomposition failed");
  const Eigen::VectorXd root = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sa_half = ea.eigenvectors() * root.asDiagonal() * ea.eigenvectors().transpose();
  const Eigen::MatrixXd product = sa_half * sb * sa_half;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(0.5 * (product + product.transpose()),
                                                           Eigen::EigenvaluesOnly);
  if (ep.info() != Eigen::Success) throw std::runtime_error("frechet_distance: eigendecomposition failed");

  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < ep.eigenvalues().size(); ++i) {
    const double lambda = ep.eigenvalues()(i);
    if (lambda < 0.0) {
      ++out.clipped_eigenvalues;
      out.most_negative_eigenvalue = std::min(out.most_negative_eigenvalue, lambda);
      continue;
    }
    trace_sqrt += std::sqrt(lambda);
  }
  out.trace_term = sa.trace() + sb.trace() - 2.0 * trace_sqrt;
  out.distance = std::max(0.0, out.mean_term + out.trace_term);
  return out;
}

double frechet_distance(const GaussianFit& a, const GaussianFit& b) { return frechet_distance_detail(a, b).distance; }

constexpr int kDiversityRestarts = 8;

DiversityResult diversity_proxy(std::span<const LatentVector> samples, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("diversity_proxy: k must be >= 2");
  if (samples.size() < k) throw std::invalid_argument("diversity_proxy: need at least k samples");
  const std::size_t d = samples.front().size();
  for (const LatentVector& s : samples) require_same_size(s.size(), d, "diversity_proxy sample");

  std::vector<const LatentVector*> sorted;
  for (const LatentVector& s : samples) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](const LatentVector* a, const LatentVector* b) {
    return std::lexicographical_compare(a->begin(), a->end(), b->begin(), b->end());
  });
  const std::size_t n = sorted.size();

  DiversityResult result;
  if (std::all_of(sorted.begin(), sorted.end(), [&](const LatentVector* s) { return *s == *sorted.front(); })) {
    result.value = 1.0;
    result.degenerate = true;
    result.occupancy.assign(k, 0);
    result.occupancy[0] = n;
    return result;
  }

  // Seeded k-means++ with restarts; the lowest-inertia clustering wins.
  Rng rng(seed);
  std::vector<std::size_t> assign;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < kDiversityRestarts; ++restart) {
    std::vector<std::vector<double>> centers;
    centers.push_back(sorted[rng.index(n)]->values());
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nearest[i] = std::min(nearest[i], squared_distance(sorted[i]->span(), centers.back()));
        total += nearest[i];
      }
      if (!(total > 0.0)) break;
      double r = rng.uniform() * total;
      std::size_t pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= nearest[i];
        if (r < 0.0 && nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
      centers.push_back(sorted[pick]->values());
    }

    std::vector<std::size_t> current(n, k);
    double inertia = 0.0;
    for (int iter = 0; iter < 300; ++iter) {
      bool changed = false;
      inertia = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.size(); ++c) {
          const double dist = squared_distance(sorted[i]->span(), centers[c]);
          if (dist < best_d) {
            best_d = dist;
            best = c;
          }
        }
        inertia += best_d;
        if (current[i] != best) {
          current[i] = best;
          changed = true;
        }
      }
      if (!changed) break;
      std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(d, 0.0));
      std::vector<std::size_t> counts(centers.size(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        simd::axpy(1.0, sorted[i]->span(), sums[current[i]]);
        ++counts[current[i]];
      }
      for (std::size_t c = 0; c < centers.size(); ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t j = 0; j < d; ++j) centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      assign = std::move(current);
    }
  }

  result.occupancy.assign(k, 0);
  for (std::size_t a : assign) ++result.occupancy[a];
  double entropy = 0.0;
  for (std::size_t c : result.occupancy) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    entropy -= p * std::log(p);
  }
  result.value = std::clamp(std::exp(entropy), 1.0, static_cast<double>(k));
  return result;
}

Interval bootstrap_mean_interval(std::span<const double> values, const BootstrapOptions& options) {
  if (values.empty()) throw std::invalid_argument("bootstrap: no values");
  if (options.resamples == 0) throw std::invalid_argument("bootstrap: resamples must be positive");
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) {
    throw std::invalid_argument("bootstrap: confidence must lie in (0, 1)");
  }
  Rng rng(options.seed);
  std::vector<double> means(options.resamples);
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[rng.index(values.size())];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - options.confidence);
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  return {at(tail), at(1.0 - tail)};
}

std::vector<AlignmentRow> alignment_table(const EncoderSuite& suite, std::span<const AlignmentInput> methods,
                                          const BootstrapOptions& options) {
  std::vector<AlignmentRow> rows;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const AlignmentInput& in = methods[mi];
    require_same_size(in.prompts.size(), in.images.size(), "alignment_table prompts/images");
    const std::size_t n = in.images.size();
    if (n < 2) throw std::invalid_argument("alignment_table: method '" + in.method + "' needs at least 2 samples");

    std::vector<std::vector<double>> image_emb;
    for (const ImageVector& x : in.images) image_emb.push_back(embed_image(suite.space, x, suite.attributes));

    Rng rng(derive_seed(options.seed, mi));
    std::vector<double> diffs(n);
    AlignmentRow row;
    row.method = in.method;
    row.n = n;
    for (std::size_t i = 0; i < n; ++i) {
      const double matched = cosine(embed_text(suite.space, suite.vocab, in.prompts[i]), image_emb[i]);
      std::size_t partner = i;
      for (int attempt = 0; attempt < 64 && (partner == i || in.prompts[partner] == in.prompts[i]); ++attempt) {
        partner = rng.index(n);
      }
      if (partner == i) partner = (i + 1) % n;
      const double shuffled = cosine(embed_text(suite.space, suite.vocab, in.prompts[partner]), image_emb[i]);
      row.mean_matched += matched;
      row.mean_shuffled += shuffled;
      diffs[i] = matched - shuffled;
    }
    row.mean_matched /= static_cast<double>(n);
    row.mean_shuffled /= static_cast<double>(n);
    BootstrapOptions boot = options;
    boot.seed = derive_seed(options.seed, 1000 + mi);
    const Interval ci = bootstrap_mean_interval(diffs, boot);
    row.difference_lower = ci.lower;
    row.difference_upper = ci.upper;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace weakdiff
