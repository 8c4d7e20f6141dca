#pragma once

#include <span>
#include <vector>

namespace weakdiff {

struct StepCoefficients {
  double beta;
  double alpha;      // 1 - beta
  double alpha_bar;  // prod_{s<=t} alpha_s
};

// Discrete-time variance schedule shared by the forward and reverse processes.
// Timesteps are 1-based: t in [1, steps()]. Immutable once built.
class NoiseSchedule {
 public:
  // Betas linearly interpolated from beta_start (t=1) to beta_end (t=T),
  // endpoints inclusive. T=1 yields the single value beta_start.
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);

  // Explicit variances, betas[0] is beta_1. Each must lie in (0, 1).
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }

  // Throws std::out_of_range unless 1 <= t <= steps().
  StepCoefficients query(int t) const;

  double beta(int t) const { return betas_[index(t)]; }
  double alpha(int t) const { return alphas_[index(t)]; }
  double alpha_bar(int t) const { return alpha_bars_[index(t)]; }
  // alpha_bar_{t-1}, with alpha_bar_0 = 1.
  double alpha_bar_prev(int t) const { return t == 1 ? 1.0 : alpha_bars_[index(t) - 1]; }

  std::span<const double> betas() const { return betas_; }
  std::span<const double> alphas() const { return alphas_; }
  std::span<const double> alpha_bars() const { return alpha_bars_; }

  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;

 private:
  explicit NoiseSchedule(std::vector<double> betas);
  std::size_t index(int t) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

}  // namespace weakdiff
