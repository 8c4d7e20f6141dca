#include "weakdiff/schedule.hpp"

#include <stdexcept>
#include <string>

namespace weakdiff {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("linear schedule: steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start < 1.0) || !(beta_end > 0.0 && beta_end < 1.0)) {
    throw std::invalid_argument("linear schedule: beta endpoints must lie in (0, 1)");
  }
  if (beta_start > beta_end) throw std::invalid_argument("linear schedule: beta_start > beta_end");

  std::vector<double> betas(static_cast<std::size_t>(steps));
  if (steps == 1) {
    betas[0] = beta_start;
  } else {
    const double span = beta_end - beta_start;
    for (int i = 0; i < steps; ++i) {
      betas[static_cast<std::size_t>(i)] = beta_start + span * static_cast<double>(i) / (steps - 1);
    }
    betas.back() = beta_end;
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw std::invalid_argument("schedule: at least one beta required");
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("schedule: every beta must lie in (0, 1)");
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  alphas_.resize(betas_.size());
  alpha_bars_.resize(betas_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    alphas_[i] = 1.0 - betas_[i];
    running *= alphas_[i];
    alpha_bars_[i] = running;
  }
  if (!(running > 0.0)) throw std::invalid_argument("schedule: cumulative alpha_bar underflows to zero");
}

std::size_t NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps()) {
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
  return static_cast<std::size_t>(t - 1);
}

StepCoefficients NoiseSchedule::query(int t) const {
  const std::size_t i = index(t);
  return {betas_[i], alphas_[i], alpha_bars_[i]};
}

}  // namespace weakdiff
