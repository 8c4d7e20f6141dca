#include "weakdiff/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "weakdiff/simd.hpp"

namespace weakdiff {

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (expected sgd or rmsprop)");
}

std::string_view optimizer_kind_name(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "rmsprop";
}

void Optimizer::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
  if (params.size() != grad.size()) throw std::invalid_argument("optimizer: gradient shape mismatch");
  for (double g : grad) {
    if (!std::isfinite(g)) throw std::invalid_argument("optimizer: non-finite gradient entry");
  }

  if (kind_ == OptimizerKind::sgd) {
    simd::axpy(-lr, grad, params);
    return;
  }

  if (second_moment_.size() != params.size()) second_moment_.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& v = second_moment_[i];
    v = decay_ * v + (1.0 - decay_) * grad[i] * grad[i];
    params[i] -= lr * grad[i] / (std::sqrt(v) + epsilon_);
  }
}

}  // namespace weakdiff
