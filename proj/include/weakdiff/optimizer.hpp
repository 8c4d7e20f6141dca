#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace weakdiff {

enum class OptimizerKind {
  sgd,      // theta -= lr * g
  rmsprop,  // theta -= lr * g / (sqrt(v) + eps), v = decay v + (1 - decay) g^2; no momentum
};

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string_view optimizer_kind_name(OptimizerKind kind);

// Stateful first-order update over a flat parameter vector.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::sgd, double decay = 0.99, double epsilon = 1e-8)
      : kind_(kind), decay_(decay), epsilon_(epsilon) {}

  OptimizerKind kind() const { return kind_; }

  // Throws on lr <= 0, size mismatch, or a non-finite gradient; params are
  // untouched when it throws.
  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  OptimizerKind kind_;
  double decay_;
  double epsilon_;
  std::vector<double> second_moment_;
};

}  // namespace weakdiff
