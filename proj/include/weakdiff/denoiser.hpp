#pragma once

#include <cstddef>
#include <vector>

#include "weakdiff/vector.hpp"

namespace weakdiff {

// Prompt-token embeddings fed to the denoiser's cross-attention block.
// Every token must have unit Euclidean norm (checked to 1e-9). An empty
// sequence requests unconditional prediction.
class ConditioningVector {
 public:
  ConditioningVector() = default;
  explicit ConditioningVector(std::vector<std::vector<double>> tokens);

  static ConditioningVector unconditional() { return {}; }

  bool empty() const { return tokens_.empty(); }
  std::size_t size() const { return tokens_.size(); }
  // 0 for an empty sequence.
  std::size_t token_dim() const { return tokens_.empty() ? 0 : tokens_.front().size(); }
  const std::vector<double>& token(std::size_t i) const { return tokens_[i]; }
  const std::vector<std::vector<double>>& tokens() const { return tokens_; }

  friend bool operator==(const ConditioningVector&, const ConditioningVector&) = default;

 private:
  std::vector<std::vector<double>> tokens_;
};

// eps_theta(z_t, t, cond): predicts the noise component of a noisy latent.
// Implementations are deterministic and safe for concurrent const calls.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual std::size_t latent_dim() const = 0;
  // Largest timestep accepted by predict_eps.
  virtual int steps() const = 0;
  virtual LatentVector predict_eps(const LatentVector& z_t, int t, const ConditioningVector& cond) const = 0;
};

}  // namespace weakdiff
