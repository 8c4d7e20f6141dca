#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "weakdiff/denoiser.hpp"
#include "weakdiff/schedule.hpp"
#include "weakdiff/vector.hpp"

namespace weakdiff {

struct MlpShape {
  std::size_t latent_dim = 8;   // d
  std::size_t token_dim = 32;   // e, also the query/key width
  std::size_t hidden_dim = 64;  // h
  int steps = 1000;             // T, rows of the timestep embedding table

  std::size_t parameter_count() const;
  void validate() const;
  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

// Offsets of each parameter block inside the flat parameter vector.
struct MlpLayout {
  explicit MlpLayout(const MlpShape& shape);

  std::size_t w1, b1, temb, wq, wk, wv, w2, b2, w3, b3, total;
  friend bool operator==(const MlpLayout&, const MlpLayout&) = default;
};

// One regression example for the denoising loss: z_t is formed internally as
// q_sample(z0, t, noise) and the network is asked to recover noise.
struct DenoisingExample {
  LatentVector z0;
  int t = 1;
  LatentVector noise;
  const ConditioningVector* cond = nullptr;  // null means unconditional
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// eps_theta as a small MLP with one single-head cross-attention block.
//
//   q     = Wq z                      keys  k_j = Wk c_j    values v_j = Wv c_j
//   a     = sum_j softmax_j(q.k_j / sqrt(e)) v_j          (0 when cond is empty)
//   h1    = tanh(W1 z + b1 + E[t] + a)
//   h2    = tanh(W2 h1 + b2)
//   eps   = W3 h2 + b3
//
// E is a learned T x h timestep table. All parameters live in one flat
// vector so gradients, optimizers and checkpoints share a single layout.
class CrossAttentionMLP final : public Denoiser {
 public:
  // Per-call intermediate values kept for the backward pass.
  struct Cache {
    LatentVector z;
    int t = 1;
    const ConditioningVector* cond = nullptr;
    std::vector<double> query;
    std::vector<double> keys;    // n x e
    std::vector<double> values;  // n x h
    std::vector<double> weights;
    std::vector<double> h1;
    std::vector<double> h2;
  };

  // Projection weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and the
  // output layer zero, so the initial network predicts exactly 0. The
  // timestep table starts from a sinusoidal code and is trained from there.
  static CrossAttentionMLP initialized(const MlpShape& shape, std::uint64_t seed);
  static CrossAttentionMLP zeros(const MlpShape& shape);

  const MlpShape& shape() const { return shape_; }
  const MlpLayout& layout() const { return layout_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  void set_parameters(std::vector<double> params);

  std::size_t latent_dim() const override { return shape_.latent_dim; }
  int steps() const override { return shape_.steps; }
  LatentVector predict_eps(const LatentVector& z_t, int t, const ConditioningVector& cond) const override;

  // Forward pass that optionally records what backward() needs.
  LatentVector forward(const LatentVector& z_t, int t, const ConditioningVector& cond, Cache* cache) const;

  // Accumulates d(loss)/d(params) into grad_params given d(loss)/d(output),
  // and returns d(loss)/d(z_t).
  LatentVector backward(const Cache& cache, std::span<const double> grad_out, std::span<double> grad_params) const;

  // Softmax weights of the latent-derived query over the prompt tokens.
  std::vector<double> attention_weights(const LatentVector& z_t, const ConditioningVector& cond) const;

  // Mean over the batch of ||noise - eps_theta(q_sample(z0, t, noise), t, cond)||^2
  // and its exact gradient.
  LossAndGradient loss_and_gradient(std::span<const DenoisingExample> batch, const NoiseSchedule& schedule) const;

  friend bool operator==(const CrossAttentionMLP& a, const CrossAttentionMLP& b) {
    return a.shape_ == b.shape_ && a.params_ == b.params_;
  }

 private:
  explicit CrossAttentionMLP(const MlpShape& shape);
  void check_inputs(const LatentVector& z_t, int t, const ConditioningVector& cond) const;

  MlpShape shape_;
  MlpLayout layout_;
  std::vector<double> params_;
};

// theta <- theta - lr * grad. Rejects lr <= 0, a shape mismatch, or any
// non-finite gradient entry.
CrossAttentionMLP apply_update(const CrossAttentionMLP& model, std::span<const double> grad, double lr);

}  // namespace weakdiff
