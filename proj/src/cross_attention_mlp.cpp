#include "weakdiff/cross_attention_mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "weakdiff/diffusion.hpp"
#include "weakdiff/rng.hpp"
#include "weakdiff/simd.hpp"

namespace weakdiff {

std::size_t MlpShape::parameter_count() const { return MlpLayout(*this).total; }

void MlpShape::validate() const {
  if (latent_dim == 0 || token_dim == 0 || hidden_dim == 0) {
    throw std::invalid_argument("denoiser shape: dimensions must be positive");
  }
  if (steps < 1) throw std::invalid_argument("denoiser shape: steps must be >= 1");
}

MlpLayout::MlpLayout(const MlpShape& s) {
  const std::size_t d = s.latent_dim, e = s.token_dim, h = s.hidden_dim;
  const std::size_t steps = static_cast<std::size_t>(s.steps);
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t start = at;
    at += n;
    return start;
  };
  w1 = take(h * d);
  b1 = take(h);
  temb = take(steps * h);
  wq = take(e * d);
  wk = take(e * e);
  wv = take(h * e);
  w2 = take(h * h);
  b2 = take(h);
  w3 = take(d * h);
  b3 = take(d);
  total = at;
}

CrossAttentionMLP::CrossAttentionMLP(const MlpShape& shape)
    : shape_((shape.validate(), shape)), layout_(shape), params_(layout_.total, 0.0) {}

CrossAttentionMLP CrossAttentionMLP::zeros(const MlpShape& shape) { return CrossAttentionMLP(shape); }

CrossAttentionMLP CrossAttentionMLP::initialized(const MlpShape& shape, std::uint64_t seed) {
  CrossAttentionMLP net(shape);
  Rng rng(seed);
  const std::size_t d = shape.latent_dim, e = shape.token_dim, h = shape.hidden_dim;
  auto fill_uniform = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) net.params_[offset + i] = rng.uniform(-bound, bound);
  };
  const MlpLayout& L = net.layout_;
  fill_uniform(L.w1, h * d, d);
  fill_uniform(L.wq, e * d, d);
  fill_uniform(L.wk, e * e, e);
  fill_uniform(L.wv, h * e, e);
  fill_uniform(L.w2, h * h, h);

  for (int t = 1; t <= shape.steps; ++t) {
    double* row = net.params_.data() + L.temb + static_cast<std::size_t>(t - 1) * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double freq = std::pow(10000.0, -static_cast<double>(j / 2 * 2) / static_cast<double>(h));
      row[j] = (j % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
    }
  }
  return net;
}

void CrossAttentionMLP::set_parameters(std::vector<double> params) {
  if (params.size() != layout_.total) {
    throw std::invalid_argument("set_parameters: expected " + std::to_string(layout_.total) + " values, got " +
                                std::to_string(params.size()));
  }
  params_ = std::move(params);
}

void CrossAttentionMLP::check_inputs(const LatentVector& z_t, int t, const ConditioningVector& cond) const {
  require_same_size(z_t.size(), shape_.latent_dim, "predict_eps latent");
  if (t < 1 || t > shape_.steps) {
    throw std::out_of_range("predict_eps: timestep " + std::to_string(t) + " outside [1, " +
                            std::to_string(shape_.steps) + "]");
  }
  if (!cond.empty() && cond.token_dim() != shape_.token_dim) {
    throw std::invalid_argument("predict_eps: token_dim mismatch (" + std::to_string(cond.token_dim()) + " vs " +
                                std::to_string(shape_.token_dim) + ")");
  }
}

LatentVector CrossAttentionMLP::predict_eps(const LatentVector& z_t, int t, const ConditioningVector& cond) const {
  return forward(z_t, t, cond, nullptr);
}

LatentVector CrossAttentionMLP::forward(const LatentVector& z_t, int t, const ConditioningVector& cond,
                                        Cache* cache) const {
  check_inputs(z_t, t, cond);
  const simd::KernelTable& k = simd::kernels();
  const std::size_t d = shape_.latent_dim, e = shape_.token_dim, h = shape_.hidden_dim;
  const std::size_t n = cond.size();
  const double* p = params_.data();
  const MlpLayout& L = layout_;

  std::vector<double> pre1(p + L.b1, p + L.b1 + h);
  k.axpy(1.0, p + L.temb + static_cast<std::size_t>(t - 1) * h, pre1.data(), h);
  k.gemv(p + L.w1, h, d, z_t.data(), pre1.data());

  std::vector<double> query, keys, values, weights;
  if (n > 0) {
    query.assign(e, 0.0);
    k.gemv(p + L.wq, e, d, z_t.data(), query.data());
    keys.assign(n * e, 0.0);
    values.assign(n * h, 0.0);
    weights.resize(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(e));
    for (std::size_t j = 0; j < n; ++j) {
      const double* c = cond.token(j).data();
      k.gemv(p + L.wk, e, e, c, keys.data() + j * e);
      k.gemv(p + L.wv, h, e, c, values.data() + j * h);
      weights[j] = k.dot(query.data(), keys.data() + j * e, e) * scale;
    }
    const double top = *std::max_element(weights.begin(), weights.end());
    double total = 0.0;
    for (double& w : weights) {
      w = std::exp(w - top);
      total += w;
    }
    for (double& w : weights) w /= total;
    for (std::size_t j = 0; j < n; ++j) k.axpy(weights[j], values.data() + j * h, pre1.data(), h);
  }

  std::vector<double> h1(h);
  for (std::size_t i = 0; i < h; ++i) h1[i] = std::tanh(pre1[i]);

  std::vector<double> h2(p + L.b2, p + L.b2 + h);
  k.gemv(p + L.w2, h, h, h1.data(), h2.data());
  for (double& v : h2) v = std::tanh(v);

  LatentVector out(std::vector<double>(p + L.b3, p + L.b3 + d));
  k.gemv(p + L.w3, d, h, h2.data(), out.data());

  if (cache != nullptr) {
    cache->z = z_t;
    cache->t = t;
    cache->cond = &cond;
    cache->query = std::move(query);
    cache->keys = std::move(keys);
    cache->values = std::move(values);
    cache->weights = std::move(weights);
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return out;
}

LatentVector CrossAttentionMLP::backward(const Cache& cache, std::span<const double> grad_out,
                                         std::span<double> grad_params) const {
  require_same_size(grad_out.size(), shape_.latent_dim, "backward output gradient");
  require_same_size(grad_params.size(), layout_.total, "backward parameter gradient");
  const simd::KernelTable& k = simd::kernels();
  const std::size_t d = shape_.latent_dim, e = shape_.token_dim, h = shape_.hidden_dim;
  const double* p = params_.data();
  double* g = grad_params.data();
  const MlpLayout& L = layout_;

  k.ger(1.0, grad_out.data(), d, cache.h2.data(), h, g + L.w3);
  k.axpy(1.0, grad_out.data(), g + L.b3, d);

  std::vector<double> g_pre2(h, 0.0);
  k.gemv_t(p + L.w3, d, h, grad_out.data(), g_pre2.data());
  for (std::size_t i = 0; i < h; ++i) g_pre2[i] *= 1.0 - cache.h2[i] * cache.h2[i];
  k.ger(1.0, g_pre2.data(), h, cache.h1.data(), h, g + L.w2);
  k.axpy(1.0, g_pre2.data(), g + L.b2, h);

  std::vector<double> g_pre1(h, 0.0);
  k.gemv_t(p + L.w2, h, h, g_pre2.data(), g_pre1.data());
  for (std::size_t i = 0; i < h; ++i) g_pre1[i] *= 1.0 - cache.h1[i] * cache.h1[i];

  k.ger(1.0, g_pre1.data(), h, cache.z.data(), d, g + L.w1);
  k.axpy(1.0, g_pre1.data(), g + L.b1, h);
  k.axpy(1.0, g_pre1.data(), g + L.temb + static_cast<std::size_t>(cache.t - 1) * h, h);

  LatentVector grad_z = LatentVector::zeros(d);
  k.gemv_t(p + L.w1, h, d, g_pre1.data(), grad_z.data());

  const std::size_t n = cache.weights.size();
  if (n > 0) {
    const ConditioningVector& cond = *cache.cond;
    const double scale = 1.0 / std::sqrt(static_cast<double>(e));
    std::vector<double> g_w(n);
    double mean_g = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double* c = cond.token(j).data();
      k.ger(cache.weights[j], g_pre1.data(), h, c, e, g + L.wv);
      g_w[j] = k.dot(g_pre1.data(), cache.values.data() + j * h, h);
      mean_g += cache.weights[j] * g_w[j];
    }
    std::vector<double> g_query(e, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double g_score = cache.weights[j] * (g_w[j] - mean_g) * scale;
      k.axpy(g_score, cache.keys.data() + j * e, g_query.data(), e);
      k.ger(g_score, cache.query.data(), e, cond.token(j).data(), e, g + L.wk);
    }
    k.ger(1.0, g_query.data(), e, cache.z.data(), d, g + L.wq);
    k.gemv_t(p + L.wq, e, d, g_query.data(), grad_z.data());
  }
  return grad_z;
}

std::vector<double> CrossAttentionMLP::attention_weights(const LatentVector& z_t,
                                                         const ConditioningVector& cond) const {
  Cache cache;
  forward(z_t, 1, cond, &cache);
  return cache.weights;
}

LossAndGradient CrossAttentionMLP::loss_and_gradient(std::span<const DenoisingExample> batch,
                                                     const NoiseSchedule& schedule) const {
  if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  LossAndGradient out;
  out.grad.assign(layout_.total, 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const ConditioningVector none;
  Cache cache;
  std::vector<double> grad_out(shape_.latent_dim);
  for (const DenoisingExample& ex : batch) {
    const ConditioningVector& cond = ex.cond != nullptr ? *ex.cond : none;
    const LatentVector z_t = q_sample(ex.z0, ex.t, schedule, ex.noise);
    const LatentVector eps = forward(z_t, ex.t, cond, &cache);
    double sq = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double diff = eps[i] - ex.noise[i];
      sq += diff * diff;
      grad_out[i] = 2.0 * diff * inv_b;
    }
    out.loss += sq * inv_b;
    backward(cache, grad_out, out.grad);
  }
  return out;
}

CrossAttentionMLP apply_update(const CrossAttentionMLP& model, std::span<const double> grad, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("apply_update: learning rate must be positive");
  require_same_size(grad.size(), model.parameters().size(), "apply_update gradient");
  for (double v : grad) {
    if (!std::isfinite(v)) throw std::invalid_argument("apply_update: non-finite gradient entry");
  }
  CrossAttentionMLP next = model;
  simd::axpy(-lr, grad, next.mutable_parameters());
  return next;
}

}  // namespace weakdiff
