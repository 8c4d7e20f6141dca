#pragma once

#include <cstddef>
#include <span>

#include "weakdiff/vector.hpp"

namespace weakdiff {

// Deterministic linear autoencoder between image space (m) and latent
// space (d): z = E (x - mean), x_hat = D z + mean, with E the top-d principal
// directions of the training data (rows orthonormal) and D = E^T.
//
// This replaces a variational autoencoder: the diffusion model only needs a
// fixed encoder/decoder pair, and a linear one has a closed-form optimum.
class LinearCodec {
 public:
  // Least-squares optimal rank-d linear autoencoder of the centered data.
  // Sample covariance is normalized by n, so fitted_residual() equals the sum
  // of the discarded eigenvalues. Needs at least d + 1 samples, d <= m, and
  // non-zero total variance.
  static LinearCodec fit(std::span<const ImageVector> data, std::size_t latent_dim);

  // Rebuilds a codec from stored parts (checkpoint loading).
  static LinearCodec from_parts(Matrix encoder, Matrix decoder, ImageVector mean, double fitted_residual);

  std::size_t image_dim() const { return mean_.size(); }
  std::size_t latent_dim() const { return encoder_.rows(); }

  LatentVector encode(const ImageVector& x) const;
  ImageVector decode(const LatentVector& z) const;

  const Matrix& encoder() const { return encoder_; }  // d x m
  const Matrix& decoder() const { return decoder_; }  // m x d
  const ImageVector& mean() const { return mean_; }
  // Mean ||x - decode(encode(x))||^2 over the fitting data.
  double fitted_residual() const { return fitted_residual_; }

  friend bool operator==(const LinearCodec&, const LinearCodec&) = default;

 private:
  LinearCodec(Matrix encoder, Matrix decoder, ImageVector mean, double fitted_residual);

  Matrix encoder_;
  Matrix decoder_;
  ImageVector mean_;
  double fitted_residual_ = 0.0;
};

}  // namespace weakdiff
