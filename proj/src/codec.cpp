#include "weakdiff/codec.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "weakdiff/simd.hpp"

namespace weakdiff {

LinearCodec::LinearCodec(Matrix encoder, Matrix decoder, ImageVector mean, double fitted_residual)
    : encoder_(std::move(encoder)),
      decoder_(std::move(decoder)),
      mean_(std::move(mean)),
      fitted_residual_(fitted_residual) {}

LinearCodec LinearCodec::from_parts(Matrix encoder, Matrix decoder, ImageVector mean, double fitted_residual) {
  if (encoder.cols() != mean.size() || decoder.rows() != mean.size() || decoder.cols() != encoder.rows()) {
    throw std::invalid_argument("codec: encoder/decoder/mean shapes are inconsistent");
  }
  return LinearCodec(std::move(encoder), std::move(decoder), std::move(mean), fitted_residual);
}

LinearCodec LinearCodec::fit(std::span<const ImageVector> data, std::size_t latent_dim) {
  if (data.empty()) throw std::invalid_argument("fit_codec: no data");
  const std::size_t m = data.front().size();
  const std::size_t n = data.size();
  if (latent_dim == 0 || latent_dim > m) {
    throw std::invalid_argument("fit_codec: latent dimension must be in [1, " + std::to_string(m) + "]");
  }
  if (n < latent_dim + 1) {
    throw std::invalid_argument("fit_codec: need at least " + std::to_string(latent_dim + 1) + " samples, got " +
                                std::to_string(n));
  }

  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    require_same_size(data[i].size(), m, "fit_codec sample");
    if (!data[i].all_finite()) throw std::invalid_argument("fit_codec: non-finite sample");
    for (std::size_t j = 0; j < m; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i][j];
  }
  const double magnitude = X.cwiseAbs().maxCoeff();
  const Eigen::RowVectorXd mu = X.colwise().mean();
  X.rowwise() -= mu;
  const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n);
  // Variance at rounding level relative to the data scale counts as zero.
  if (!(cov.trace() > 1e-24 * (magnitude * magnitude + 1e-300))) {
    throw std::invalid_argument("fit_codec: degenerate (zero-variance) data");
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("fit_codec: eigendecomposition failed");

  // Eigen returns ascending eigenvalues; keep the top d, largest first, with
  // each direction's largest-magnitude entry made positive.
  Matrix encoder(latent_dim, m);
  for (std::size_t r = 0; r < latent_dim; ++r) {
    const Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(m - 1 - r));
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    const double sign = v(pivot) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < m; ++j) encoder(r, j) = sign * v(static_cast<Eigen::Index>(j));
  }
  Matrix decoder(m, latent_dim);
  for (std::size_t r = 0; r < latent_dim; ++r) {
    for (std::size_t j = 0; j < m; ++j) decoder(j, r) = encoder(r, j);
  }
  ImageVector mean = ImageVector::zeros(m);
  for (std::size_t j = 0; j < m; ++j) mean[j] = mu(static_cast<Eigen::Index>(j));

  LinearCodec codec(std::move(encoder), std::move(decoder), std::move(mean), 0.0);
  double residual = 0.0;
  for (const ImageVector& x : data) {
    const ImageVector back = codec.decode(codec.encode(x));
    for (std::size_t j = 0; j < m; ++j) residual += (x[j] - back[j]) * (x[j] - back[j]);
  }
  codec.fitted_residual_ = residual / static_cast<double>(n);
  return codec;
}

LatentVector LinearCodec::encode(const ImageVector& x) const {
  require_same_size(x.size(), image_dim(), "encode");
  std::vector<double> centered(x.size());
  simd::kernels().axpby(1.0, x.data(), -1.0, mean_.data(), centered.data(), x.size());
  LatentVector z = LatentVector::zeros(latent_dim());
  simd::kernels().gemv(encoder_.data(), encoder_.rows(), encoder_.cols(), centered.data(), z.data());
  return z;
}

ImageVector LinearCodec::decode(const LatentVector& z) const {
  require_same_size(z.size(), latent_dim(), "decode");
  ImageVector x = mean_;
  simd::kernels().gemv(decoder_.data(), decoder_.rows(), decoder_.cols(), z.data(), x.data());
  return x;
}

}  // namespace weakdiff
