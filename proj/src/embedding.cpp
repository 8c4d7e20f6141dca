#include "weakdiff/embedding.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <stdexcept>

#include "weakdiff/rng.hpp"
#include "weakdiff/simd.hpp"

namespace weakdiff {
namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

void normalize_in_place(std::vector<double>& v, const char* what) {
  const double norm = std::sqrt(simd::squared_norm(v));
  if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument(std::string(what) + ": zero-norm vector");
  for (double& x : v) x /= norm;
}

}  // namespace

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty()) throw std::invalid_argument("vocabulary: empty token");
    if (!v.index_.emplace(tokens[i], i).second) {
      throw std::invalid_argument("vocabulary: duplicate token '" + tokens[i] + "'");
    }
  }
  v.tokens_ = std::move(tokens);
  return v;
}

Vocabulary Vocabulary::parse(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    std::string tok = trim(line);
    if (tok.empty() || tok.front() == '#') continue;
    tokens.push_back(std::move(tok));
  }
  return from_tokens(std::move(tokens));
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Vocabulary::distinct_indices(std::span<const std::string> caption) const {
  std::vector<std::size_t> out;
  for (const std::string& tok : caption) {
    if (const auto idx = index_of(tok); idx && std::find(out.begin(), out.end(), *idx) == out.end()) {
      out.push_back(*idx);
    }
  }
  return out;
}

EmbeddingSpace EmbeddingSpace::generate(std::size_t dim, std::size_t vocab_size, std::uint64_t seed) {
  if (dim == 0 || vocab_size == 0) throw std::invalid_argument("embedding space: dimensions must be positive");
  EmbeddingSpace s;
  s.dim_ = dim;
  s.vocab_size_ = vocab_size;
  s.seed_ = seed;
  s.columns_.resize(dim * vocab_size);
  Rng rng(seed);
  for (std::size_t j = 0; j < vocab_size; ++j) {
    std::vector<double> col(dim);
    rng.fill_normal(col);
    normalize_in_place(col, "embedding column");
    std::copy(col.begin(), col.end(), s.columns_.begin() + static_cast<std::ptrdiff_t>(j * dim));
  }
  return s;
}

std::vector<double> EmbeddingSpace::project(std::span<const double> activations) const {
  require_same_size(activations.size(), vocab_size_, "embedding projection");
  std::vector<double> u(dim_, 0.0);
  for (std::size_t j = 0; j < vocab_size_; ++j) {
    if (activations[j] != 0.0) simd::kernels().axpy(activations[j], columns_.data() + j * dim_, u.data(), dim_);
  }
  return u;
}

std::vector<double> EmbeddingSpace::project_transpose(std::span<const double> u) const {
  require_same_size(u.size(), dim_, "embedding transpose projection");
  std::vector<double> a(vocab_size_);
  for (std::size_t j = 0; j < vocab_size_; ++j) a[j] = simd::kernels().dot(columns_.data() + j * dim_, u.data(), dim_);
  return a;
}

AttributeMap AttributeMap::generate(std::size_t image_dim, std::size_t vocab_size, std::uint64_t seed) {
  if (vocab_size == 0 || image_dim < vocab_size) {
    throw std::invalid_argument("attribute map: image dimension must be >= vocabulary size");
  }
  Rng rng(seed);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(image_dim), static_cast<Eigen::Index>(vocab_size));
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.normal();
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  // Fix column signs so R has a positive diagonal (unique factorization).
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }

  AttributeMap a;
  a.map_ = Matrix(vocab_size, image_dim);
  for (std::size_t v = 0; v < vocab_size; ++v) {
    for (std::size_t j = 0; j < image_dim; ++j) {
      a.map_(v, j) = q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(v));
    }
  }
  return a;
}

std::vector<double> AttributeMap::activations(const ImageVector& x) const {
  require_same_size(x.size(), image_dim(), "attribute activations");
  std::vector<double> a(vocab_size(), 0.0);
  simd::kernels().gemv(map_.data(), map_.rows(), map_.cols(), x.data(), a.data());
  return a;
}

ImageVector AttributeMap::render(std::span<const double> attribute_weights) const {
  require_same_size(attribute_weights.size(), vocab_size(), "attribute render");
  ImageVector x = ImageVector::zeros(image_dim());
  simd::kernels().gemv_t(map_.data(), map_.rows(), map_.cols(), attribute_weights.data(), x.data());
  return x;
}

EncoderSuite EncoderSuite::make(Vocabulary vocab, std::size_t embed_dim, std::size_t image_dim, std::uint64_t seed) {
  const std::size_t v = vocab.size();
  return EncoderSuite{std::move(vocab), EmbeddingSpace::generate(embed_dim, v, seed),
                      AttributeMap::generate(image_dim, v, derive_seed(seed, 1))};
}

std::vector<double> embed_text(const EmbeddingSpace& space, const Vocabulary& vocab,
                               std::span<const std::string> caption) {
  require_same_size(vocab.size(), space.vocab_size(), "embed_text vocabulary");
  const std::vector<std::size_t> ids = vocab.distinct_indices(caption);
  if (ids.empty()) throw std::invalid_argument("embed_text: caption has no in-vocabulary tokens");
  if (ids.size() == 1) {
    const auto col = space.column(ids.front());
    return {col.begin(), col.end()};
  }
  std::vector<double> u(space.dim(), 0.0);
  for (std::size_t id : ids) simd::axpy(1.0, space.column(id), u);
  normalize_in_place(u, "embed_text");
  return u;
}

std::vector<double> embed_image(const EmbeddingSpace& space, const ImageVector& x, const AttributeMap& attributes) {
  require_same_size(attributes.vocab_size(), space.vocab_size(), "embed_image vocabulary");
  if (!x.all_finite()) throw std::invalid_argument("embed_image: non-finite image");
  std::vector<double> u = space.project(attributes.activations(x));
  normalize_in_place(u, "embed_image");
  return u;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "cosine");
  const double na = std::sqrt(simd::squared_norm(a));
  const double nb = std::sqrt(simd::squared_norm(b));
  if (!(na > 0.0) || !(nb > 0.0)) throw std::invalid_argument("cosine: zero-norm input");
  return std::clamp(simd::dot(a, b) / (na * nb), -1.0, 1.0);
}

double alignment_score(const EncoderSuite& suite, std::span<const std::string> caption, const ImageVector& x) {
  return cosine(embed_text(suite.space, suite.vocab, caption), embed_image(suite.space, x, suite.attributes));
}

ConditioningVector condition_on(const EncoderSuite& suite, std::span<const std::string> caption) {
  std::vector<std::vector<double>> tokens;
  for (std::size_t id : suite.vocab.distinct_indices(caption)) {
    const auto col = suite.space.column(id);
    tokens.emplace_back(col.begin(), col.end());
  }
  return ConditioningVector(std::move(tokens));
}

}  // namespace weakdiff
