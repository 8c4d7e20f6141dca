#pragma once

// Deterministic stand-ins for pre-trained text and image encoders. Both map
// into one shared e-dimensional space through a seeded projection P whose
// columns (one per vocabulary token) have unit norm:
//
//   text:  normalize(sum of P columns of the caption's distinct tokens)
//   image: normalize(P A x), A a fixed linear map from image space to
//          per-token attribute activations
//
// Cosine similarity in that space is the alignment score used both for
// filtering weak labels and for evaluating generated samples.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "weakdiff/denoiser.hpp"
#include "weakdiff/vector.hpp"

namespace weakdiff {

using TokenList = std::vector<std::string>;

// Ordered, duplicate-free attribute tokens.
class Vocabulary {
 public:
  Vocabulary() = default;
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  // One token per line; blank lines and lines starting with '#' are skipped.
  static Vocabulary parse(std::istream& in);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t i) const { return tokens_[i]; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<std::size_t> index_of(std::string_view token) const;
  bool contains(std::string_view token) const { return index_of(token).has_value(); }

  // Indices of the distinct in-vocabulary tokens, in first-seen order.
  std::vector<std::size_t> distinct_indices(std::span<const std::string> caption) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

class EmbeddingSpace {
 public:
  // P (dim x vocab_size) with i.i.d. normal entries, columns normalized.
  static EmbeddingSpace generate(std::size_t dim, std::size_t vocab_size, std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t seed() const { return seed_; }
  // Column j of P, stored contiguously.
  std::span<const double> column(std::size_t j) const { return {columns_.data() + j * dim_, dim_}; }

  // u = P a
  std::vector<double> project(std::span<const double> activations) const;
  // a = P^T u
  std::vector<double> project_transpose(std::span<const double> u) const;

 private:
  std::size_t dim_ = 0;
  std::size_t vocab_size_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> columns_;  // column-major P
};

// A: image space (m) -> attribute activations (V), with orthonormal rows so
// that rendering through A^T inverts it exactly: A (A^T s) = s. Requires m >= V.
class AttributeMap {
 public:
  static AttributeMap generate(std::size_t image_dim, std::size_t vocab_size, std::uint64_t seed);

  std::size_t image_dim() const { return map_.cols(); }
  std::size_t vocab_size() const { return map_.rows(); }

  std::vector<double> activations(const ImageVector& x) const;
  // x = A^T s, the minimum-norm image whose activations equal s.
  ImageVector render(std::span<const double> attribute_weights) const;
  const Matrix& matrix() const { return map_; }

 private:
  Matrix map_;  // V x m
};

// Everything needed to score a (caption, image) pair.
struct EncoderSuite {
  Vocabulary vocab;
  EmbeddingSpace space;
  AttributeMap attributes;

  // P from seed, A from derive_seed(seed, 1).
  static EncoderSuite make(Vocabulary vocab, std::size_t embed_dim, std::size_t image_dim, std::uint64_t seed);
};

// Throws std::invalid_argument when the caption has no in-vocabulary token.
std::vector<double> embed_text(const EmbeddingSpace& space, const Vocabulary& vocab,
                               std::span<const std::string> caption);

// Throws std::invalid_argument when P A x is the zero vector.
std::vector<double> embed_image(const EmbeddingSpace& space, const ImageVector& x, const AttributeMap& attributes);

// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws on a zero-norm input.
double cosine(std::span<const double> a, std::span<const double> b);

double alignment_score(const EncoderSuite& suite, std::span<const std::string> caption, const ImageVector& x);

// Unit token embeddings (P columns) of the caption's distinct in-vocabulary
// tokens, for the denoiser's cross-attention. Empty caption -> unconditional.
ConditioningVector condition_on(const EncoderSuite& suite, std::span<const std::string> caption);

}  // namespace weakdiff
