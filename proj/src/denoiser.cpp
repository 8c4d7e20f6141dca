#include "weakdiff/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace weakdiff {

ConditioningVector::ConditioningVector(std::vector<std::vector<double>> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) return;
  const std::size_t dim = tokens_.front().size();
  if (dim == 0) throw std::invalid_argument("conditioning: token embeddings must be non-empty");
  for (const auto& tok : tokens_) {
    if (tok.size() != dim) throw std::invalid_argument("conditioning: token embeddings differ in dimension");
    double sq = 0.0;
    for (double v : tok) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) {
      throw std::invalid_argument("conditioning: token embedding is not unit norm");
    }
  }
}

}  // namespace weakdiff
