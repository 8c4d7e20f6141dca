#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "weakdiff/vector.hpp"

namespace weakdiff {

struct AuctionOptions {
  // Final bidding increment relative to the largest possible pair cost.
  double relative_epsilon = 1e-7;
  double scaling_factor = 5.0;
};

struct W2Result {
  // sqrt(mean squared distance) of the assignment found: an upper bound on
  // the empirical 2-Wasserstein distance.
  double upper = 0.0;
  // Lower bound from epsilon-complementary slackness (mean gap <= epsilon).
  double lower = 0.0;
  double final_epsilon = 0.0;
  std::size_t bids = 0;
  std::vector<std::size_t> assignment;  // a[i] is matched to b[assignment[i]]
};

// Empirical 2-Wasserstein distance between two equal-size point clouds,
// solved as a squared-Euclidean assignment by an epsilon-scaling auction.
W2Result wasserstein2(std::span<const LatentVector> a, std::span<const LatentVector> b,
                      const AuctionOptions& options = {});

}  // namespace weakdiff
