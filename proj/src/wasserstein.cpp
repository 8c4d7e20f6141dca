#include "weakdiff/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "weakdiff/simd.hpp"

namespace weakdiff {

W2Result wasserstein2(std::span<const LatentVector> a, std::span<const LatentVector> b, const AuctionOptions& options) {
  require_same_size(a.size(), b.size(), "wasserstein2 sample counts");
  if (a.empty()) throw std::invalid_argument("wasserstein2: empty point clouds");
  if (!(options.relative_epsilon > 0.0) || !(options.scaling_factor > 1.0)) {
    throw std::invalid_argument("wasserstein2: need relative_epsilon > 0 and scaling_factor > 1");
  }
  const std::size_t n = a.size();
  const std::size_t d = a.front().size();

  std::vector<std::vector<double>> columns(d, std::vector<double>(n));
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    require_same_size(a[i].size(), d, "wasserstein2 point");
    require_same_size(b[i].size(), d, "wasserstein2 point");
    if (!a[i].all_finite() || !b[i].all_finite()) throw std::invalid_argument("wasserstein2: non-finite point");
    for (std::size_t k = 0; k < d; ++k) {
      columns[k][i] = b[i][k];
      lo[k] = std::min({lo[k], a[i][k], b[i][k]});
      hi[k] = std::max({hi[k], a[i][k], b[i][k]});
    }
  }
  double max_cost = 0.0;
  for (std::size_t k = 0; k < d; ++k) max_cost += (hi[k] - lo[k]) * (hi[k] - lo[k]);

  W2Result result;
  result.assignment.assign(n, 0);
  if (max_cost == 0.0) return result;

  std::vector<const double*> coords(d);
  for (std::size_t k = 0; k < d; ++k) coords[k] = columns[k].data();
  const auto& kern = simd::kernels();

  const double final_eps = options.relative_epsilon * max_cost;
  std::vector<double> prices(n, 0.0);
  std::vector<std::size_t> owner(n);
  std::vector<std::size_t> assigned(n);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  for (double eps = std::max(max_cost / 4.0, final_eps);; eps = std::max(eps / options.scaling_factor, final_eps)) {
    std::fill(owner.begin(), owner.end(), kNone);
    std::fill(assigned.begin(), assigned.end(), kNone);
    std::deque<std::size_t> unassigned;
    for (std::size_t i = 0; i < n; ++i) unassigned.push_back(i);
    while (!unassigned.empty()) {
      const std::size_t person = unassigned.front();
      unassigned.pop_front();
      const simd::BidScan scan = kern.bid_scan(a[person].data(), coords.data(), d, prices.data(), n);
      ++result.bids;
      const double second = n == 1 ? scan.best_value : scan.second_value;
      prices[scan.best_index] += scan.best_value - second + eps;
      const std::size_t previous = owner[scan.best_index];
      owner[scan.best_index] = person;
      assigned[person] = scan.best_index;
      if (previous != kNone) {
        assigned[previous] = kNone;
        unassigned.push_back(previous);
      }
    }
    if (eps <= final_eps) {
      result.final_epsilon = eps;
      break;
    }
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    result.assignment[i] = assigned[i];
    const LatentVector& target = b[assigned[i]];
    for (std::size_t k = 0; k < d; ++k) total += (a[i][k] - target[k]) * (a[i][k] - target[k]);
  }
  const double mean_cost = total / static_cast<double>(n);
  result.upper = std::sqrt(mean_cost);
  result.lower = std::sqrt(std::max(0.0, mean_cost - result.final_epsilon));
  return result;
}

}  // namespace weakdiff
