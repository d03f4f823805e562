#include <algorithm>
#include <numeric>

#include "difflab/core.hpp"

namespace difflab {

std::vector<double> rank_examples(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && values[order[end]] == values[order[start]]) ++end;
    // positions start..end-1 share the mean position
    const double shared = 0.5 * static_cast<double>(start + end - 1);
    for (std::size_t p = start; p < end; ++p) ranks[order[p]] = shared;
    start = end;
  }
  return ranks;
}

}  // namespace difflab
