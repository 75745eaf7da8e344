#include "ctdr/crossfit.hpp"

#include <numeric>

namespace ctdr {

FoldAssignment split_folds(int n, int L, std::uint64_t seed) {
  require(L >= 2, ErrorCode::input, "need at least 2 folds");
  require(L <= n, ErrorCode::input, "more folds than observations");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Fisher-Yates with the project RNG so the shuffle is platform-stable.
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() %
                                   static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  FoldAssignment out;
  out.n = n;
  out.L = L;
  out.seed = seed;
  out.assignment.resize(static_cast<std::size_t>(n));
  for (int pos = 0; pos < n; ++pos) {
    out.assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] =
        pos % L + 1;
  }
  return out;
}

}  // namespace ctdr
