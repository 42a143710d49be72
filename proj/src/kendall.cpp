#include "vfvm/copula.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

namespace vfvm {

namespace {

// Pairs tied within runs of equal keys in an already sorted sequence.
std::int64_t tied_pairs(const std::vector<double>& sorted)
{
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Merge sort that counts inversions (strictly greater element before).
std::int64_t sort_count_swaps(std::vector<double>& a, std::vector<double>& buf, std::size_t lo,
                              std::size_t hi)
{
  if (hi - lo < 2)
    return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = sort_count_swaps(a, buf, lo, mid) + sort_count_swaps(a, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = a[j++];
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid)
    buf[k++] = a[i++];
  while (j < hi)
    buf[k++] = a[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi), a.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

} // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size())
    throw ArgumentError("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2)
    throw ArgumentError("kendall_tau: need n >= 2");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }

  const auto nn = static_cast<std::int64_t>(n);
  const std::int64_t n0 = nn * (nn - 1) / 2;
  const std::int64_t n1 = tied_pairs(xs);
  // joint ties: equal in both coordinates
  std::int64_t n3 = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && xs[i] == xs[i - 1] && ys[i] == ys[i - 1]) {
      ++run;
    } else {
      n3 += run * (run - 1) / 2;
      run = 1;
    }
  }
  std::vector<double> buf(n);
  const std::int64_t swaps = sort_count_swaps(ys, buf, 0, n);
  const std::int64_t n2 = tied_pairs(ys);
  const std::int64_t s = n0 - n1 - n2 + n3 - 2 * swaps;
  return static_cast<double>(s) / static_cast<double>(n0);
}

} // namespace vfvm
