#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace vfvm {

struct Maximum {
  double x = 0.0;
  double value = -std::numeric_limits<double>::infinity();
};

// Golden-section maximization on [lo, hi] within the hard bounds
// [min_x, max_x]. When the optimum lands on an edge of the working bracket
// that is not a hard bound, the bracket grows on that side and the search
// repeats. NaN values count as -inf.
template <class F>
Maximum maximize_bracketed(F f, double start, double lo, double hi, double min_x, double max_x,
                           double tol)
{
  constexpr double g = 0.6180339887498949;
  auto eval = [&](double x) {
    const double v = f(x);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };
  lo = std::max(lo, min_x);
  hi = std::min(hi, max_x);
  Maximum best{start, eval(start)};
  for (int round = 0; round < 16; ++round) {
    double a = lo, b = hi;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    while (b - a > tol) {
      if (f1 >= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - g * (b - a);
        f1 = eval(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + g * (b - a);
        f2 = eval(x2);
      }
    }
    const double xm = 0.5 * (a + b);
    const double fm = eval(xm);
    if (fm > best.value) {
      best = {xm, fm};
    }
    const double w = hi - lo;
    bool grew = false;
    if (best.x - lo < 2.0 * tol && lo > min_x) {
      lo = std::max(min_x, lo - w);
      grew = true;
    }
    if (hi - best.x < 2.0 * tol && hi < max_x) {
      hi = std::min(max_x, hi + w);
      grew = true;
    }
    if (!grew)
      break;
  }
  return best;
}

} // namespace vfvm
