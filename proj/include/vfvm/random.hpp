#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace vfvm {

// mt19937_64 with uniform/normal draws computed by hand, so sequences do not
// depend on the standard library's distribution implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed)
    : eng_(seed)
  {}

  // open interval (0,1)
  double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1p-53; }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // 0 <= k < n
  std::uint64_t below(std::uint64_t n)
  {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do
      x = eng_();
    while (x >= limit);
    return x % n;
  }

  std::uint64_t next() { return eng_(); }

private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace vfvm
