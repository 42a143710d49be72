#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfvm/error.hpp"

namespace vfvm {

enum class MixtureFamily { gamma, beta };

const char* to_string(MixtureFamily f);
MixtureFamily mixture_family_from_string(const std::string& s);

// gamma: f(x) = x^(alpha-1) exp(-x/beta) / (beta^alpha Gamma(alpha)), beta is a scale.
struct GammaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

struct BetaParams {
  double p = 1.0;
  double q = 1.0;
};

// Shape pair of one component: (alpha, beta) for gamma, (p, q) for beta.
struct Component {
  double a = 1.0;
  double b = 1.0;

  GammaParams as_gamma() const { return {a, b}; }
  BetaParams as_beta() const { return {a, b}; }
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// lambda * f1 + (1 - lambda) * f2, optionally renormalized on (lo, hi).
class MixtureModel {
public:
  MixtureModel() = default;
  MixtureModel(MixtureFamily family, Component c1, Component c2, double lambda);

  MixtureFamily family() const noexcept { return family_; }
  const Component& comp1() const noexcept { return c1_; }
  const Component& comp2() const noexcept { return c2_; }
  double lambda() const noexcept { return lambda_; }
  const std::optional<Interval>& truncation() const noexcept { return trunc_; }

  // Restricts the support to (lo, hi) and renormalizes.
  void truncate(double lo, double hi);
  void clear_truncation() { trunc_.reset(); }

  // Closed support bounds.
  Interval support() const;

  double density(double x) const;
  double log_density(double x) const;
  double cdf(double x) const;
  // |cdf(x) - p| < 1e-9 or the bracket has collapsed to adjacent doubles.
  double quantile(double p) const;
  double mean() const;

  bool degenerate = false;

  void validate() const;

private:
  double raw_cdf(double x) const;

  MixtureFamily family_ = MixtureFamily::gamma;
  Component c1_, c2_;
  double lambda_ = 1.0;
  std::optional<Interval> trunc_;
  double trunc_lo_cdf_ = 0.0;
  double trunc_mass_ = 1.0;
};

double component_log_pdf(MixtureFamily family, const Component& c, double x);
double component_cdf(MixtureFamily family, const Component& c, double x);
double component_mean(MixtureFamily family, const Component& c);

inline constexpr double kBetaClamp = 1e-6;

struct EmOptions {
  int max_iter = 500;
  double tol = 1e-8;
  std::size_t min_samples = 10;
};

struct EmResult {
  MixtureModel model;
  std::vector<double> ll_trace; // after initialization and after every iteration
  int iterations = 0;
  bool converged = false;
  bool monotone = true;
  bool degenerate = false;
  std::string warning;
};

// Two-component EM. Initialization splits the sorted data at the median and
// applies the method of moments to each half with lambda = 0.5, unless a
// warm start is supplied.
EmResult fit_mixture_em(std::span<const double> data, MixtureFamily family,
                        const EmOptions& options = {}, const MixtureModel* warm_start = nullptr);

double mixture_log_likelihood(const MixtureModel& m, std::span<const double> data);

// Weighted maximum-likelihood solves used by the M-step.
Component gamma_weighted_mle(std::span<const double> x, std::span<const double> w,
                             const Component* start = nullptr);
Component beta_weighted_mle(std::span<const double> x, std::span<const double> w,
                            const Component& start);

} // namespace vfvm
