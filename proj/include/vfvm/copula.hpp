#pragma once

#include <span>
#include <string>
#include <vector>

#include "vfvm/error.hpp"

namespace vfvm {

enum class CopulaFamily { independence, frank, clayton, gumbel, joe };

const char* to_string(CopulaFamily f);
CopulaFamily copula_family_from_string(const std::string& s);

// rotation in degrees: 0, 90, 180, 270. With c the base density:
//   c90(u,v) = c(v, 1-u), c180(u,v) = c(1-u, 1-v), c270(u,v) = c(1-v, u).
struct PairCopula {
  CopulaFamily family = CopulaFamily::independence;
  int rotation = 0;
  double theta = 0.0;

  friend bool operator==(const PairCopula&, const PairCopula&) = default;
};

struct ThetaRange {
  double lo;
  double hi;
};

ThetaRange theta_range(CopulaFamily f);

// Throws ArgumentError when theta or rotation is not admissible.
void validate(const PairCopula& c);

inline constexpr double kUnitClamp = 1e-10;

double pair_cdf(const PairCopula& c, double u, double v);
double pair_density(const PairCopula& c, double u, double v);
double pair_log_density(const PairCopula& c, double u, double v);

// h(u|v) = dC(u,v)/dv, the distribution of the first argument given the second.
double pair_h(const PairCopula& c, double u, double v);
// dC(u,v)/du, the distribution of the second argument given the first.
double pair_h1(const PairCopula& c, double u, double v);

// u with h(u|v) = p.
double pair_h_inverse(const PairCopula& c, double p, double v);
// v with h1(u, v) = p.
double pair_h1_inverse(const PairCopula& c, double p, double u);

// Population Kendall tau of the copula.
double copula_tau(const PairCopula& c);
// Base-family theta with the given positive tau; clamped to the range.
double theta_from_tau(CopulaFamily f, double tau);

// tau_a with exact integer pair counts (ties contribute 0), O(n log n).
double kendall_tau(std::span<const double> x, std::span<const double> y);

double independence_statistic(double tau, std::size_t n);
// true when |tau| * sqrt(9n(n-1) / (2(2n+5))) <= 1.96.
bool independence_test(double tau, std::size_t n);

double pair_log_likelihood(const PairCopula& c, std::span<const double> u,
                           std::span<const double> v);

struct PairFitOptions {
  std::vector<CopulaFamily> families{CopulaFamily::frank, CopulaFamily::clayton,
                                     CopulaFamily::gumbel, CopulaFamily::joe};
  bool rotations = true;
  bool use_independence_test = true;
  double tol = 1e-6;
};

struct PairFit {
  PairCopula copula;
  double loglik = 0.0;
  double tau = 0.0;
  bool independent_by_test = false;
  bool fallback = false;
  std::string warning;
};

PairFit fit_pair(std::span<const double> u, std::span<const double> v,
                 const PairFitOptions& options = {});

struct ThetaFit {
  double theta = 0.0;
  double loglik = 0.0;
  bool ok = false;
};

// Bounded golden-section maximization of the likelihood for a fixed family
// and rotation. The bracket starts around `start` and grows when the
// optimum sits on an interior edge.
ThetaFit fit_theta(CopulaFamily family, int rotation, std::span<const double> u,
                   std::span<const double> v, double start, double tol = 1e-6);

} // namespace vfvm
