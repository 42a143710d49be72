#pragma once

#include <span>
#include <vector>

#include "vfvm/copula.hpp"
#include "vfvm/mixture.hpp"
#include "vfvm/vine.hpp"

namespace vfvm {

class Rng;

// Single d-dimensional Archimedean copula C(u) = psi(sum phi(u_i)) with
// mixture marginals. Unrotated families only.
struct ArchimedeanModel {
  CopulaFamily family = CopulaFamily::independence;
  double theta = 0.0;
  std::vector<MixtureModel> marginals;

  int dim() const noexcept { return static_cast<int>(marginals.size()); }
};

// psi(t) and its first `order` derivatives: out[k] = psi^(k)(t).
std::vector<double> generator_derivatives(CopulaFamily f, double theta, double t, int order);
// phi(u) = psi^{-1}(u)
double generator_inverse(CopulaFamily f, double theta, double u);
// log(-phi'(u))
double log_neg_generator_derivative(CopulaFamily f, double theta, double u);

// Admissible theta interval for dimension d (Frank needs theta > 0 when d >= 3).
ThetaRange archimedean_theta_range(CopulaFamily f, int d);

double archimedean_copula_log_density(CopulaFamily f, double theta, std::span<const double> u);
double archimedean_log_density(const ArchimedeanModel& m, std::span<const double> x);
double archimedean_log_likelihood(const ArchimedeanModel& m, const Columns& data);

struct ArchimedeanFitOptions {
  std::vector<CopulaFamily> families{CopulaFamily::frank, CopulaFamily::clayton,
                                     CopulaFamily::gumbel, CopulaFamily::joe};
  bool rank_pseudo_obs = false;
  bool use_independence_test = true; // bivariate case only
  std::size_t min_rows = 30;
  double tol = 1e-6;
};

ArchimedeanModel fit_archimedean(const Columns& data, std::vector<MixtureModel> marginals,
                                 const ArchimedeanFitOptions& options = {});

// Keeps the family and re-estimates theta starting from the old value.
ArchimedeanModel refit_archimedean(const ArchimedeanModel& base, const Columns& data,
                                   std::vector<MixtureModel> marginals,
                                   const ArchimedeanFitOptions& options = {});

// Uniform-scale rows by sequential conditional inversion.
std::vector<std::vector<double>> archimedean_sample_uniform(CopulaFamily f, double theta, int d,
                                                            std::size_t n, Rng& rng);
std::vector<std::vector<double>> archimedean_sample(const ArchimedeanModel& m, std::size_t n,
                                                    Rng& rng);

} // namespace vfvm
