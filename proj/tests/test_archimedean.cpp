#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "vfvm/archimedean.hpp"
#include "vfvm/error.hpp"
#include "vfvm/random.hpp"

using namespace vfvm;

namespace {

const CopulaFamily kFamilies[] = {CopulaFamily::frank, CopulaFamily::clayton, CopulaFamily::gumbel,
                                  CopulaFamily::joe};

MixtureModel uniform01() { return {MixtureFamily::beta, {1, 1}, {1, 1}, 0.5}; }

// closed-form generators
double psi(CopulaFamily f, double th, double t)
{
  switch (f) {
  case CopulaFamily::clayton: return std::pow(1 + th * t, -1 / th);
  case CopulaFamily::gumbel: return std::exp(-std::pow(t, 1 / th));
  case CopulaFamily::joe: return 1 - std::pow(1 - std::exp(-t), 1 / th);
  case CopulaFamily::frank: return -std::log1p(std::exp(-t) * std::expm1(-th)) / th;
  default: return std::exp(-t);
  }
}

} // namespace

TEST_CASE("generator derivatives")
{
  // Clayton: psi^(k)(t) = (-th)^k prod_{j<k}(1/th + j) (1+th t)^(-1/th-k)
  const double th = 1.7, t = 0.8;
  const auto d = generator_derivatives(CopulaFamily::clayton, th, t, 5);
  REQUIRE(d.size() == 6);
  double c = 1.0;
  for (int k = 0; k <= 5; ++k) {
    CHECK(d[k] == doctest::Approx(c * std::pow(1 + th * t, -1 / th - k)).epsilon(1e-12));
    c *= -th * (1 / th + k);
  }
  // all families: value and first two derivatives against finite differences
  for (auto f : kFamilies)
    for (double tt : {0.05, 0.7, 3.0}) {
      const double th2 = theta_from_tau(f, 0.45);
      const auto g = generator_derivatives(f, th2, tt, 2);
      const double h = 1e-4;
      CHECK(g[0] == doctest::Approx(psi(f, th2, tt)).epsilon(1e-12));
      CHECK(g[1] == doctest::Approx((psi(f, th2, tt + h) - psi(f, th2, tt - h)) / (2 * h))
                      .epsilon(1e-6));
      CHECK(g[2] == doctest::Approx((psi(f, th2, tt + h) - 2 * psi(f, th2, tt) +
                                     psi(f, th2, tt - h)) /
                                    (h * h))
                      .epsilon(1e-4));
      // phi inverts psi
      CHECK(psi(f, th2, generator_inverse(f, th2, 0.37)) == doctest::Approx(0.37).epsilon(1e-12));
    }
}

TEST_CASE("bivariate density equals the pair copula density")
{
  Rng rng(1);
  for (auto f : kFamilies) {
    const double th = theta_from_tau(f, 0.35);
    for (int i = 0; i < 20; ++i) {
      const double u[] = {0.02 + 0.96 * rng.uniform(), 0.02 + 0.96 * rng.uniform()};
      CHECK(archimedean_copula_log_density(f, th, u) ==
            doctest::Approx(pair_log_density({f, 0, th}, u[0], u[1])).epsilon(1e-9));
    }
  }
}

TEST_CASE("trivariate density integrates to one")
{
  for (auto f : kFamilies) {
    const double th = theta_from_tau(f, 0.3);
    const int n = 60;
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double u[] = {(i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n};
          s += std::exp(archimedean_copula_log_density(f, th, u));
        }
    CHECK(s / (n * n * n) == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("theta ranges")
{
  CHECK(archimedean_theta_range(CopulaFamily::frank, 3).lo >= 0.0);
  CHECK(archimedean_theta_range(CopulaFamily::frank, 2).lo < 0.0);
  CHECK(archimedean_theta_range(CopulaFamily::gumbel, 4).lo == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(archimedean_theta_range(CopulaFamily::gumbel, 4).lo >= 1.0);
}

TEST_CASE("sampling reproduces pairwise tau and uniform margins")
{
  for (auto f : kFamilies) {
    const double th = theta_from_tau(f, 0.4);
    Rng rng(5);
    const auto rows = archimedean_sample_uniform(f, th, 3, 4000, rng);
    Columns c(3);
    for (const auto& r : rows)
      for (int j = 0; j < 3; ++j)
        c[j].push_back(r[j]);
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b)
        CHECK(std::abs(kendall_tau(c[a], c[b]) - 0.4) < 0.04);
    for (auto col : c) {
      std::sort(col.begin(), col.end());
      double dks = 0.0;
      const double n = static_cast<double>(col.size());
      for (std::size_t i = 0; i < col.size(); ++i)
        dks = std::max({dks, (i + 1) / n - col[i], col[i] - i / n});
      CHECK(dks < 1.628 / std::sqrt(n));
    }
    Rng r1(9), r2(9);
    CHECK(archimedean_sample_uniform(f, th, 3, 50, r1) ==
          archimedean_sample_uniform(f, th, 3, 50, r2));
  }
}

TEST_CASE("d = 2 fit coincides with unrotated pair selection")
{
  Rng rng(6);
  const auto rows = archimedean_sample_uniform(CopulaFamily::joe, 1.8, 2, 1500, rng);
  Columns c(2);
  for (const auto& r : rows) {
    c[0].push_back(r[0]);
    c[1].push_back(r[1]);
  }
  const auto a = fit_archimedean(c, std::vector<MixtureModel>(2, uniform01()));
  PairFitOptions po;
  po.rotations = false;
  const auto p = fit_pair(c[0], c[1], po);
  CHECK(a.family == p.copula.family);
  CHECK(a.theta == doctest::Approx(p.copula.theta).epsilon(1e-6));
}

TEST_CASE("independent data gives an independence fit")
{
  Rng rng(7);
  Columns c(3, std::vector<double>(2000));
  for (auto& col : c)
    for (auto& v : col)
      v = rng.uniform();
  const auto a = fit_archimedean(c, std::vector<MixtureModel>(3, uniform01()));
  const double ll = archimedean_log_likelihood(a, c);
  if (a.family != CopulaFamily::independence) {
    const double tau = copula_tau({a.family, 0, a.theta});
    CHECK(std::abs(tau) < 0.03);
  }
  CHECK(std::abs(ll) < 10.0);
}

TEST_CASE("vine fits non-exchangeable data at least as well")
{
  // strong (0,1) dependence, weak (1,2)
  RVineModel truth;
  truth.structure = d_vine_structure({0, 1, 2});
  truth.structure.trees[0][0].copula = {CopulaFamily::clayton, 0, 4.0};
  truth.structure.trees[0][1].copula = {CopulaFamily::gumbel, 0, 1.2};
  truth.marginals = std::vector<MixtureModel>(3, uniform01());
  Rng rng(8);
  const auto rows = vine_sample(truth, 2000, rng);
  Columns c(3);
  for (const auto& r : rows)
    for (int j = 0; j < 3; ++j)
      c[j].push_back(r[j]);
  const auto m = std::vector<MixtureModel>(3, uniform01());
  const auto v = fit_sequential(c, m);
  const auto a = fit_archimedean(c, m);
  CHECK(vine_log_likelihood(v, c) >= archimedean_log_likelihood(a, c));
}

TEST_CASE("refit keeps the family")
{
  Rng rng(10);
  const auto rows = archimedean_sample_uniform(CopulaFamily::gumbel, 1.7, 3, 1000, rng);
  Columns c(3);
  for (const auto& r : rows)
    for (int j = 0; j < 3; ++j)
      c[j].push_back(r[j]);
  const auto m = std::vector<MixtureModel>(3, uniform01());
  const auto a = fit_archimedean(c, m);
  CHECK(a.family == CopulaFamily::gumbel);
  CHECK(a.theta == doctest::Approx(1.7).epsilon(0.1));
  Columns half(3);
  for (int j = 0; j < 3; ++j)
    half[j].assign(c[j].begin(), c[j].begin() + 500);
  const auto r = refit_archimedean(a, half, m);
  CHECK(r.family == a.family);
  CHECK(r.theta == doctest::Approx(1.7).epsilon(0.15));
}
