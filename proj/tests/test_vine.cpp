#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "vfvm/error.hpp"
#include "vfvm/random.hpp"
#include "vfvm/vine.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace vfvm;

namespace {

using fixture::to_columns;
using fixture::uniform01;
using fixture::vine_with;

double clayton_c(double th, double u, double v)
{
  return (1 + th) * std::pow(u * v, -th - 1) *
         std::pow(std::pow(u, -th) + std::pow(v, -th) - 1, -2 - 1 / th);
}

double clayton_h(double th, double u, double v)
{
  return std::pow(v, -th - 1) * std::pow(std::pow(u, -th) + std::pow(v, -th) - 1, -1 - 1 / th);
}

} // namespace

TEST_CASE("path vine sets")
{
  auto s = d_vine_structure({0, 1, 2});
  CHECK(validate_structure(s).ok);
  REQUIRE(s.trees.size() == 2);
  const auto& e = s.trees[1][0];
  CHECK(e.e1 == 0);
  CHECK(e.e2 == 2);
  CHECK(e.cond == std::vector<int>{1});
  CHECK(s.edge_count() == 3);
  CHECK(peel_order(s).size() == 3);
}

TEST_CASE("proximity violation is reported")
{
  auto s = d_vine_structure({0, 1, 2, 3});
  // second tree edge joining (0,1) and (2,3), which share no variable
  s.trees[1][0].child_a = 0;
  s.trees[1][0].child_b = 2;
  const auto rep = validate_structure(s);
  CHECK_FALSE(rep.ok);
  CHECK_FALSE(rep.violation.empty());
  CHECK_THROWS_AS(derive_sets(s), StructuralError);
}

TEST_CASE("maximum spanning tree tie-breaking")
{
  std::vector<WeightedPair> c{{2, 3, 1.0}, {0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}, {0, 3, 1.0},
                              {1, 3, 1.0}};
  const auto t = max_spanning_tree(4, c);
  REQUIRE(t.size() == 3);
  CHECK(t[0].i == 0);
  CHECK(t[0].j == 1);
  CHECK(t[1].i == 0);
  CHECK(t[1].j == 2);
  CHECK(t[2].i == 0);
  CHECK(t[2].j == 3);
}

TEST_CASE("first tree equals the exhaustive maximum spanning tree")
{
  for (int d : {4, 5}) {
    Rng rng(40 + d);
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i)
      order[i] = (i * 3) % d;
    std::vector<PairCopula> t1;
    const CopulaFamily fam[] = {CopulaFamily::clayton, CopulaFamily::gumbel, CopulaFamily::frank,
                                CopulaFamily::joe};
    for (int k = 0; k + 1 < d; ++k)
      t1.push_back({fam[k % 4], 0, theta_from_tau(fam[k % 4], 0.2 + 0.12 * k)});
    auto truth = vine_with(order, t1, {}, std::vector<MixtureModel>(d, uniform01()));
    const auto rows = vine_sample(truth, 500, rng);
    const auto cols = to_columns(rows, d);

    CHECK(oracle::all_trees(d).size() == static_cast<std::size_t>(std::pow(d, d - 2)));
    const auto best_tree = oracle::best_tree(cols);
    const auto fit = fit_sequential(cols, std::vector<MixtureModel>(d, uniform01()));
    std::set<std::pair<int, int>> got;
    for (const auto& e : fit.structure.trees[0])
      got.insert({std::min(e.e1, e.e2), std::max(e.e1, e.e2)});
    CHECK(got == best_tree);
  }
}

TEST_CASE("fitted structures are always regular vines")
{
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 5;
    const std::size_t n = 60;
    Columns c(d, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double z = rng.normal();
      for (int j = 0; j < d; ++j) {
        const double w = rng.uniform() * (j + 1) / d;
        c[j][i] = 1.0 / (1.0 + std::exp(-(w * z + rng.normal())));
      }
    }
    VineFitOptions opt;
    opt.min_rows = 10;
    opt.pair.tol = 1e-3;
    const auto m = fit_sequential(c, std::vector<MixtureModel>(d, uniform01()), opt);
    const auto rep = validate_structure(m.structure);
    CHECK_MESSAGE(rep.ok, rep.violation);
    CHECK(m.structure.edge_count() == 10);
  }
}

TEST_CASE("d = 2 is a single pair copula")
{
  Rng rng(3);
  auto truth = vine_with({0, 1}, {{CopulaFamily::gumbel, 0, 2.0}}, {},
                         std::vector<MixtureModel>(2, uniform01()));
  const auto cols = to_columns(vine_sample(truth, 2000, rng), 2);
  const auto m = fit_sequential(cols, std::vector<MixtureModel>(2, uniform01()));
  REQUIRE(m.structure.trees.size() == 1);
  REQUIRE(m.structure.trees[0].size() == 1);
  const auto p = fit_pair(cols[0], cols[1]);
  CHECK(m.structure.trees[0][0].copula == p.copula);
}

TEST_CASE("independent columns give independence copulas")
{
  Rng rng(4);
  Columns c(4, std::vector<double>(2000));
  for (auto& col : c)
    for (auto& v : col)
      v = rng.uniform();
  const auto m = fit_sequential(c, std::vector<MixtureModel>(4, uniform01()));
  std::size_t indep = 0;
  for (const auto& t : m.structure.trees)
    for (const auto& e : t)
      indep += e.copula.family == CopulaFamily::independence;
  // at 5% per edge a single rejection among six edges is possible
  CHECK(indep >= 5);
}

TEST_CASE("vine density against hand-rolled factorization")
{
  const std::vector<MixtureModel> m{{MixtureFamily::gamma, {2, 1.5}, {6, 0.7}, 0.4},
                                    {MixtureFamily::beta, {2, 5}, {6, 2}, 0.3},
                                    {MixtureFamily::gamma, {3, 1}, {9, 1}, 0.5}};
  const double t12 = 1.5, t23 = 2.5, t13 = 0.8;
  const auto v = vine_with({0, 1, 2},
                           {{CopulaFamily::clayton, 0, t12}, {CopulaFamily::clayton, 0, t23}},
                           {{CopulaFamily::clayton, 0, t13}}, m);
  const double x[] = {3.1, 0.42, 5.5};
  const double u0 = m[0].cdf(x[0]), u1 = m[1].cdf(x[1]), u2 = m[2].cdf(x[2]);
  const double f = m[0].density(x[0]) * m[1].density(x[1]) * m[2].density(x[2]) *
                   clayton_c(t12, u0, u1) * clayton_c(t23, u1, u2) *
                   clayton_c(t13, clayton_h(t12, u0, u1), clayton_h(t23, u2, u1));
  CHECK(vine_log_density(v, x) == doctest::Approx(std::log(f)).epsilon(1e-10));
}

TEST_CASE("all-independence vine density is the product of marginals")
{
  const std::vector<MixtureModel> m{{MixtureFamily::gamma, {2, 1.5}, {6, 0.7}, 0.4},
                                    {MixtureFamily::beta, {2, 5}, {6, 2}, 0.3},
                                    {MixtureFamily::gamma, {3, 1}, {9, 1}, 0.5},
                                    {MixtureFamily::beta, {1.5, 1.5}, {4, 9}, 0.8}};
  const auto v = vine_with({2, 0, 3, 1}, {{}, {}, {}}, {}, m);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double x[] = {10 * rng.uniform(), rng.uniform(), 20 * rng.uniform(), rng.uniform()};
    double s = 0.0;
    for (int j = 0; j < 4; ++j)
      s += m[j].log_density(x[j]);
    CHECK(std::abs(vine_log_density(v, x) - s) <= 1e-12);
  }
}

TEST_CASE("three-dimensional vine density integrates to one")
{
  const auto v = vine_with({1, 0, 2},
                           {{CopulaFamily::frank, 0, 4.0}, {CopulaFamily::gumbel, 180, 1.6}},
                           {{CopulaFamily::clayton, 90, 0.8}},
                           std::vector<MixtureModel>(3, uniform01()));
  const int n = 100;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double x[] = {(i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n};
        s += std::exp(vine_log_density(v, x));
      }
  CHECK(s / (n * n * n) == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("vine sampling")
{
  auto indep = vine_with({0, 1, 2}, {{}, {}}, {}, std::vector<MixtureModel>(3, uniform01()));
  const auto a = vine_sample(indep, 10000, 99);
  const auto b = vine_sample(indep, 10000, 99);
  CHECK(a == b);
  const auto cols = to_columns(a, 3);
  for (auto col : cols) {
    std::sort(col.begin(), col.end());
    double dks = 0.0;
    const double n = static_cast<double>(col.size());
    for (std::size_t i = 0; i < col.size(); ++i)
      dks = std::max({dks, (i + 1) / n - col[i], col[i] - i / n});
    CHECK(dks < 1.628 / std::sqrt(n)); // alpha = 0.01
  }

  auto gu = vine_with({0, 1, 2}, {{CopulaFamily::gumbel, 0, 2.0}, {}}, {},
                      std::vector<MixtureModel>(3, uniform01()));
  const auto g = to_columns(vine_sample(gu, 10000, 7), 3);
  CHECK(kendall_tau(g[0], g[1]) == doctest::Approx(0.5).epsilon(0.06));
  CHECK(std::abs(kendall_tau(g[0], g[1]) - 0.5) <= 0.03);
}
