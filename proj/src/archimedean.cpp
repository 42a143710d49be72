#include "vfvm/archimedean.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "vfvm/optimize.hpp"
#include "vfvm/random.hpp"

namespace vfvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Truncated Taylor series f(t0 + h) = sum c[k] h^k.
struct Jet {
  std::vector<double> c;

  static Jet variable(double t0, int order)
  {
    Jet j{std::vector<double>(static_cast<std::size_t>(order) + 1, 0.0)};
    j.c[0] = t0;
    if (order >= 1)
      j.c[1] = 1.0;
    return j;
  }
  std::size_t n() const { return c.size(); }
};

Jet scale(Jet a, double s, double shift = 0.0)
{
  for (auto& x : a.c)
    x *= s;
  a.c[0] += shift;
  return a;
}

Jet jet_exp(const Jet& x)
{
  Jet y{std::vector<double>(x.n(), 0.0)};
  y.c[0] = std::exp(x.c[0]);
  for (std::size_t k = 1; k < x.n(); ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j <= k; ++j)
      s += static_cast<double>(j) * x.c[j] * y.c[k - j];
    y.c[k] = s / static_cast<double>(k);
  }
  return y;
}

Jet jet_log(const Jet& x)
{
  Jet y{std::vector<double>(x.n(), 0.0)};
  y.c[0] = std::log(x.c[0]);
  for (std::size_t k = 1; k < x.n(); ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j < k; ++j)
      s += static_cast<double>(j) * y.c[j] * x.c[k - j];
    y.c[k] = (x.c[k] - s / static_cast<double>(k)) / x.c[0];
  }
  return y;
}

// x^a for x0 > 0
Jet jet_pow(const Jet& x, double a)
{
  Jet y{std::vector<double>(x.n(), 0.0)};
  y.c[0] = std::pow(x.c[0], a);
  for (std::size_t k = 1; k < x.n(); ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j <= k; ++j)
      s += (a * static_cast<double>(j) - static_cast<double>(k - j)) * x.c[j] * y.c[k - j];
    y.c[k] = s / (static_cast<double>(k) * x.c[0]);
  }
  return y;
}

Jet psi_jet(CopulaFamily f, double th, double t, int order)
{
  const Jet x = Jet::variable(t, order);
  switch (f) {
  case CopulaFamily::clayton: return jet_pow(scale(x, th, 1.0), -1.0 / th);
  case CopulaFamily::gumbel: return jet_exp(scale(jet_pow(x, 1.0 / th), -1.0));
  case CopulaFamily::frank: {
    // 1 + (e^-theta - 1) e^-x, constant term formed without cancellation
    Jet y = scale(jet_exp(scale(x, -1.0)), std::expm1(-th));
    y.c[0] = -std::expm1(-t) + std::exp(-th - t);
    return scale(jet_log(y), -1.0 / th);
  }
  case CopulaFamily::joe: {
    Jet w = scale(jet_exp(scale(x, -1.0)), -1.0, 1.0);
    w.c[0] = -std::expm1(-t);
    return scale(jet_pow(w, 1.0 / th), -1.0, 1.0);
  }
  case CopulaFamily::independence: return jet_exp(scale(x, -1.0));
  }
  return x;
}

double clamp_u(double u) { return std::clamp(u, kUnitClamp, 1.0 - kUnitClamp); }

std::vector<double> factorial_scaled(const Jet& j)
{
  std::vector<double> out(j.n());
  double f = 1.0;
  for (std::size_t k = 0; k < j.n(); ++k) {
    if (k > 0)
      f *= static_cast<double>(k);
    out[k] = j.c[k] * f;
  }
  return out;
}

double mean_pairwise_tau(const Columns& u)
{
  double s = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = i + 1; j < u.size(); ++j) {
      s += kendall_tau(u[i], u[j]);
      ++count;
    }
  return count ? s / count : 0.0;
}

double copula_ll(CopulaFamily f, double th, const Columns& u)
{
  const std::size_t n = u.empty() ? 0 : u[0].size();
  std::vector<double> row(u.size());
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < u.size(); ++j)
      row[j] = u[j][i];
    ll += archimedean_copula_log_density(f, th, row);
  }
  return ll;
}

void check_input(const Columns& data, const std::vector<MixtureModel>& marginals,
                 std::size_t min_rows)
{
  if (data.size() != marginals.size() || data.empty())
    throw ArgumentError("archimedean fit: column count does not match marginals");
  for (const auto& c : data)
    if (c.size() != data[0].size())
      throw ArgumentError("archimedean fit: columns differ in length");
  if (data[0].size() < min_rows)
    throw FittingError("archimedean fit needs at least " + std::to_string(min_rows) +
                       " rows, got " + std::to_string(data[0].size()));
}

} // namespace

std::vector<double> generator_derivatives(CopulaFamily f, double theta, double t, int order)
{
  return factorial_scaled(psi_jet(f, theta, t, order));
}

double generator_inverse(CopulaFamily f, double th, double u)
{
  switch (f) {
  case CopulaFamily::clayton: return std::expm1(-th * std::log(u)) / th;
  case CopulaFamily::gumbel: return std::pow(-std::log(u), th);
  case CopulaFamily::frank: return -std::log(std::expm1(-th * u) / std::expm1(-th));
  case CopulaFamily::joe: return -std::log(-std::expm1(th * std::log1p(-u)));
  case CopulaFamily::independence: return -std::log(u);
  }
  return 0.0;
}

double log_neg_generator_derivative(CopulaFamily f, double th, double u)
{
  switch (f) {
  case CopulaFamily::clayton: return (-th - 1.0) * std::log(u);
  case CopulaFamily::gumbel:
    return std::log(th) + (th - 1.0) * std::log(-std::log(u)) - std::log(u);
  case CopulaFamily::frank:
    return std::log(std::abs(th)) - th * u - std::log(std::abs(std::expm1(-th * u)));
  case CopulaFamily::joe: {
    const double l = std::log1p(-u);
    return std::log(th) + (th - 1.0) * l - std::log(-std::expm1(th * l));
  }
  case CopulaFamily::independence: return -std::log(u);
  }
  return 0.0;
}

ThetaRange archimedean_theta_range(CopulaFamily f, int d)
{
  ThetaRange r = theta_range(f);
  if (f == CopulaFamily::frank && d >= 3)
    r.lo = 1e-4;
  return r;
}

double archimedean_copula_log_density(CopulaFamily f, double theta, std::span<const double> u)
{
  if (f == CopulaFamily::independence)
    return 0.0;
  const int d = static_cast<int>(u.size());
  double t = 0.0, lsum = 0.0;
  for (double x : u) {
    const double uc = clamp_u(x);
    t += generator_inverse(f, theta, uc);
    lsum += log_neg_generator_derivative(f, theta, uc);
  }
  const auto psi = generator_derivatives(f, theta, t, d);
  const double top = std::abs(psi[static_cast<std::size_t>(d)]);
  if (!(top > 0.0) || !std::isfinite(top))
    return -kInf;
  return std::log(top) + lsum;
}

double archimedean_log_density(const ArchimedeanModel& m, std::span<const double> x)
{
  if (x.size() != m.marginals.size())
    throw ArgumentError("archimedean_log_density: dimension mismatch");
  double lf = 0.0;
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double l = m.marginals[i].log_density(x[i]);
    if (l == -kInf || std::isnan(l))
      return -kInf;
    lf += l;
    u[i] = std::clamp(m.marginals[i].cdf(x[i]), kConditionalClamp, 1.0 - kConditionalClamp);
  }
  return lf + archimedean_copula_log_density(m.family, m.theta, u);
}

double archimedean_log_likelihood(const ArchimedeanModel& m, const Columns& data)
{
  double ll = 0.0;
  std::vector<double> x(data.size());
  for (std::size_t i = 0; i < data[0].size(); ++i) {
    for (std::size_t j = 0; j < data.size(); ++j)
      x[j] = data[j][i];
    ll += archimedean_log_density(m, x);
  }
  return ll;
}

ArchimedeanModel fit_archimedean(const Columns& data, std::vector<MixtureModel> marginals,
                                 const ArchimedeanFitOptions& options)
{
  check_input(data, marginals, options.min_rows);
  ArchimedeanModel model;
  model.marginals = std::move(marginals);
  const int d = model.dim();
  if (d == 1)
    return model;
  const Columns u = pseudo_observations(data, model.marginals, options.rank_pseudo_obs);

  if (d == 2) {
    PairFitOptions po;
    po.families = options.families;
    po.rotations = false;
    po.use_independence_test = options.use_independence_test;
    po.tol = options.tol;
    const PairFit pf = fit_pair(u[0], u[1], po);
    model.family = pf.copula.family;
    model.theta = pf.copula.theta;
    return model;
  }

  const double tau = mean_pairwise_tau(u);
  double best_ll = 0.0;
  for (CopulaFamily f : {CopulaFamily::frank, CopulaFamily::clayton, CopulaFamily::gumbel,
                         CopulaFamily::joe}) {
    if (std::find(options.families.begin(), options.families.end(), f) == options.families.end())
      continue;
    const ThetaRange r = archimedean_theta_range(f, d);
    const double start = std::clamp(theta_from_tau(f, std::max(tau, 1e-4)), r.lo, r.hi);
    const double w = std::max(1.0, 0.5 * start);
    const Maximum m = maximize_bracketed([&](double th) { return copula_ll(f, th, u); }, start,
                                         start - w, start + w, r.lo, r.hi, options.tol);
    if (std::isfinite(m.value) && m.value > best_ll) {
      best_ll = m.value;
      model.family = f;
      model.theta = m.x;
    }
  }
  return model;
}

ArchimedeanModel refit_archimedean(const ArchimedeanModel& base, const Columns& data,
                                   std::vector<MixtureModel> marginals,
                                   const ArchimedeanFitOptions& options)
{
  check_input(data, marginals, options.min_rows);
  ArchimedeanModel model = base;
  model.marginals = std::move(marginals);
  if (model.family == CopulaFamily::independence)
    return model;
  const Columns u = pseudo_observations(data, model.marginals, options.rank_pseudo_obs);
  const int d = model.dim();
  const ThetaRange r = archimedean_theta_range(model.family, d);
  double lo = r.lo, hi = r.hi;
  if (model.family == CopulaFamily::frank) {
    if (base.theta < 0.0)
      hi = -1e-4;
    else
      lo = std::max(lo, 1e-4);
  }
  const double w = std::max(1.0, 0.5 * std::abs(base.theta));
  const Maximum m =
    maximize_bracketed([&](double th) { return copula_ll(model.family, th, u); }, base.theta,
                       base.theta - w, base.theta + w, lo, hi, options.tol);
  if (std::isfinite(m.value))
    model.theta = m.x;
  return model;
}

std::vector<std::vector<double>> archimedean_sample_uniform(CopulaFamily f, double theta, int d,
                                                            std::size_t n, Rng& rng)
{
  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> u(static_cast<std::size_t>(d));
    double t = 0.0;
    for (int k = 0; k < d; ++k) {
      const double w = rng.uniform();
      if (k == 0 || f == CopulaFamily::independence) {
        u[static_cast<std::size_t>(k)] = w;
      } else {
        // C(u_k | u_1..u_{k-1}) = psi^(k)(t + phi(u_k)) / psi^(k)(t)
        const double denom = generator_derivatives(f, theta, t, k)[static_cast<std::size_t>(k)];
        auto g = [&](double x) {
          const double s = t + generator_inverse(f, theta, x);
          return generator_derivatives(f, theta, s, k)[static_cast<std::size_t>(k)] / denom - w;
        };
        double lo = kConditionalClamp, hi = 1.0 - kConditionalClamp;
        double glo = g(lo), ghi = g(hi);
        double x;
        if (glo >= 0.0)
          x = lo;
        else if (ghi <= 0.0)
          x = hi;
        else {
          std::uintmax_t it = 200;
          const auto [a, b] = boost::math::tools::toms748_solve(
            g, lo, hi, glo, ghi, boost::math::tools::eps_tolerance<double>(48), it);
          x = 0.5 * (a + b);
        }
        u[static_cast<std::size_t>(k)] = x;
      }
      t += generator_inverse(f, theta, clamp_u(u[static_cast<std::size_t>(k)]));
    }
    rows.push_back(std::move(u));
  }
  return rows;
}

std::vector<std::vector<double>> archimedean_sample(const ArchimedeanModel& m, std::size_t n,
                                                    Rng& rng)
{
  auto rows = archimedean_sample_uniform(m.family, m.theta, m.dim(), n, rng);
  for (auto& row : rows)
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = m.marginals[j].quantile(std::clamp(row[j], kConditionalClamp, 1.0 - kConditionalClamp));
  return rows;
}

} // namespace vfvm
