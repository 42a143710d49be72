#include "vfvm/copula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "vfvm/optimize.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/tools/roots.hpp>

namespace vfvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFrankSeries = 1e-5;

double clamp_unit(double x) { return std::clamp(x, kUnitClamp, 1.0 - kUnitClamp); }

// ---- base families, rotation 0, arguments strictly inside (0,1) ----

double clayton_log_a(double th, double lu, double lv)
{
  // log(u^-th + v^-th - 1)
  const double a = -th * lu, b = -th * lv;
  const double M = std::max(a, b), m = std::min(a, b);
  return M + std::log1p(std::exp(m - M) - std::exp(-M));
}

struct Frank {
  double th, a, b, c0, d;

  Frank(double theta, double u, double v)
    : th(theta)
  {
    a = std::expm1(-th * u);
    b = std::expm1(-th * v);
    c0 = std::expm1(-th);
    // c0 + ab; the four-term form avoids cancellation for large theta
    if (std::abs(th) < 1.0)
      d = c0 + a * b;
    else
      d = std::exp(-th) + std::exp(-th * (u + v)) - std::exp(-th * u) - std::exp(-th * v);
  }
};

double base_cdf(CopulaFamily f, double th, double u, double v)
{
  switch (f) {
  case CopulaFamily::independence: return u * v;
  case CopulaFamily::clayton: return std::exp(-clayton_log_a(th, std::log(u), std::log(v)) / th);
  case CopulaFamily::gumbel: {
    const double t = std::pow(-std::log(u), th) + std::pow(-std::log(v), th);
    return std::exp(-std::pow(t, 1.0 / th));
  }
  case CopulaFamily::frank: {
    if (std::abs(th) < kFrankSeries)
      return u * v + 0.5 * th * u * v * (1.0 - u) * (1.0 - v);
    const Frank fr(th, u, v);
    return -std::log1p(fr.a * fr.b / fr.c0) / th;
  }
  case CopulaFamily::joe: {
    const double ub = std::pow(1.0 - u, th), vb = std::pow(1.0 - v, th);
    const double s = ub + vb * (-std::expm1(th * std::log1p(-u)));
    return 1.0 - std::pow(s, 1.0 / th);
  }
  }
  return 0.0;
}

double base_log_density(CopulaFamily f, double th, double u, double v)
{
  switch (f) {
  case CopulaFamily::independence: return 0.0;
  case CopulaFamily::clayton: {
    const double lu = std::log(u), lv = std::log(v);
    return std::log1p(th) + (-1.0 - th) * (lu + lv) +
           (-1.0 / th - 2.0) * clayton_log_a(th, lu, lv);
  }
  case CopulaFamily::gumbel: {
    const double x = -std::log(u), y = -std::log(v);
    const double lx = std::log(x), ly = std::log(y);
    const double t = std::exp(th * lx) + std::exp(th * ly);
    const double lt = std::log(t);
    const double logC = -std::exp(lt / th);
    return logC + x + y + (-2.0 + 2.0 / th) * lt + (th - 1.0) * (lx + ly) +
           std::log1p((th - 1.0) * std::exp(-lt / th));
  }
  case CopulaFamily::frank: {
    if (std::abs(th) < kFrankSeries)
      return std::log1p(0.5 * th * (1.0 - 2.0 * u) * (1.0 - 2.0 * v));
    const Frank fr(th, u, v);
    return std::log(std::abs(th * fr.c0)) - th * (u + v) - 2.0 * std::log(std::abs(fr.d));
  }
  case CopulaFamily::joe: {
    const double lub = std::log1p(-u), lvb = std::log1p(-v);
    const double ub = std::exp(th * lub), vb = std::exp(th * lvb);
    const double s = ub + vb * (-std::expm1(th * lub));
    return (1.0 / th - 2.0) * std::log(s) + (th - 1.0) * (lub + lvb) + std::log(th - 1.0 + s);
  }
  }
  return 0.0;
}

// dC/dv
double base_h(CopulaFamily f, double th, double u, double v)
{
  switch (f) {
  case CopulaFamily::independence: return u;
  case CopulaFamily::clayton: {
    const double lu = std::log(u), lv = std::log(v);
    return std::exp((-th - 1.0) * lv + (-1.0 / th - 1.0) * clayton_log_a(th, lu, lv));
  }
  case CopulaFamily::gumbel: {
    const double x = -std::log(u), y = -std::log(v);
    const double lt = std::log(std::pow(x, th) + std::pow(y, th));
    const double logC = -std::exp(lt / th);
    return std::exp(logC + (1.0 / th - 1.0) * lt + (th - 1.0) * std::log(y) + y);
  }
  case CopulaFamily::frank: {
    if (std::abs(th) < kFrankSeries)
      return u + 0.5 * th * u * (1.0 - u) * (1.0 - 2.0 * v);
    const Frank fr(th, u, v);
    return std::exp(-th * v) * fr.a / fr.d;
  }
  case CopulaFamily::joe: {
    const double lub = std::log1p(-u), lvb = std::log1p(-v);
    const double one_minus_ub = -std::expm1(th * lub);
    const double s = std::exp(th * lub) + std::exp(th * lvb) * one_minus_ub;
    return std::exp((1.0 / th - 1.0) * std::log(s) + (th - 1.0) * lvb) * one_minus_ub;
  }
  }
  return 0.0;
}

int transpose_rotation(int r) { return r == 90 ? 270 : r == 270 ? 90 : r; }

double rotated_h(const PairCopula& c, double u, double v)
{
  const auto f = c.family;
  const double th = c.theta;
  switch (c.rotation) {
  case 90: return 1.0 - base_h(f, th, clamp_unit(1.0 - u), v);
  case 180: return 1.0 - base_h(f, th, clamp_unit(1.0 - u), clamp_unit(1.0 - v));
  case 270: return base_h(f, th, u, clamp_unit(1.0 - v));
  default: return base_h(f, th, u, v);
  }
}

double joe_tau(double th)
{
  if (th <= 1.0)
    return 0.0;
  // 1 + 2/(2-th) (digamma(2) - digamma(2/th + 1)); limit 2 - pi^2/6 at th = 2
  if (std::abs(th - 2.0) < 1e-6)
    return 2.0 - std::numbers::pi * std::numbers::pi / 6.0;
  using boost::math::digamma;
  return 1.0 + 2.0 / (2.0 - th) * (digamma(2.0) - digamma(2.0 / th + 1.0));
}

double debye1(double x)
{
  // (1/x) * integral_0^x t/(e^t - 1) dt, x > 0
  if (x < 0.5) {
    const double x2 = x * x;
    return 1.0 - x / 4.0 +
           x2 * (1.0 / 36.0 +
                 x2 * (-1.0 / 3600.0 +
                       x2 * (1.0 / 211680.0 + x2 * (-1.0 / 10886400.0 + x2 / 526901760.0))));
  }
  // pi^2/6 - sum_k e^{-kx} (x/k + 1/k^2)
  double s = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = std::exp(-k * x) * (x / k + 1.0 / (static_cast<double>(k) * k));
    s += term;
    if (term < 1e-18)
      break;
  }
  return (std::numbers::pi * std::numbers::pi / 6.0 - s) / x;
}

double frank_tau(double th)
{
  if (std::abs(th) < 1e-4)
    return th / 9.0;
  const double a = std::abs(th);
  const double t = 1.0 - 4.0 / a * (1.0 - debye1(a));
  return th < 0 ? -t : t;
}

double base_tau(CopulaFamily f, double th)
{
  switch (f) {
  case CopulaFamily::independence: return 0.0;
  case CopulaFamily::clayton: return th / (th + 2.0);
  case CopulaFamily::gumbel: return 1.0 - 1.0 / th;
  case CopulaFamily::frank: return frank_tau(th);
  case CopulaFamily::joe: return joe_tau(th);
  }
  return 0.0;
}

template <class F>
double invert_monotone(F f, double target, double lo, double hi)
{
  double flo = f(lo) - target, fhi = f(hi) - target;
  if (flo >= 0.0)
    return lo;
  if (fhi <= 0.0)
    return hi;
  std::uintmax_t it = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
    [&](double x) { return f(x) - target; }, lo, hi, flo, fhi,
    boost::math::tools::eps_tolerance<double>(50), it);
  return 0.5 * (a + b);
}

} // namespace

const char* to_string(CopulaFamily f)
{
  switch (f) {
  case CopulaFamily::independence: return "independence";
  case CopulaFamily::frank: return "frank";
  case CopulaFamily::clayton: return "clayton";
  case CopulaFamily::gumbel: return "gumbel";
  case CopulaFamily::joe: return "joe";
  }
  return "?";
}

CopulaFamily copula_family_from_string(const std::string& s)
{
  for (auto f : {CopulaFamily::independence, CopulaFamily::frank, CopulaFamily::clayton,
                 CopulaFamily::gumbel, CopulaFamily::joe})
    if (s == to_string(f))
      return f;
  throw ArgumentError("unknown copula family '" + s + "'");
}

ThetaRange theta_range(CopulaFamily f)
{
  switch (f) {
  case CopulaFamily::clayton: return {1e-4, 50.0};
  case CopulaFamily::gumbel:
  case CopulaFamily::joe: return {1.0 + 1e-4, 50.0};
  case CopulaFamily::frank: return {-50.0, 50.0};
  default: return {0.0, 0.0};
  }
}

void validate(const PairCopula& c)
{
  if (c.rotation != 0 && c.rotation != 90 && c.rotation != 180 && c.rotation != 270)
    throw ArgumentError("copula rotation must be 0, 90, 180 or 270");
  const double th = c.theta;
  bool ok = true;
  switch (c.family) {
  case CopulaFamily::independence: break;
  case CopulaFamily::clayton: ok = th > 0.0 && th <= 50.0; break;
  case CopulaFamily::gumbel:
  case CopulaFamily::joe: ok = th >= 1.0 && th <= 50.0; break;
  case CopulaFamily::frank: ok = th != 0.0 && th >= -50.0 && th <= 50.0; break;
  }
  if (!ok || !std::isfinite(th))
    throw ArgumentError(std::string("theta out of range for ") + to_string(c.family) + ": " +
                        std::to_string(th));
}

double pair_cdf(const PairCopula& c, double u, double v)
{
  if (u <= 0.0 || v <= 0.0)
    return 0.0;
  if (u >= 1.0)
    return std::min(v, 1.0);
  if (v >= 1.0)
    return u;
  const auto f = c.family;
  const double th = c.theta;
  double r;
  switch (c.rotation) {
  case 90: r = v - base_cdf(f, th, 1.0 - u, v); break;
  case 180: r = u + v - 1.0 + base_cdf(f, th, 1.0 - u, 1.0 - v); break;
  case 270: r = u - base_cdf(f, th, u, 1.0 - v); break;
  default: r = base_cdf(f, th, u, v); break;
  }
  return std::clamp(r, std::max(0.0, u + v - 1.0), std::min(u, v));
}

double pair_log_density(const PairCopula& c, double u, double v)
{
  if (c.family == CopulaFamily::independence)
    return 0.0;
  u = clamp_unit(u);
  v = clamp_unit(v);
  const auto f = c.family;
  const double th = c.theta;
  switch (c.rotation) {
  case 90: return base_log_density(f, th, v, clamp_unit(1.0 - u));
  case 180: return base_log_density(f, th, clamp_unit(1.0 - u), clamp_unit(1.0 - v));
  case 270: return base_log_density(f, th, clamp_unit(1.0 - v), u);
  default: return base_log_density(f, th, u, v);
  }
}

double pair_density(const PairCopula& c, double u, double v)
{
  return std::exp(pair_log_density(c, u, v));
}

double pair_h(const PairCopula& c, double u, double v)
{
  if (u <= 0.0)
    return 0.0;
  if (u >= 1.0)
    return 1.0;
  if (c.family == CopulaFamily::independence)
    return u;
  const double h = rotated_h(c, clamp_unit(u), clamp_unit(v));
  return std::clamp(h, 0.0, 1.0);
}

double pair_h1(const PairCopula& c, double u, double v)
{
  PairCopula t = c;
  t.rotation = transpose_rotation(c.rotation);
  return pair_h(t, v, u);
}

double pair_h_inverse(const PairCopula& c, double p, double v)
{
  if (p <= 0.0)
    return 0.0;
  if (p >= 1.0)
    return 1.0;
  if (c.family == CopulaFamily::independence)
    return p;
  auto f = [&](double u) { return pair_h(c, u, v) - p; };
  double lo = 0.0, hi = 1.0;
  double flo = -p, fhi = 1.0 - p;
  std::uintmax_t it = 300;
  const auto [a, b] = boost::math::tools::toms748_solve(
    f, lo, hi, flo, fhi,
    [](double x, double y) { return std::abs(y - x) <= 1e-15 + 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(x), std::abs(y)); },
    it);
  const double mid = 0.5 * (a + b);
  double best = mid, err = std::abs(f(mid));
  for (double x : {a, b}) {
    const double e = std::abs(f(x));
    if (e < err) {
      err = e;
      best = x;
    }
  }
  return best;
}

double pair_h1_inverse(const PairCopula& c, double p, double u)
{
  PairCopula t = c;
  t.rotation = transpose_rotation(c.rotation);
  return pair_h_inverse(t, p, u);
}

double copula_tau(const PairCopula& c)
{
  const double t = base_tau(c.family, c.theta);
  return (c.rotation == 90 || c.rotation == 270) ? -t : t;
}

double theta_from_tau(CopulaFamily f, double tau)
{
  const ThetaRange r = theta_range(f);
  tau = std::clamp(tau, 1e-6, 0.98);
  switch (f) {
  case CopulaFamily::independence: return 0.0;
  case CopulaFamily::clayton: return std::clamp(2.0 * tau / (1.0 - tau), r.lo, r.hi);
  case CopulaFamily::gumbel: return std::clamp(1.0 / (1.0 - tau), r.lo, r.hi);
  case CopulaFamily::frank: return invert_monotone(frank_tau, tau, 1e-4, r.hi);
  case CopulaFamily::joe: return invert_monotone(joe_tau, tau, r.lo, r.hi);
  }
  return 0.0;
}

double independence_statistic(double tau, std::size_t n)
{
  const double nn = static_cast<double>(n);
  return std::abs(tau) * std::sqrt(9.0 * nn * (nn - 1.0) / (2.0 * (2.0 * nn + 5.0)));
}

bool independence_test(double tau, std::size_t n)
{
  if (n < 2)
    throw ArgumentError("independence test needs n >= 2");
  return independence_statistic(tau, n) <= 1.96;
}

double pair_log_likelihood(const PairCopula& c, std::span<const double> u,
                           std::span<const double> v)
{
  if (c.family == CopulaFamily::independence)
    return 0.0;
  double ll = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    ll += pair_log_density(c, u[i], v[i]);
  return ll;
}

ThetaFit fit_theta(CopulaFamily family, int rotation, std::span<const double> u,
                   std::span<const double> v, double start, double tol)
{
  ThetaFit out;
  if (family == CopulaFamily::independence) {
    out.ok = true;
    return out;
  }
  ThetaRange range = theta_range(family);
  if (family == CopulaFamily::frank) {
    // keep the sign of the start value; zero is excluded
    if (start < 0.0)
      range = {range.lo, -1e-4};
    else
      range = {1e-4, range.hi};
  }
  start = std::clamp(start, range.lo, range.hi);

  auto ll = [&](double th) { return pair_log_likelihood(PairCopula{family, rotation, th}, u, v); };
  const double width = std::max(1.0, 0.5 * std::abs(start));
  const Maximum m =
    maximize_bracketed(ll, start, start - width, start + width, range.lo, range.hi, tol);
  out.theta = m.x;
  out.loglik = m.value;
  out.ok = std::isfinite(m.value);
  return out;
}

PairFit fit_pair(std::span<const double> u, std::span<const double> v,
                 const PairFitOptions& options)
{
  if (u.size() != v.size())
    throw ArgumentError("fit_pair: length mismatch");
  if (u.size() < 2)
    throw ArgumentError("fit_pair: need at least two observations");
  PairFit fit;
  fit.tau = kendall_tau(u, v);
  fit.copula = PairCopula{};
  fit.loglik = 0.0;
  if (options.use_independence_test && independence_test(fit.tau, u.size())) {
    fit.independent_by_test = true;
    return fit;
  }

  const bool positive = fit.tau >= 0.0;
  const double atau = std::abs(fit.tau);
  bool any_ok = false, any_tried = false;
  for (CopulaFamily fam : {CopulaFamily::frank, CopulaFamily::clayton, CopulaFamily::gumbel,
                           CopulaFamily::joe}) {
    if (std::find(options.families.begin(), options.families.end(), fam) ==
        options.families.end())
      continue;
    std::vector<int> rots;
    if (fam == CopulaFamily::frank)
      rots = {0};
    else if (positive)
      rots = options.rotations ? std::vector<int>{0, 180} : std::vector<int>{0};
    else if (options.rotations)
      rots = {90, 270};
    for (int rot : rots) {
      any_tried = true;
      double start = theta_from_tau(fam, atau);
      if (fam == CopulaFamily::frank && !positive)
        start = -start;
      const ThetaFit tf = fit_theta(fam, rot, u, v, start, options.tol);
      if (!tf.ok)
        continue;
      any_ok = true;
      if (tf.loglik > fit.loglik) {
        fit.loglik = tf.loglik;
        fit.copula = PairCopula{fam, rot, tf.theta};
      }
    }
  }
  if (any_tried && !any_ok) {
    fit.fallback = true;
    fit.warning = "all candidate copula fits failed; using independence";
  }
  return fit;
}

} // namespace vfvm
