#include "vfvm/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/roots.hpp>

namespace vfvm {

namespace bm = boost::math;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxShape = 1e8;

double log_add(double a, double b)
{
  if (a == -kInf)
    return b;
  if (b == -kInf)
    return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double lbeta(double p, double q)
{
  return bm::lgamma(p) + bm::lgamma(q) - bm::lgamma(p + q);
}

bool valid_component(const Component& c)
{
  return std::isfinite(c.a) && std::isfinite(c.b) && c.a > 0.0 && c.b > 0.0;
}

Component moments_component(MixtureFamily family, double m, double v)
{
  if (family == MixtureFamily::gamma) {
    v = std::max(v, 1e-6 * m * m);
    const double a = std::min(m * m / v, kMaxShape);
    return {a, m / a};
  }
  const double cap = m * (1.0 - m);
  v = std::clamp(v, 1e-6 * cap, 0.99 * cap);
  const double k = std::min(cap / v - 1.0, kMaxShape);
  return {m * k, (1.0 - m) * k};
}

void sample_moments(std::span<const double> x, double& mean, double& var)
{
  mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x)
    s += (v - mean) * (v - mean);
  var = x.size() > 1 ? s / static_cast<double>(x.size()) : 0.0;
}

} // namespace

const char* to_string(MixtureFamily f) { return f == MixtureFamily::gamma ? "gamma" : "beta"; }

MixtureFamily mixture_family_from_string(const std::string& s)
{
  if (s == "gamma")
    return MixtureFamily::gamma;
  if (s == "beta")
    return MixtureFamily::beta;
  throw ArgumentError("unknown mixture family '" + s + "'");
}

double component_log_pdf(MixtureFamily family, const Component& c, double x)
{
  if (family == MixtureFamily::gamma) {
    if (x < 0.0)
      return -kInf;
    if (x == 0.0) {
      if (c.a == 1.0)
        return -std::log(c.b);
      return c.a < 1.0 ? kInf : -kInf;
    }
    return (c.a - 1.0) * std::log(x) - x / c.b - c.a * std::log(c.b) - bm::lgamma(c.a);
  }
  if (x < 0.0 || x > 1.0)
    return -kInf;
  if (x == 0.0 || x == 1.0) {
    const double e = x == 0.0 ? c.a : c.b;
    if (e == 1.0)
      return -lbeta(c.a, c.b);
    return e < 1.0 ? kInf : -kInf;
  }
  return (c.a - 1.0) * std::log(x) + (c.b - 1.0) * std::log1p(-x) - lbeta(c.a, c.b);
}

double component_cdf(MixtureFamily family, const Component& c, double x)
{
  if (family == MixtureFamily::gamma) {
    if (x <= 0.0)
      return 0.0;
    if (x == kInf)
      return 1.0;
    return bm::gamma_p(c.a, x / c.b);
  }
  if (x <= 0.0)
    return 0.0;
  if (x >= 1.0)
    return 1.0;
  return bm::ibeta(c.a, c.b, x);
}

double component_mean(MixtureFamily family, const Component& c)
{
  return family == MixtureFamily::gamma ? c.a * c.b : c.a / (c.a + c.b);
}

MixtureModel::MixtureModel(MixtureFamily family, Component c1, Component c2, double lambda)
  : family_(family)
  , c1_(c1)
  , c2_(c2)
  , lambda_(lambda)
{
  validate();
}

void MixtureModel::validate() const
{
  if (!(lambda_ >= 0.0 && lambda_ <= 1.0))
    throw ArgumentError("mixture weight outside [0,1]");
  if (!valid_component(c1_) || !valid_component(c2_))
    throw ArgumentError("mixture component parameters must be positive and finite");
}

void MixtureModel::truncate(double lo, double hi)
{
  if (!(lo < hi))
    throw ArgumentError("truncation interval must satisfy lo < hi");
  trunc_.reset();
  const double flo = raw_cdf(lo), fhi = raw_cdf(hi);
  if (!(fhi - flo > 0.0))
    throw FittingError("mixture has no mass on the truncation interval");
  trunc_ = Interval{lo, hi};
  trunc_lo_cdf_ = flo;
  trunc_mass_ = fhi - flo;
}

Interval MixtureModel::support() const
{
  if (trunc_)
    return *trunc_;
  return family_ == MixtureFamily::gamma ? Interval{0.0, kInf} : Interval{0.0, 1.0};
}

double MixtureModel::log_density(double x) const
{
  if (std::isnan(x))
    return -kInf;
  if (trunc_ && (x < trunc_->lo || x > trunc_->hi))
    return -kInf;
  if (family_ == MixtureFamily::beta && x >= 0.0 && x <= 1.0)
    x = std::clamp(x, kBetaClamp, 1.0 - kBetaClamp);
  double l = -kInf;
  if (lambda_ > 0.0)
    l = std::log(lambda_) + component_log_pdf(family_, c1_, x);
  if (lambda_ < 1.0)
    l = log_add(l, std::log1p(-lambda_) + component_log_pdf(family_, c2_, x));
  if (trunc_)
    l -= std::log(trunc_mass_);
  return l;
}

double MixtureModel::density(double x) const { return std::exp(log_density(x)); }

double MixtureModel::raw_cdf(double x) const
{
  double f = 0.0;
  if (lambda_ > 0.0)
    f += lambda_ * component_cdf(family_, c1_, x);
  if (lambda_ < 1.0)
    f += (1.0 - lambda_) * component_cdf(family_, c2_, x);
  return std::clamp(f, 0.0, 1.0);
}

double MixtureModel::cdf(double x) const
{
  if (std::isnan(x))
    throw ArgumentError("cdf of NaN");
  if (!trunc_)
    return raw_cdf(x);
  if (x <= trunc_->lo)
    return 0.0;
  if (x >= trunc_->hi)
    return 1.0;
  return std::clamp((raw_cdf(x) - trunc_lo_cdf_) / trunc_mass_, 0.0, 1.0);
}

double MixtureModel::quantile(double p) const
{
  if (!(p > 0.0 && p < 1.0))
    throw ArgumentError("quantile level must lie in (0,1)");
  const Interval s = support();
  double lo = s.lo, hi = s.hi;
  if (!std::isfinite(hi)) {
    hi = std::max(1.0, 2.0 * std::max(component_mean(family_, c1_), component_mean(family_, c2_)));
    while (cdf(hi) < p) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi))
        throw FittingError("quantile bracket diverged");
    }
  }
  auto f = [&](double x) { return cdf(x) - p; };
  double flo = f(lo), fhi = f(hi);
  if (fhi == 0.0)
    return hi;
  std::uintmax_t iters = 400;
  const auto [a, b] = bm::tools::toms748_solve(
    f, lo, hi, flo, fhi,
    [](double u, double v) { return std::abs(v - u) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(u), std::abs(v)); },
    iters);
  const double mid = 0.5 * (a + b);
  // pick whichever endpoint lands closest; the bracket may be one ulp wide
  double best = mid, err = std::abs(f(mid));
  for (double c : {a, b}) {
    const double e = std::abs(f(c));
    if (e < err) {
      err = e;
      best = c;
    }
  }
  return best;
}

double MixtureModel::mean() const
{
  if (!trunc_)
    return lambda_ * component_mean(family_, c1_) + (1.0 - lambda_) * component_mean(family_, c2_);
  return bm::quadrature::gauss_kronrod<double, 61>::integrate(
    [&](double x) { return x * density(x); }, trunc_->lo, trunc_->hi, 15, 1e-10);
}

double mixture_log_likelihood(const MixtureModel& m, std::span<const double> data)
{
  double ll = 0.0;
  for (double x : data)
    ll += m.log_density(x);
  return ll;
}

namespace {

// Weighted sums: W = sum w, sx = sum w x, slog = sum w log x.
Component gamma_mle_sums(double W, double sx, double slog, const Component* start)
{
  if (!(W > 0.0))
    throw FittingError("gamma component has zero weight");
  const double m = sx / W;
  const double s = std::log(m) - slog / W;
  if (!(s > 1e-12))
    return {kMaxShape, m / kMaxShape};
  // log(a) - digamma(a) = s
  double a = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  if (start && start->a > 0.0 && std::isfinite(start->a))
    a = start->a;
  for (int it = 0; it < 200; ++it) {
    const double f = std::log(a) - bm::digamma(a) - s;
    const double fp = 1.0 / a - bm::trigamma(a);
    double next = a - f / fp;
    if (!(next > 0.0))
      next = 0.5 * a;
    next = std::min(next, kMaxShape);
    const bool done = std::abs(next - a) <= 1e-13 * a;
    a = next;
    if (done)
      break;
  }
  return {a, m / a};
}

// l1 = sum w log x, l2 = sum w log(1 - x)
Component beta_mle_sums(double W, double l1, double l2, const Component& start)
{
  if (!(W > 0.0))
    throw FittingError("beta component has zero weight");
  l1 /= W;
  l2 /= W;
  auto objective = [&](double p, double q) {
    return (p - 1.0) * l1 + (q - 1.0) * l2 - lbeta(p, q);
  };
  double p = start.a, q = start.b;
  double obj = objective(p, q);
  for (int it = 0; it < 200; ++it) {
    const double dpq = bm::digamma(p + q), tpq = bm::trigamma(p + q);
    const double gp = l1 - bm::digamma(p) + dpq;
    const double gq = l2 - bm::digamma(q) + dpq;
    const double hpp = -bm::trigamma(p) + tpq, hqq = -bm::trigamma(q) + tpq, hpq = tpq;
    const double det = hpp * hqq - hpq * hpq;
    double sp, sq;
    if (det > 0.0 && hpp < 0.0) {
      sp = -(hqq * gp - hpq * gq) / det;
      sq = -(-hpq * gp + hpp * gq) / det;
    } else {
      sp = gp;
      sq = gq;
    }
    double t = 1.0;
    bool accepted = false, tiny = false;
    for (int k = 0; k < 60 && !accepted; ++k, t *= 0.5) {
      const double np = p + t * sp, nq = q + t * sq;
      if (!(np > 0.0 && nq > 0.0) || np > kMaxShape || nq > kMaxShape)
        continue;
      const double nobj = objective(np, nq);
      if (nobj >= obj) {
        tiny = std::abs(np - p) <= 1e-13 * p && std::abs(nq - q) <= 1e-13 * q;
        p = np;
        q = nq;
        obj = nobj;
        accepted = true;
      }
    }
    if (!accepted || tiny)
      break;
  }
  return {p, q};
}

} // namespace

Component gamma_weighted_mle(std::span<const double> x, std::span<const double> w,
                             const Component* start)
{
  double W = 0.0, sx = 0.0, slog = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    W += w[i];
    sx += w[i] * x[i];
    slog += w[i] * std::log(x[i]);
  }
  return gamma_mle_sums(W, sx, slog, start);
}

Component beta_weighted_mle(std::span<const double> x, std::span<const double> w,
                            const Component& start)
{
  double W = 0.0, l1 = 0.0, l2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    W += w[i];
    l1 += w[i] * std::log(x[i]);
    l2 += w[i] * std::log1p(-x[i]);
  }
  return beta_mle_sums(W, l1, l2, start);
}

EmResult fit_mixture_em(std::span<const double> data, MixtureFamily family,
                        const EmOptions& options, const MixtureModel* warm_start)
{
  if (data.size() < options.min_samples)
    throw FittingError("mixture fit needs at least " + std::to_string(options.min_samples) +
                       " samples, got " + std::to_string(data.size()));
  std::vector<double> x(data.begin(), data.end());
  for (double& v : x) {
    if (!std::isfinite(v))
      throw FittingError("mixture data contains non-finite values");
    if (family == MixtureFamily::gamma) {
      if (!(v > 0.0))
        throw FittingError("gamma mixture data must be strictly positive");
    } else {
      if (v < 0.0 || v > 1.0)
        throw FittingError("beta mixture data must lie in [0,1]");
      v = std::clamp(v, kBetaClamp, 1.0 - kBetaClamp);
    }
  }
  const std::size_t n = x.size();

  EmResult res;
  double mean, var;
  sample_moments(x, mean, var);
  const double scale = family == MixtureFamily::gamma ? mean * mean : mean * (1.0 - mean);
  if (!(var > 1e-12 * scale)) {
    const Component c = moments_component(family, mean, var);
    res.model = MixtureModel(family, c, c, 1.0);
    res.model.degenerate = true;
    res.degenerate = true;
    res.converged = true;
    res.warning = "zero-variance data; single concentrated component";
    res.ll_trace.push_back(mixture_log_likelihood(res.model, x));
    return res;
  }

  Component c1, c2;
  double lambda = 0.5;
  if (warm_start && warm_start->family() == family) {
    c1 = warm_start->comp1();
    c2 = warm_start->comp2();
    lambda = std::clamp(warm_start->lambda(), 0.05, 0.95);
  } else {
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t half = n / 2;
    double m1, v1, m2, v2;
    sample_moments(std::span<const double>(sorted).first(half), m1, v1);
    sample_moments(std::span<const double>(sorted).subspan(half), m2, v2);
    c1 = moments_component(family, m1, v1);
    c2 = moments_component(family, m2, v2);
  }

  // x is interior after the checks above, so the log-pdfs reduce to
  // linear forms in these per-sample terms.
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = family == MixtureFamily::gamma ? x[i] : std::log1p(-x[i]);
  }
  auto linear_form = [&](const Component& c, double& k1, double& k2, double& k0) {
    if (family == MixtureFamily::gamma) {
      k1 = c.a - 1.0;
      k2 = -1.0 / c.b;
      k0 = -c.a * std::log(c.b) - bm::lgamma(c.a);
    } else {
      k1 = c.a - 1.0;
      k2 = c.b - 1.0;
      k0 = -lbeta(c.a, c.b);
    }
  };

  std::vector<double> r(n), w1(n), w2(n);
  auto e_step = [&](double& ll) {
    ll = 0.0;
    double p1, q1, z1, p2, q2, z2;
    linear_form(c1, p1, q1, z1);
    linear_form(c2, p2, q2, z2);
    z1 += std::log(lambda);
    z2 += std::log1p(-lambda);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = z1 + p1 * lx[i] + q1 * ly[i];
      const double b = z2 + p2 * lx[i] + q2 * ly[i];
      const double t = log_add(a, b);
      ll += t;
      r[i] = std::exp(a - t);
      if (!std::isfinite(r[i]))
        r[i] = a >= b ? 1.0 : 0.0;
    }
  };

  double ll;
  e_step(ll);
  res.ll_trace.push_back(ll);
  for (int it = 1; it <= options.max_iter; ++it) {
    double s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w1[i] = r[i];
      w2[i] = 1.0 - r[i];
      s1 += r[i];
    }
    lambda = s1 / static_cast<double>(n);
    res.iterations = it;
    if (lambda < 1e-6 || lambda > 1.0 - 1e-6) {
      std::vector<double> ones(n, 1.0);
      Component& keep = lambda < 1e-6 ? c2 : c1;
      keep = family == MixtureFamily::gamma ? gamma_weighted_mle(x, ones, &keep)
                                            : beta_weighted_mle(x, ones, keep);
      lambda = lambda < 1e-6 ? 0.0 : 1.0;
      res.degenerate = true;
      res.warning = "mixture collapsed to a single component";
      break;
    }
    double W1 = 0.0, W2 = 0.0, a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      W1 += w1[i];
      W2 += w2[i];
      a1 += w1[i] * lx[i];
      a2 += w2[i] * lx[i];
      b1 += w1[i] * ly[i];
      b2 += w2[i] * ly[i];
    }
    if (family == MixtureFamily::gamma) {
      c1 = gamma_mle_sums(W1, b1, a1, &c1);
      c2 = gamma_mle_sums(W2, b2, a2, &c2);
    } else {
      c1 = beta_mle_sums(W1, a1, b1, c1);
      c2 = beta_mle_sums(W2, a2, b2, c2);
    }
    const double prev = ll;
    e_step(ll);
    res.ll_trace.push_back(ll);
    if (ll < prev - 1e-9 * (1.0 + std::abs(prev)))
      res.monotone = false;
    if (std::abs(ll - prev) < options.tol * std::abs(prev)) {
      res.converged = true;
      break;
    }
  }

  if (component_mean(family, c1) > component_mean(family, c2)) {
    std::swap(c1, c2);
    lambda = 1.0 - lambda;
  }
  res.model = MixtureModel(family, c1, c2, lambda);
  res.model.degenerate = res.degenerate;
  if (res.degenerate)
    res.ll_trace.push_back(mixture_log_likelihood(res.model, x));
  return res;
}

} // namespace vfvm
