#include "vfvm/composite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include "vfvm/error.hpp"

namespace vfvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_ratio(std::size_t k, std::size_t n)
{
  return k == 0 ? -kInf : std::log(static_cast<double>(k) / static_cast<double>(n));
}

double finite_or_neg_inf(double v) { return std::isnan(v) ? -kInf : v; }

// Cumulative integrals of exp(log f(x, t) - shift) over equal panels of
// the last coordinate's support. The shift is the maximum over a grid so
// the integrand is O(1).
struct SliceCdf {
  static constexpr int kGrid = 64;
  static constexpr int kPanels = 16;

  JointSlice& f;
  double lo = 0.0, hi = 1.0, shift = -kInf, tol = 1e-8;
  std::vector<double> edges, cum;

  SliceCdf(JointSlice& slice, Interval support, double itol)
    : f(slice), lo(support.lo), hi(support.hi), tol(itol)
  {
    for (int i = 0; i < kGrid; ++i)
      shift = std::max(shift, f(lo + (hi - lo) * (i + 0.5) / kGrid));
    if (empty())
      return;
    edges.resize(kPanels + 1);
    cum.assign(kPanels + 1, 0.0);
    for (int k = 0; k <= kPanels; ++k)
      edges[k] = k == kPanels ? hi : lo + (hi - lo) * k / kPanels;
    for (int k = 0; k < kPanels; ++k)
      cum[k + 1] = cum[k] + integrate(edges[k], edges[k + 1]);
  }

  bool empty() const { return !(shift > -kInf); }
  double total() const { return empty() ? 0.0 : cum.back(); }
  double log_total() const { return total() > 0.0 ? shift + std::log(total()) : -kInf; }

  double integrate(double a, double b, double weight_power = 0.0) const
  {
    if (b <= a)
      return 0.0;
    auto g = [&](double t) {
      const double e = std::exp(f(t) - shift);
      return weight_power == 0.0 ? e : t * e;
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, a, b, 15, tol);
  }

  double mean() const
  {
    double s = 0.0;
    for (int k = 0; k < kPanels; ++k)
      s += integrate(edges[k], edges[k + 1], 1.0);
    return s / total();
  }

  // Bisection on the normalized CDF.
  double median(double btol) const
  {
    const double target = 0.5 * total();
    int k = 0;
    while (k + 1 < kPanels && cum[k + 1] < target)
      ++k;
    double a = edges[k], b = edges[k + 1];
    while (b - a > btol) {
      const double mid = 0.5 * (a + b);
      if (cum[k] + integrate(edges[k], mid) < target)
        a = mid;
      else
        b = mid;
    }
    return 0.5 * (a + b);
  }
};

Interval last_support(const JointModel& m)
{
  const Interval s = m.marginals().back().support();
  return {std::max(0.0, s.lo), std::min(1.0, s.hi)};
}

void check_epsilon(double eps)
{
  if (!(eps > 0.0 && eps < 0.5))
    throw ArgumentError("epsilon must lie in (0, 0.5)");
}

void require_rows(const Columns& c, std::size_t min_rows, const char* name)
{
  const std::size_t n = c.empty() ? 0 : c[0].size();
  if (n < min_rows)
    throw FittingError(std::string(name) + " partition has " + std::to_string(n) +
                       " rows; at least " + std::to_string(min_rows) + " required");
}

} // namespace

const char* to_string(ParticleClass c)
{
  switch (c) {
  case ParticleClass::valuable: return "valuable";
  case ParticleClass::non_valuable: return "non_valuable";
  case ParticleClass::composite: return "composite";
  }
  return "composite";
}

std::vector<ColumnSpec> ct_column_specs()
{
  std::vector<ColumnSpec> s(kCtDim);
  for (int j = 3; j < kCtDim; ++j)
    s[static_cast<std::size_t>(j)].family = MixtureFamily::beta;
  return s;
}

std::vector<ColumnSpec> composite_column_specs(double epsilon)
{
  auto s = ct_column_specs();
  s.push_back({MixtureFamily::beta, Interval{epsilon, 1.0 - epsilon}});
  return s;
}

ParticleClass classify_ratio(double rat, double epsilon)
{
  if (rat >= 1.0 - epsilon)
    return ParticleClass::valuable;
  if (rat <= epsilon)
    return ParticleClass::non_valuable;
  return ParticleClass::composite;
}

Partition partition_dataset(const Dataset& d, double epsilon)
{
  check_epsilon(epsilon);
  Partition p;
  p.v.assign(kCtDim, {});
  p.nv.assign(kCtDim, {});
  p.c.assign(kCtDim + 1, {});
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto& r = d.rows[i];
    if (!r.d.rat)
      throw ArgumentError("row " + std::to_string(i) + " (id " + std::to_string(r.id) +
                          ") has no mineral ratio");
    const auto x = r.d.ct_vector();
    const ParticleClass cls = classify_ratio(*r.d.rat, epsilon);
    Columns& cols = cls == ParticleClass::valuable       ? p.v
                    : cls == ParticleClass::non_valuable ? p.nv
                                                         : p.c;
    (cls == ParticleClass::valuable       ? p.rows_v
     : cls == ParticleClass::non_valuable ? p.rows_nv
                                          : p.rows_c)
      .push_back(i);
    for (int j = 0; j < kCtDim; ++j)
      cols[static_cast<std::size_t>(j)].push_back(x[static_cast<std::size_t>(j)]);
    if (cls == ParticleClass::composite)
      cols[kCtDim].push_back(*r.d.rat);
  }
  return p;
}

void CompositeModel::validate() const
{
  check_epsilon(epsilon);
  if (!(atom_width > 0.0 && atom_width < 0.5))
    throw ArgumentError("atom width must lie in (0, 0.5)");
  if (n() == 0)
    throw ArgumentError("composite model has no particles");
  if (f_v.dim() != kCtDim || f_nv.dim() != kCtDim || f_c.dim() != kCtDim + 1)
    throw StructuralError("composite model sub-densities have wrong dimensions");
}

namespace {

const char* class_label(ParticleClass c)
{
  switch (c) {
  case ParticleClass::valuable: return "valuable";
  case ParticleClass::non_valuable: return "non-valuable";
  case ParticleClass::composite: return "composite";
  }
  return "composite";
}

std::vector<ColumnSpec> class_specs(ParticleClass cls, double epsilon)
{
  return cls == ParticleClass::composite ? composite_column_specs(epsilon) : ct_column_specs();
}

} // namespace

JointModel fit_class_model(ParticleClass cls, const Columns& cols, const CompositeOptions& options,
                           JointFitReport* report)
{
  require_rows(cols, options.joint.min_rows, class_label(cls));
  return fit_joint(cols, class_specs(cls, options.epsilon), options.joint, report);
}

JointModel refit_class_model(ParticleClass cls, const JointModel& base, const Columns& cols,
                             const CompositeOptions& options)
{
  require_rows(cols, options.joint.min_rows, class_label(cls));
  return refit_joint(base, cols, class_specs(cls, options.epsilon), options.joint);
}

CompositeModel fit_composite(const Dataset& d, const CompositeOptions& options,
                             CompositeFitReport* report)
{
  const Partition p = partition_dataset(d, options.epsilon);
  const std::size_t min_rows = options.joint.min_rows;
  require_rows(p.v, min_rows, "valuable");
  require_rows(p.nv, min_rows, "non-valuable");
  require_rows(p.c, min_rows, "composite");

  CompositeModel m;
  m.epsilon = options.epsilon;
  m.atom_width = options.atom_width;
  JointFitReport rv, rnv, rc;
  m.f_v = fit_class_model(ParticleClass::valuable, p.v, options, &rv);
  m.f_nv = fit_class_model(ParticleClass::non_valuable, p.nv, options, &rnv);
  m.f_c = fit_class_model(ParticleClass::composite, p.c, options, &rc);
  m.n_v = p.rows_v.size();
  m.n_nv = p.rows_nv.size();
  m.n_c = p.rows_c.size();
  if (report) {
    for (const auto& w : rv.warnings)
      report->warnings.push_back("valuable: " + w);
    for (const auto& w : rnv.warnings)
      report->warnings.push_back("non-valuable: " + w);
    for (const auto& w : rc.warnings)
      report->warnings.push_back("composite: " + w);
  }
  return m;
}

CompositeModel refit_composite(const CompositeModel& base, const Dataset& d,
                               const CompositeOptions& options)
{
  CompositeOptions o = options;
  o.epsilon = base.epsilon;
  const Partition p = partition_dataset(d, base.epsilon);
  require_rows(p.v, o.joint.min_rows, "valuable");
  require_rows(p.nv, o.joint.min_rows, "non-valuable");
  require_rows(p.c, o.joint.min_rows, "composite");

  CompositeModel m = base;
  m.f_v = refit_class_model(ParticleClass::valuable, base.f_v, p.v, o);
  m.f_nv = refit_class_model(ParticleClass::non_valuable, base.f_nv, p.nv, o);
  m.f_c = refit_class_model(ParticleClass::composite, base.f_c, p.c, o);
  m.n_v = p.rows_v.size();
  m.n_nv = p.rows_nv.size();
  m.n_c = p.rows_c.size();
  return m;
}

double composite_density(const CompositeModel& m, std::span<const double> x)
{
  if (x.size() != kCtDim + 1)
    throw ArgumentError("composite_density expects 7 values");
  const double t = x[kCtDim];
  if (!(t >= 0.0 && t <= 1.0) || m.n() == 0)
    return 0.0;
  const auto ct = x.first(kCtDim);
  const double n = static_cast<double>(m.n());
  double f = 0.0;
  if (t <= m.atom_width && m.n_nv > 0)
    f += static_cast<double>(m.n_nv) / n / m.atom_width *
         std::exp(finite_or_neg_inf(joint_log_density(m.f_nv, ct)));
  if (t > 1.0 - m.atom_width && m.n_v > 0)
    f += static_cast<double>(m.n_v) / n / m.atom_width *
         std::exp(finite_or_neg_inf(joint_log_density(m.f_v, ct)));
  if (t > m.epsilon && t <= 1.0 - m.epsilon && m.n_c > 0)
    f += static_cast<double>(m.n_c) / n * std::exp(finite_or_neg_inf(joint_log_density(m.f_c, x)));
  return f;
}

double composite_marginal_log_density(const CompositeModel& m, std::span<const double> x,
                                      double tol)
{
  if (x.size() != kCtDim)
    throw ArgumentError("expected 6 CT-based values");
  JointSlice s(m.f_c, x);
  return SliceCdf(s, last_support(m.f_c), tol).log_total();
}

double conditional_median(const CompositeModel& m, std::span<const double> x, double tol,
                          double integration_tol)
{
  if (x.size() != kCtDim)
    throw ArgumentError("expected 6 CT-based values");
  JointSlice s(m.f_c, x);
  const SliceCdf cdf(s, last_support(m.f_c), integration_tol);
  if (!(cdf.total() > 0.0))
    throw DataError("conditional density vanishes at this point");
  return cdf.median(tol);
}

ParticleClass decide_class(double lv, double lnv, double lc)
{
  lv = finite_or_neg_inf(lv);
  lnv = finite_or_neg_inf(lnv);
  lc = finite_or_neg_inf(lc);
  if (lv >= lc && lv >= lnv)
    return ParticleClass::valuable;
  if (lnv > lc && lnv > lv)
    return ParticleClass::non_valuable;
  return ParticleClass::composite;
}

Prediction predict_vfvm(const CompositeModel& m, std::span<const double> x,
                        const CompositeOptions& options)
{
  if (x.size() != kCtDim)
    throw ArgumentError("predict_vfvm expects 6 CT-based values");
  for (double v : x)
    if (!std::isfinite(v))
      throw ArgumentError("predict_vfvm: non-finite input");
  const std::size_t n = m.n();
  Prediction p;
  p.log_weighted[0] = m.n_v ? log_ratio(m.n_v, n) + finite_or_neg_inf(joint_log_density(m.f_v, x))
                            : -kInf;
  p.log_weighted[1] =
    m.n_nv ? log_ratio(m.n_nv, n) + finite_or_neg_inf(joint_log_density(m.f_nv, x)) : -kInf;
  std::optional<JointSlice> slice;
  std::optional<SliceCdf> cdf;
  if (m.n_c) {
    slice.emplace(m.f_c, x);
    cdf.emplace(*slice, last_support(m.f_c), options.integration_tol);
  }
  p.log_weighted[2] = m.n_c ? log_ratio(m.n_c, n) + cdf->log_total() : -kInf;
  if (std::all_of(p.log_weighted.begin(), p.log_weighted.end(),
                  [](double v) { return v == -kInf; })) {
    p.out_of_support = true;
    p.value = std::numeric_limits<double>::quiet_NaN();
    return p;
  }
  p.cls = decide_class(p.log_weighted[0], p.log_weighted[1], p.log_weighted[2]);
  switch (p.cls) {
  case ParticleClass::valuable: p.value = 1.0; break;
  case ParticleClass::non_valuable: p.value = 0.0; break;
  case ParticleClass::composite:
    p.conditional_median = cdf->median(options.median_tol);
    p.value = p.conditional_median;
    break;
  }
  return p;
}

namespace {

struct GaussLegendre {
  std::vector<double> x, w; // on [0, 1]

  explicit GaussLegendre(int n)
  {
    const auto zeros = boost::math::legendre_p_zeros<double>(n);
    for (double z : zeros) {
      const double d = boost::math::legendre_p_prime<double>(n, z);
      const double wt = 1.0 / ((1.0 - z * z) * d * d); // 2/(...) halved for [0, 1]
      x.push_back(0.5 * (1.0 + z));
      w.push_back(wt);
      if (z != 0.0) {
        x.push_back(0.5 * (1.0 - z));
        w.push_back(wt);
      }
    }
  }
};

} // namespace

MultiPrediction predict_multi(const MultiModel& m, std::span<const double> x,
                              const MultiOptions& options)
{
  const std::size_t K = m.minerals.size();
  if (K < 2 || m.counts.size() != K)
    throw ArgumentError("predict_multi needs K >= 2 mineral densities with matching counts");
  const std::size_t d = x.size();
  for (const auto& f : m.minerals)
    if (static_cast<std::size_t>(f.dim()) != d)
      throw ArgumentError("predict_multi: mineral density dimension differs from input");
  if (m.n_c > 0 && static_cast<std::size_t>(m.f_c.dim()) != d + K - 1)
    throw ArgumentError("predict_multi: composite density must have d + K - 1 columns");
  if (options.use_median && K != 2)
    throw ArgumentError("predict_multi: median output is defined for K = 2 only");
  if (options.nodes < 2)
    throw ArgumentError("predict_multi: at least 2 quadrature nodes required");

  std::size_t n = m.n_c;
  for (auto c : m.counts)
    n += c;
  std::vector<double> lw(K);
  for (std::size_t i = 0; i < K; ++i)
    lw[i] = m.counts[i] ? log_ratio(m.counts[i], n) +
                            finite_or_neg_inf(joint_log_density(m.minerals[i], x))
                        : -kInf;

  // Composite part: normalizer and first moments of the composition block.
  const std::size_t q = K - 1;
  double lc = -kInf;
  std::vector<double> mean(q, std::numeric_limits<double>::quiet_NaN());
  double median = std::numeric_limits<double>::quiet_NaN();
  if (m.n_c > 0 && q == 1) {
    JointSlice s(m.f_c, x);
    const SliceCdf cdf(s, last_support(m.f_c), 1e-8);
    if (cdf.total() > 0.0) {
      lc = log_ratio(m.n_c, n) + cdf.log_total();
      mean[0] = cdf.mean();
      if (options.use_median)
        median = cdf.median(1e-6);
    }
  } else if (m.n_c > 0) {
    const GaussLegendre gl(options.nodes);
    const std::size_t nn = gl.x.size();
    std::vector<double> buf(x.begin(), x.end());
    buf.resize(d + q);
    std::vector<std::size_t> idx(q, 0);
    std::vector<double> logs, weights;
    std::vector<std::vector<double>> comps;
    for (;;) {
      // stick-breaking map from the unit cube onto the simplex
      double rest = 1.0, jac = 1.0;
      for (std::size_t j = 0; j < q; ++j) {
        const double s = gl.x[idx[j]];
        buf[d + j] = rest * s;
        jac *= gl.w[idx[j]] * rest;
        rest *= 1.0 - s;
      }
      logs.push_back(finite_or_neg_inf(joint_log_density(m.f_c, buf)));
      weights.push_back(jac);
      comps.emplace_back(buf.begin() + static_cast<std::ptrdiff_t>(d), buf.end());
      std::size_t j = 0;
      while (j < q && ++idx[j] == nn)
        idx[j++] = 0;
      if (j == q)
        break;
    }
    const double shift = *std::max_element(logs.begin(), logs.end());
    if (shift > -kInf) {
      double I = 0.0;
      std::vector<double> mom(q, 0.0);
      for (std::size_t k = 0; k < logs.size(); ++k) {
        const double e = weights[k] * std::exp(logs[k] - shift);
        I += e;
        for (std::size_t j = 0; j < q; ++j)
          mom[j] += e * comps[k][j];
      }
      if (I > 0.0) {
        lc = log_ratio(m.n_c, n) + shift + std::log(I);
        for (std::size_t j = 0; j < q; ++j)
          mean[j] = mom[j] / I;
      }
    }
  }

  MultiPrediction out;
  out.composition.assign(K, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    bool dominant = lw[i] >= lc && lw[i] > -kInf;
    for (std::size_t j = 0; j < K && dominant; ++j)
      if (j != i && !(lw[i] > lw[j]))
        dominant = false;
    if (dominant) {
      out.composition[i] = 1.0;
      out.dominant = static_cast<int>(i);
      return out;
    }
  }
  if (lc == -kInf) {
    out.out_of_support = true;
    out.composition.assign(K, std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < q; ++j) {
    out.composition[j] = std::clamp(options.use_median ? median : mean[j], 0.0, 1.0);
    sum += out.composition[j];
  }
  if (sum > 1.0) {
    for (std::size_t j = 0; j < q; ++j)
      out.composition[j] /= sum;
    sum = 1.0;
  }
  out.composition[q] = std::max(0.0, 1.0 - sum);
  return out;
}

} // namespace vfvm
