#include "vfvm/joint.hpp"

#include <algorithm>
#include <cmath>

#include "vfvm/error.hpp"
#include "vfvm/random.hpp"

namespace vfvm {

const char* to_string(Engine e)
{
  return e == Engine::rvine ? "rvine" : "archimedean";
}

Engine engine_from_string(const std::string& s)
{
  if (s == "rvine")
    return Engine::rvine;
  if (s == "archimedean")
    return Engine::archimedean;
  throw ArgumentError("unknown engine '" + s + "' (expected rvine or archimedean)");
}

Engine JointModel::engine() const noexcept
{
  return std::holds_alternative<RVineModel>(model) ? Engine::rvine : Engine::archimedean;
}

int JointModel::dim() const noexcept
{
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

const std::vector<MixtureModel>& JointModel::marginals() const noexcept
{
  return std::visit([](const auto& m) -> const std::vector<MixtureModel>& { return m.marginals; },
                    model);
}

namespace {

VineFitOptions vine_options(const JointFitOptions& o)
{
  VineFitOptions v;
  v.pair.families = o.families;
  v.pair.tol = o.copula_tol;
  v.rank_pseudo_obs = o.rank_pseudo_obs;
  v.min_rows = o.min_rows;
  return v;
}

ArchimedeanFitOptions archimedean_options(const JointFitOptions& o)
{
  ArchimedeanFitOptions a;
  a.families = o.families;
  a.tol = o.copula_tol;
  a.rank_pseudo_obs = o.rank_pseudo_obs;
  a.min_rows = o.min_rows;
  return a;
}

void check_columns(const Columns& data, const std::vector<ColumnSpec>& specs)
{
  if (data.size() != specs.size() || data.empty())
    throw ArgumentError("column count does not match column specification");
}

} // namespace

std::vector<MixtureModel> fit_marginals(const Columns& data, const std::vector<ColumnSpec>& specs,
                                        const EmOptions& em,
                                        const std::vector<MixtureModel>* warm,
                                        JointFitReport* report)
{
  check_columns(data, specs);
  std::vector<MixtureModel> out;
  out.reserve(data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    const MixtureModel* start = warm ? &(*warm)[j] : nullptr;
    EmResult r = fit_mixture_em(data[j], specs[j].family, em, start);
    if (report && !r.warning.empty())
      report->warnings.push_back("column " + std::to_string(j) + ": " + r.warning);
    if (specs[j].truncation)
      r.model.truncate(specs[j].truncation->lo, specs[j].truncation->hi);
    out.push_back(std::move(r.model));
  }
  return out;
}

JointModel fit_joint(const Columns& data, const std::vector<ColumnSpec>& specs,
                     const JointFitOptions& options, JointFitReport* report)
{
  check_columns(data, specs);
  if (data[0].size() < options.min_rows)
    throw FittingError("need at least " + std::to_string(options.min_rows) + " rows, got " +
                       std::to_string(data[0].size()));
  auto marginals = fit_marginals(data, specs, options.em, nullptr, report);
  if (options.engine == Engine::archimedean)
    return {fit_archimedean(data, std::move(marginals), archimedean_options(options))};
  VineFitReport vr;
  RVineModel m = fit_sequential(data, std::move(marginals), vine_options(options), &vr);
  if (report)
    report->warnings.insert(report->warnings.end(), vr.warnings.begin(), vr.warnings.end());
  return {std::move(m)};
}

JointModel refit_joint(const JointModel& base, const Columns& data,
                       const std::vector<ColumnSpec>& specs, const JointFitOptions& options)
{
  check_columns(data, specs);
  std::vector<MixtureModel> warm = base.marginals();
  for (auto& m : warm)
    m.clear_truncation();
  auto marginals = fit_marginals(data, specs, options.em, &warm);
  if (const auto* a = std::get_if<ArchimedeanModel>(&base.model))
    return {refit_archimedean(*a, data, std::move(marginals), archimedean_options(options))};
  return {refit_parameters(std::get<RVineModel>(base.model), data, std::move(marginals),
                           vine_options(options))};
}

double joint_log_density(const JointModel& m, std::span<const double> x)
{
  if (const auto* v = std::get_if<RVineModel>(&m.model))
    return vine_log_density(*v, x);
  return archimedean_log_density(std::get<ArchimedeanModel>(m.model), x);
}

double joint_log_likelihood(const JointModel& m, const Columns& data)
{
  if (const auto* v = std::get_if<RVineModel>(&m.model))
    return vine_log_likelihood(*v, data);
  return archimedean_log_likelihood(std::get<ArchimedeanModel>(m.model), data);
}

std::vector<std::vector<double>> joint_sample(const JointModel& m, std::size_t n, Rng& rng)
{
  if (const auto* v = std::get_if<RVineModel>(&m.model))
    return vine_sample(*v, n, rng);
  return archimedean_sample(std::get<ArchimedeanModel>(m.model), n, rng);
}

JointSlice::JointSlice(const JointModel& m, std::span<const double> prefix) : m_(m)
{
  const auto& marg = m.marginals();
  if (prefix.size() + 1 != marg.size())
    throw ArgumentError("slice prefix must have d - 1 values");
  u_.resize(marg.size());
  const auto* a = std::get_if<ArchimedeanModel>(&m.model);
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const double l = marg[i].log_density(prefix[i]);
    if (l == -kSliceInf || std::isnan(l)) {
      prefix_log_ = -kSliceInf;
      return;
    }
    prefix_log_ += l;
    u_[i] = std::clamp(marg[i].cdf(prefix[i]), kConditionalClamp, 1.0 - kConditionalClamp);
    if (a && a->family != CopulaFamily::independence) {
      const double uc = std::clamp(u_[i], kUnitClamp, 1.0 - kUnitClamp);
      phi_sum_ += generator_inverse(a->family, a->theta, uc);
      lphi_sum_ += log_neg_generator_derivative(a->family, a->theta, uc);
    }
  }
}

double JointSlice::operator()(double t)
{
  if (prefix_log_ == -kSliceInf)
    return -kSliceInf;
  const MixtureModel& last = m_.marginals().back();
  const double l = last.log_density(t);
  if (l == -kSliceInf || std::isnan(l))
    return -kSliceInf;
  const double ut = std::clamp(last.cdf(t), kConditionalClamp, 1.0 - kConditionalClamp);
  double lc;
  if (const auto* v = std::get_if<RVineModel>(&m_.model)) {
    u_.back() = ut;
    lc = vine_copula_log_density(v->structure, u_);
  } else {
    const auto& a = std::get<ArchimedeanModel>(m_.model);
    if (a.family == CopulaFamily::independence) {
      lc = 0.0;
    } else {
      const double uc = std::clamp(ut, kUnitClamp, 1.0 - kUnitClamp);
      const double s = phi_sum_ + generator_inverse(a.family, a.theta, uc);
      const int d = a.dim();
      const double top = std::abs(generator_derivatives(a.family, a.theta, s, d)[d]);
      lc = top > 0.0 && std::isfinite(top)
             ? std::log(top) + lphi_sum_ + log_neg_generator_derivative(a.family, a.theta, uc)
             : -kSliceInf;
    }
  }
  const double r = prefix_log_ + l + lc;
  return std::isnan(r) ? -kSliceInf : r;
}

} // namespace vfvm
