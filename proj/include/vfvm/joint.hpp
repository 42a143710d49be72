#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vfvm/archimedean.hpp"
#include "vfvm/mixture.hpp"
#include "vfvm/vine.hpp"

namespace vfvm {

class Rng;

enum class Engine { rvine, archimedean };

const char* to_string(Engine e);
Engine engine_from_string(const std::string& s);

// Multivariate density with mixture marginals: either an R-vine or a single
// Archimedean copula.
struct JointModel {
  std::variant<RVineModel, ArchimedeanModel> model;

  Engine engine() const noexcept;
  int dim() const noexcept;
  const std::vector<MixtureModel>& marginals() const noexcept;
};

struct JointFitOptions {
  Engine engine = Engine::rvine;
  std::vector<CopulaFamily> families{CopulaFamily::frank, CopulaFamily::clayton,
                                     CopulaFamily::gumbel, CopulaFamily::joe};
  bool rank_pseudo_obs = false;
  std::size_t min_rows = 30;
  double copula_tol = 1e-6;
  EmOptions em;
};

struct ColumnSpec {
  MixtureFamily family = MixtureFamily::gamma;
  std::optional<Interval> truncation;
};

struct JointFitReport {
  std::vector<std::string> warnings;
};

// EM per column (then truncation, if any), followed by the copula fit.
std::vector<MixtureModel> fit_marginals(const Columns& data, const std::vector<ColumnSpec>& specs,
                                        const EmOptions& em,
                                        const std::vector<MixtureModel>* warm = nullptr,
                                        JointFitReport* report = nullptr);

JointModel fit_joint(const Columns& data, const std::vector<ColumnSpec>& specs,
                     const JointFitOptions& options, JointFitReport* report = nullptr);

// Structure and families kept; marginals and copula parameters re-estimated
// from warm starts.
JointModel refit_joint(const JointModel& base, const Columns& data,
                       const std::vector<ColumnSpec>& specs, const JointFitOptions& options);

double joint_log_density(const JointModel& m, std::span<const double> x);
double joint_log_likelihood(const JointModel& m, const Columns& data);
std::vector<std::vector<double>> joint_sample(const JointModel& m, std::size_t n, Rng& rng);

// log f(x_1..x_{d-1}, t) as a function of the last coordinate, with the
// prefix-only terms computed once.
class JointSlice {
public:
  JointSlice(const JointModel& m, std::span<const double> prefix);
  double operator()(double t);
  bool prefix_in_support() const noexcept { return prefix_log_ != -kSliceInf; }

private:
  static constexpr double kSliceInf = std::numeric_limits<double>::infinity();
  const JointModel& m_;
  std::vector<double> u_;
  double prefix_log_ = 0.0;
  double phi_sum_ = 0.0; // archimedean only
  double lphi_sum_ = 0.0;
};

} // namespace vfvm
