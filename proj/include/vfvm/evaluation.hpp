#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vfvm/composite.hpp"

namespace vfvm {

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

// aic = 2k - 2 ll, bic = k ln(n) - 2 ll
InformationCriteria information_criteria(double ll, std::size_t k, std::size_t n);

// Convention: 5 per mixture marginal (two shape pairs and lambda), 1 per
// non-independence pair copula, 1 for a non-independence Archimedean
// copula, and 2 for the class proportions of a composite model.
struct ParameterCount {
  std::size_t total = 0;
  std::vector<std::pair<std::string, std::size_t>> breakdown;
};

ParameterCount count_parameters(const RVineModel& m);
ParameterCount count_parameters(const ArchimedeanModel& m);
ParameterCount count_parameters(const JointModel& m);
ParameterCount count_parameters(const CompositeModel& m);

struct PredictionErrors {
  double mae = 0.0;
  double mse = 0.0;
};

PredictionErrors prediction_errors(std::span<const double> predictions,
                                   std::span<const double> truth);

struct ScoreReport {
  std::string model;          // e.g. "rvine", "archimedean"
  std::string subset = "all"; // "all" or "composite_only"
  double ll = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t k = 0;
  std::size_t n = 0;
  std::optional<double> mae;
  std::optional<double> mse;
  std::size_t excluded = 0; // LOO folds left out

  bool operator==(const ScoreReport&) const = default;
};

// Training scores: log-likelihood of the composite density over all rows,
// and of f_c over the composite rows.
std::pair<ScoreReport, ScoreReport> score_model(const CompositeModel& m, const Dataset& d,
                                                const std::string& label);

struct LooOptions {
  CompositeOptions composite;
  // warm-started parameter refit on the full-data structure and families
  bool fast = false;
  std::size_t parallelism = 1;
};

struct LooRow {
  std::size_t row = 0;
  std::uint64_t id = 0;
  double truth = 0.0;
  double prediction = 0.0;
  ParticleClass truth_class = ParticleClass::composite;
  ParticleClass predicted_class = ParticleClass::composite;
  bool excluded = false;
  std::string reason;
};

struct LooResult {
  std::vector<LooRow> rows;
  ScoreReport all;
  ScoreReport composite;
  std::size_t fits = 0;
  std::size_t excluded = 0;
};

// One refit per row on D minus that row. Only the sub-model of the held-out
// row's class depends on the fold; the other two are fitted once on their
// full partitions, which gives the same model a full refit would.
LooResult loo_cv(const Dataset& d, const LooOptions& options);

// Aligned text table with one column per model label plus a JSON document.
std::string render_report_text(const std::vector<ScoreReport>& scores);
std::string render_report_json(const std::vector<ScoreReport>& scores);
std::vector<ScoreReport> parse_report_json(const std::string& text);

// Per-row prediction errors for histogram plots.
std::string loo_errors_csv(const LooResult& r);

} // namespace vfvm
