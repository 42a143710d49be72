#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vfvm/descriptors.hpp"
#include "vfvm/joint.hpp"

namespace vfvm {

enum class ParticleClass { valuable, non_valuable, composite };

const char* to_string(ParticleClass c);

// Column layout of the descriptor vector: med, iqr, vol, elo, flat, sphe, rat.
inline constexpr int kCtDim = 6;
std::vector<ColumnSpec> ct_column_specs();
// Seven columns; rat is a beta mixture truncated to (epsilon, 1 - epsilon).
std::vector<ColumnSpec> composite_column_specs(double epsilon);

ParticleClass classify_ratio(double rat, double epsilon);

struct Partition {
  Columns v;  // 6 columns
  Columns nv; // 6 columns
  Columns c;  // 7 columns
  std::vector<std::size_t> rows_v, rows_nv, rows_c;
};

Partition partition_dataset(const Dataset& d, double epsilon = 0.01);

struct CompositeOptions {
  JointFitOptions joint;
  double epsilon = 0.01;
  double atom_width = 0.01;
  // quadrature for f_c,1..6 and the conditional median
  double integration_tol = 1e-8;
  double median_tol = 1e-6;
};

struct CompositeModel {
  JointModel f_v;
  JointModel f_nv;
  JointModel f_c;
  std::size_t n_v = 0;
  std::size_t n_nv = 0;
  std::size_t n_c = 0;
  double epsilon = 0.01;
  double atom_width = 0.01;

  std::size_t n() const noexcept { return n_v + n_nv + n_c; }
  void validate() const;
};

struct CompositeFitReport {
  std::vector<std::string> warnings;
};

// Sub-model of one class on its partition columns (6 for pure classes, 7
// for composite).
JointModel fit_class_model(ParticleClass cls, const Columns& cols, const CompositeOptions& options,
                           JointFitReport* report = nullptr);
JointModel refit_class_model(ParticleClass cls, const JointModel& base, const Columns& cols,
                             const CompositeOptions& options);

CompositeModel fit_composite(const Dataset& d, const CompositeOptions& options = {},
                             CompositeFitReport* report = nullptr);

// Keeps structures and copula families of `base`; parameters and counts
// are re-estimated on `d`.
CompositeModel refit_composite(const CompositeModel& base, const Dataset& d,
                               const CompositeOptions& options = {});

// Piecewise density in x = (x_1..x_6, x_7). Atoms: [0, atom_width] for
// non-valuable, (1 - atom_width, 1] for valuable; composite part on
// (epsilon, 1 - epsilon).
double composite_density(const CompositeModel& m, std::span<const double> x);

struct Prediction {
  double value = 0.0;
  ParticleClass cls = ParticleClass::composite;
  double conditional_median = 0.0; // composite class only
  bool out_of_support = false;
  // log of (n_class / n) * density for v, nv, c
  std::array<double, 3> log_weighted{};
};

// log f_c,1..6(x) by adaptive quadrature over x_7.
double composite_marginal_log_density(const CompositeModel& m, std::span<const double> x,
                                      double tol = 1e-8);

// Median of f_c,7|x.
double conditional_median(const CompositeModel& m, std::span<const double> x, double tol = 1e-6,
                          double integration_tol = 1e-8);

ParticleClass decide_class(double lv, double lnv, double lc);

Prediction predict_vfvm(const CompositeModel& m, std::span<const double> x,
                        const CompositeOptions& options = {});

// K-mineral generalization. f_c has d + K - 1 columns; its last K - 1
// columns hold the fractions of minerals 1..K-1.
struct MultiModel {
  std::vector<JointModel> minerals;
  std::vector<std::size_t> counts;
  JointModel f_c;
  std::size_t n_c = 0;
};

struct MultiOptions {
  int nodes = 40; // Gauss-Legendre nodes per composition coordinate
  // conditional median instead of mean (K = 2 only)
  bool use_median = false;
};

struct MultiPrediction {
  std::vector<double> composition;
  int dominant = -1; // mineral index of a unit-vector output
  bool out_of_support = false;
};

MultiPrediction predict_multi(const MultiModel& m, std::span<const double> x,
                              const MultiOptions& options = {});

} // namespace vfvm
