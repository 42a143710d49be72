#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vfvm/copula.hpp"
#include "vfvm/mixture.hpp"

namespace vfvm {

// Column-major data: cols[j][i] is observation i of variable j.
using Columns = std::vector<std::vector<double>>;

// Edge of tree T_level. Variables are 0-based. The copula couples
// F(e1 | cond) (first argument) with F(e2 | cond) (second argument).
// Children are variables on level 1 and edge indices of the previous tree
// otherwise.
struct VineEdge {
  int level = 1;
  int e1 = 0;
  int e2 = 1;
  std::vector<int> cond;
  int child_a = 0;
  int child_b = 1;
  PairCopula copula;
};

struct RVineStructure {
  int d = 0;
  // trees[t] holds the edges of T_(t+1)
  std::vector<std::vector<VineEdge>> trees;

  std::size_t edge_count() const;
};

struct StructureReport {
  bool ok = true;
  std::string violation;
};

StructureReport validate_structure(const RVineStructure& s);

// Fills conditioned and conditioning sets from the child links; throws
// StructuralError when the links do not describe a regular vine.
void derive_sets(RVineStructure& s);

// D-vine along the given variable order, all copulas independence.
RVineStructure d_vine_structure(const std::vector<int>& order);

struct RVineModel {
  RVineStructure structure;
  std::vector<MixtureModel> marginals;

  int dim() const noexcept { return structure.d; }
};

struct WeightedPair {
  int i;
  int j;
  double weight;
};

// Kruskal maximum spanning tree; ties go to the lexicographically smallest
// (i, j). Returned edges are sorted by (i, j).
std::vector<WeightedPair> max_spanning_tree(int nodes, std::vector<WeightedPair> candidates);

inline constexpr double kConditionalClamp = 1e-12;

struct VineFitOptions {
  PairFitOptions pair;
  // average ranks / (n + 1) instead of marginal CDFs on level 1
  bool rank_pseudo_obs = false;
  std::size_t min_rows = 30;
};

Columns pseudo_observations(const Columns& data, const std::vector<MixtureModel>& marginals,
                            bool ranks);

// Average ranks scaled by 1/(n+1).
std::vector<double> rank_transform(std::span<const double> x);

struct VineFitReport {
  std::size_t fallbacks = 0;
  std::vector<std::string> warnings;
};

RVineModel fit_sequential(const Columns& data, std::vector<MixtureModel> marginals,
                          const VineFitOptions& options = {}, VineFitReport* report = nullptr);

// Same structure and families as `base`, parameters re-estimated from the
// new data starting at the old values.
RVineModel refit_parameters(const RVineModel& base, const Columns& data,
                            std::vector<MixtureModel> marginals, const VineFitOptions& options = {});

// Copula part only, on uniform scale.
double vine_copula_log_density(const RVineStructure& s, std::span<const double> u);

// Marginal log densities plus pair-copula terms; -inf outside the support.
double vine_log_density(const RVineModel& m, std::span<const double> x);

double vine_log_likelihood(const RVineModel& m, const Columns& data);

class Rng;

// Uniform-scale draws (rows of length d).
std::vector<std::vector<double>> vine_sample_uniform(const RVineStructure& s, std::size_t n,
                                                     Rng& rng);

// Rows of length d on the data scale.
std::vector<std::vector<double>> vine_sample(const RVineModel& m, std::size_t n,
                                             std::uint64_t seed);
std::vector<std::vector<double>> vine_sample(const RVineModel& m, std::size_t n, Rng& rng);

// Variables in the order they are removed from the top tree.
std::vector<int> peel_order(const RVineStructure& s);

} // namespace vfvm
