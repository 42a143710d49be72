#include "vfvm/vine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "vfvm/random.hpp"

namespace vfvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_cond(double x) { return std::clamp(x, kConditionalClamp, 1.0 - kConditionalClamp); }

std::vector<int> all_vars(const VineEdge& e)
{
  std::vector<int> v = e.cond;
  v.push_back(e.e1);
  v.push_back(e.e2);
  std::sort(v.begin(), v.end());
  return v;
}

struct Uf {
  std::vector<int> p;
  explicit Uf(int n)
    : p(static_cast<std::size_t>(n))
  {
    std::iota(p.begin(), p.end(), 0);
  }
  int find(int x)
  {
    while (p[x] != x) {
      p[x] = p[p[x]];
      x = p[x];
    }
    return x;
  }
  bool unite(int a, int b)
  {
    a = find(a);
    b = find(b);
    if (a == b)
      return false;
    p[b] = a;
    return true;
  }
};

int shared_nodes(const VineEdge& a, const VineEdge& b)
{
  int n = 0;
  for (int x : {a.child_a, a.child_b})
    if (x == b.child_a || x == b.child_b)
      ++n;
  return n;
}

// Conditioned and conditioning sets of an edge joining nodes a, b of the
// previous tree.
bool sets_from_children(const VineEdge& a, const VineEdge& b, int& e1, int& e2,
                        std::vector<int>& cond)
{
  const auto ua = all_vars(a), ub = all_vars(b);
  cond.clear();
  std::set_intersection(ua.begin(), ua.end(), ub.begin(), ub.end(), std::back_inserter(cond));
  std::vector<int> o;
  std::set_symmetric_difference(ua.begin(), ua.end(), ub.begin(), ub.end(),
                                std::back_inserter(o));
  if (o.size() != 2)
    return false;
  e1 = o[0];
  e2 = o[1];
  return true;
}

// Per-edge conditional outputs: [0] = F(e1 | cond, e2), [1] = F(e2 | cond, e1).
using Outputs = std::vector<std::vector<std::array<double, 2>>>;

double input_for(const RVineStructure& s, const Outputs& out, std::span<const double> u,
                 std::size_t t, const VineEdge& e, int var)
{
  if (t == 0)
    return u[static_cast<std::size_t>(var)];
  for (int c : {e.child_a, e.child_b}) {
    const VineEdge& ch = s.trees[t - 1][static_cast<std::size_t>(c)];
    if (ch.e1 == var)
      return out[t - 1][static_cast<std::size_t>(c)][0];
    if (ch.e2 == var)
      return out[t - 1][static_cast<std::size_t>(c)][1];
  }
  throw StructuralError("vine edge child does not carry its conditioned variable");
}

// Columns of conditional pseudo-observations for one vine level.
struct LevelData {
  // per node: e1-output column and e2-output column (level 0 uses [0] only)
  std::vector<std::array<std::vector<double>, 2>> cols;
};

const std::vector<double>& level_input(const RVineStructure& s, const LevelData& prev,
                                       std::size_t t, int node, int var)
{
  if (t == 0)
    return prev.cols[static_cast<std::size_t>(node)][0];
  const VineEdge& ch = s.trees[t - 1][static_cast<std::size_t>(node)];
  if (ch.e1 == var)
    return prev.cols[static_cast<std::size_t>(node)][0];
  if (ch.e2 == var)
    return prev.cols[static_cast<std::size_t>(node)][1];
  throw StructuralError("vine node does not carry the requested variable");
}

int child_for(const RVineStructure& s, std::size_t t, const VineEdge& e, int var)
{
  if (t == 0)
    return var;
  const auto& a = s.trees[t - 1][static_cast<std::size_t>(e.child_a)];
  return (a.e1 == var || a.e2 == var) ? e.child_a : e.child_b;
}

void edge_outputs(const PairCopula& c, const std::vector<double>& a, const std::vector<double>& b,
                  std::array<std::vector<double>, 2>& out)
{
  out[0].resize(a.size());
  out[1].resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[0][i] = clamp_cond(pair_h(c, a[i], b[i]));
    out[1][i] = clamp_cond(pair_h1(c, a[i], b[i]));
  }
}

void check_columns(const Columns& data, std::size_t d, std::size_t min_rows)
{
  if (data.size() != d)
    throw ArgumentError("column count does not match the number of marginals");
  if (d == 0)
    throw ArgumentError("vine needs at least one variable");
  const std::size_t n = data[0].size();
  for (const auto& c : data)
    if (c.size() != n)
      throw ArgumentError("columns differ in length");
  if (n < min_rows)
    throw FittingError("vine fit needs at least " + std::to_string(min_rows) + " rows, got " +
                       std::to_string(n));
}

} // namespace

std::size_t RVineStructure::edge_count() const
{
  std::size_t n = 0;
  for (const auto& t : trees)
    n += t.size();
  return n;
}

void derive_sets(RVineStructure& s)
{
  for (std::size_t t = 0; t < s.trees.size(); ++t)
    for (auto& e : s.trees[t]) {
      e.level = static_cast<int>(t) + 1;
      if (t == 0) {
        e.e1 = std::min(e.child_a, e.child_b);
        e.e2 = std::max(e.child_a, e.child_b);
        e.cond.clear();
        continue;
      }
      const auto& prev = s.trees[t - 1];
      if (e.child_a < 0 || e.child_b < 0 || static_cast<std::size_t>(e.child_a) >= prev.size() ||
          static_cast<std::size_t>(e.child_b) >= prev.size())
        throw StructuralError("vine edge child index out of range");
      if (!sets_from_children(prev[static_cast<std::size_t>(e.child_a)],
                              prev[static_cast<std::size_t>(e.child_b)], e.e1, e.e2, e.cond))
        throw StructuralError("vine edge children do not yield a two-element conditioned set");
    }
}

StructureReport validate_structure(const RVineStructure& s)
{
  auto fail = [](std::string msg) { return StructureReport{false, std::move(msg)}; };
  const int d = s.d;
  if (d < 1)
    return fail("dimension must be >= 1");
  if (s.trees.size() != static_cast<std::size_t>(d - 1))
    return fail("expected " + std::to_string(d - 1) + " trees, found " +
                std::to_string(s.trees.size()));
  std::set<std::pair<int, int>> pairs;
  for (std::size_t t = 0; t < s.trees.size(); ++t) {
    const auto& tree = s.trees[t];
    const std::string where = "tree " + std::to_string(t + 1);
    const std::size_t nodes = t == 0 ? static_cast<std::size_t>(d) : s.trees[t - 1].size();
    if (tree.size() + 1 != nodes)
      return fail(where + ": expected " + std::to_string(nodes - 1) + " edges, found " +
                  std::to_string(tree.size()));
    Uf uf(static_cast<int>(nodes));
    for (std::size_t k = 0; k < tree.size(); ++k) {
      const auto& e = tree[k];
      const std::string edge = where + " edge " + std::to_string(k);
      if (e.level != static_cast<int>(t) + 1)
        return fail(edge + ": level field does not match its tree");
      if (e.child_a < 0 || e.child_b < 0 || static_cast<std::size_t>(e.child_a) >= nodes ||
          static_cast<std::size_t>(e.child_b) >= nodes || e.child_a == e.child_b)
        return fail(edge + ": invalid node references");
      if (!uf.unite(e.child_a, e.child_b))
        return fail(edge + ": closes a cycle (not a tree)");
      int e1, e2;
      std::vector<int> cond;
      if (t == 0) {
        e1 = std::min(e.child_a, e.child_b);
        e2 = std::max(e.child_a, e.child_b);
      } else {
        const auto& a = s.trees[t - 1][static_cast<std::size_t>(e.child_a)];
        const auto& b = s.trees[t - 1][static_cast<std::size_t>(e.child_b)];
        if (shared_nodes(a, b) != 1)
          return fail(edge + ": proximity condition violated (|a ∩ b| != 1)");
        if (!sets_from_children(a, b, e1, e2, cond))
          return fail(edge + ": conditioned set is not a pair");
      }
      if (e.e1 != e1 || e.e2 != e2 || e.cond != cond)
        return fail(edge + ": stored conditioned/conditioning sets disagree with its children");
      if (!pairs.insert({e1, e2}).second)
        return fail(edge + ": pair {" + std::to_string(e1) + "," + std::to_string(e2) +
                    "} is conditioned on more than once");
      try {
        validate(e.copula);
      } catch (const Error& ex) {
        return fail(edge + ": " + ex.what());
      }
    }
  }
  return {};
}

RVineStructure d_vine_structure(const std::vector<int>& order)
{
  RVineStructure s;
  s.d = static_cast<int>(order.size());
  std::vector<int> check = order;
  std::sort(check.begin(), check.end());
  for (int i = 0; i < s.d; ++i)
    if (check[static_cast<std::size_t>(i)] != i)
      throw ArgumentError("d-vine order must be a permutation of 0..d-1");
  for (int t = 0; t + 1 < s.d; ++t) {
    std::vector<VineEdge> tree;
    for (int k = 0; k + t + 1 < s.d; ++k) {
      VineEdge e;
      if (t == 0) {
        e.child_a = order[static_cast<std::size_t>(k)];
        e.child_b = order[static_cast<std::size_t>(k + 1)];
      } else {
        e.child_a = k;
        e.child_b = k + 1;
      }
      tree.push_back(e);
    }
    s.trees.push_back(std::move(tree));
  }
  derive_sets(s);
  return s;
}

std::vector<WeightedPair> max_spanning_tree(int nodes, std::vector<WeightedPair> candidates)
{
  for (auto& c : candidates)
    if (c.i > c.j)
      std::swap(c.i, c.j);
  std::sort(candidates.begin(), candidates.end(), [](const WeightedPair& a, const WeightedPair& b) {
    if (a.weight != b.weight)
      return a.weight > b.weight;
    return std::pair(a.i, a.j) < std::pair(b.i, b.j);
  });
  Uf uf(nodes);
  std::vector<WeightedPair> tree;
  for (const auto& c : candidates) {
    if (uf.unite(c.i, c.j))
      tree.push_back(c);
    if (static_cast<int>(tree.size()) + 1 == nodes)
      break;
  }
  if (static_cast<int>(tree.size()) + 1 != nodes)
    throw FittingError("candidate graph is not connected; no spanning tree");
  std::sort(tree.begin(), tree.end(), [](const WeightedPair& a, const WeightedPair& b) {
    return std::pair(a.i, a.j) < std::pair(b.i, b.j);
  });
  return tree;
}

std::vector<double> rank_transform(std::span<const double> x)
{
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]])
      ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      r[idx[k]] = avg / static_cast<double>(n + 1);
    i = j + 1;
  }
  return r;
}

Columns pseudo_observations(const Columns& data, const std::vector<MixtureModel>& marginals,
                            bool ranks)
{
  Columns u(data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (ranks) {
      u[j] = rank_transform(data[j]);
      continue;
    }
    u[j].resize(data[j].size());
    for (std::size_t i = 0; i < data[j].size(); ++i)
      u[j][i] = clamp_cond(marginals[j].cdf(data[j][i]));
  }
  return u;
}

namespace {

RVineModel fit_impl(const RVineModel* base, const Columns& data,
                    std::vector<MixtureModel> marginals, const VineFitOptions& options,
                    VineFitReport* report)
{
  const std::size_t d = marginals.size();
  check_columns(data, d, options.min_rows);

  RVineModel model;
  model.marginals = std::move(marginals);
  model.structure.d = static_cast<int>(d);
  if (base)
    model.structure = base->structure;

  const Columns u = pseudo_observations(data, model.marginals, options.rank_pseudo_obs);
  LevelData prev;
  for (std::size_t j = 0; j < d; ++j)
    prev.cols.push_back({u[j], {}});

  for (std::size_t t = 0; t + 1 < d; ++t) {
    std::vector<VineEdge> tree;
    if (base) {
      tree = base->structure.trees[t];
    } else {
      const std::size_t nodes = prev.cols.size();
      std::vector<WeightedPair> cands;
      for (std::size_t i = 0; i < nodes; ++i)
        for (std::size_t j = i + 1; j < nodes; ++j) {
          VineEdge e;
          e.child_a = static_cast<int>(i);
          e.child_b = static_cast<int>(j);
          if (t == 0) {
            e.e1 = static_cast<int>(i);
            e.e2 = static_cast<int>(j);
          } else {
            const auto& a = model.structure.trees[t - 1][i];
            const auto& b = model.structure.trees[t - 1][j];
            if (shared_nodes(a, b) != 1 || !sets_from_children(a, b, e.e1, e.e2, e.cond))
              continue;
          }
          const auto& c1 =
            level_input(model.structure, prev, t, child_for(model.structure, t, e, e.e1), e.e1);
          const auto& c2 =
            level_input(model.structure, prev, t, child_for(model.structure, t, e, e.e2), e.e2);
          cands.push_back({e.child_a, e.child_b, std::abs(kendall_tau(c1, c2))});
        }
      const auto mst = max_spanning_tree(static_cast<int>(nodes), std::move(cands));
      for (const auto& p : mst) {
        VineEdge e;
        e.level = static_cast<int>(t) + 1;
        e.child_a = p.i;
        e.child_b = p.j;
        tree.push_back(e);
      }
      model.structure.trees.push_back(tree);
      derive_sets(model.structure);
      tree = model.structure.trees[t];
    }

    LevelData next;
    next.cols.resize(tree.size());
    for (std::size_t k = 0; k < tree.size(); ++k) {
      VineEdge& e = tree[k];
      const auto& a =
        level_input(model.structure, prev, t, child_for(model.structure, t, e, e.e1), e.e1);
      const auto& b =
        level_input(model.structure, prev, t, child_for(model.structure, t, e, e.e2), e.e2);
      if (base) {
        if (e.copula.family != CopulaFamily::independence) {
          const ThetaFit tf =
            fit_theta(e.copula.family, e.copula.rotation, a, b, e.copula.theta, options.pair.tol);
          if (tf.ok)
            e.copula.theta = tf.theta;
          else if (report) {
            ++report->fallbacks;
            report->warnings.push_back("parameter refit failed; kept previous theta");
          }
        }
      } else {
        const PairFit pf = fit_pair(a, b, options.pair);
        e.copula = pf.copula;
        if (pf.fallback && report) {
          ++report->fallbacks;
          report->warnings.push_back(pf.warning);
        }
      }
      if (t + 2 < d)
        edge_outputs(e.copula, a, b, next.cols[k]);
    }
    model.structure.trees[t] = tree;
    prev = std::move(next);
  }
  return model;
}

} // namespace

RVineModel fit_sequential(const Columns& data, std::vector<MixtureModel> marginals,
                          const VineFitOptions& options, VineFitReport* report)
{
  return fit_impl(nullptr, data, std::move(marginals), options, report);
}

RVineModel refit_parameters(const RVineModel& base, const Columns& data,
                            std::vector<MixtureModel> marginals, const VineFitOptions& options)
{
  if (base.structure.d != static_cast<int>(marginals.size()))
    throw ArgumentError("refit: dimension mismatch");
  return fit_impl(&base, data, std::move(marginals), options, nullptr);
}

double vine_copula_log_density(const RVineStructure& s, std::span<const double> u)
{
  Outputs out(s.trees.size());
  double ll = 0.0;
  for (std::size_t t = 0; t < s.trees.size(); ++t) {
    out[t].resize(s.trees[t].size());
    const bool need_out = t + 1 < s.trees.size();
    for (std::size_t k = 0; k < s.trees[t].size(); ++k) {
      const VineEdge& e = s.trees[t][k];
      const double a = input_for(s, out, u, t, e, e.e1);
      const double b = input_for(s, out, u, t, e, e.e2);
      ll += pair_log_density(e.copula, a, b);
      if (need_out)
        out[t][k] = {clamp_cond(pair_h(e.copula, a, b)), clamp_cond(pair_h1(e.copula, a, b))};
    }
  }
  return ll;
}

double vine_log_density(const RVineModel& m, std::span<const double> x)
{
  const std::size_t d = static_cast<std::size_t>(m.dim());
  if (x.size() != d)
    throw ArgumentError("vine_log_density: dimension mismatch");
  double lf = 0.0;
  std::vector<double> u(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double l = m.marginals[i].log_density(x[i]);
    if (l == -kInf || std::isnan(l))
      return -kInf;
    lf += l;
    u[i] = clamp_cond(m.marginals[i].cdf(x[i]));
  }
  return lf + vine_copula_log_density(m.structure, u);
}

double vine_log_likelihood(const RVineModel& m, const Columns& data)
{
  const std::size_t d = static_cast<std::size_t>(m.dim());
  if (data.size() != d)
    throw ArgumentError("vine_log_likelihood: dimension mismatch");
  double ll = 0.0;
  std::vector<double> x(d);
  for (std::size_t i = 0; i < data[0].size(); ++i) {
    for (std::size_t j = 0; j < d; ++j)
      x[j] = data[j][i];
    ll += vine_log_density(m, x);
  }
  return ll;
}

namespace {

struct Chain {
  int var;
  std::vector<std::size_t> edges; // edge index on tree t = position
};

struct PeelPlan {
  int first = 0;
  std::vector<Chain> chains; // in peel order
};

PeelPlan plan_peel(const RVineStructure& s)
{
  PeelPlan plan;
  std::vector<std::vector<bool>> active(s.trees.size());
  for (std::size_t t = 0; t < s.trees.size(); ++t)
    active[t].assign(s.trees[t].size(), true);
  std::vector<bool> left(static_cast<std::size_t>(s.d), true);
  for (int step = 0; step + 1 < s.d; ++step) {
    std::size_t top = s.trees.size();
    std::size_t top_edge = 0;
    for (std::size_t t = s.trees.size(); t-- > 0;) {
      std::size_t count = 0;
      for (std::size_t k = 0; k < active[t].size(); ++k)
        if (active[t][k]) {
          ++count;
          top_edge = k;
        }
      if (count > 0) {
        if (count != 1)
          throw StructuralError("vine peel: top tree does not have a single edge");
        top = t;
        break;
      }
    }
    const int v = s.trees[top][top_edge].e2;
    Chain chain{v, {}};
    for (std::size_t t = 0; t <= top; ++t) {
      std::size_t found = 0, idx = 0;
      for (std::size_t k = 0; k < s.trees[t].size(); ++k)
        if (active[t][k] && (s.trees[t][k].e1 == v || s.trees[t][k].e2 == v)) {
          ++found;
          idx = k;
        }
      if (found != 1)
        throw StructuralError("vine peel: variable does not form a chain");
      active[t][idx] = false;
      chain.edges.push_back(idx);
    }
    left[static_cast<std::size_t>(v)] = false;
    plan.chains.push_back(std::move(chain));
  }
  for (int i = 0; i < s.d; ++i)
    if (left[static_cast<std::size_t>(i)])
      plan.first = i;
  return plan;
}

} // namespace

std::vector<int> peel_order(const RVineStructure& s)
{
  const PeelPlan p = plan_peel(s);
  std::vector<int> order;
  for (const auto& c : p.chains)
    order.push_back(c.var);
  order.push_back(p.first);
  return order;
}

std::vector<std::vector<double>> vine_sample_uniform(const RVineStructure& s, std::size_t n,
                                                     Rng& rng)
{
  const std::size_t d = static_cast<std::size_t>(s.d);
  const PeelPlan plan = plan_peel(s);
  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  Outputs out(s.trees.size());
  for (std::size_t t = 0; t < s.trees.size(); ++t)
    out[t].assign(s.trees[t].size(), {0.5, 0.5});

  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> u(d, 0.5);
    u[static_cast<std::size_t>(plan.first)] = rng.uniform();
    for (std::size_t c = plan.chains.size(); c-- > 0;) {
      const Chain& ch = plan.chains[c];
      const int v = ch.var;
      double p = rng.uniform();
      for (std::size_t t = ch.edges.size(); t-- > 0;) {
        const VineEdge& e = s.trees[t][ch.edges[t]];
        if (e.e1 == v) {
          const double q = input_for(s, out, u, t, e, e.e2);
          p = clamp_cond(pair_h_inverse(e.copula, p, q));
        } else {
          const double q = input_for(s, out, u, t, e, e.e1);
          p = clamp_cond(pair_h1_inverse(e.copula, p, q));
        }
      }
      u[static_cast<std::size_t>(v)] = p;
      for (std::size_t t = 0; t < ch.edges.size(); ++t) {
        const VineEdge& e = s.trees[t][ch.edges[t]];
        const double a = input_for(s, out, u, t, e, e.e1);
        const double b = input_for(s, out, u, t, e, e.e2);
        out[t][ch.edges[t]] = {clamp_cond(pair_h(e.copula, a, b)),
                               clamp_cond(pair_h1(e.copula, a, b))};
      }
    }
    rows.push_back(std::move(u));
  }
  return rows;
}

std::vector<std::vector<double>> vine_sample(const RVineModel& m, std::size_t n, Rng& rng)
{
  auto rows = vine_sample_uniform(m.structure, n, rng);
  for (auto& row : rows)
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = m.marginals[j].quantile(row[j]);
  return rows;
}

std::vector<std::vector<double>> vine_sample(const RVineModel& m, std::size_t n,
                                             std::uint64_t seed)
{
  Rng rng(seed);
  return vine_sample(m, n, rng);
}

} // namespace vfvm
