// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "scenes.hpp"
#include "vfvm/composite.hpp"
#include "vfvm/copula.hpp"
#include "vfvm/descriptors.hpp"
#include "vfvm/evaluation.hpp"
#include "vfvm/mixture.hpp"
#include "vfvm/random.hpp"
#include "vfvm/synth.hpp"
#include "vfvm/vine.hpp"
#include "vfvm/voxel.hpp"

using namespace vfvm;
namespace fs = std::filesystem;

namespace {

// Collects failed checks of one criterion with a short reason each.
struct Verdict {
  std::vector<std::string> failures;
  std::string detail;

  void check(bool ok, const std::string& what)
  {
    if (!ok && failures.size() < 5)
      failures.push_back(what);
    else if (!ok)
      failures.back() = "... " + what;
  }
  bool ok() const { return failures.empty(); }
};

std::string fmt(double v, int prec = 4)
{
  std::ostringstream o;
  o.precision(prec);
  o << v;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const CopulaFamily kFamilies[] = {CopulaFamily::frank, CopulaFamily::clayton, CopulaFamily::gumbel,
                                  CopulaFamily::joe};
const int kRotations[] = {0, 90, 180, 270};

// 1. copula density mass and h-functions
Verdict copulas()
{
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(17);
  double worst_mass = 0.0, worst_h = 0.0;
  for (auto f : kFamilies)
    for (int rot : kRotations)
      for (double tau : {0.1, 0.2, 0.3}) {
        const PairCopula c{f, rot, theta_from_tau(f, tau)};
        const std::string name = std::string(to_string(f)) + "/" + std::to_string(rot) +
                                 "/tau=" + fmt(tau);
        const int m = 200;
        double s = 0.0;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            s += pair_density(c, (i + 0.5) / m, (j + 0.5) / m);
        const double mass = s / (m * m);
        worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
        v.check(std::abs(mass - 1.0) <= 1e-3, name + " mass " + fmt(mass, 8));
        for (int k = 0; k < 100; ++k) {
          const double a = 0.01 + 0.98 * rng.uniform(), b = 0.01 + 0.98 * rng.uniform();
          const double dv = 1e-6;
          const double fd = (pair_cdf(c, a, b + dv) - pair_cdf(c, a, b - dv)) / (2 * dv);
          const double err = std::abs(pair_h(c, a, b) - fd);
          worst_h = std::max(worst_h, err);
          v.check(err <= 1e-4, name + " h at (" + fmt(a) + ", " + fmt(b) + ")");
        }
      }
  const double t = seconds_since(t0);
  v.check(t < 60.0, "runtime " + fmt(t) + " s");
  v.detail = "max |mass-1| = " + fmt(worst_mass, 3) + ", max |h-FD| = " + fmt(worst_h, 3) + ", " +
             fmt(t, 3) + " s";
  return v;
}

// 2. Kendall tau against enumeration
Verdict kendall()
{
  Verdict v;
  Rng rng(31);
  int tied = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    const bool ties = trial % 2 == 0;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = ties ? static_cast<double>(rng.below(6)) : rng.normal();
      y[i] = ties ? static_cast<double>(rng.below(4)) + 0.3 * x[i] : rng.normal() + 0.5 * x[i];
    }
    tied += ties;
    v.check(kendall_tau(x, y) == oracle::brute_tau(x, y), "vector " + std::to_string(trial));
  }
  v.detail = "50 vectors, " + std::to_string(tied) + " with ties, exact equality";
  return v;
}

// 3. first tree against all labeled spanning trees
Verdict first_tree()
{
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::string counts;
  for (int d : {4, 5}) {
    Rng rng(40 + d);
    std::vector<int> order(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
      order[static_cast<std::size_t>(i)] = (i * 3) % d;
    std::vector<PairCopula> t1;
    for (int k = 0; k + 1 < d; ++k) {
      const auto f = kFamilies[(k + 1) % 4];
      t1.push_back({f, 0, theta_from_tau(f, 0.2 + 0.12 * k)});
    }
    const auto truth =
      fixture::vine_with(order, t1, {}, std::vector<MixtureModel>(d, fixture::uniform01()));
    const auto cols = fixture::to_columns(vine_sample(truth, 500, rng), d);
    const auto trees = oracle::all_trees(d);
    counts += (counts.empty() ? "" : "/") + std::to_string(trees.size());
    v.check(trees.size() == static_cast<std::size_t>(std::pow(d, d - 2)), "tree count");
    const auto best = oracle::best_tree(cols);
    const auto fit = fit_sequential(cols, std::vector<MixtureModel>(d, fixture::uniform01()));
    oracle::EdgeSet got;
    for (const auto& e : fit.structure.trees[0])
      got.insert({std::min(e.e1, e.e2), std::max(e.e1, e.e2)});
    v.check(got == best, "d = " + std::to_string(d));
  }
  const double t = seconds_since(t0);
  v.check(t < 30.0, "runtime " + fmt(t) + " s");
  v.detail = counts + " candidate trees, " + fmt(t, 3) + " s";
  return v;
}

// 4. vine density mass and the independence factorization
Verdict vine_density()
{
  Verdict v;
  const auto vine = fixture::vine_with(
    {1, 0, 2}, {{CopulaFamily::frank, 0, 4.0}, {CopulaFamily::gumbel, 180, 1.6}},
    {{CopulaFamily::clayton, 90, 0.8}}, std::vector<MixtureModel>(3, fixture::uniform01()));
  const int n = 100;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double x[] = {(i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n};
        s += std::exp(vine_log_density(vine, x));
      }
  const double mass = s / (n * n * n);
  v.check(std::abs(mass - 1.0) <= 5e-3, "mass " + fmt(mass, 8));

  const std::vector<MixtureModel> m{{MixtureFamily::gamma, {2, 1.5}, {6, 0.7}, 0.4},
                                    {MixtureFamily::beta, {2, 5}, {6, 2}, 0.3},
                                    {MixtureFamily::gamma, {3, 1}, {9, 1}, 0.5},
                                    {MixtureFamily::beta, {1.5, 1.5}, {4, 9}, 0.8}};
  const auto ind = fixture::vine_with({2, 0, 3, 1}, {{}, {}, {}}, {}, m);
  Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double x[] = {10 * rng.uniform(), rng.uniform(), 20 * rng.uniform(), rng.uniform()};
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j)
      sum += m[j].log_density(x[j]);
    worst = std::max(worst, std::abs(vine_log_density(ind, x) - sum));
  }
  v.check(worst <= 1e-12, "independence gap " + fmt(worst, 3));
  v.detail = "mass " + fmt(mass, 6) + ", independence gap " + fmt(worst, 3);
  return v;
}

// 5. sample, refit, compare edges
Verdict round_trip()
{
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto truth = fixture::vine_with(
    {0, 1, 2}, {{CopulaFamily::clayton, 0, 2.0}, {CopulaFamily::gumbel, 0, 2.0}}, {},
    std::vector<MixtureModel>(3, fixture::uniform01()));
  const auto cols = fixture::to_columns(vine_sample(truth, 10000, 2026), 3);
  const auto fit = fit_sequential(cols, std::vector<MixtureModel>(3, fixture::uniform01()));
  int same_family = 0, matched = 0;
  std::string taus;
  for (std::size_t t = 0; t < truth.structure.trees.size(); ++t)
    for (const auto& g : truth.structure.trees[t])
      for (const auto& e : fit.structure.trees[t]) {
        const std::set<int> a{g.e1, g.e2}, b{e.e1, e.e2};
        if (a != b || g.cond != e.cond)
          continue;
        ++matched;
        const double tg = copula_tau(g.copula), tf = copula_tau(e.copula);
        taus += (taus.empty() ? "" : " ") + fmt(tf - tg, 2);
        v.check(std::abs(tf - tg) <= 0.05, "edge tau " + fmt(tf) + " vs " + fmt(tg));
        same_family += e.copula.family == g.copula.family;
      }
  v.check(matched == 3, "fitted structure differs from the generator");
  v.check(same_family >= 2, std::to_string(same_family) + " families match");
  const double t = seconds_since(t0);
  v.check(t < 120.0, "runtime " + fmt(t) + " s");
  v.detail = "tau errors [" + taus + "], families " + std::to_string(same_family) + "/3, " +
             fmt(t, 3) + " s";
  return v;
}

// 6. EM on a two-component beta mixture
Verdict em()
{
  Verdict v;
  const MixtureModel truth{MixtureFamily::beta, {2, 8}, {8, 2}, 0.5};
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed : {22, 23, 24, 25, 26}) {
    Rng rng(seed);
    std::vector<double> x(10000);
    for (auto& e : x)
      e = oracle::mixture_draw(rng, truth);
    const auto r = fit_mixture_em(x, MixtureFamily::beta);
    double m1 = component_mean(MixtureFamily::beta, r.model.comp1());
    double m2 = component_mean(MixtureFamily::beta, r.model.comp2());
    double lambda = r.model.lambda();
    if (m1 > m2) {
      std::swap(m1, m2);
      lambda = 1.0 - lambda;
    }
    const std::string run = "seed " + std::to_string(seed);
    lo = std::min(lo, lambda);
    hi = std::max(hi, lambda);
    v.check(lambda >= 0.45 && lambda <= 0.55, run + " lambda " + fmt(lambda));
    v.check(std::abs(m1 - 0.2) <= 0.02, run + " mean " + fmt(m1));
    v.check(std::abs(m2 - 0.8) <= 0.08, run + " mean " + fmt(m2));
    bool mono = r.monotone;
    for (std::size_t i = 1; i < r.ll_trace.size(); ++i)
      mono = mono && r.ll_trace[i] >= r.ll_trace[i - 1] - 1e-9 * std::abs(r.ll_trace[i - 1]);
    v.check(mono, run + " log-likelihood decreased");
  }
  v.detail = "5 runs, lambda in [" + fmt(lo) + ", " + fmt(hi) + "], monotone";
  return v;
}

struct Run {
  int code = -1;
  std::string err;
};

const fs::path kWork = fs::path(VFVM_TEST_WORK) / "acceptance_work";

Run cli(const std::string& args)
{
  const fs::path errf = kWork / "stderr.txt";
  const std::string cmd = std::string(VFVM_CLI) + " " + args + " > /dev/null 2> " + errf.string();
  const int st = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  std::ifstream in(errf);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const ScoreReport* find_subset(const std::vector<ScoreReport>& r, const std::string& subset)
{
  for (const auto& s : r)
    if (s.subset == subset)
      return &s;
  return nullptr;
}

// 7. leave-one-out on the seed-pinned benchmark, both engines, exact and
// warm-started
Verdict benchmark()
{
  Verdict v;
  const fs::path dir = kWork / "benchmark";
  fs::create_directories(dir);
  const std::string data = (dir / "bench.csv").string();
  const auto s = cli("synth --benchmark --counts 227 489 625 --seed 20261016 --out " + data);
  v.check(s.code == 0, "synth exit " + std::to_string(s.code));
  for (const std::string mode : {"exact", "fast"}) {
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::string, std::vector<ScoreReport>> rep;
    for (const std::string engine : {"rvine", "archimedean"}) {
      const auto prefix = (dir / (engine + "_" + mode)).string();
      const auto r = cli("evaluate --data " + data + " --engine " + engine +
                         (mode == "fast" ? " --fast-loo" : "") + " --out " + prefix);
      v.check(r.code == 0, engine + " exit " + std::to_string(r.code) + " " + r.err);
      if (r.code == 0)
        rep[engine] = parse_report_json(slurp(prefix + ".json"));
    }
    const double t = seconds_since(t0);
    const ScoreReport *va = find_subset(rep["rvine"], "all"),
                      *vc = find_subset(rep["rvine"], "composite_only"),
                      *aa = find_subset(rep["archimedean"], "all"),
                      *ac = find_subset(rep["archimedean"], "composite_only");
    const bool have = va && vc && aa && ac && va->mae && vc->mae && aa->mae && ac->mae;
    v.check(have, mode + ": missing report rows");
    if (!have)
      continue;
    v.check(*va->mae <= 0.15, mode + ": rvine MAE " + fmt(*va->mae));
    v.check(*vc->mae <= 0.20, mode + ": rvine MAE_c " + fmt(*vc->mae));
    v.check(*va->mae <= *aa->mae, mode + ": rvine MAE above archimedean");
    v.check(t < (mode == "fast" ? 1200.0 : 7200.0), mode + ": runtime " + fmt(t) + " s");
    v.detail += (v.detail.empty() ? "" : "; ") + mode + ": rvine MAE " + fmt(*va->mae) +
                " MAE_c " + fmt(*vc->mae) + ", archimedean MAE " + fmt(*aa->mae) + " MAE_c " +
                fmt(*ac->mae) + ", " + fmt(t, 3) + " s";
  }
  return v;
}

// 8. descriptors, weight map, mineral ratio
Verdict descriptors()
{
  Verdict v;
  const Dims d20{45, 45, 45};
  const auto b20 = fixture::ball(d20, 20.0);
  const double area = surface_area(b20, d20);
  const double ref = 4 * std::numbers::pi * 400;
  v.check(std::abs(area / ref - 1.0) <= 0.05, "ball area " + fmt(area));
  const auto db = compute_descriptors(b20, VoxelVolume(d20));
  v.check(std::abs(db.sphe - 1.0) <= 0.05, "sphericity " + fmt(db.sphe));

  const Dims d{8, 6, 4};
  const auto box = fixture::box(d, 2, 1, 1, 4, 2, 1);
  const auto dx = compute_descriptors(box, VoxelVolume(d));
  v.check(dx.elo == 0.5 && dx.flat == 0.5, "box elo/flat " + fmt(dx.elo) + "/" + fmt(dx.flat));

  // weight-map balance on the annotated planes of a generated scene
  const auto spec = scene_spec_from_json(slurp(fs::path(VFVM_FIXTURES) / "example_scene.json"));
  const auto scene = generate_scene(spec);
  const std::size_t zs[] = {12, 20, 27};
  const auto wm = compute_weight_map(scene.labels, zs);
  const auto& dims = scene.labels.dims();
  double fg = 0.0, bg = 0.0;
  for (std::size_t z : zs)
    for (std::size_t y = 0; y < dims.ny; ++y)
      for (std::size_t x = 0; x < dims.nx; ++x) {
        const auto i = dims.index(x, y, z);
        (scene.labels[i] > 0 ? fg : bg) += wm.weights[i];
      }
  v.check(std::abs(fg - bg) <= 1e-6, "weight balance " + fmt(fg, 12) + " vs " + fmt(bg, 12));

  Rng rng(3);
  std::size_t checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto sc = generate_scene(fixture::random_scene(rng));
    const auto counts = oracle::phase_counts(sc);
    const auto parts = particle_voxels(sc.labels);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto r = mineral_ratio(parts[k], sc.slices);
      const auto it = counts.find(static_cast<std::uint32_t>(k + 1));
      if (it == counts.end()) {
        v.check(!r.has_value(), "ratio for a particle off the slices");
        continue;
      }
      ++checked;
      const double want = static_cast<double>(it->second.valuable.size()) /
                          static_cast<double>(it->second.mineral.size());
      v.check(r.has_value() && *r == want, "scene " + std::to_string(rep) + " particle " +
                                             std::to_string(k + 1));
    }
  }
  v.detail = "area/4pi r^2 = " + fmt(area / ref) + ", sphericity " + fmt(db.sphe) +
             ", weight gap " + fmt(std::abs(fg - bg), 3) + ", " + std::to_string(checked) +
             " particle ratios on 20 scenes";
  return v;
}

// 9. composite density mass and conditional median
Verdict composite()
{
  Verdict v;
  const auto m = benchmark_truth_model();
  const double mass = oracle::composite_integral_mc(m, 1000000, 15);
  v.check(std::abs(mass - 1.0) <= 0.05, "mass " + fmt(mass));
  double worst = 0.0;
  for (const auto& x : oracle::composite_queries(m, 50, 20)) {
    std::array<double, 7> y{};
    std::copy(x.begin(), x.end(), y.begin());
    const double ref = oracle::grid_median(
      [&](double t) {
        y[6] = t;
        return joint_log_density(m.f_c, y);
      },
      m.epsilon, 1.0 - m.epsilon);
    const double got = conditional_median(m, x);
    worst = std::max(worst, std::abs(got - ref));
    v.check(std::abs(got - ref) <= 1e-3, "median " + fmt(got) + " vs " + fmt(ref));
    const auto p = predict_vfvm(m, x);
    if (p.cls == ParticleClass::composite)
      v.check(p.value == got, "prediction differs from the conditional median");
  }
  v.detail = "MC mass " + fmt(mass) + ", max median gap " + fmt(worst, 3) + " on 50 points";
  return v;
}

using Snapshot = std::map<std::string, std::string>;

// Every regular file under `dir`, manifests without their timestamp.
Snapshot snapshot(const fs::path& dir)
{
  Snapshot s;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file())
      continue;
    const auto rel = fs::relative(e.path(), dir).string();
    auto bytes = slurp(e.path());
    if (rel.ends_with("manifest.json")) {
      auto j = nlohmann::json::parse(bytes);
      j.erase("timestamp");
      bytes = j.dump();
    }
    s[rel] = std::move(bytes);
  }
  return s;
}

// 10. byte-identical reruns of every subcommand; parallel LOO
Verdict determinism()
{
  Verdict v;
  const fs::path root = kWork / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto in = [&](const std::string& step, const std::string& f) {
    return (root / step / f).string();
  };
  const std::string spec = std::string(VFVM_FIXTURES) + "/example_scene.json";
  const std::vector<std::pair<std::string, std::string>> steps{
    {"synth_scene", "synth --spec " + spec + " --out " + in("synth_scene", "scene")},
    {"synth_bench", "synth --benchmark --counts 40 45 60 --seed 11 --out " +
                      in("synth_bench", "bench.csv") + " --truth-model " +
                      in("synth_bench", "truth.json")},
    {"descriptors", "descriptors --volume " + in("synth_scene", "scene/volume.vxl") +
                      " --labels " + in("synth_scene", "scene/labels.vxl") + " --slice " +
                      in("synth_scene", "scene/slice_0.json") + " " +
                      in("synth_scene", "scene/slice_1.json") + " --out " +
                      in("descriptors", "desc.csv")},
    {"weights", "weights --labels " + in("synth_scene", "scene/labels.vxl") +
                  " --z 12 20 27 --out " + in("weights", "w.vxl")},
    {"fit", "fit --data " + in("synth_bench", "bench.csv") + " --out " + in("fit", "model.json")},
    {"predict", "predict --model " + in("fit", "model.json") + " --data " +
                  in("synth_bench", "bench.csv") + " --out " + in("predict", "pred.csv")},
    {"sample", "sample --model " + in("fit", "model.json") + " --n 300 --seed 9 --out " +
                 in("sample", "s.csv")},
    {"evaluate", "evaluate --data " + in("synth_bench", "bench.csv") + " --out " +
                   in("evaluate", "ev")},
    {"evaluate_fast", "evaluate --data " + in("synth_bench", "bench.csv") + " --fast-loo --out " +
                        in("evaluate_fast", "ev")},
  };
  std::size_t files = 0;
  for (const auto& [step, args] : steps) {
    Snapshot first;
    for (int pass = 0; pass < 2; ++pass) {
      fs::remove_all(root / step);
      fs::create_directories(root / step);
      const auto r = cli(args);
      v.check(r.code == 0, step + " exit " + std::to_string(r.code) + " " + r.err);
      auto snap = snapshot(root / step);
      if (pass == 0) {
        v.check(!snap.empty(), step + " wrote nothing");
        first = std::move(snap);
      } else {
        files += snap.size();
        v.check(snap == first, step + " differs between runs");
      }
    }
  }

  // exact and warm-started LOO at one and eight workers
  for (const std::string mode : {"", " --fast-loo"}) {
    Snapshot out[2];
    for (int k = 0; k < 2; ++k) {
      const std::string p = k == 0 ? "1" : "8";
      const fs::path dir = root / "parallel";
      fs::remove_all(dir);
      fs::create_directories(dir);
      const auto r = cli("evaluate --data " + in("synth_bench", "bench.csv") + mode +
                         " --parallelism " + p + " --out " + (dir / "ev").string());
      v.check(r.code == 0, "parallel evaluate exit " + std::to_string(r.code));
      out[k] = snapshot(dir);
    }
    v.check(out[0] == out[1], "LOO" + mode + " differs between 1 and 8 workers");
  }
  v.detail = std::to_string(steps.size()) + " runs, " + std::to_string(files) +
             " artifacts identical; LOO identical at 1 and 8 workers";
  return v;
}

} // namespace

int main(int argc, char** argv)
{
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
    {"copula density and h-functions", copulas},
    {"Kendall tau", kendall},
    {"first-tree selection", first_tree},
    {"vine density", vine_density},
    {"vine round trip", round_trip},
    {"EM", em},
    {"synthetic benchmark", benchmark},
    {"descriptors", descriptors},
    {"composite density", composite},
    {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i)
    only.insert(std::atoi(argv[i]));
  fs::create_directories(kWork);
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int n = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(n))
      continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v.failures.push_back(std::string("exception: ") + e.what());
    }
    std::printf("criterion %d: %s  %s", n, v.ok() ? "PASS" : "FAIL", criteria[k].first.c_str());
    if (!v.detail.empty())
      std::printf(" (%s)", v.detail.c_str());
    std::printf("\n");
    for (const auto& f : v.failures)
      std::printf("    %s\n", f.c_str());
    std::fflush(stdout);
    failed += !v.ok();
  }
  return failed ? 1 : 0;
}
