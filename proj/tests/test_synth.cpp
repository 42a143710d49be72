#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "vfvm/composite.hpp"
#include "vfvm/descriptors.hpp"
#include "vfvm/error.hpp"
#include "vfvm/random.hpp"
#include "vfvm/synth.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace vfvm;

namespace {

SceneSpec one_ball(double vfvm)
{
  SceneSpec s;
  s.dims = {48, 48, 48};
  ParticleSpec p;
  p.radius = 20;
  p.center = {24, 24, 24};
  p.vfvm = vfvm;
  s.particles.push_back(p);
  s.slices.push_back({Axis::z, 24});
  return s;
}

using fixture::random_scene;

} // namespace

TEST_CASE("ball with a planar cut has the requested mineral ratio")
{
  for (double f : {0.75, 0.3}) {
    const auto scene = generate_scene(one_ball(f));
    const auto parts = particle_voxels(scene.labels);
    REQUIRE(parts.size() == 1);
    const auto r = mineral_ratio(parts[0], scene.slices);
    REQUIRE(r.has_value());
    CHECK(std::abs(*r - f) <= 0.05);
  }
  // label volume matches the ball exactly
  const auto scene = generate_scene(one_ball(0.75));
  std::size_t n = 0;
  for (std::size_t z = 0; z < 48; ++z)
    for (std::size_t y = 0; y < 48; ++y)
      for (std::size_t x = 0; x < 48; ++x) {
        const double d2 = (x - 24.0) * (x - 24.0) + (y - 24.0) * (y - 24.0) + (z - 24.0) * (z - 24.0);
        CHECK((scene.labels.at(x, y, z) == 1) == (d2 <= 400.0));
        n += d2 <= 400.0;
      }
  CHECK(particle_voxels(scene.labels)[0].size() == n);
}

TEST_CASE("empty spec gives empty volumes")
{
  SceneSpec s;
  s.dims = {5, 6, 7};
  s.background_mean = 3.0;
  const auto scene = generate_scene(s);
  CHECK(scene.labels.dims().size() == 210);
  CHECK(max_label(scene.labels) == 0);
  for (float v : scene.volume.values())
    CHECK(v == 3.0f);
  CHECK(scene.slices.empty());
}

TEST_CASE("scenes are deterministic given the seed")
{
  Rng rng(1);
  const auto s = random_scene(rng);
  const auto a = generate_scene(s), b = generate_scene(s);
  CHECK(std::equal(a.volume.values().begin(), a.volume.values().end(), b.volume.values().begin()));
  CHECK(std::equal(a.labels.values().begin(), a.labels.values().end(), b.labels.values().begin()));
  REQUIRE(a.slices.size() == b.slices.size());
  for (std::size_t i = 0; i < a.slices.size(); ++i)
    CHECK(a.slices[i].phases == b.slices[i].phases);
  auto s2 = s;
  s2.seed ^= 1;
  const auto c = generate_scene(s2);
  CHECK_FALSE(std::equal(a.volume.values().begin(), a.volume.values().end(),
                         c.volume.values().begin()));
}

TEST_CASE("overlapping primitives are rejected")
{
  SceneSpec s;
  s.dims = {20, 20, 20};
  ParticleSpec p;
  p.radius = 4;
  p.center = {8, 10, 10};
  s.particles.push_back(p);
  p.center = {13, 10, 10};
  s.particles.push_back(p);
  CHECK_THROWS_AS(generate_scene(s), DataError);
  s.particles[1].center = {18, 10, 10};
  CHECK_NOTHROW(generate_scene(s));
  s.particles[1].vfvm = 1.5;
  CHECK_THROWS_AS(generate_scene(s), ArgumentError);
}

TEST_CASE("scene spec text round trip")
{
  Rng rng(2);
  const auto s = random_scene(rng);
  const auto text = scene_spec_to_json(s);
  const auto t = scene_spec_from_json(text);
  CHECK(scene_spec_to_json(t) == text);
  CHECK(t.seed == s.seed);
  CHECK(t.particles.size() == s.particles.size());
  CHECK_THROWS_AS(scene_spec_from_json("{\"dims\": [0, 1, 1]}"), Error);
  CHECK_THROWS_AS(scene_spec_from_json("{\"dims\": [4, 4, 4], \"particles\": [{\"shape\": \"cone\"}]}"),
                  Error);
  CHECK_THROWS_AS(scene_spec_from_json("{"), ParseError);
}

TEST_CASE("mineral ratio equals brute-force counting on random scenes")
{
  Rng rng(3);
  std::size_t checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = random_scene(rng);
    const auto scene = generate_scene(s);
    const auto counts = oracle::phase_counts(scene);
    const auto parts = particle_voxels(scene.labels);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto l = static_cast<std::uint32_t>(k + 1);
      const auto r = mineral_ratio(parts[k], scene.slices);
      if (!counts.count(l)) {
        CHECK_FALSE(r.has_value());
        continue;
      }
      REQUIRE(r.has_value());
      ++checked;
      const auto& c = counts.at(l);
      CHECK(*r == static_cast<double>(c.valuable.size()) / static_cast<double>(c.mineral.size()));
      // the cut reproduces the requested fraction up to rounding
      const double m = static_cast<double>(c.mineral.size());
      CHECK(std::abs(*r - s.particles[k].vfvm) <= 0.5 / m + 1e-12);
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("composite datasets have exact class counts")
{
  const auto truth = benchmark_truth_model();
  const auto d = generate_composite_dataset(truth, 227, 489, 625, 4);
  CHECK(d.size() == 1341);
  const auto p = partition_dataset(d, 0.01);
  CHECK(p.rows_v.size() == 227);
  CHECK(p.rows_nv.size() == 489);
  CHECK(p.rows_c.size() == 625);
  std::set<std::uint64_t> ids;
  for (const auto& r : d.rows)
    ids.insert(r.id);
  CHECK(ids.size() == 1341);
  // shuffled: the first rows are not all from one class
  std::set<ParticleClass> first;
  for (std::size_t i = 0; i < 20; ++i)
    first.insert(classify_ratio(*d.rows[i].d.rat, 0.01));
  CHECK(first.size() > 1);

  const auto c = generate_composite_dataset(truth, 0, 0, 10, 5);
  CHECK(c.size() == 10);
  for (const auto& r : c.rows)
    CHECK(classify_ratio(*r.d.rat, 0.01) == ParticleClass::composite);

  const auto e = generate_composite_dataset(truth, 227, 489, 625, 4);
  REQUIRE(e.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(e.rows[i].id == d.rows[i].id);
    CHECK(e.rows[i].d.med == d.rows[i].d.med);
    CHECK(*e.rows[i].d.rat == *d.rows[i].d.rat);
  }
  CHECK(generate_composite_dataset(truth, 0, 0, 0, 6).empty());
}

TEST_CASE("generate, partition, fit keeps counts and edge dependence")
{
  // round trip at n = 10^4 per class on the composite sub-model's first tree
  const auto truth = benchmark_truth_model();
  const auto d = generate_composite_dataset(truth, 0, 0, 10000, 7);
  const auto p = partition_dataset(d, 0.01);
  CHECK(p.rows_c.size() == 10000);
  CompositeOptions o;
  const auto m = fit_class_model(ParticleClass::composite, p.c, o);
  const auto& fitted = std::get<RVineModel>(m.model);
  const auto& gen = std::get<RVineModel>(truth.f_c.model);
  for (const auto& e : gen.structure.trees[0]) {
    const double tg = copula_tau(e.copula);
    double tf = 0.0;
    bool found = false;
    for (const auto& f : fitted.structure.trees[0])
      if (f.e1 == e.e1 && f.e2 == e.e2) {
        tf = copula_tau(f.copula);
        found = true;
      }
    // an edge missing from the fitted first tree only matters when it is strong
    if (found)
      CHECK(std::abs(tf - tg) < 0.05);
    else
      CHECK(std::abs(tg) < 0.2);
  }
}
