#pragma once

// Small constructions shared by the unit tests and the acceptance run.

#include <algorithm>
#include <array>
#include <vector>

#include "vfvm/random.hpp"
#include "vfvm/synth.hpp"
#include "vfvm/vine.hpp"

namespace fixture {

inline vfvm::MixtureModel uniform01() { return {vfvm::MixtureFamily::beta, {1, 1}, {1, 1}, 0.5}; }

inline vfvm::Columns to_columns(const std::vector<std::vector<double>>& rows, int d)
{
  vfvm::Columns c(static_cast<std::size_t>(d));
  for (const auto& r : rows)
    for (std::size_t j = 0; j < c.size(); ++j)
      c[j].push_back(r[j]);
  return c;
}

// D-vine on `order`: first-tree copulas in path order, then the remaining
// trees filled edge by edge from `rest` (independence once it runs out).
inline vfvm::RVineModel vine_with(const std::vector<int>& order,
                                  const std::vector<vfvm::PairCopula>& t1,
                                  const std::vector<vfvm::PairCopula>& rest,
                                  std::vector<vfvm::MixtureModel> m)
{
  vfvm::RVineModel v;
  v.structure = vfvm::d_vine_structure(order);
  for (std::size_t k = 0; k < t1.size(); ++k)
    v.structure.trees[0][k].copula = t1[k];
  std::size_t r = 0;
  for (std::size_t t = 1; t < v.structure.trees.size(); ++t)
    for (auto& e : v.structure.trees[t])
      if (r < rest.size())
        e.copula = rest[r++];
  v.marginals = std::move(m);
  return v;
}

// Digital ball of radius r about the grid center.
inline std::vector<std::size_t> ball(const vfvm::Dims& d, double r)
{
  const double c[3] = {(d.nx - 1) / 2.0, (d.ny - 1) / 2.0, (d.nz - 1) / 2.0};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto [x, y, z] = d.coords(i);
    const double dx = x - c[0], dy = y - c[1], dz = z - c[2];
    if (dx * dx + dy * dy + dz * dz <= r * r)
      out.push_back(i);
  }
  return out;
}

inline std::vector<std::size_t> box(const vfvm::Dims& d, std::size_t x0, std::size_t y0,
                                    std::size_t z0, std::size_t sx, std::size_t sy, std::size_t sz)
{
  std::vector<std::size_t> out;
  for (std::size_t z = z0; z < z0 + sz; ++z)
    for (std::size_t y = y0; y < y0 + sy; ++y)
      for (std::size_t x = x0; x < x0 + sx; ++x)
        out.push_back(d.index(x, y, z));
  std::sort(out.begin(), out.end());
  return out;
}

// Random non-overlapping balls and boxes on a coarse grid of cells, with
// two to three slices.
inline vfvm::SceneSpec random_scene(vfvm::Rng& rng)
{
  using namespace vfvm;
  SceneSpec s;
  s.dims = {40, 40, 24};
  s.seed = rng.next();
  s.background_sigma = 2.0;
  for (int cx = 0; cx < 4; ++cx)
    for (int cy = 0; cy < 4; ++cy) {
      if (rng.uniform() < 0.3)
        continue;
      ParticleSpec p;
      p.center = {5.0 + 10 * cx + rng.uniform() - 0.5, 5.0 + 10 * cy + rng.uniform() - 0.5,
                  6.0 + 12 * rng.uniform()};
      if (rng.uniform() < 0.5) {
        p.shape = Shape::ball;
        p.radius = 2.0 + 2.5 * rng.uniform();
      } else {
        p.shape = Shape::box;
        p.size = {2 + 4 * rng.uniform(), 2 + 4 * rng.uniform(), 2 + 6 * rng.uniform()};
        p.rotation = {90 * rng.uniform(), 90 * rng.uniform(), 90 * rng.uniform()};
      }
      p.gray_mean = 100 + 50 * rng.uniform();
      p.gray_sigma = 3.0;
      p.vfvm = rng.uniform();
      p.cut_normal = {rng.normal(), rng.normal(), rng.normal()};
      s.particles.push_back(p);
    }
  s.slices.push_back({Axis::z, static_cast<std::size_t>(6 + rng.below(12))});
  s.slices.push_back({Axis::x, static_cast<std::size_t>(3 + rng.below(34))});
  if (rng.uniform() < 0.5)
    s.slices.push_back({Axis::y, static_cast<std::size_t>(3 + rng.below(34))});
  return s;
}

} // namespace fixture
