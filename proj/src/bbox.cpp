#include "vfvm/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

namespace vfvm {

namespace {

using Vec3 = std::array<double, 3>;
using Vec2 = std::array<double, 2>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross(const Vec3& a, const Vec3& b)
{
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(Vec3 v)
{
  const double n = std::sqrt(dot(v, v));
  return {v[0] / n, v[1] / n, v[2] / n};
}

std::uint64_t key(std::int64_t a, std::int64_t b)
{
  return (static_cast<std::uint64_t>(a) << 32) ^ static_cast<std::uint64_t>(b & 0xffffffff);
}

using IPoint = std::array<std::int64_t, 3>;

// Keeps the two extreme points on every line parallel to `axis`.
std::vector<IPoint> reduce_lines(const std::vector<IPoint>& pts, int axis)
{
  const int a = (axis + 1) % 3, b = (axis + 2) % 3;
  std::unordered_map<std::uint64_t, std::pair<IPoint, IPoint>> lines;
  lines.reserve(pts.size());
  std::vector<std::uint64_t> order;
  for (const auto& p : pts) {
    const auto k = key(p[a], p[b]);
    auto [it, inserted] = lines.try_emplace(k, p, p);
    if (inserted) {
      order.push_back(k);
      continue;
    }
    if (p[axis] < it->second.first[axis])
      it->second.first = p;
    if (p[axis] > it->second.second[axis])
      it->second.second = p;
  }
  std::vector<IPoint> out;
  out.reserve(order.size() * 2);
  for (auto k : order) {
    const auto& [lo, hi] = lines[k];
    out.push_back(lo);
    if (hi != lo)
      out.push_back(hi);
  }
  return out;
}

struct Orthonormal {
  Vec3 n, e1, e2;
};

Orthonormal basis_for(const Vec3& n)
{
  // helper axis: the coordinate axis least aligned with n
  int m = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(n[i]) < std::abs(n[m]))
      m = i;
  Vec3 h{0, 0, 0};
  h[m] = 1.0;
  const double d = dot(h, n);
  const Vec3 e1 = normalized({h[0] - d * n[0], h[1] - d * n[1], h[2] - d * n[2]});
  return {n, e1, cross(n, e1)};
}

double cross2(const Vec2& o, const Vec2& a, const Vec2& b)
{
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

std::vector<Vec2> hull2d(std::vector<Vec2> p)
{
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3)
    return p;
  std::vector<Vec2> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross2(h[k - 2], h[k - 1], p[i]) <= 0)
      --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross2(h[k - 2], h[k - 1], p[i - 1]) <= 0)
      --k;
    h[k++] = p[i - 1];
  }
  h.resize(k - 1);
  return h;
}

struct Candidate {
  double volume = std::numeric_limits<double>::infinity();
  Vec3 n{0, 0, 1};
  Vec3 u{1, 0, 0};
};

// Smallest box with one face normal to n.
Candidate evaluate_normal(const std::vector<Vec3>& pts, const Vec3& n)
{
  const auto b = basis_for(n);
  double hmin = std::numeric_limits<double>::infinity(), hmax = -hmin;
  std::vector<Vec2> proj;
  proj.reserve(pts.size());
  for (const auto& p : pts) {
    const double h = dot(p, b.n);
    hmin = std::min(hmin, h);
    hmax = std::max(hmax, h);
    proj.push_back({dot(p, b.e1), dot(p, b.e2)});
  }
  const double height = hmax - hmin;
  const auto hull = hull2d(std::move(proj));

  Candidate best;
  best.n = n;
  if (hull.size() < 3) {
    // collinear projection: zero-area rectangle along the segment
    Vec2 d{1, 0};
    if (hull.size() == 2) {
      const double dx = hull[1][0] - hull[0][0], dy = hull[1][1] - hull[0][1];
      const double len = std::hypot(dx, dy);
      d = {dx / len, dy / len};
    }
    best.volume = 0.0 * height;
    best.u = normalized({d[0] * b.e1[0] + d[1] * b.e2[0], d[0] * b.e1[1] + d[1] * b.e2[1],
                         d[0] * b.e1[2] + d[1] * b.e2[2]});
    return best;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& p0 = hull[i];
    const auto& p1 = hull[(i + 1) % hull.size()];
    const double dx = p1[0] - p0[0], dy = p1[1] - p0[1];
    const double len = std::hypot(dx, dy);
    if (len == 0.0)
      continue;
    const Vec2 d{dx / len, dy / len};
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& q : hull) {
      const double s = q[0] * d[0] + q[1] * d[1];
      const double t = -q[0] * d[1] + q[1] * d[0];
      umin = std::min(umin, s);
      umax = std::max(umax, s);
      vmin = std::min(vmin, t);
      vmax = std::max(vmax, t);
    }
    const double vol = (umax - umin) * (vmax - vmin) * height;
    if (vol < best.volume) {
      best.volume = vol;
      best.u = {d[0] * b.e1[0] + d[1] * b.e2[0], d[0] * b.e1[1] + d[1] * b.e2[1],
                d[0] * b.e1[2] + d[1] * b.e2[2]};
    }
  }
  return best;
}

Vec3 spherical(double polar, double azimuth)
{
  return {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
          std::cos(polar)};
}

} // namespace

std::vector<std::array<double, 3>> hull_candidate_points(std::span<const std::size_t> voxels,
                                                         const Dims& dims)
{
  std::vector<IPoint> corners;
  corners.reserve(voxels.size() * 8);
  for (std::size_t v : voxels) {
    const auto c = dims.coords(v);
    for (int k = 0; k < 8; ++k)
      corners.push_back({std::int64_t(c[0]) + (k & 1), std::int64_t(c[1]) + ((k >> 1) & 1),
                         std::int64_t(c[2]) + ((k >> 2) & 1)});
  }
  auto pts = reduce_lines(corners, 0);
  pts = reduce_lines(pts, 1);
  pts = reduce_lines(pts, 2);
  std::sort(pts.begin(), pts.end());
  std::vector<std::array<double, 3>> out;
  out.reserve(pts.size());
  for (const auto& p : pts)
    out.push_back({double(p[0]), double(p[1]), double(p[2])});
  return out;
}

std::array<double, 3> extents_along(std::span<const std::array<double, 3>> points,
                                    const std::array<std::array<double, 3>, 3>& rows)
{
  std::array<double, 3> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& p : points)
    for (int i = 0; i < 3; ++i) {
      const double s = dot(p, rows[i]);
      lo[i] = std::min(lo[i], s);
      hi[i] = std::max(hi[i], s);
    }
  return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
}

BoundingBox min_volume_bbox(std::span<const std::size_t> voxels, const Dims& dims,
                            double spacing, const BoxSearchOptions& options)
{
  if (voxels.empty())
    throw StructuralError("min_volume_bbox: empty voxel set");
  auto pts = hull_candidate_points(voxels, dims);

  // Shift by an integer offset so coordinates stay exact.
  std::array<double, 3> shift{0, 0, 0};
  for (const auto& p : pts)
    for (int i = 0; i < 3; ++i)
      shift[i] += p[i];
  for (int i = 0; i < 3; ++i)
    shift[i] = std::round(shift[i] / double(pts.size()));
  for (auto& p : pts)
    for (int i = 0; i < 3; ++i)
      p[i] -= shift[i];

  constexpr double deg = std::numbers::pi / 180.0;
  const double step = options.coarse_step_deg * deg;

  std::vector<Candidate> found;
  for (const Vec3& axis : {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}})
    found.push_back(evaluate_normal(pts, axis));
  const int rings = static_cast<int>(std::ceil(0.5 * std::numbers::pi / step));
  for (int r = 1; r <= rings; ++r) {
    const double polar = std::min(0.5 * std::numbers::pi, r * step);
    const int count = std::max(1, static_cast<int>(std::ceil(2.0 * std::numbers::pi *
                                                              std::sin(polar) / step)));
    // at the equator only half the circle is distinct
    const int used = (r * step >= 0.5 * std::numbers::pi) ? (count + 1) / 2 : count;
    for (int a = 0; a < used; ++a)
      found.push_back(evaluate_normal(pts, spherical(polar, 2.0 * std::numbers::pi * a / count)));
  }

  std::stable_sort(found.begin(), found.end(),
                   [](const Candidate& a, const Candidate& b) { return a.volume < b.volume; });

  Candidate best = found.front();
  const int refine = std::min<int>(options.refine_candidates, static_cast<int>(found.size()));
  for (int c = 0; c < refine; ++c) {
    Candidate cur = found[c];
    double delta = step;
    while (delta >= options.final_step_deg * deg) {
      bool improved = false;
      const auto b = basis_for(cur.n);
      for (const auto& dir : {b.e1, b.e2}) {
        for (double sgn : {1.0, -1.0}) {
          const Vec3 trial = normalized({cur.n[0] + sgn * delta * dir[0],
                                         cur.n[1] + sgn * delta * dir[1],
                                         cur.n[2] + sgn * delta * dir[2]});
          const Candidate t = evaluate_normal(pts, trial);
          if (t.volume < cur.volume * (1.0 - 1e-12)) {
            cur = t;
            improved = true;
          }
        }
      }
      if (!improved)
        delta *= 0.5;
    }
    if (cur.volume < best.volume * (1.0 - 1e-12))
      best = cur;
  }

  const Vec3 u = normalized(best.u);
  const Vec3 w = cross(best.n, u);
  std::array<std::array<double, 3>, 3> rows{best.n, u, w};
  const auto ext = extents_along(pts, rows);

  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ext[a] > ext[b]; });

  BoundingBox box;
  box.a1 = ext[order[0]] * spacing;
  box.a2 = ext[order[1]] * spacing;
  box.a3 = ext[order[2]] * spacing;
  for (int i = 0; i < 3; ++i)
    box.axes[i] = rows[order[i]];

  std::array<double, 3> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& p : pts)
    for (int i = 0; i < 3; ++i) {
      const double s = dot(p, box.axes[i]);
      lo[i] = std::min(lo[i], s);
      hi[i] = std::max(hi[i], s);
    }
  for (int k = 0; k < 3; ++k) {
    double c = shift[k];
    for (int i = 0; i < 3; ++i)
      c += 0.5 * (lo[i] + hi[i]) * box.axes[i][k];
    box.center[k] = c * spacing;
  }
  return box;
}

} // namespace vfvm
