#include "vfvm/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

namespace vfvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::array<int, 3>> neighbor_offsets(int connectivity)
{
  if (connectivity != 6 && connectivity != 26)
    throw ArgumentError("connectivity must be 6 or 26");
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int n = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (n == 0)
          continue;
        if (connectivity == 6 && n != 1)
          continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

// Felzenszwalb-Huttenlocher lower envelope of parabolas; f and d hold squared
// distances.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z)
{
  const int n = static_cast<int>(f.size());
  d.assign(n, kInf);
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q]))
      continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k])
        --k; // z[0] is -inf, so k stays >= 0
      else
        break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0)
    return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q)
      ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

} // namespace

PhaseSlice PhaseSlice::from_plane(const Dims& dims, Axis axis, std::size_t position,
                                  std::span<const std::uint8_t> grid)
{
  std::size_t w = 0, h = 0, depth = 0;
  switch (axis) {
  case Axis::x: w = dims.ny; h = dims.nz; depth = dims.nx; break;
  case Axis::y: w = dims.nx; h = dims.nz; depth = dims.ny; break;
  case Axis::z: w = dims.nx; h = dims.ny; depth = dims.nz; break;
  }
  if (position >= depth)
    throw StructuralError("phase slice lies outside the volume");
  if (grid.size() != w * h)
    throw StructuralError("phase slice grid size does not match the plane");

  PhaseSlice s;
  s.plane = Plane{axis, position};
  s.voxels.reserve(grid.size());
  s.phases.assign(grid.begin(), grid.end());
  for (std::size_t b = 0; b < h; ++b)
    for (std::size_t a = 0; a < w; ++a) {
      switch (axis) {
      case Axis::x: s.voxels.push_back(dims.index(position, a, b)); break;
      case Axis::y: s.voxels.push_back(dims.index(a, position, b)); break;
      case Axis::z: s.voxels.push_back(dims.index(a, b, position)); break;
      }
    }
  s.validate(dims);
  return s;
}

void PhaseSlice::validate(const Dims& dims) const
{
  if (voxels.size() != phases.size())
    throw StructuralError("phase slice voxel and phase counts differ");
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    if (voxels[i] >= dims.size())
      throw StructuralError("phase slice voxel outside the volume");
    if (phases[i] > 2)
      throw StructuralError("phase value must be 0, 1 or 2");
  }
}

LabelVolume label_components(const Dims& dims, std::span<const std::uint8_t> mask,
                             int connectivity, std::size_t min_size, double spacing)
{
  if (mask.size() != dims.size())
    throw StructuralError("mask size does not match dims");
  const auto offsets = neighbor_offsets(connectivity);

  struct Component {
    std::size_t first;
    std::vector<std::size_t> voxels;
  };
  std::vector<Component> comps;
  std::vector<std::uint8_t> seen(dims.size(), 0);
  std::vector<std::size_t> stack;

  for (std::size_t seed = 0; seed < dims.size(); ++seed) {
    if (!mask[seed] || seen[seed])
      continue;
    Component c{seed, {}};
    seen[seed] = 1;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      c.voxels.push_back(cur);
      const auto [x, y, z] = dims.coords(cur);
      for (const auto& o : offsets) {
        const long nx = long(x) + o[0], ny = long(y) + o[1], nz = long(z) + o[2];
        if (!dims.contains(nx, ny, nz))
          continue;
        const std::size_t ni = dims.index(nx, ny, nz);
        if (mask[ni] && !seen[ni]) {
          seen[ni] = 1;
          stack.push_back(ni);
        }
      }
    }
    if (c.voxels.size() >= min_size)
      comps.push_back(std::move(c));
  }

  std::stable_sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    if (a.voxels.size() != b.voxels.size())
      return a.voxels.size() > b.voxels.size();
    return a.first < b.first;
  });

  LabelVolume out(dims, spacing);
  for (std::size_t k = 0; k < comps.size(); ++k)
    for (std::size_t v : comps[k].voxels)
      out[v] = static_cast<std::uint32_t>(k + 1);
  return out;
}

LabelVolume binarize_and_label(const VoxelVolume& volume, const ComponentOptions& options)
{
  if (!std::isfinite(options.threshold))
    throw ArgumentError("threshold must be finite");
  if (volume.size() != volume.dims().size())
    throw StructuralError("volume value count does not match dims");
  std::vector<std::uint8_t> mask(volume.size());
  for (std::size_t i = 0; i < volume.size(); ++i)
    mask[i] = volume[i] >= options.threshold ? 1 : 0;
  return label_components(volume.dims(), mask, options.connectivity, options.min_size,
                          volume.spacing());
}

std::uint32_t max_label(const LabelVolume& labels)
{
  std::uint32_t m = 0;
  for (auto v : labels.values())
    m = std::max(m, v);
  return m;
}

std::vector<std::vector<std::size_t>> particle_voxels(const LabelVolume& labels)
{
  std::vector<std::vector<std::size_t>> out(max_label(labels));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 0)
      out[labels[i] - 1].push_back(i);
  return out;
}

double background_weight(double d1, double d2, double decay, double floor)
{
  if (!std::isfinite(d1) || !std::isfinite(d2))
    return floor;
  return floor + std::exp(-(d1 * d1 + d2 * d2) / decay);
}

NearestLabels nearest_label_distances(const LabelVolume& labels, std::size_t z, double d_hat)
{
  const Dims& dims = labels.dims();
  if (z >= dims.nz)
    throw StructuralError("annotated slice outside the volume");
  const std::size_t w = dims.nx, h = dims.ny;
  const std::size_t base = dims.index(0, 0, z);

  struct Box {
    std::size_t x0, y0, x1, y1;
  };
  std::map<std::uint32_t, Box> boxes;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto l = labels[base + x + w * y];
      if (l == 0)
        continue;
      auto [it, inserted] = boxes.try_emplace(l, Box{x, y, x, y});
      if (!inserted) {
        auto& b = it->second;
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }

  NearestLabels out{std::vector<double>(w * h, kInf), std::vector<double>(w * h, kInf)};
  const std::size_t pad = std::isfinite(d_hat)
                            ? static_cast<std::size_t>(std::ceil(std::max(0.0, d_hat)))
                            : std::max(w, h);

  std::vector<double> f, d, zbuf, col_in, col_out;
  std::vector<int> v;
  std::vector<double> grid;
  for (const auto& [label, b] : boxes) {
    const std::size_t x0 = b.x0 > pad ? b.x0 - pad : 0;
    const std::size_t y0 = b.y0 > pad ? b.y0 - pad : 0;
    const std::size_t x1 = std::min(w - 1, b.x1 + pad);
    const std::size_t y1 = std::min(h - 1, b.y1 + pad);
    const std::size_t rw = x1 - x0 + 1, rh = y1 - y0 + 1;

    grid.assign(rw * rh, kInf);
    for (std::size_t y = y0; y <= y1; ++y)
      for (std::size_t x = x0; x <= x1; ++x)
        if (labels[base + x + w * y] == label)
          grid[(x - x0) + rw * (y - y0)] = 0.0;

    // columns, then rows
    f.resize(rh);
    for (std::size_t x = 0; x < rw; ++x) {
      for (std::size_t y = 0; y < rh; ++y)
        f[y] = grid[x + rw * y];
      edt_1d(f, d, v, zbuf);
      for (std::size_t y = 0; y < rh; ++y)
        grid[x + rw * y] = d[y];
    }
    f.resize(rw);
    for (std::size_t y = 0; y < rh; ++y) {
      for (std::size_t x = 0; x < rw; ++x)
        f[x] = grid[x + rw * y];
      edt_1d(f, d, v, zbuf);
      for (std::size_t x = 0; x < rw; ++x)
        grid[x + rw * y] = d[x];
    }

    for (std::size_t y = 0; y < rh; ++y)
      for (std::size_t x = 0; x < rw; ++x) {
        const double dist = std::sqrt(grid[x + rw * y]);
        const std::size_t p = (x + x0) + w * (y + y0);
        if (dist < out.d1[p]) {
          out.d2[p] = out.d1[p];
          out.d1[p] = dist;
        } else if (dist < out.d2[p]) {
          out.d2[p] = dist;
        }
      }
  }

  for (std::size_t p = 0; p < w * h; ++p) {
    if (out.d1[p] > d_hat)
      out.d1[p] = kInf;
    if (out.d2[p] > d_hat)
      out.d2[p] = kInf;
  }
  return out;
}

WeightMap compute_weight_map(const LabelVolume& labels, std::span<const std::size_t> annotated_z,
                             const WeightMapOptions& options)
{
  if (annotated_z.empty())
    throw ArgumentError("at least one annotated slice is required");
  if (!(options.decay > 0.0) || !(options.floor >= 0.0) || !(options.d_hat >= 0.0))
    throw ArgumentError("weight map parameters out of range");
  std::vector<std::size_t> zs(annotated_z.begin(), annotated_z.end());
  std::sort(zs.begin(), zs.end());
  zs.erase(std::unique(zs.begin(), zs.end()), zs.end());

  const Dims& dims = labels.dims();
  WeightMap wm;
  wm.dims = dims;
  wm.d_hat = options.d_hat;
  wm.weights.assign(dims.size(), 0.0);

  const std::size_t plane = dims.nx * dims.ny;
  for (std::size_t z : zs) {
    const auto nearest = nearest_label_distances(labels, z, options.d_hat);
    const std::size_t base = dims.index(0, 0, z);
    for (std::size_t p = 0; p < plane; ++p) {
      if (labels[base + p] > 0) {
        ++wm.foreground_count;
      } else {
        const double w =
          background_weight(nearest.d1[p], nearest.d2[p], options.decay, options.floor);
        wm.weights[base + p] = w;
        wm.background_sum += w;
      }
    }
  }
  if (wm.foreground_count == 0)
    throw DataError("no foreground voxels in the annotated slices; c_f is undefined");

  wm.c_f = wm.background_sum / static_cast<double>(wm.foreground_count);
  for (std::size_t z : zs) {
    const std::size_t base = dims.index(0, 0, z);
    for (std::size_t p = 0; p < plane; ++p)
      if (labels[base + p] > 0) {
        wm.weights[base + p] = wm.c_f;
        wm.foreground_sum += wm.c_f;
      }
  }
  return wm;
}

double weighted_bce(const LabelVolume& labels, std::span<const double> predictions,
                    const WeightMap& weights)
{
  if (predictions.size() != labels.size() || weights.weights.size() != labels.size() ||
      !(weights.dims == labels.dims()))
    throw StructuralError("weighted_bce: dims mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double w = weights.weights[i];
    if (w == 0.0)
      continue;
    const double p = std::clamp(predictions[i], kBceEpsilon, 1.0 - kBceEpsilon);
    loss -= w * (labels[i] > 0 ? std::log(p) : std::log1p(-p));
  }
  return loss;
}

std::vector<ParticlePhaseCounts> register_phase_slices(const LabelVolume& labels,
                                                       std::span<const PhaseSlice> slices)
{
  // (label, phase, voxel) triples; duplicates from overlapping slices collapse.
  std::vector<std::tuple<std::uint32_t, std::uint8_t, std::size_t>> hits;
  std::vector<std::pair<std::uint32_t, std::size_t>> positive;
  for (const auto& s : slices) {
    s.validate(labels.dims());
    for (std::size_t i = 0; i < s.voxels.size(); ++i) {
      const auto l = labels[s.voxels[i]];
      if (l == 0)
        continue;
      hits.emplace_back(l, s.phases[i], s.voxels[i]);
      if (s.phases[i] > 0)
        positive.emplace_back(l, s.voxels[i]);
    }
  }
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  std::sort(positive.begin(), positive.end());
  positive.erase(std::unique(positive.begin(), positive.end()), positive.end());

  std::vector<ParticlePhaseCounts> out(max_label(labels));
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k].label = static_cast<std::uint32_t>(k + 1);
  for (const auto& [l, phase, voxel] : hits) {
    auto& c = out[l - 1];
    c.flagged = false;
    switch (phase) {
    case 0: ++c.none; break;
    case 1: ++c.valuable; break;
    default: ++c.non_valuable; break;
    }
  }
  for (const auto& [l, voxel] : positive)
    ++out[l - 1].positive;
  return out;
}

} // namespace vfvm
