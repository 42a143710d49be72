#include "vfvm/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vfvm {

namespace {

// Normalized solid-angle (Voronoi cell on the sphere) weights of one
// direction per class; 3*axis + 6*face + 4*space = 1.
constexpr double kGammaAxis = 0.09155578240952;
constexpr double kGammaFace = 0.07396125575216;
constexpr double kGammaSpace = 0.07039127956464;

struct Direction {
  int dx, dy, dz;
  double weight; // gamma * area per line / multiplicity of the pair in cells
};

std::array<double, 256> build_table()
{
  std::vector<Direction> dirs;
  const double rs2 = 1.0 / std::sqrt(2.0), rs3 = 1.0 / std::sqrt(3.0);
  // axis pairs lie on 4 cells, face diagonals on 2, space diagonals on 1
  dirs.push_back({1, 0, 0, kGammaAxis / 4.0});
  dirs.push_back({0, 1, 0, kGammaAxis / 4.0});
  dirs.push_back({0, 0, 1, kGammaAxis / 4.0});
  for (const auto& d : {std::array<int, 3>{1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}, {0, 1, 1},
                        {0, 1, -1}})
    dirs.push_back({d[0], d[1], d[2], kGammaFace * rs2 / 2.0});
  for (const auto& d : {std::array<int, 3>{1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {1, -1, -1}})
    dirs.push_back({d[0], d[1], d[2], kGammaSpace * rs3});

  std::array<double, 256> table{};
  for (int cfg = 0; cfg < 256; ++cfg) {
    double s = 0.0;
    for (const auto& d : dirs) {
      for (int b = 0; b < 8; ++b) {
        const int x = b & 1, y = (b >> 1) & 1, z = (b >> 2) & 1;
        const int x2 = x + d.dx, y2 = y + d.dy, z2 = z + d.dz;
        if (x2 < 0 || x2 > 1 || y2 < 0 || y2 > 1 || z2 < 0 || z2 > 1)
          continue;
        const int b2 = x2 | (y2 << 1) | (z2 << 2);
        if (((cfg >> b) & 1) != ((cfg >> b2) & 1))
          s += d.weight;
      }
    }
    table[cfg] = 2.0 * s;
  }
  return table;
}

struct LocalMask {
  long x0, y0, z0;
  long w, h, d;
  std::vector<std::uint8_t> bits;

  bool at(long x, long y, long z) const
  {
    x -= x0;
    y -= y0;
    z -= z0;
    if (x < 0 || y < 0 || z < 0 || x >= w || y >= h || z >= d)
      return false;
    return bits[static_cast<std::size_t>(x + w * (y + h * z))] != 0;
  }
};

LocalMask make_mask(std::span<const std::size_t> voxels, const Dims& dims)
{
  long lo[3] = {std::numeric_limits<long>::max(), std::numeric_limits<long>::max(),
                std::numeric_limits<long>::max()};
  long hi[3] = {-1, -1, -1};
  for (auto v : voxels) {
    const auto c = dims.coords(v);
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(lo[i], static_cast<long>(c[i]));
      hi[i] = std::max(hi[i], static_cast<long>(c[i]));
    }
  }
  LocalMask m{lo[0], lo[1], lo[2], hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1, {}};
  m.bits.assign(static_cast<std::size_t>(m.w * m.h * m.d), 0);
  for (auto v : voxels) {
    const auto c = dims.coords(v);
    m.bits[static_cast<std::size_t>((long(c[0]) - m.x0) +
                                    m.w * ((long(c[1]) - m.y0) + m.h * (long(c[2]) - m.z0)))] = 1;
  }
  return m;
}

} // namespace

std::array<double, 3> crofton_class_weights() { return {kGammaAxis, kGammaFace, kGammaSpace}; }

const std::array<double, 256>& crofton_configuration_weights()
{
  static const std::array<double, 256> table = build_table();
  return table;
}

double surface_area(std::span<const std::size_t> voxels, const Dims& dims, double spacing,
                    AreaEstimator estimator)
{
  if (voxels.empty())
    throw StructuralError("surface_area: empty voxel set");
  const LocalMask m = make_mask(voxels, dims);

  if (estimator == AreaEstimator::face_count) {
    static constexpr int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                     {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::size_t faces = 0;
    for (auto v : voxels) {
      const auto c = dims.coords(v);
      for (const auto& o : nb)
        if (!m.at(long(c[0]) + o[0], long(c[1]) + o[1], long(c[2]) + o[2]))
          ++faces;
    }
    return static_cast<double>(faces) * spacing * spacing;
  }

  const auto& table = crofton_configuration_weights();
  double s = 0.0;
  // every cell whose min corner lies in [lo-1, hi]
  for (long z = m.z0 - 1; z < m.z0 + m.d; ++z)
    for (long y = m.y0 - 1; y < m.y0 + m.h; ++y)
      for (long x = m.x0 - 1; x < m.x0 + m.w; ++x) {
        int cfg = 0;
        for (int b = 0; b < 8; ++b)
          if (m.at(x + (b & 1), y + ((b >> 1) & 1), z + ((b >> 2) & 1)))
            cfg |= 1 << b;
        if (cfg != 0 && cfg != 255)
          s += table[cfg];
      }
  return s * spacing * spacing;
}

} // namespace vfvm
