#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vfvm/error.hpp"

namespace vfvm {

struct Dims {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  std::size_t size() const noexcept { return nx * ny * nz; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept
  {
    return x + nx * (y + ny * z);
  }
  std::array<std::size_t, 3> coords(std::size_t i) const noexcept
  {
    return {i % nx, (i / nx) % ny, i / (nx * ny)};
  }
  bool contains(long x, long y, long z) const noexcept
  {
    return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < nx &&
           static_cast<std::size_t>(y) < ny && static_cast<std::size_t>(z) < nz;
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

// Dense scalar grid, x fastest. Construction validates dims against the
// value count.
template <class T>
class Grid {
public:
  Grid() = default;
  Grid(Dims dims, double spacing = 1.0)
    : dims_(dims)
    , spacing_(spacing)
    , values_(checked_size(dims))
  {}
  Grid(Dims dims, std::vector<T> values, double spacing = 1.0)
    : dims_(dims)
    , spacing_(spacing)
    , values_(std::move(values))
  {
    if (values_.size() != checked_size(dims))
      throw StructuralError("grid value count does not match dims");
  }

  const Dims& dims() const noexcept { return dims_; }
  double spacing() const noexcept { return spacing_; }
  void set_spacing(double s) { spacing_ = s; }

  std::size_t size() const noexcept { return values_.size(); }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(std::size_t x, std::size_t y, std::size_t z) { return values_[dims_.index(x, y, z)]; }
  const T& at(std::size_t x, std::size_t y, std::size_t z) const
  {
    return values_[dims_.index(x, y, z)];
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

private:
  static std::size_t checked_size(const Dims& d)
  {
    if (d.nx == 0 || d.ny == 0 || d.nz == 0)
      throw StructuralError("grid dims must be >= 1");
    return d.size();
  }

  Dims dims_;
  double spacing_ = 1.0;
  std::vector<T> values_;
};

using VoxelVolume = Grid<float>;
using LabelVolume = Grid<std::uint32_t>;

enum class Axis : std::uint8_t { x = 0, y = 1, z = 2 };

enum class Phase : std::uint8_t { none = 0, valuable = 1, non_valuable = 2 };

// A set of voxels carrying a phase map. Planar slices keep their plane
// descriptor; arbitrary voxel lists have no plane.
struct PhaseSlice {
  struct Plane {
    Axis axis = Axis::z;
    std::size_t position = 0;
  };

  std::vector<std::size_t> voxels;
  std::vector<std::uint8_t> phases;
  std::optional<Plane> plane;

  // grid is row-major over the two remaining axes in ascending order
  // (x,y for a z plane; x,z for a y plane; y,z for an x plane).
  static PhaseSlice from_plane(const Dims& dims, Axis axis, std::size_t position,
                               std::span<const std::uint8_t> grid);

  void validate(const Dims& dims) const;
};

struct ComponentOptions {
  double threshold = 0.5;
  int connectivity = 26;
  std::size_t min_size = 0;
};

// Foreground is value >= threshold. Components keep labels 1..K ordered by
// decreasing size, ties by smallest voxel index.
LabelVolume binarize_and_label(const VoxelVolume& volume, const ComponentOptions& options);

// Labels connected components of a binary mask (non-zero entries).
LabelVolume label_components(const Dims& dims, std::span<const std::uint8_t> mask,
                             int connectivity, std::size_t min_size, double spacing = 1.0);

std::uint32_t max_label(const LabelVolume& labels);

// Sorted voxel index lists, entry k-1 for label k.
std::vector<std::vector<std::size_t>> particle_voxels(const LabelVolume& labels);

struct WeightMap {
  Dims dims;
  std::vector<double> weights;
  double c_f = 0.0;
  double d_hat = 5.0;
  std::size_t foreground_count = 0;
  double background_sum = 0.0;
  double foreground_sum = 0.0;
};

struct WeightMapOptions {
  double d_hat = 5.0;
  double decay = 36.0;
  double floor = 0.04;
};

double background_weight(double d1, double d2, double decay = 36.0, double floor = 0.04);

// Annotated slices are z planes. Distances are measured in-plane to the
// nearest and second-nearest distinct particle label.
WeightMap compute_weight_map(const LabelVolume& labels, std::span<const std::size_t> annotated_z,
                             const WeightMapOptions& options = {});

// In-plane Euclidean distance from each pixel to the nearest and second-nearest
// distinct label, infinity beyond d_hat or when absent. Pixels are x fastest.
struct NearestLabels {
  std::vector<double> d1;
  std::vector<double> d2;
};
NearestLabels nearest_label_distances(const LabelVolume& labels, std::size_t z, double d_hat);

inline constexpr double kBceEpsilon = 1e-7;

double weighted_bce(const LabelVolume& labels, std::span<const double> predictions,
                    const WeightMap& weights);

struct ParticlePhaseCounts {
  std::uint32_t label = 0;
  std::size_t valuable = 0;
  std::size_t non_valuable = 0;
  std::size_t none = 0;
  // distinct voxels with phase > 0 in at least one slice
  std::size_t positive = 0;
  bool flagged = true; // no slice intersection

  std::optional<double> ratio() const
  {
    if (positive == 0)
      return std::nullopt;
    return static_cast<double>(valuable) / static_cast<double>(positive);
  }
};

// Entry k-1 describes label k.
std::vector<ParticlePhaseCounts> register_phase_slices(const LabelVolume& labels,
                                                       std::span<const PhaseSlice> slices);

} // namespace vfvm
