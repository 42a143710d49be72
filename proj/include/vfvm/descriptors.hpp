#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfvm/voxel.hpp"

namespace vfvm {

// Oriented box; a1 >= a2 >= a3 in length units, axes[i] is the unit direction
// of the side with length a(i+1).
struct BoundingBox {
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  std::array<std::array<double, 3>, 3> axes{};
  std::array<double, 3> center{};

  double volume() const noexcept { return a1 * a2 * a3; }
};

struct BoxSearchOptions {
  double coarse_step_deg = 4.0;
  double final_step_deg = 0.05;
  int refine_candidates = 6;
};

// Minimum-volume oriented box around the voxel cubes of a particle. The
// search scans box normals over a hemisphere grid, solves the in-plane
// rectangle exactly with rotating calipers, then refines the best normals
// locally.
BoundingBox min_volume_bbox(std::span<const std::size_t> voxels, const Dims& dims,
                            double spacing = 1.0, const BoxSearchOptions& options = {});

// Points whose convex hull equals the hull of the voxel cubes (corner
// points with line-interior points removed along each axis).
std::vector<std::array<double, 3>> hull_candidate_points(std::span<const std::size_t> voxels,
                                                         const Dims& dims);

// Extents of a point cloud along the rows of a rotation matrix.
std::array<double, 3> extents_along(std::span<const std::array<double, 3>> points,
                                    const std::array<std::array<double, 3>, 3>& rows);

enum class AreaEstimator { crofton13, face_count };

// Crofton weights (sum 1) of the 13 lattice directions: 3 axes, 6 face
// diagonals, 4 space diagonals.
std::array<double, 3> crofton_class_weights();

// Surface area from weighted 2x2x2 configuration counts; face_count counts
// exposed voxel faces instead.
double surface_area(std::span<const std::size_t> voxels, const Dims& dims, double spacing = 1.0,
                    AreaEstimator estimator = AreaEstimator::crofton13);

// 256-entry configuration weight table for unit spacing, bit b of the index
// is voxel (b&1, (b>>1)&1, (b>>2)&1) of the cell.
const std::array<double, 256>& crofton_configuration_weights();

struct DescriptorVector {
  double med = 0.0;
  double iqr = 0.0;
  double vol = 0.0;
  double area = 0.0;
  double elo = 0.0;
  double flat = 0.0;
  double sphe = 0.0;
  std::optional<double> rat;

  // (med, iqr, vol, elo, flat, sphe)
  std::array<double, 6> ct_vector() const { return {med, iqr, vol, elo, flat, sphe}; }
};

// Linear interpolation between order statistics at h = (n-1)p.
double percentile(std::vector<double> values, double p);

DescriptorVector compute_descriptors(std::span<const std::size_t> voxels,
                                     const VoxelVolume& volume,
                                     const BoxSearchOptions& box_options = {});

std::optional<double> mineral_ratio(std::span<const std::size_t> voxels,
                                    std::span<const PhaseSlice> slices);

struct DatasetRow {
  std::uint64_t id = 0;
  DescriptorVector d;
  std::string source;
};

struct Dataset {
  std::vector<DatasetRow> rows;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
};

struct DatasetOptions {
  // keep particles without slice intersection (rat absent)
  bool include_unlabeled = false;
  BoxSearchOptions box;
};

Dataset build_dataset(const LabelVolume& labels, const VoxelVolume& volume,
                      std::span<const PhaseSlice> slices, const DatasetOptions& options = {});

// CSV with header id,med,iqr,vol,elo,flat,sphe,rat; rat empty when absent.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(std::istream& in, const std::string& source = "<stream>");
Dataset read_dataset_csv(const std::string& path);

// Shortest round-trip decimal text for a double.
std::string format_double(double v);

} // namespace vfvm
