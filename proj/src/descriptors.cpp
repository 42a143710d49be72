#include "vfvm/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vfvm {

double percentile(std::vector<double> values, double p)
{
  if (values.empty())
    throw ArgumentError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw ArgumentError("percentile level must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

DescriptorVector compute_descriptors(std::span<const std::size_t> voxels,
                                     const VoxelVolume& volume, const BoxSearchOptions& box_options)
{
  if (voxels.empty())
    throw StructuralError("compute_descriptors: empty particle");
  const Dims& dims = volume.dims();
  std::vector<double> gray;
  gray.reserve(voxels.size());
  for (auto v : voxels) {
    if (v >= dims.size())
      throw StructuralError("particle voxel outside the volume");
    gray.push_back(volume[v]);
  }

  DescriptorVector d;
  std::sort(gray.begin(), gray.end());
  d.med = percentile(gray, 0.5);
  d.iqr = percentile(gray, 0.75) - percentile(gray, 0.25);
  d.vol = static_cast<double>(voxels.size());

  const BoundingBox box = min_volume_bbox(voxels, dims, 1.0, box_options);
  if (!(box.a1 > 0.0 && box.a2 > 0.0))
    throw StructuralError("degenerate bounding box");
  d.elo = box.a2 / box.a1;
  d.flat = box.a3 / box.a2;

  const double s = volume.spacing();
  d.area = surface_area(voxels, dims, s);
  const double v_phys = d.vol * s * s * s;
  d.sphe = std::cbrt(36.0 * std::numbers::pi * v_phys * v_phys) / d.area;
  return d;
}

std::optional<double> mineral_ratio(std::span<const std::size_t> voxels,
                                    std::span<const PhaseSlice> slices)
{
  std::vector<std::size_t> members(voxels.begin(), voxels.end());
  std::sort(members.begin(), members.end());
  std::vector<std::pair<std::size_t, std::uint8_t>> hits;
  for (const auto& s : slices) {
    if (s.phases.size() != s.voxels.size())
      throw StructuralError("phase slice voxel/phase count mismatch");
    for (std::size_t i = 0; i < s.voxels.size(); ++i)
      if (s.phases[i] > 0 && std::binary_search(members.begin(), members.end(), s.voxels[i]))
        hits.emplace_back(s.voxels[i], s.phases[i]);
  }
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());

  std::size_t valuable = 0, positive = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i].second == 1)
      ++valuable;
    if (i == 0 || hits[i].first != hits[i - 1].first)
      ++positive;
  }
  if (positive == 0)
    return std::nullopt;
  return static_cast<double>(valuable) / static_cast<double>(positive);
}

Dataset build_dataset(const LabelVolume& labels, const VoxelVolume& volume,
                      std::span<const PhaseSlice> slices, const DatasetOptions& options)
{
  if (!(labels.dims() == volume.dims()))
    throw StructuralError("label and grayscale volumes differ in dims");
  const auto parts = particle_voxels(labels);
  const auto counts = register_phase_slices(labels, slices);

  Dataset out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].empty())
      continue;
    const auto rat = counts[k].ratio();
    if (!rat && !options.include_unlabeled)
      continue;
    DatasetRow row;
    row.id = k + 1;
    row.d = compute_descriptors(parts[k], volume, options.box);
    row.d.rat = rat;
    out.rows.push_back(std::move(row));
  }
  return out;
}

} // namespace vfvm
