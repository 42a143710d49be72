#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vfvm/composite.hpp"
#include "vfvm/descriptors.hpp"
#include "vfvm/voxel.hpp"

namespace vfvm {

enum class Shape { ball, box, plate };

struct ParticleSpec {
  Shape shape = Shape::ball;
  std::array<double, 3> center{};
  double radius = 1.0;                  // ball, plate
  std::array<double, 3> size{1, 1, 1};  // box edge lengths
  double thickness = 1.0;               // plate
  std::array<double, 3> rotation{};     // degrees about z, then y, then x
  double gray_mean = 100.0;
  double gray_sigma = 0.0;
  double vfvm = 0.5;
  std::array<double, 3> cut_normal{1.0, 0.37, 0.11};
};

struct SliceSpec {
  Axis axis = Axis::z;
  std::size_t position = 0;
};

struct SceneSpec {
  Dims dims;
  double spacing = 1.0;
  double background_mean = 0.0;
  double background_sigma = 0.0;
  std::vector<ParticleSpec> particles;
  std::vector<SliceSpec> slices;
  std::uint64_t seed = 1;
};

SceneSpec scene_spec_from_json(const std::string& text);
SceneSpec read_scene_spec(const std::filesystem::path& path);
std::string scene_spec_to_json(const SceneSpec& spec);

struct Scene {
  VoxelVolume volume;
  LabelVolume labels; // particle k of the spec has label k + 1
  std::vector<PhaseSlice> slices;
};

// Throws DataError when two primitives share a voxel.
Scene generate_scene(const SceneSpec& spec);

// Shuffled rows: f_v draws carry rat = 1, f_nv draws rat = 0.
Dataset generate_composite_dataset(const CompositeModel& truth, std::size_t n_v, std::size_t n_nv,
                                   std::size_t n_c, std::uint64_t seed);

// Known composite model with moderately separated classes, used by the
// prediction benchmark.
CompositeModel benchmark_truth_model();

} // namespace vfvm
