#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vfvm/voxel.hpp"

namespace vfvm::io {

// Two on-disk layouts:
//  * raw little-endian grid plus a JSON sidecar header
//    {"dims":[nx,ny,nz],"spacing":s,"dtype":"float32","data_file":"name.raw"}
//  * single-file container: "VFVMVOL1", u64 LE header length, the same JSON
//    header (without data_file), then the raw payload.
// Readers accept uint8, uint16, uint32 and float32 payloads. Files ending in
// ".vxl" use the container; anything else is treated as a sidecar header.

void write_volume(const std::filesystem::path& path, const VoxelVolume& volume);
void write_labels(const std::filesystem::path& path, const LabelVolume& labels);
VoxelVolume read_volume(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);

// Phase slice documents: {"axis":"z","position":k,"width":w,"height":h,
// "phases":[...]} for planes, or {"voxels":[[x,y,z],...],"phases":[...]}.
void write_phase_slice(const std::filesystem::path& path, const PhaseSlice& slice,
                       const Dims& dims);
PhaseSlice read_phase_slice(const std::filesystem::path& path, const Dims& dims);

// Weight maps are stored as float32 grids.
void write_weight_map(const std::filesystem::path& path, const WeightMap& map);

} // namespace vfvm::io
