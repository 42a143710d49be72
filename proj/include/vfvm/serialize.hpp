#pragma once

#include <filesystem>
#include <string>

#include "vfvm/composite.hpp"

namespace vfvm {

inline constexpr const char* kModelSchema = "vfvm.model";
inline constexpr int kModelVersion = 1;

// Versioned JSON documents. Loading checks schema and version (SchemaError),
// then structure and parameters (StructuralError / ArgumentError).
std::string mixture_to_json(const MixtureModel& m);
MixtureModel mixture_from_json(const std::string& text);

std::string joint_to_json(const JointModel& m);
JointModel joint_from_json(const std::string& text);

std::string composite_to_json(const CompositeModel& m);
CompositeModel composite_from_json(const std::string& text);

void save_composite(const std::filesystem::path& path, const CompositeModel& m);
CompositeModel load_composite(const std::filesystem::path& path);

} // namespace vfvm
