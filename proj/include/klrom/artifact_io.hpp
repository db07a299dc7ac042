#pragma once

#include <filesystem>
#include <string>

#include "klrom/rom.hpp"

namespace klrom {

inline constexpr const char* kArtifactFormat = "klrom-artifact";
inline constexpr int kArtifactVersion = 1;

/// Writes manifest.json plus one raw little-endian float64 file per array.
/// The stiffness DEIM modes are not stored; the online stage only needs their projections.
void save_artifact(const RomArtifact& art, const std::filesystem::path& dir);

/// Reads an artifact directory. Throws ArtifactError naming the offending array on version,
/// size, checksum or shape problems.
RomArtifact load_artifact(const std::filesystem::path& dir);

}  // namespace klrom
