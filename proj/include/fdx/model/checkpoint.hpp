#pragma once

#include "fdx/model/parameters.hpp"

#include <filesystem>

namespace fdx::model {

// Directory with config.json, weights.bin (little-endian f32) and
// manifest.json (tensor names, shapes, byte offsets, weights checksum).
void save_checkpoint(const Parameters<float>& p, const std::filesystem::path& dir);

// Throws CorruptCheckpoint on missing files, layout or checksum mismatch and
// ConfigHashMismatch when config.json disagrees with its recorded hash.
Parameters<float> load_checkpoint(const std::filesystem::path& dir);

} // namespace fdx::model
