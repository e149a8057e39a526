#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rapforge/geometry.hpp"
#include "rapforge/image.hpp"
#include "rapforge/patch_transform.hpp"

namespace rapforge {

namespace fs = std::filesystem;

/// Gray, gray+alpha, RGB or RGBA; 8 or 16 bit. Alpha is dropped, values mapped to [0, 1].
Imaged read_png(const fs::path& path);
/// One or three channels, values clipped to [0, 1]. bit_depth is 8 or 16.
void write_png(const fs::path& path, const Imaged& image, int bit_depth = 8);

/// <dir>/<stem>.mask.png for an image at <dir>/<stem>.<ext>
fs::path mask_sidecar(const fs::path& image_path);
/// Single-channel 8-bit grayscale, 0..255 -> [0, 1]. Color files are reduced to luminance.
ForegroundMaskd read_mask(const fs::path& path);
void write_mask(const fs::path& path, const ForegroundMaskd& mask);

// Detection dumps: one {"p":..,"x":..,"y":..,"w":..,"h":..} object per line.
std::string detection_to_json(const Detection<double>& det);
Detection<double> detection_from_json(std::string_view line);
std::vector<Detection<double>> read_detections(std::istream& in);
void write_detections(std::ostream& out, std::span<const Detection<double>> dets);

// Dataset manifest: one JSON object per line,
//   {"path": ..., "mask": ..., "gt": [[p, x, y, w, h], ...], "shift": [dx, dy], "source": ...}
// "shift" and "source" are optional; gt rows may also be [x, y, w, h].
// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string path;
  std::string mask;
  std::vector<Detection<double>> gt;
  std::optional<std::array<int, 2>> shift;
  std::string source;
};

std::vector<ManifestEntry> read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries);
ManifestEntry manifest_entry_from_json(std::string_view line);
std::string manifest_entry_to_json(const ManifestEntry& entry);

// Patch checkpoints: 16-bit PNG plus a JSON sidecar next to it (<stem>.json).
struct PatchMetadata {
  int width{0};
  int height{0};
  double alpha{0.0};
  std::string config_hash;
  int iteration{0};
};

fs::path patch_sidecar(const fs::path& png);
void write_patch(const fs::path& png, const Patchd& patch, const PatchMetadata& meta);
Patchd read_patch(const fs::path& png);
PatchMetadata read_patch_metadata(const fs::path& png);

/// 64-bit FNV-1a, hex encoded; used for config fingerprints.
std::string fnv1a_hex(std::string_view data);

}  // namespace rapforge
