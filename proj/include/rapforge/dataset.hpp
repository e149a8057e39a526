#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rapforge/detector.hpp"
#include "rapforge/geometry.hpp"
#include "rapforge/image.hpp"
#include "rapforge/io.hpp"
#include "rapforge/patch_transform.hpp"

namespace rapforge {

struct Sample {
  std::string id;
  Imaged image;
  std::optional<ForegroundMaskd> mask;
  GroundTruthSet gt;
  std::optional<std::array<int, 2>> shift;
};

using Dataset = std::vector<Sample>;

/// Loads every manifest image, its mask (when listed) and GT.
Dataset load_dataset(const std::filesystem::path& manifest);

/// Throws DatasetError naming every sample without GT, or (when masks are
/// required) without a mask of matching size.
void validate_dataset(const Dataset& data, bool require_masks);

/// Writes images and masks under `dir` and returns the matching manifest entries.
std::vector<ManifestEntry> save_dataset(const Dataset& data, const std::filesystem::path& dir);

// Synthetic person scenes: a bright square "face" over a darker torso on a
// random noise background. The mask covers face and torso.
struct SceneSpec {
  int width{64};
  int height{64};
  int channels{3};
  int face_size{16};
  double face_value{0.95};
  double torso_value{0.35};
  double background_lo{0.3};
  double background_hi{0.7};
  bool torso{true};
};

struct Scene {
  Imaged image;
  ForegroundMaskd mask;
  Box<double> face;
};

/// Face top-left corner at (left, top).
Scene make_scene(const SceneSpec& spec, int left, int top, std::mt19937_64& rng);
/// Face at a uniformly random position that keeps it inside the frame.
Scene make_scene(const SceneSpec& spec, std::mt19937_64& rng);

/// `count` scenes whose GT is the detector's clean-image output; scenes the
/// detector finds nothing in are regenerated.
Dataset make_synthetic_dataset(std::size_t count, const SceneSpec& spec, const Detector& detector,
                               std::uint64_t seed);

}  // namespace rapforge
