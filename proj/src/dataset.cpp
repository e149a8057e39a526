#include "rapforge/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace rapforge {

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// "dir/a.png@25,0" -> "a_25_0"
std::string file_stem(const std::string& id) {
  std::string name = fs::path(id).filename().string();
  if (const auto at = name.find(".png"); at != std::string::npos) name.erase(at, 4);
  for (char& ch : name)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return name;
}

}  // namespace

Dataset load_dataset(const fs::path& manifest) {
  const fs::path base = manifest.parent_path();
  Dataset out;
  for (const auto& e : read_manifest(manifest)) {
    Sample s;
    s.id = e.path;
    s.image = read_png(resolve(base, e.path));
    if (!e.mask.empty()) s.mask = read_mask(resolve(base, e.mask));
    s.gt.image_id = e.path;
    for (const auto& d : e.gt) s.gt.boxes.push_back(d.box);
    s.shift = e.shift;
    out.push_back(std::move(s));
  }
  return out;
}

void validate_dataset(const Dataset& data, bool require_masks) {
  std::vector<std::string> offenders;
  for (const auto& s : data) {
    const bool mask_ok = !require_masks || (s.mask && s.mask->width() == s.image.width() &&
                                            s.mask->height() == s.image.height());
    if (s.gt.empty() || !mask_ok) offenders.push_back(s.id);
  }
  if (!offenders.empty())
    throw DatasetError(require_masks ? "samples missing ground truth or mask" : "samples missing ground truth",
                       std::move(offenders));
}

std::vector<ManifestEntry> save_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  std::set<std::string> used;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    std::string stem = file_stem(s.id);
    if (stem.empty() || !used.insert(stem).second) stem += "_" + std::to_string(i);
    ManifestEntry e;
    e.path = stem + ".png";
    write_png(dir / e.path, s.image);
    if (s.mask) {
      e.mask = stem + ".mask.png";
      write_mask(dir / e.mask, *s.mask);
    }
    for (const auto& b : s.gt.boxes) e.gt.push_back({1.0, b});
    e.shift = s.shift;
    entries.push_back(std::move(e));
  }
  return entries;
}

Scene make_scene(const SceneSpec& spec, int left, int top, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> noise(spec.background_lo, spec.background_hi);
  Imaged image(spec.width, spec.height, spec.channels);
  for (int c = 0; c < spec.channels; ++c)
    for (int x = 0; x < spec.width; ++x)
      for (int y = 0; y < spec.height; ++y) image.at(x, y, c) = noise(rng);

  ForegroundMaskd mask = ForegroundMaskd::constant(spec.width, spec.height, 0.0);
  const int fs = spec.face_size;
  auto fill = [&](int x0, int y0, int w, int h, double v) {
    const int xa = std::max(0, x0), ya = std::max(0, y0);
    const int xb = std::min(spec.width, x0 + w), yb = std::min(spec.height, y0 + h);
    if (xa >= xb || ya >= yb) return;
    for (int c = 0; c < spec.channels; ++c) image.channel(c).block(ya, xa, yb - ya, xb - xa) = v;
    mask.values.block(ya, xa, yb - ya, xb - xa) = 1.0;
  };
  if (spec.torso) fill(left - fs / 4, top + fs + fs / 8, fs + fs / 2, 2 * fs, spec.torso_value);
  fill(left, top, fs, fs, spec.face_value);
  return {std::move(image), std::move(mask), {left + fs / 2.0, top + fs / 2.0, double(fs), double(fs)}};
}

Scene make_scene(const SceneSpec& spec, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> px(0, spec.width - spec.face_size);
  std::uniform_int_distribution<int> py(0, spec.height - spec.face_size);
  const int left = px(rng);
  const int top = py(rng);
  return make_scene(spec, left, top, rng);
}

Dataset make_synthetic_dataset(std::size_t count, const SceneSpec& spec, const Detector& detector,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 20 * count + 100) throw DomainError("detector finds no faces in synthetic scenes");
    Scene scene = make_scene(spec, rng);
    const auto dets = detector.detect(scene.image);
    if (dets.empty()) continue;
    Sample s;
    s.id = "synthetic_" + std::to_string(out.size());
    s.gt.image_id = s.id;
    for (const auto& d : dets) s.gt.boxes.push_back(d.box);
    s.image = std::move(scene.image);
    s.mask = std::move(scene.mask);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace rapforge
