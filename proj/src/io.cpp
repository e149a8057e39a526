#include "rapforge/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rapforge {

using nlohmann::json;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("libpng: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

}  // namespace

Imaged read_png(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // host little-endian order for uint16 reads
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> data(rowbytes * static_cast<std::size_t>(h));
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = data.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  Imaged img(w, h, channels);
  const double scale = out_depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < h; ++y) {
    const unsigned char* row = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::size_t idx = static_cast<std::size_t>(x * channels + c);
        double v;
        if (out_depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, row + idx * 2, 2);
          v = s;
        } else {
          v = row[idx];
        }
        img.at(x, y, c) = v / scale;
      }
  }
  return img;
}

void write_png(const fs::path& path, const Imaged& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw DomainError("PNG bit depth must be 8 or 16");
  if (image.channels() != 1 && image.channels() != 3) throw DomainError("PNG output needs 1 or 3 channels");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  const int w = image.width();
  const int h = image.height();
  const int ch = image.channels();
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
               ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  const int bytes = bit_depth / 8;
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<unsigned char> row(static_cast<std::size_t>(w * ch * bytes));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(v * scale));
        const std::size_t idx = static_cast<std::size_t>((x * ch + c) * bytes);
        if (bytes == 2)
          std::memcpy(&row[idx], &q, 2);
        else
          row[idx] = static_cast<unsigned char>(q);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

fs::path mask_sidecar(const fs::path& image_path) {
  return image_path.parent_path() / (image_path.stem().string() + ".mask.png");
}

ForegroundMaskd read_mask(const fs::path& path) { return {read_png(path).luminance()}; }

void write_mask(const fs::path& path, const ForegroundMaskd& mask) {
  write_png(path, Imaged(std::vector<Planed>{mask.values}), 8);
}

std::string detection_to_json(const Detection<double>& d) {
  const json j = {{"p", d.confidence}, {"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}};
  return j.dump();
}

Detection<double> detection_from_json(std::string_view line) {
  const json j = json::parse(line);
  Detection<double> d;
  d.confidence = j.at("p").get<double>();
  d.box = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
  if (d.confidence < 0.0 || d.confidence > 1.0) throw DomainError("detection confidence outside [0, 1]");
  require_valid(d.box);
  return d;
}

std::vector<Detection<double>> read_detections(std::istream& in) {
  std::vector<Detection<double>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(detection_from_json(line));
  }
  return out;
}

void write_detections(std::ostream& out, std::span<const Detection<double>> dets) {
  for (const auto& d : dets) out << detection_to_json(d) << '\n';
}

ManifestEntry manifest_entry_from_json(std::string_view line) {
  const json j = json::parse(line);
  ManifestEntry e;
  e.path = j.at("path").get<std::string>();
  e.mask = j.value("mask", std::string{});
  for (const auto& row : j.value("gt", json::array())) {
    const auto v = row.get<std::vector<double>>();
    Detection<double> d;
    if (v.size() == 5)
      d = {v[0], {v[1], v[2], v[3], v[4]}};
    else if (v.size() == 4)
      d = {1.0, {v[0], v[1], v[2], v[3]}};
    else
      throw DomainError("manifest gt rows must have 4 or 5 numbers");
    require_valid(d.box);
    e.gt.push_back(d);
  }
  if (j.contains("shift")) e.shift = j.at("shift").get<std::array<int, 2>>();
  e.source = j.value("source", std::string{});
  return e;
}

std::string manifest_entry_to_json(const ManifestEntry& e) {
  json gt = json::array();
  for (const auto& d : e.gt) gt.push_back({d.confidence, d.box.x, d.box.y, d.box.w, d.box.h});
  json j = {{"path", e.path}, {"mask", e.mask}, {"gt", gt}};
  if (e.shift) j["shift"] = *e.shift;
  if (!e.source.empty()) j["source"] = e.source;
  return j.dump();
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(manifest_entry_from_json(line));
  }
  return out;
}

void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& e : entries) out << manifest_entry_to_json(e) << '\n';
}

fs::path patch_sidecar(const fs::path& png) {
  fs::path p = png;
  return p.replace_extension(".json");
}

void write_patch(const fs::path& png, const Patchd& patch, const PatchMetadata& meta) {
  write_png(png, patch.pixels, 16);
  const json j = {{"w_P", meta.width},
                  {"h_P", meta.height},
                  {"alpha", meta.alpha},
                  {"config_hash", meta.config_hash},
                  {"iteration", meta.iteration}};
  std::ofstream out(patch_sidecar(png));
  out << j.dump(2) << '\n';
}

Patchd read_patch(const fs::path& png) { return {read_png(png)}; }

PatchMetadata read_patch_metadata(const fs::path& png) {
  std::ifstream in(patch_sidecar(png));
  if (!in) throw std::runtime_error("missing patch sidecar " + patch_sidecar(png).string());
  const json j = json::parse(in);
  return {j.at("w_P").get<int>(), j.at("h_P").get<int>(), j.at("alpha").get<double>(),
          j.value("config_hash", std::string{}), j.value("iteration", 0)};
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace rapforge
