#include "rapforge/detector.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <unistd.h>

#include "rapforge/io.hpp"

namespace rapforge {

Imaged GradientContext::backward(std::span<const double> d_confidence, std::span<const BoxGradient> d_box) const {
  if (!backward_) throw UnavailableError("gradient context is empty");
  return backward_(d_confidence, d_box);
}

GradientPass Detector::detect_with_gradients(const Imaged&, DetectionTap) const {
  throw UnavailableError("detector '" + handle().name + "' does not provide gradients");
}

TrainingLoss Detector::training_loss(const Imaged&, std::span<const Box<double>>) const {
  throw UnavailableError("detector '" + handle().name + "' does not expose a training loss");
}

std::vector<std::size_t> nms(std::span<const Detection<double>> dets, double threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return iou(dets[i].box, dets[k].box) > threshold;
    });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

namespace {

std::atomic<unsigned long> adapter_calls{0};

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Summed-area table with a zero first row/column.
Planed integral(const Planed& p) {
  Planed s = Planed::Zero(p.rows() + 1, p.cols() + 1);
  for (Eigen::Index y = 0; y < p.rows(); ++y)
    for (Eigen::Index x = 0; x < p.cols(); ++x)
      s(y + 1, x + 1) = p(y, x) + s(y, x + 1) + s(y + 1, x) - s(y, x);
  return s;
}

double rect_sum(const Planed& s, int x0, int y0, int x1, int y1) {
  return s(y1, x1) - s(y0, x1) - s(y1, x0) + s(y0, x0);
}

void rect_add(Planed& diff, int x0, int y0, int x1, int y1, double v) {
  diff(y0, x0) += v;
  diff(y0, x1) -= v;
  diff(y1, x0) -= v;
  diff(y1, x1) += v;
}

}  // namespace

ToyDetector::ToyDetector(ToyDetectorSpec spec) : spec_(std::move(spec)) {
  if (spec_.window_sizes.empty() || spec_.stride < 1 || !(spec_.surround_factor > 1.0))
    throw ConfigError("toy detector needs window sizes, stride >= 1 and surround factor > 1");
  for (int s : spec_.window_sizes)
    if (s < 1) throw ConfigError("toy detector window sizes must be >= 1");
  handle_ = {"toy", true, true, spec_.confidence_threshold, spec_.nms_threshold};
}

std::vector<ToyDetector::Window> ToyDetector::score_windows(const Imaged& image) const {
  const Planed lum = image.luminance();
  const Planed sat = integral(lum);
  const int w = image.width();
  const int h = image.height();
  std::vector<Window> out;
  for (int s : spec_.window_sizes) {
    if (s > w || s > h) continue;
    const int pad = static_cast<int>(std::lround((spec_.surround_factor - 1.0) * s / 2.0));
    for (int y0 = 0; y0 + s <= h; y0 += spec_.stride) {
      for (int x0 = 0; x0 + s <= w; x0 += spec_.stride) {
        Window win{};
        win.x0 = x0;
        win.y0 = y0;
        win.size = s;
        win.ox0 = std::max(0, x0 - pad);
        win.oy0 = std::max(0, y0 - pad);
        win.ox1 = std::min(w, x0 + s + pad);
        win.oy1 = std::min(h, y0 + s + pad);
        win.inner_count = double(s) * s;
        win.ring_count = double(win.ox1 - win.ox0) * (win.oy1 - win.oy0) - win.inner_count;
        if (win.ring_count <= 0.0) continue;
        const double inner = rect_sum(sat, x0, y0, x0 + s, y0 + s);
        const double outer = rect_sum(sat, win.ox0, win.oy0, win.ox1, win.oy1);
        win.response = inner / win.inner_count - (outer - inner) / win.ring_count;
        win.confidence = logistic(spec_.slope * (win.response - spec_.offset));
        out.push_back(win);
      }
    }
  }
  return out;
}

Imaged ToyDetector::windows_backward(const Imaged& shape, std::span<const Window> windows,
                                     std::span<const double> d_response) const {
  Planed diff = Planed::Zero(shape.height() + 1, shape.width() + 1);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (d_response[i] == 0.0) continue;
    const auto& w = windows[i];
    const double ring = d_response[i] / w.ring_count;
    rect_add(diff, w.ox0, w.oy0, w.ox1, w.oy1, -ring);
    rect_add(diff, w.x0, w.y0, w.x0 + w.size, w.y0 + w.size, d_response[i] / w.inner_count + ring);
  }
  // prefix sums turn corner deltas into per-pixel values
  for (Eigen::Index y = 0; y < diff.rows(); ++y)
    for (Eigen::Index x = 1; x < diff.cols(); ++x) diff(y, x) += diff(y, x - 1);
  for (Eigen::Index y = 1; y < diff.rows(); ++y) diff.row(y) += diff.row(y - 1);
  const Planed d_lum = diff.topLeftCorner(shape.height(), shape.width()) / double(shape.channels());
  return Imaged(std::vector<Planed>(static_cast<std::size_t>(shape.channels()), d_lum));
}

std::vector<ToyDetector::Selection> ToyDetector::select(std::span<const Window> windows, DetectionTap tap) const {
  std::vector<Selection> out;
  if (tap == DetectionTap::kPreNms) {
    out.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) out.push_back({i, {i}, windows[i].box()});
    return out;
  }
  std::vector<std::size_t> pool;
  std::vector<Detection<double>> pooled;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (tap == DetectionTap::kFinal && windows[i].confidence < spec_.confidence_threshold) continue;
    pool.push_back(i);
    pooled.push_back({windows[i].confidence, windows[i].box()});
  }
  for (std::size_t k : nms(pooled, spec_.nms_threshold)) {
    Selection sel{pool[k], {}, pooled[k].box};
    if (!spec_.box_voting) {
      sel.voters.push_back(pool[k]);
      out.push_back(std::move(sel));
      continue;
    }
    double weight = 0.0, x = 0.0, y = 0.0, w = 0.0, h = 0.0;
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      if (j != k && iou(pooled[j].box, pooled[k].box) <= spec_.vote_iou) continue;
      const double c = pooled[j].confidence;
      sel.voters.push_back(pool[j]);
      weight += c;
      x += c * pooled[j].box.x;
      y += c * pooled[j].box.y;
      w += c * pooled[j].box.w;
      h += c * pooled[j].box.h;
    }
    if (weight > 0.0) sel.box = {x / weight, y / weight, w / weight, h / weight};
    out.push_back(std::move(sel));
  }
  return out;
}

std::vector<Detection<double>> ToyDetector::detect(const Imaged& image) const {
  const std::vector<Window> windows = score_windows(image);
  std::vector<Detection<double>> out;
  for (const auto& sel : select(windows, DetectionTap::kFinal)) out.push_back({windows[sel.kept].confidence, sel.box});
  return out;
}

GradientPass ToyDetector::detect_with_gradients(const Imaged& image, DetectionTap tap) const {
  std::vector<Window> windows = score_windows(image);
  std::vector<Selection> selected = select(windows, tap);
  GradientPass pass;
  pass.detections.reserve(selected.size());
  for (const auto& sel : selected) pass.detections.push_back({windows[sel.kept].confidence, sel.box});
  const Imaged shape(image.width(), image.height(), image.channels());
  pass.context = GradientContext([this, shape, windows = std::move(windows), selected = std::move(selected)](
                                     std::span<const double> d_conf, std::span<const BoxGradient> d_box) {
    if (d_conf.size() != selected.size() || (!d_box.empty() && d_box.size() != selected.size()))
      throw DomainError("one gradient entry per detection required");
    std::vector<double> d_c(windows.size(), 0.0);
    for (std::size_t m = 0; m < selected.size(); ++m) {
      const auto& sel = selected[m];
      d_c[sel.kept] += d_conf[m];
      if (d_box.empty() || sel.voters.size() < 2) continue;
      // box = sum(c_j b_j) / sum(c_j)  =>  d box / d c_j = (b_j - box) / sum(c_j)
      double weight = 0.0;
      for (std::size_t j : sel.voters) weight += windows[j].confidence;
      if (weight <= 0.0) continue;
      for (std::size_t j : sel.voters) {
        const Box<double> b = windows[j].box();
        const auto& g = d_box[m];
        d_c[j] += (g[0] * (b.x - sel.box.x) + g[1] * (b.y - sel.box.y) + g[2] * (b.w - sel.box.w) +
                   g[3] * (b.h - sel.box.h)) /
                  weight;
      }
    }
    std::vector<double> d_response(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const double p = windows[i].confidence;
      d_response[i] = d_c[i] * spec_.slope * p * (1.0 - p);
    }
    return windows_backward(shape, windows, d_response);
  });
  return pass;
}

TrainingLoss ToyDetector::training_loss(const Imaged& image, std::span<const Box<double>> target) const {
  const std::vector<Window> windows = score_windows(image);
  if (windows.empty()) throw DomainError("image too small for every toy detector window");
  constexpr double kEps = 1e-12;
  const double n = double(windows.size());
  TrainingLoss out;
  std::vector<double> d_response(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    double label = 0.0;
    if (!target.empty() && max_iou<double>(w.box(), target) >= spec_.match_iou) label = 1.0;
    const double p = w.confidence;
    out.value -= (label * std::log(std::max(p, kEps)) + (1.0 - label) * std::log(std::max(1.0 - p, kEps))) / n;
    d_response[i] = spec_.slope * (p - label) / n;
  }
  out.gradient = windows_backward(Imaged(image.width(), image.height(), image.channels()), windows, d_response);
  return out;
}

CommandDetector::CommandDetector(std::string name, std::string command, double confidence_threshold,
                                 double nms_threshold)
    : command_(std::move(command)),
      handle_{std::move(name), false, false, confidence_threshold, nms_threshold} {}

std::vector<Detection<double>> CommandDetector::detect(const Imaged& image) const {
  namespace fs = std::filesystem;
  const fs::path tmp = fs::temp_directory_path() /
                       ("rapforge_" + std::to_string(::getpid()) + "_" +
                        std::to_string(adapter_calls.fetch_add(1)) + ".png");
  write_png(tmp, image);
  const std::string cmd = "'" + command_ + "' '" + tmp.string() + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    fs::remove(tmp);
    throw UnavailableError("cannot launch detector adapter " + command_);
  }
  std::string output;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, n);
  const int status = ::pclose(pipe);
  fs::remove(tmp);
  if (status != 0)
    throw UnavailableError("detector adapter " + command_ + " exited with status " + std::to_string(status));
  std::istringstream in(output);
  std::vector<Detection<double>> raw;
  for (const auto& d : read_detections(in))
    if (d.confidence >= handle_.confidence_threshold) raw.push_back(d);
  std::vector<Detection<double>> out;
  for (std::size_t i : nms(raw, handle_.nms_threshold)) out.push_back(raw[i]);
  return out;
}

std::unique_ptr<Detector> make_detector(const std::string& name) {
  if (name == "toy") return std::make_unique<ToyDetector>();
  const char* dir = std::getenv("RAPFORGE_DETECTOR_DIR");
  if (dir == nullptr)
    throw UnavailableError("detector '" + name + "' unavailable: RAPFORGE_DETECTOR_DIR is not set");
  const std::filesystem::path exe = std::filesystem::path(dir) / name;
  if (!std::filesystem::exists(exe) || ::access(exe.c_str(), X_OK) != 0)
    throw UnavailableError("detector '" + name + "' unavailable: no executable adapter at " + exe.string());
  return std::make_unique<CommandDetector>(name, exe.string());
}

}  // namespace rapforge
