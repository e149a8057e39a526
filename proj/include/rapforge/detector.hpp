#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rapforge/geometry.hpp"
#include "rapforge/image.hpp"

namespace rapforge {

struct DetectorHandle {
  std::string name;
  bool supports_gradients{false};
  bool supports_training_loss{false};
  double confidence_threshold{0.5};
  double nms_threshold{0.3};
};

/// Where the attack loss taps the detector output.
enum class DetectionTap {
  kPreNms,   // every scored window, no threshold, no suppression
  kPostNms,  // NMS over all windows, no confidence threshold
  kFinal,    // what detect() returns: threshold, then NMS
};

/// d(loss)/d(x, y, w, h) of one detection box.
using BoxGradient = std::array<double, 4>;

/// Maps d(loss)/d(confidence) (and optionally d(loss)/d(box)) for each
/// returned detection back to the pixels.
class GradientContext {
 public:
  using Backward = std::function<Imaged(std::span<const double>, std::span<const BoxGradient>)>;

  GradientContext() = default;
  explicit GradientContext(Backward fn) : backward_(std::move(fn)) {}

  /// `d_box` may be empty (no box term) or hold one entry per detection.
  Imaged backward(std::span<const double> d_confidence, std::span<const BoxGradient> d_box = {}) const;

 private:
  Backward backward_;
};

struct GradientPass {
  std::vector<Detection<double>> detections;
  GradientContext context;
};

struct TrainingLoss {
  double value{0.0};
  Imaged gradient;  // d(value)/d(pixels)
};

class Detector {
 public:
  virtual ~Detector() = default;

  virtual const DetectorHandle& handle() const = 0;

  /// Thresholded, NMS-deduplicated detections, highest confidence first.
  virtual std::vector<Detection<double>> detect(const Imaged& image) const = 0;

  virtual GradientPass detect_with_gradients(const Imaged& image, DetectionTap tap) const;

  /// Detector-native loss against a target labeling, with its pixel gradient.
  virtual TrainingLoss training_loss(const Imaged& image, std::span<const Box<double>> target) const;
};

/// Greedy NMS. Returns indices into `dets`, highest confidence first; a box is
/// dropped when its IoU with an already kept box exceeds `threshold`.
std::vector<std::size_t> nms(std::span<const Detection<double>> dets, double threshold);

// Multi-scale center-surround matched filter. For a square window of side s,
// response = mean(inner s x s) - mean(surrounding ring), with the ring being
// the box of side surround_factor * s minus the inner box, clipped to the
// image. Confidence is logistic(slope * (response - offset)).
//
// NMS keeps the best window of each cluster; with box voting on, the kept box
// becomes the confidence-weighted mean of every pooled window whose IoU with
// it exceeds vote_iou, so box coordinates move smoothly with the scores.
//
// Calibrated for faces about 0.45 brighter than their surroundings. Much
// stronger contrast also lights up small windows at the corners of a large face.
struct ToyDetectorSpec {
  std::vector<int> window_sizes{8, 16, 32};
  int stride{4};
  double surround_factor{2.0};
  double slope{25.0};
  double offset{0.3};
  double confidence_threshold{0.5};
  double nms_threshold{0.2};
  bool box_voting{true};
  double vote_iou{0.3};
  double match_iou{0.5};  // positive-label overlap for training_loss
};

class ToyDetector final : public Detector {
 public:
  explicit ToyDetector(ToyDetectorSpec spec = {});

  const DetectorHandle& handle() const override { return handle_; }
  const ToyDetectorSpec& spec() const { return spec_; }

  std::vector<Detection<double>> detect(const Imaged& image) const override;
  GradientPass detect_with_gradients(const Imaged& image, DetectionTap tap) const override;

  /// Mean binary cross-entropy over every window, label 1 when the window
  /// overlaps a target box at match_iou or more. Window boxes are fixed to the
  /// grid, so there is no localization term.
  TrainingLoss training_loss(const Imaged& image, std::span<const Box<double>> target) const override;

  struct Window {
    int x0, y0, size;           // inner box
    int ox0, oy0, ox1, oy1;     // clipped outer box, exclusive ends
    double inner_count, ring_count;
    double response;
    double confidence;

    Box<double> box() const { return {x0 + size / 2.0, y0 + size / 2.0, double(size), double(size)}; }
  };

  /// Every scored window of the image in a fixed scan order (scale, row, column).
  std::vector<Window> score_windows(const Imaged& image) const;

  /// One output detection: the window that survived NMS plus the windows voting on its box.
  struct Selection {
    std::size_t kept;
    std::vector<std::size_t> voters;  // includes `kept`
    Box<double> box;
  };

  /// Selection for a tap over `windows`; pre-NMS selects every window with no voting.
  std::vector<Selection> select(std::span<const Window> windows, DetectionTap tap) const;

 private:
  Imaged windows_backward(const Imaged& image_shape, std::span<const Window> windows,
                          std::span<const double> d_response) const;

  ToyDetectorSpec spec_;
  DetectorHandle handle_;
};

/// External adapter: runs `<command> <image.png>` and reads JSON lines
/// {"p":..,"x":..,"y":..,"w":..,"h":..} from its stdout. Evaluation only.
class CommandDetector final : public Detector {
 public:
  CommandDetector(std::string name, std::string command, double confidence_threshold = 0.5,
                  double nms_threshold = 0.3);

  const DetectorHandle& handle() const override { return handle_; }
  std::vector<Detection<double>> detect(const Imaged& image) const override;

 private:
  std::string command_;
  DetectorHandle handle_;
};

/// "toy" builds the built-in detector; any other name resolves to an adapter
/// executable $RAPFORGE_DETECTOR_DIR/<name>. Throws UnavailableError otherwise.
std::unique_ptr<Detector> make_detector(const std::string& name);

}  // namespace rapforge
