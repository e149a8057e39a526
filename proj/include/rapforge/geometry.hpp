#pragma once

// Axis-aligned boxes, IoU, and the TP/FP/FN/borderline classification used by
// both the attack loss and the evaluation metrics.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rapforge/errors.hpp"

namespace rapforge {

template <typename Scalar>
struct Corners {
  Scalar x0, y0, x1, y1;
};

/// Center-format rectangle (x, y = center; w, h = extent), all in pixels.
template <typename Scalar>
struct Box {
  Scalar x{0}, y{0}, w{1}, h{1};

  bool valid() const { return w > Scalar(0) && h > Scalar(0); }
  Scalar area() const { return w * h; }

  Corners<Scalar> corners() const {
    return {x - w / Scalar(2), y - h / Scalar(2), x + w / Scalar(2), y + h / Scalar(2)};
  }

  static Box from_corners(const Corners<Scalar>& c) {
    return {(c.x0 + c.x1) / Scalar(2), (c.y0 + c.y1) / Scalar(2), c.x1 - c.x0, c.y1 - c.y0};
  }

  template <typename Other>
  Box<Other> cast() const {
    return {Other(x), Other(y), Other(w), Other(h)};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

template <typename Scalar>
inline void require_valid(const Box<Scalar>& b) {
  if (!b.valid()) throw DomainError("box must have positive width and height");
}

template <typename Scalar>
struct Detection {
  Scalar confidence{0};
  Box<Scalar> box;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthSet {
  std::vector<Box<double>> boxes;
  std::string image_id;

  bool empty() const { return boxes.empty(); }
  std::size_t size() const { return boxes.size(); }
};

struct MatchOutcome {
  std::vector<std::pair<std::size_t, std::size_t>> tp;  // (detection, GT certifying it)
  std::vector<std::size_t> fp;
  std::vector<std::size_t> fn;
  std::vector<double> per_detection_max_iou;

  /// Number of distinct GT boxes reached by at least one TP.
  std::size_t matched_gt_count(std::size_t gt_total) const { return gt_total - fn.size(); }
};

template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  require_valid(a);
  require_valid(b);
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Scalar iw = std::min(ca.x1, cb.x1) - std::max(ca.x0, cb.x0);
  const Scalar ih = std::min(ca.y1, cb.y1) - std::max(ca.y0, cb.y0);
  if (iw <= Scalar(0) || ih <= Scalar(0)) return Scalar(0);
  const Scalar inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

/// a_ij: the best overlap between one detection and any GT box.
template <typename Scalar>
Scalar max_iou(const Box<Scalar>& det, std::span<const Box<Scalar>> gts) {
  if (gts.empty()) throw DomainError("max_iou needs at least one ground-truth box");
  Scalar best = Scalar(0);
  for (const auto& g : gts) best = std::max(best, iou(g, det));
  return best;
}

inline double max_iou(const Detection<double>& det, const GroundTruthSet& gts) {
  return max_iou<double>(det.box, gts.boxes);
}

inline void require_band(double theta_t, double theta_f) {
  if (!(theta_t > theta_f)) throw ConfigError("borderline band needs theta_t > theta_f");
}

/// 1 on [theta_f, theta_t), 0 elsewhere.
inline int borderline_flag(double a, double theta_t, double theta_f) {
  require_band(theta_t, theta_f);
  return (a >= theta_f && a < theta_t) ? 1 : 0;
}

/// Existential matching: a detection is TP if any GT reaches theta_d; one GT may
/// certify several detections.
inline MatchOutcome classify(std::span<const Detection<double>> dets, const GroundTruthSet& gts,
                             double theta_d) {
  if (!(theta_d > 0.0 && theta_d < 1.0)) throw ConfigError("theta_d must lie in (0, 1)");
  MatchOutcome out;
  out.per_detection_max_iou.reserve(dets.size());
  std::vector<bool> gt_hit(gts.size(), false);
  for (std::size_t j = 0; j < dets.size(); ++j) {
    double best = 0.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < gts.size(); ++k) {
      const double v = iou(dets[j].box, gts.boxes[k]);
      if (v >= theta_d) gt_hit[k] = true;
      if (v > best) {
        best = v;
        best_k = k;
      }
    }
    out.per_detection_max_iou.push_back(best);
    if (!gts.empty() && best >= theta_d)
      out.tp.emplace_back(j, best_k);
    else
      out.fp.push_back(j);
  }
  for (std::size_t k = 0; k < gts.size(); ++k)
    if (!gt_hit[k]) out.fn.push_back(k);
  return out;
}

}  // namespace rapforge
