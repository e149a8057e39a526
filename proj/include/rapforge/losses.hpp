#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rapforge/detector.hpp"
#include "rapforge/geometry.hpp"

namespace rapforge {

enum class LossVariant { kBfp, kDpatch, kMaxLoss };

/// Which way the trainer pushes the borderline term. kRaiseBorderline drives
/// gated confidences up (ascent on the summed -log(1 - p)); kMinimizeLiteral
/// minimizes that sum as written, which drives them down.
enum class BfpDirection { kRaiseBorderline, kMinimizeLiteral };

struct LossConfig {
  double theta_t{0.6};
  double theta_f{0.3};
  double theta_d{0.5};
  LossVariant variant{LossVariant::kBfp};

  /// Throws ConfigError unless 1 > theta_t > theta_d > theta_f >= 0.
  void validate() const;
};

struct LossValue {
  double value{0.0};
  std::size_t active_count{0};
  std::vector<double> gradient;  // d(value)/d(confidence), one entry per detection
};

inline constexpr double kConfidenceEpsilon = 1e-7;

/// Borderline false positive loss: -sum_j b_j log(1 - p_j), where b_j flags
/// detections whose best GT overlap falls in [theta_f, theta_t). The gate is
/// a constant with respect to the confidences.
LossValue bfp_loss(const GroundTruthSet& gts, std::span<const Detection<double>> dets, const LossConfig& cfg);

/// DPatch-style objective (minimized): the detector's training loss against a
/// target that declares `patch_region` the only object in the image.
TrainingLoss dpatch_loss(const Detector& detector, const Imaged& patched, const Box<double>& patch_region);

/// Loss-maximization baseline (minimized): the negated training loss against
/// the true ground truth.
TrainingLoss maxloss_objective(const Detector& detector, const Imaged& patched, const GroundTruthSet& gts);

LossVariant parse_loss_variant(const std::string& name);
std::string to_string(LossVariant v);

}  // namespace rapforge
