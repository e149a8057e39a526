#include "rapforge/losses.hpp"

#include <algorithm>
#include <cmath>

namespace rapforge {

void LossConfig::validate() const {
  if (!(theta_t > theta_d && theta_d > theta_f))
    throw ConfigError("thresholds must satisfy theta_t > theta_d > theta_f");
  if (!(theta_f >= 0.0 && theta_t <= 1.0)) throw ConfigError("IoU thresholds must lie in [0, 1]");
}

LossValue bfp_loss(const GroundTruthSet& gts, std::span<const Detection<double>> dets, const LossConfig& cfg) {
  cfg.validate();
  LossValue out;
  out.gradient.assign(dets.size(), 0.0);
  if (dets.empty()) return out;
  for (std::size_t j = 0; j < dets.size(); ++j) {
    const int gate = borderline_flag(max_iou(dets[j], gts), cfg.theta_t, cfg.theta_f);
    if (gate == 0) continue;
    const double p = std::min(dets[j].confidence, 1.0 - kConfidenceEpsilon);
    ++out.active_count;
    out.value -= std::log1p(-p);
    out.gradient[j] = 1.0 / (1.0 - p);
  }
  return out;
}

TrainingLoss dpatch_loss(const Detector& detector, const Imaged& patched, const Box<double>& patch_region) {
  const Box<double> target[] = {patch_region};
  return detector.training_loss(patched, target);
}

TrainingLoss maxloss_objective(const Detector& detector, const Imaged& patched, const GroundTruthSet& gts) {
  TrainingLoss loss = detector.training_loss(patched, gts.boxes);
  loss.value = -loss.value;
  for (int c = 0; c < loss.gradient.channels(); ++c) loss.gradient.channel(c) = -loss.gradient.channel(c);
  return loss;
}

LossVariant parse_loss_variant(const std::string& name) {
  if (name == "bfp") return LossVariant::kBfp;
  if (name == "dpatch") return LossVariant::kDpatch;
  if (name == "maxloss") return LossVariant::kMaxLoss;
  throw ConfigError("unknown loss variant '" + name + "' (expected bfp, dpatch or maxloss)");
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kBfp:
      return "bfp";
    case LossVariant::kDpatch:
      return "dpatch";
    case LossVariant::kMaxLoss:
      return "maxloss";
  }
  return "bfp";
}

}  // namespace rapforge
