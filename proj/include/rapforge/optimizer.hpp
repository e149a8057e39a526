#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rapforge/dataset.hpp"
#include "rapforge/detector.hpp"
#include "rapforge/losses.hpp"
#include "rapforge/patch_transform.hpp"

namespace rapforge {

enum class PatchInit { kUniform, kGray };

struct AttackConfig {
  double theta_d{0.5};
  double theta_t{0.6};
  double theta_f{0.3};
  double alpha{5.58};

  double step_size{0.01};
  double momentum_decay{1.0};
  bool nesterov{true};  // false + decay 0 is plain FGSM
  int iterations{200};
  int batch_size{8};
  std::uint64_t seed{0};

  LossVariant loss{LossVariant::kBfp};
  BfpDirection direction{BfpDirection::kMinimizeLiteral};
  DetectionTap tap{DetectionTap::kPreNms};

  int patch_width{64};
  int patch_height{64};
  PatchInit init{PatchInit::kUniform};
  Placement placement{Tiled{}};
  int checkpoint_every{50};

  void validate() const;
  LossConfig loss_config() const { return {theta_t, theta_f, theta_d, loss}; }
  /// Stable textual form of every field; hashed into checkpoint sidecars.
  std::string canonical() const;
};

struct HistoryRow {
  int iteration{0};
  double loss{0.0};
  std::size_t active_count{0};
  std::optional<std::size_t> tp;
  std::optional<std::size_t> fp;
  bool stalled{false};  // the batch gradient was identically zero
};

struct TrainState {
  Patchd patch;
  Patchd momentum;
  int iteration{0};
  std::vector<HistoryRow> history;
  std::mt19937_64 rng;
};

TrainState initial_state(const AttackConfig& cfg, int channels);

/// Where the next gradient is evaluated: clip(patch + step * decay * momentum, 0, 1).
/// Equals the patch when nesterov is off.
Patchd lookahead(const TrainState& state, const AttackConfig& cfg);

/// momentum <- decay * momentum + g / |g|_1 ;  patch <- clip(patch + step * sign(momentum), 0, 1).
/// `gradient` points in the direction the patch should move (ascent direction).
TrainState nifgsm_step(TrainState state, const Patchd& gradient, const AttackConfig& cfg);

struct TrainHooks {
  const Dataset* validation{nullptr};
  std::function<void(int iteration, const Patchd& patch)> on_checkpoint;
};

struct TrainResult {
  Patchd patch;
  Patchd best_patch;  // lowest validation TP seen at a checkpoint (final patch without validation)
  std::optional<std::size_t> best_tp;
  std::vector<HistoryRow> history;
};

/// Per-batch gradient and statistics at a given patch (mean over images).
struct BatchGradient {
  Patchd gradient;  // ascent direction
  double loss{0.0};
  std::size_t active_count{0};
};

BatchGradient batch_gradient(const Dataset& data, std::span<const std::size_t> indices, const Patchd& patch,
                             const Detector& detector, const AttackConfig& cfg);

TrainResult train(const Dataset& data, const Detector& detector, const AttackConfig& cfg,
                  const TrainHooks& hooks = {});

struct StallSummary {
  double zero_fraction{0.0};
  std::size_t longest_zero_streak{0};
  std::optional<int> first_nonzero_iteration;
};

/// Steps with active_count == 0 count as zero steps.
StallSummary stall_report(std::span<const HistoryRow> history);

/// iteration,loss,active_count,tp,fp  (tp/fp empty off checkpoint iterations)
void write_history_csv(std::ostream& out, std::span<const HistoryRow> history);

}  // namespace rapforge
