#include "rapforge/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rapforge/eval.hpp"

namespace rapforge {

void AttackConfig::validate() const {
  loss_config().validate();
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (!(momentum_decay >= 0.0)) throw ConfigError("momentum_decay must be non-negative");
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patch_width < 1 || patch_height < 1) throw ConfigError("patch dimensions must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
}

std::string AttackConfig::canonical() const {
  char buf[1024];
  const bool tiled = std::holds_alternative<Tiled>(placement);
  const int px = tiled ? std::get<Tiled>(placement).phase_x : std::get<FixedAt>(placement).x;
  const int py = tiled ? std::get<Tiled>(placement).phase_y : std::get<FixedAt>(placement).y;
  std::snprintf(buf, sizeof buf,
                "theta_d=%.17g;theta_t=%.17g;theta_f=%.17g;alpha=%.17g;step_size=%.17g;momentum_decay=%.17g;"
                "nesterov=%d;iterations=%d;batch_size=%d;seed=%llu;loss=%s;direction=%d;tap=%d;patch=%dx%d;"
                "init=%d;placement=%s(%d,%d);checkpoint_every=%d",
                theta_d, theta_t, theta_f, alpha, step_size, momentum_decay, int(nesterov), iterations, batch_size,
                static_cast<unsigned long long>(seed), to_string(loss).c_str(), int(direction), int(tap),
                patch_width, patch_height, int(init), tiled ? "tiled" : "fixed", px, py, checkpoint_every);
  return buf;
}

TrainState initial_state(const AttackConfig& cfg, int channels) {
  TrainState state;
  state.rng.seed(cfg.seed);
  state.patch = Patchd::constant(cfg.patch_width, cfg.patch_height, channels, 0.5);
  if (cfg.init == PatchInit::kUniform) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < cfg.patch_height; ++y)
        for (int x = 0; x < cfg.patch_width; ++x) state.patch.pixels.at(x, y, c) = u(state.rng);
  }
  state.momentum = Patchd::constant(cfg.patch_width, cfg.patch_height, channels, 0.0);
  return state;
}

Patchd lookahead(const TrainState& state, const AttackConfig& cfg) {
  Patchd out = state.patch;
  if (!cfg.nesterov) return out;
  const double k = cfg.step_size * cfg.momentum_decay;
  for (int c = 0; c < out.channels(); ++c)
    out.pixels.channel(c) = (out.pixels.channel(c) + k * state.momentum.pixels.channel(c)).max(0.0).min(1.0);
  return out;
}

TrainState nifgsm_step(TrainState state, const Patchd& gradient, const AttackConfig& cfg) {
  if (!gradient.pixels.same_shape(state.patch.pixels)) throw DomainError("gradient must match the patch shape");
  double l1 = 0.0;
  for (int c = 0; c < gradient.channels(); ++c) l1 += gradient.pixels.channel(c).abs().sum();
  const bool stalled = l1 == 0.0;
  for (int c = 0; c < gradient.channels(); ++c) {
    auto& m = state.momentum.pixels.channel(c);
    m *= cfg.momentum_decay;
    if (!stalled) m += gradient.pixels.channel(c) / l1;
    auto& p = state.patch.pixels.channel(c);
    p = (p + cfg.step_size * m.sign()).max(0.0).min(1.0);
  }
  ++state.iteration;
  HistoryRow row;
  row.iteration = state.iteration;
  row.stalled = stalled;
  state.history.push_back(row);
  return state;
}

BatchGradient batch_gradient(const Dataset& data, std::span<const std::size_t> indices, const Patchd& patch,
                             const Detector& detector, const AttackConfig& cfg) {
  const LossConfig lcfg = cfg.loss_config();
  BatchGradient out;
  out.gradient = Patchd::constant(patch.width(), patch.height(), patch.channels(), 0.0);
  for (std::size_t idx : indices) {
    const Sample& s = data.at(idx);
    const PatchApplier<double> applier(s.image.width(), s.image.height(), patch.width(), patch.height(), s.gt,
                                       cfg.alpha, cfg.placement);
    const Imaged patched = applier.apply(s.image, *s.mask, patch);
    Imaged d_image;
    switch (cfg.loss) {
      case LossVariant::kBfp: {
        const GradientPass pass = detector.detect_with_gradients(patched, cfg.tap);
        LossValue lv = bfp_loss(s.gt, pass.detections, lcfg);
        out.loss += lv.value;
        out.active_count += lv.active_count;
        if (lv.active_count == 0) continue;
        if (cfg.direction == BfpDirection::kMinimizeLiteral)
          for (auto& g : lv.gradient) g = -g;
        d_image = pass.context.backward(lv.gradient);
        break;
      }
      case LossVariant::kDpatch:
      case LossVariant::kMaxLoss: {
        TrainingLoss tl = cfg.loss == LossVariant::kDpatch ? dpatch_loss(detector, patched, applier.patch_region())
                                                           : maxloss_objective(detector, patched, s.gt);
        out.loss += tl.value;
        ++out.active_count;
        d_image = std::move(tl.gradient);
        for (int c = 0; c < d_image.channels(); ++c) d_image.channel(c) = -d_image.channel(c);
        break;
      }
    }
    const Patchd g = applier.backward(d_image, *s.mask);
    for (int c = 0; c < g.channels(); ++c) out.gradient.pixels.channel(c) += g.pixels.channel(c);
  }
  const double n = double(std::max<std::size_t>(indices.size(), 1));
  for (int c = 0; c < out.gradient.channels(); ++c) out.gradient.pixels.channel(c) /= n;
  out.loss /= n;
  return out;
}

TrainResult train(const Dataset& data, const Detector& detector, const AttackConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  validate_dataset(data, true);
  if (data.empty()) throw DomainError("training needs at least one sample");
  if (cfg.iterations > 0 && !detector.handle().supports_gradients)
    throw UnavailableError("detector '" + detector.handle().name + "' cannot be used for training");

  TrainState state = initial_state(cfg, data.front().image.channels());
  TrainResult result;
  result.best_patch = state.patch;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), data.size());
  const EvalConfig eval_cfg{cfg.theta_d, cfg.alpha, cfg.placement};

  for (int it = 1; it <= cfg.iterations; ++it) {
    std::vector<std::size_t> indices;
    while (indices.size() < batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), state.rng);
        cursor = 0;
      }
      indices.push_back(order[cursor++]);
    }
    const BatchGradient bg = batch_gradient(data, indices, lookahead(state, cfg), detector, cfg);
    state = nifgsm_step(std::move(state), bg.gradient, cfg);
    HistoryRow& row = state.history.back();
    row.loss = bg.loss;
    row.active_count = bg.active_count;

    const bool checkpoint = cfg.checkpoint_every > 0 && (it % cfg.checkpoint_every == 0 || it == cfg.iterations);
    if (!checkpoint) continue;
    if (hooks.validation != nullptr) {
      const auto report = evaluate(*hooks.validation, state.patch, detector, eval_cfg);
      row.tp = report.tp_count;
      row.fp = report.fp_count;
      if (!result.best_tp || report.tp_count < *result.best_tp) {
        result.best_tp = report.tp_count;
        result.best_patch = state.patch;
      }
    }
    if (hooks.on_checkpoint) hooks.on_checkpoint(it, state.patch);
  }
  if (hooks.validation == nullptr) result.best_patch = state.patch;
  result.patch = std::move(state.patch);
  result.history = std::move(state.history);
  return result;
}

StallSummary stall_report(std::span<const HistoryRow> history) {
  StallSummary out;
  if (history.empty()) return out;
  std::size_t zeros = 0, streak = 0;
  for (const auto& row : history) {
    if (row.active_count == 0) {
      ++zeros;
      out.longest_zero_streak = std::max(out.longest_zero_streak, ++streak);
    } else {
      streak = 0;
      if (!out.first_nonzero_iteration) out.first_nonzero_iteration = row.iteration;
    }
  }
  out.zero_fraction = double(zeros) / double(history.size());
  return out;
}

void write_history_csv(std::ostream& out, std::span<const HistoryRow> history) {
  out << "iteration,loss,active_count,tp,fp\n";
  char buf[64];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    out << r.iteration << ',' << buf << ',' << r.active_count << ',';
    if (r.tp) out << *r.tp;
    out << ',';
    if (r.fp) out << *r.fp;
    out << '\n';
  }
}

}  // namespace rapforge
