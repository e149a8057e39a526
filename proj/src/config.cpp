#include "rapforge/config.hpp"

#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace rapforge {

namespace fs = std::filesystem;

namespace {

template <typename T>
void read_into(const toml::table& t, std::string_view key, T& out) {
  if (const auto v = t[key].value<T>()) out = *v;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

toml::table parse(std::string_view text) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("invalid TOML: ") + std::string(e.description()));
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

AttackConfig attack_from_table(const toml::table* t) {
  AttackConfig cfg;
  if (t == nullptr) return cfg;
  read_into(*t, "theta_d", cfg.theta_d);
  read_into(*t, "theta_t", cfg.theta_t);
  read_into(*t, "theta_f", cfg.theta_f);
  read_into(*t, "alpha", cfg.alpha);
  read_into(*t, "step_size", cfg.step_size);
  read_into(*t, "momentum_decay", cfg.momentum_decay);
  read_into(*t, "nesterov", cfg.nesterov);
  read_into(*t, "iterations", cfg.iterations);
  read_into(*t, "batch_size", cfg.batch_size);
  read_into(*t, "patch_width", cfg.patch_width);
  read_into(*t, "patch_height", cfg.patch_height);
  read_into(*t, "checkpoint_every", cfg.checkpoint_every);
  if (const auto seed = (*t)["seed"].value<std::int64_t>()) cfg.seed = static_cast<std::uint64_t>(*seed);
  if (const auto v = (*t)["loss"].value<std::string>()) cfg.loss = parse_loss_variant(*v);
  if (const auto v = (*t)["direction"].value<std::string>()) cfg.direction = parse_direction(*v);
  if (const auto v = (*t)["tap"].value<std::string>()) cfg.tap = parse_tap(*v);
  if (const auto v = (*t)["init"].value<std::string>()) {
    if (*v == "uniform")
      cfg.init = PatchInit::kUniform;
    else if (*v == "gray")
      cfg.init = PatchInit::kGray;
    else
      throw ConfigError("init must be 'uniform' or 'gray'");
  }
  const int px = (*t)["placement_x"].value_or(0);
  const int py = (*t)["placement_y"].value_or(0);
  const std::string placement = (*t)["placement"].value_or(std::string("tiled"));
  if (placement == "tiled")
    cfg.placement = Tiled{px, py};
  else if (placement == "fixed")
    cfg.placement = FixedAt{px, py};
  else
    throw ConfigError("placement must be 'tiled' or 'fixed'");
  return cfg;
}

}  // namespace

DetectionTap parse_tap(const std::string& name) {
  if (name == "pre_nms") return DetectionTap::kPreNms;
  if (name == "post_nms") return DetectionTap::kPostNms;
  if (name == "final") return DetectionTap::kFinal;
  throw ConfigError("tap must be pre_nms, post_nms or final");
}

BfpDirection parse_direction(const std::string& name) {
  if (name == "raise") return BfpDirection::kRaiseBorderline;
  if (name == "literal") return BfpDirection::kMinimizeLiteral;
  throw ConfigError("direction must be 'raise' or 'literal'");
}

AttackConfig parse_attack_config(std::string_view toml_text) {
  const toml::table doc = parse(toml_text);
  AttackConfig cfg = attack_from_table(doc["attack"].as_table());
  cfg.validate();
  return cfg;
}

TrainRunConfig parse_train_config(std::string_view toml_text, const fs::path& base_dir) {
  const toml::table doc = parse(toml_text);
  TrainRunConfig run;
  run.attack = attack_from_table(doc["attack"].as_table());
  run.attack.validate();
  const auto dataset = doc["dataset"].value<std::string>();
  if (!dataset) throw ConfigError("train config needs a 'dataset' manifest path");
  run.dataset = resolve(base_dir, *dataset);
  if (const auto v = doc["validation"].value<std::string>()) run.validation = resolve(base_dir, *v);
  read_into(doc, "detector", run.detector);
  return run;
}

TrainRunConfig load_train_config(const fs::path& path) {
  return parse_train_config(read_text(path), path.parent_path());
}

TransferSpec parse_transfer_spec(std::string_view toml_text, const fs::path& base_dir) {
  const toml::table doc = parse(toml_text);
  TransferSpec spec;
  const AttackConfig attack = attack_from_table(doc["attack"].as_table());
  spec.eval = {attack.theta_d, attack.alpha, attack.placement};
  if (const auto* runs = doc["run"].as_array())
    for (const auto& node : *runs) {
      const auto* t = node.as_table();
      if (t == nullptr) throw ConfigError("[[run]] entries must be tables");
      TransferSpec::Run r;
      const auto patch = (*t)["patch"].value<std::string>();
      const auto train = (*t)["train_dataset"].value<std::string>();
      if (!patch || !train) throw ConfigError("[[run]] needs 'patch' and 'train_dataset'");
      r.patch = resolve(base_dir, *patch);
      r.train_dataset = *train;
      read_into(*t, "method", r.method);
      spec.runs.push_back(std::move(r));
    }
  if (const auto* sets = doc["dataset"].as_array())
    for (const auto& node : *sets) {
      const auto* t = node.as_table();
      if (t == nullptr) throw ConfigError("[[dataset]] entries must be tables");
      const auto name = (*t)["name"].value<std::string>();
      const auto manifest = (*t)["manifest"].value<std::string>();
      if (!name || !manifest) throw ConfigError("[[dataset]] needs 'name' and 'manifest'");
      spec.datasets.push_back({*name, resolve(base_dir, *manifest)});
    }
  if (const auto* models = doc["models"].as_array()) {
    spec.models.clear();
    for (const auto& m : *models)
      if (const auto v = m.value<std::string>()) spec.models.push_back(*v);
  }
  if (spec.runs.empty() || spec.datasets.empty() || spec.models.empty())
    throw ConfigError("transfer spec needs at least one run, dataset and model");
  return spec;
}

TransferSpec load_transfer_spec(const fs::path& path) {
  return parse_transfer_spec(read_text(path), path.parent_path());
}

}  // namespace rapforge
