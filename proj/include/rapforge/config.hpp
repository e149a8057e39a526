#pragma once

// TOML run configuration. Layout:
//
//   dataset = "train.jsonl"      # manifest, relative to the config file
//   validation = "val.jsonl"     # optional
//   detector = "toy"
//
//   [attack]                     # every AttackConfig field, all optional
//   theta_d = 0.5
//   loss = "bfp"                 # bfp | dpatch | maxloss
//   direction = "literal"        # literal | raise
//   tap = "pre_nms"              # pre_nms | post_nms | final
//   init = "uniform"             # uniform | gray
//   placement = "tiled"          # tiled | fixed, offset via placement_x / placement_y
//
// Transfer specs list [[run]] tables (patch, train_dataset, method),
// [[dataset]] tables (name, manifest), a `models` array and an optional [attack]
// table for theta_d / alpha / placement.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rapforge/eval.hpp"
#include "rapforge/optimizer.hpp"

namespace rapforge {

struct TrainRunConfig {
  AttackConfig attack;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> validation;
  std::string detector{"toy"};
};

/// Parses the [attack] table of a TOML document (defaults for anything absent).
AttackConfig parse_attack_config(std::string_view toml_text);
TrainRunConfig parse_train_config(std::string_view toml_text, const std::filesystem::path& base_dir = {});
TrainRunConfig load_train_config(const std::filesystem::path& path);

struct TransferSpec {
  struct Run {
    std::filesystem::path patch;
    std::string train_dataset;
    std::string method{"Proposed"};
  };
  struct Data {
    std::string name;
    std::filesystem::path manifest;
  };
  std::vector<Run> runs;
  std::vector<Data> datasets;
  std::vector<std::string> models{"toy"};
  EvalConfig eval;
};

TransferSpec parse_transfer_spec(std::string_view toml_text, const std::filesystem::path& base_dir = {});
TransferSpec load_transfer_spec(const std::filesystem::path& path);

DetectionTap parse_tap(const std::string& name);
BfpDirection parse_direction(const std::string& name);

}  // namespace rapforge
