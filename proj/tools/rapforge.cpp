#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rapforge/config.hpp"
#include "rapforge/dataset.hpp"
#include "rapforge/detector.hpp"
#include "rapforge/errors.hpp"
#include "rapforge/eval.hpp"
#include "rapforge/io.hpp"
#include "rapforge/optimizer.hpp"

namespace fs = std::filesystem;
using namespace rapforge;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EvalConfig eval_config(const std::string& config_path) {
  if (config_path.empty()) return {};
  const AttackConfig a = parse_attack_config(slurp(config_path));
  return {a.theta_d, a.alpha, a.placement};
}

// A patch checkpoint carries the alpha it was trained with; prefer it.
Patchd load_patch(const fs::path& png, EvalConfig& cfg, bool alpha_from_config) {
  Patchd patch = read_patch(png);
  if (!alpha_from_config && fs::exists(patch_sidecar(png))) cfg.alpha = read_patch_metadata(png).alpha;
  return patch;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

int run_train(const std::string& config_path, const fs::path& out_dir) {
  const TrainRunConfig run = load_train_config(config_path);
  const Dataset data = load_dataset(run.dataset);
  std::optional<Dataset> validation;
  if (run.validation) validation = load_dataset(*run.validation);
  const auto detector = make_detector(run.detector);
  fs::create_directories(out_dir);

  const std::string hash = fnv1a_hex(run.attack.canonical());
  const int w = run.attack.patch_width, h = run.attack.patch_height;
  auto save = [&](const std::string& name, const Patchd& p, int it) {
    write_patch(out_dir / name, p, {w, h, run.attack.alpha, hash, it});
  };

  TrainHooks hooks;
  if (validation) hooks.validation = &*validation;
  hooks.on_checkpoint = [&](int it, const Patchd& p) {
    save("patch_iter" + std::to_string(it) + ".png", p, it);
    std::cerr << "checkpoint " << it << "\n";
  };
  const TrainResult result = train(data, *detector, run.attack, hooks);
  save("patch_final.png", result.patch, run.attack.iterations);
  save("patch_best.png", result.best_patch, run.attack.iterations);
  auto hist = open_out(out_dir / "history.csv");
  write_history_csv(hist, result.history);

  const StallSummary stall = stall_report(result.history);
  std::printf("iterations %d, zero-loss steps %.1f%%, longest zero streak %zu\n", run.attack.iterations,
              100.0 * stall.zero_fraction, stall.longest_zero_streak);
  if (stall.longest_zero_streak >= 10)
    std::fprintf(stderr, "warning: %zu consecutive steps had no borderline detections; try tap = \"pre_nms\"\n",
                 stall.longest_zero_streak);
  if (result.best_tp) std::printf("best validation TP %zu\n", *result.best_tp);
  return 0;
}

int run_eval(const std::string& patch_path, const fs::path& dataset, const std::string& detector_name,
             const fs::path& report, const std::string& config_path, const std::string& method,
             std::string dataset_name) {
  EvalConfig cfg = eval_config(config_path);
  std::optional<Patchd> patch;
  if (!patch_path.empty()) patch = load_patch(patch_path, cfg, !config_path.empty());
  const Dataset data = load_dataset(dataset);
  const auto detector = make_detector(detector_name);
  const EvaluationReport r = evaluate(data, patch, *detector, cfg);
  if (dataset_name.empty()) dataset_name = dataset.stem().string();
  const std::vector<ReportRow> rows{make_row(dataset_name, patch ? method : "none", detector_name, r)};
  auto out = open_out(report);
  write_report_csv(out, rows);
  std::printf("F %.4f  AP %.4f  GT %zu  TP %zu  FP %zu  FN %zu\n", r.f_value, r.ap, r.gt_count, r.tp_count,
              r.fp_count, r.fn_count);
  return 0;
}

// Sources: a manifest file, a directory holding manifest.jsonl, or a directory
// of PNGs (with optional <stem>.mask.png sidecars) whose GT comes from the detector.
Dataset load_sources(const fs::path& src, const Detector& detector) {
  if (fs::is_regular_file(src)) return load_dataset(src);
  if (fs::exists(src / "manifest.jsonl")) return load_dataset(src / "manifest.jsonl");
  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(src)) {
    const std::string name = e.path().filename().string();
    if (e.path().extension() == ".png" && name.find(".mask.png") == std::string::npos) images.push_back(e.path());
  }
  std::sort(images.begin(), images.end());
  Dataset out;
  for (const auto& p : images) {
    Sample s;
    s.id = p.filename().string();
    s.image = read_png(p);
    if (fs::exists(mask_sidecar(p))) s.mask = read_mask(mask_sidecar(p));
    s.gt.image_id = s.id;
    for (const auto& d : detector.detect(s.image)) s.gt.boxes.push_back(d.box);
    out.push_back(std::move(s));
  }
  return out;
}

int run_uniform(const fs::path& src, int stride, const fs::path& out_manifest, const std::string& detector_name,
                const std::string& fill) {
  const auto detector = make_detector(detector_name);
  UniformDatasetSpec spec;
  spec.stride = stride;
  if (fill == "constant")
    spec.fill = ShiftFill::kConstant;
  else if (fill != "wrap")
    throw ConfigError("fill must be 'wrap' or 'constant'");
  const UniformDataset uni = make_uniform_dataset(load_sources(src, *detector), spec, *detector);
  const fs::path dir = out_manifest.parent_path().empty() ? fs::path(".") : out_manifest.parent_path();
  write_manifest(out_manifest, save_dataset(uni.samples, dir));
  std::printf("%zu of %zu positions kept", uni.samples.size(), uni.candidate_count);
  if (!uni.skipped.empty()) std::printf(", %zu sources without a face", uni.skipped.size());
  std::printf("\n");
  return 0;
}

int run_heatmap(const fs::path& manifest, const std::string& patch_path, const std::string& detector_name,
                const fs::path& out_dir, int bin, const std::string& corner, const std::string& config_path) {
  EvalConfig cfg = eval_config(config_path);
  std::optional<Patchd> patch;
  if (!patch_path.empty()) patch = load_patch(patch_path, cfg, !config_path.empty());
  if (corner != "top-left" && corner != "top-right") throw ConfigError("corner must be top-left or top-right");
  const Dataset data = load_dataset(manifest);
  const auto detector = make_detector(detector_name);
  const PositionalGrid g = positional_heatmaps(data, patch, *detector, cfg, bin,
                                               corner == "top-left" ? Corner::kTopLeft : Corner::kTopRight);
  fs::create_directories(out_dir);
  write_png(out_dir / "tp.png", render_heatmap(g.tp, bin));
  write_png(out_dir / "fn.png", render_heatmap(g.fn, bin));
  write_png(out_dir / "fp.png", render_heatmap(g.fp, bin));
  auto csv = open_out(out_dir / "grids.csv");
  write_grids_csv(csv, g);
  const auto q = quadrant_fractions(g.fn, bin, g.width, g.height);
  std::printf("TP %d  FN %d  FP %d\nFN by quadrant (TL TR BL BR): %.3f %.3f %.3f %.3f\n", g.tp.sum(), g.fn.sum(),
              g.fp.sum(), q[0], q[1], q[2], q[3]);
  return 0;
}

int run_transfer(const fs::path& runs_path, const fs::path& out) {
  const TransferSpec spec = load_transfer_spec(runs_path);
  std::vector<TransferRun> runs;
  for (const auto& r : spec.runs) runs.push_back({r.train_dataset, r.method, read_patch(r.patch)});
  std::vector<Dataset> data;
  data.reserve(spec.datasets.size());
  std::vector<NamedDataset> named;
  for (const auto& d : spec.datasets) {
    data.push_back(load_dataset(d.manifest));
    named.push_back({d.name, &data.back()});
  }
  std::vector<std::unique_ptr<Detector>> owned;
  std::vector<const Detector*> detectors;
  for (const auto& m : spec.models) {
    owned.push_back(make_detector(m));
    detectors.push_back(owned.back().get());
  }
  const auto rows = transfer_matrix(runs, named, detectors, spec.eval);
  auto csv = open_out(out);
  write_report_csv(csv, rows);
  write_report_csv(std::cout, rows);
  return 0;
}

int run_synth(std::size_t count, std::uint64_t seed, const fs::path& out_manifest, const std::string& detector_name) {
  const auto detector = make_detector(detector_name);
  const Dataset data = make_synthetic_dataset(count, SceneSpec{}, *detector, seed);
  const fs::path dir = out_manifest.parent_path().empty() ? fs::path(".") : out_manifest.parent_path();
  write_manifest(out_manifest, save_dataset(data, dir));
  std::printf("%zu scenes written\n", data.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remote adversarial patch training and evaluation"};
  app.require_subcommand(1);

  std::string config, out, patch, dataset, detector = "toy", report, method = "Proposed", name, src, manifest,
                                                 fill = "wrap", corner = "top-left", runs;
  int stride = 25, bin = 25;
  std::size_t count = 200;
  std::uint64_t seed = 0;

  auto* train_cmd = app.add_subcommand("train", "train a patch from a TOML run config");
  train_cmd->add_option("--config", config, "run config")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out, "output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a patch on a dataset manifest");
  eval_cmd->add_option("--patch", patch, "patch PNG (omit for the clean baseline)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--dataset", dataset, "dataset manifest")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--detector", detector, "detector name");
  eval_cmd->add_option("--report", report, "CSV report path")->required();
  eval_cmd->add_option("--config", config, "TOML with an [attack] table for theta_d, alpha, placement");
  eval_cmd->add_option("--method", method, "method label for the report");
  eval_cmd->add_option("--name", name, "dataset label (default: manifest stem)");

  auto* uni_cmd = app.add_subcommand("uniform-dataset", "build a coordinate-uniform dataset");
  uni_cmd->add_option("--src", src, "source directory or manifest")->required()->check(CLI::ExistingPath);
  uni_cmd->add_option("--stride", stride, "grid stride in pixels")->check(CLI::PositiveNumber);
  uni_cmd->add_option("--out", manifest, "output manifest")->required();
  uni_cmd->add_option("--detector", detector, "detector used to re-derive GT");
  uni_cmd->add_option("--fill", fill, "wrap | constant");

  auto* heat_cmd = app.add_subcommand("heatmap", "positional TP/FN/FP heat-maps");
  heat_cmd->add_option("--manifest", manifest, "uniform dataset manifest")->required()->check(CLI::ExistingFile);
  heat_cmd->add_option("--patch", patch, "patch PNG")->check(CLI::ExistingFile);
  heat_cmd->add_option("--detector", detector, "detector name");
  heat_cmd->add_option("--out", out, "output directory")->required();
  heat_cmd->add_option("--bin", bin, "bin size in pixels")->check(CLI::PositiveNumber);
  heat_cmd->add_option("--corner", corner, "top-left | top-right");
  heat_cmd->add_option("--config", config, "TOML with an [attack] table");

  auto* transfer_cmd = app.add_subcommand("transfer", "cross-dataset, cross-model transfer table");
  transfer_cmd->add_option("--runs", runs, "transfer spec TOML")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--out", out, "CSV path")->required();

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic one-face scenes");
  synth_cmd->add_option("--count", count, "number of scenes");
  synth_cmd->add_option("--seed", seed, "RNG seed");
  synth_cmd->add_option("--out", manifest, "output manifest")->required();
  synth_cmd->add_option("--detector", detector, "detector that labels the scenes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(config, out);
    if (*eval_cmd) return run_eval(patch, dataset, detector, report, config, method, name);
    if (*uni_cmd) return run_uniform(src, stride, manifest, detector, fill);
    if (*heat_cmd) return run_heatmap(manifest, patch, detector, out, bin, corner, config);
    if (*transfer_cmd) return run_transfer(runs, out);
    if (*synth_cmd) return run_synth(count, seed, manifest, detector);
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& id : e.offenders()) std::cerr << "  " << id << "\n";
    return 2;
  } catch (const UnavailableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
