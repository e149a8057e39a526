#pragma once

// Obstruction metrics, coordinate-uniform datasets, positional heat-maps and
// cross-dataset transfer tables.

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rapforge/dataset.hpp"
#include "rapforge/detector.hpp"
#include "rapforge/geometry.hpp"
#include "rapforge/patch_transform.hpp"

namespace rapforge {

/// Harmonic mean of precision tp/(tp+fp) and recall tp/gt; 0 when tp = 0.
double f_score(std::size_t tp, std::size_t fp, std::size_t gt);

struct ScoredImage {
  std::vector<Detection<double>> detections;
  GroundTruthSet gts;
};

/// All-points interpolated AP over a confidence-sorted sweep of every
/// detection in every image. Each GT can be claimed once (later matches to a
/// claimed GT count as false positives).
double average_precision(std::span<const ScoredImage> images, double theta_d);

struct EvalConfig {
  double theta_d{0.5};
  double alpha{5.58};
  Placement placement{Tiled{}};
};

struct ImageResult {
  std::string id;
  std::vector<Detection<double>> detections;
  MatchOutcome outcome;
};

struct EvaluationReport {
  double f_value{0.0};
  double ap{0.0};
  std::size_t gt_count{0};
  std::size_t tp_count{0};          // existential matching: every detection that reaches some GT
  std::size_t fp_count{0};
  std::size_t fn_count{0};
  std::size_t matched_gt_count{0};  // distinct GT boxes reached (the one-to-one tally)
  std::size_t detection_count{0};
  std::vector<ImageResult> per_image;
};

/// Renders the patch into every sample (when given), detects, and tallies.
EvaluationReport evaluate(const Dataset& data, const std::optional<Patchd>& patch, const Detector& detector,
                          const EvalConfig& cfg);

// ---------------------------------------------------------------------------
// Coordinate-uniform dataset

enum class ShiftFill { kWrap, kConstant };

struct UniformDatasetSpec {
  int stride{25};
  ShiftFill fill{ShiftFill::kWrap};
  double fill_value{0.0};
};

/// Reference-corner positions {0, stride, 2*stride, ...} < extent on each axis,
/// so ceil(W/stride) * ceil(H/stride) in total.
std::vector<std::array<int, 2>> uniform_grid(int width, int height, int stride);

/// Translates content by (dx, dy).
Imaged shift_image(const Imaged& image, int dx, int dy, ShiftFill fill, double fill_value = 0.0);
ForegroundMaskd shift_mask(const ForegroundMaskd& mask, int dx, int dy, ShiftFill fill);

struct UniformDataset {
  Dataset samples;                   // shift = grid position the face corner was moved to
  std::size_t candidate_count{0};    // before dropping samples without detections
  std::vector<std::string> skipped;  // sources with no detectable face
};

/// For each source, moves the top-left corner of its largest face onto every
/// grid position, re-detects on the shifted image and keeps samples with at
/// least one detection (those detections become the GT).
UniformDataset make_uniform_dataset(const Dataset& sources, const UniformDatasetSpec& spec,
                                    const Detector& detector);

// ---------------------------------------------------------------------------
// Positional heat-maps

enum class Corner { kTopLeft, kTopRight };

struct PositionalGrid {
  Eigen::ArrayXXi tp;  // rows = y bins, cols = x bins
  Eigen::ArrayXXi fn;
  Eigen::ArrayXXi fp;
  int bin{25};
  Corner corner{Corner::kTopLeft};
  int width{0};
  int height{0};
};

/// TP and FP are binned by the detection's reference corner, FN by the GT's.
PositionalGrid positional_heatmaps(const Dataset& manifest, const std::optional<Patchd>& patch,
                                   const Detector& detector, const EvalConfig& cfg, int bin = 25,
                                   Corner corner = Corner::kTopLeft);

/// Mass share per image quadrant {top-left, top-right, bottom-left, bottom-right};
/// a bin belongs to the quadrant holding its center. All zeros for an empty grid.
std::array<double, 4> quadrant_fractions(const Eigen::ArrayXXi& grid, int bin, int width, int height);

/// Heat-map image ("hot" colormap, one bin = bin x bin pixels).
Imaged render_heatmap(const Eigen::ArrayXXi& grid, int bin);

void write_grids_csv(std::ostream& out, const PositionalGrid& grid);

// ---------------------------------------------------------------------------
// Reports and transfer tables

struct ReportRow {
  std::string dataset;
  std::string method;
  std::string model;
  double f{0.0};
  double ap{0.0};
  std::size_t gt{0};
  std::size_t tp{0};
  std::size_t fp{0};
};

inline constexpr const char* kReportHeader = "dataset,method,model,F,AP,GT,TP,FP";

ReportRow make_row(const std::string& dataset, const std::string& method, const std::string& model,
                   const EvaluationReport& report);
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);

struct TransferRun {
  std::string train_dataset;
  std::string method;
  Patchd patch;
};

struct NamedDataset {
  std::string name;
  const Dataset* data{nullptr};
};

/// Every (run, eval dataset, detector) combination; rows are labeled
/// "<train>/<test>" in run-major, dataset, detector order.
std::vector<ReportRow> transfer_matrix(std::span<const TransferRun> runs, std::span<const NamedDataset> datasets,
                                       std::span<const Detector* const> detectors, const EvalConfig& cfg);

}  // namespace rapforge
