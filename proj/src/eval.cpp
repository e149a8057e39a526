#include "rapforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace rapforge {

double f_score(std::size_t tp, std::size_t fp, std::size_t gt) {
  if (gt == 0) throw DomainError("F value needs at least one ground-truth box");
  if (tp == 0) return 0.0;
  const double precision = double(tp) / double(tp + fp);
  const double recall = double(tp) / double(gt);
  return 2.0 * precision * recall / (precision + recall);
}

double average_precision(std::span<const ScoredImage> images, double theta_d) {
  struct Ranked {
    double confidence;
    std::size_t image;
    std::size_t det;
  };
  std::vector<Ranked> ranked;
  std::size_t total_gt = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    total_gt += images[i].gts.size();
    for (std::size_t j = 0; j < images[i].detections.size(); ++j)
      ranked.push_back({images[i].detections[j].confidence, i, j});
  }
  if (total_gt == 0) throw DomainError("AP needs at least one ground-truth box");
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

  std::vector<std::vector<bool>> claimed(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) claimed[i].assign(images[i].gts.size(), false);

  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t n = 0; n < ranked.size(); ++n) {
    const auto& img = images[ranked[n].image];
    const auto& box = img.detections[ranked[n].det].box;
    double best = -1.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < img.gts.size(); ++k) {
      const double v = iou(box, img.gts.boxes[k]);
      if (v > best) {
        best = v;
        best_k = k;
      }
    }
    if (best >= theta_d && !claimed[ranked[n].image][best_k]) {
      claimed[ranked[n].image][best_k] = true;
      ++tp;
    }
    precision.push_back(double(tp) / double(n + 1));
    recall.push_back(double(tp) / double(total_gt));
  }
  // precision envelope, then area under the step curve
  for (std::size_t n = precision.size(); n-- > 1;) precision[n - 1] = std::max(precision[n - 1], precision[n]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t n = 0; n < precision.size(); ++n) {
    ap += (recall[n] - prev_recall) * precision[n];
    prev_recall = recall[n];
  }
  return ap;
}

namespace {

Imaged render(const Sample& s, const std::optional<Patchd>& patch, const EvalConfig& cfg) {
  if (!patch) return s.image;
  if (!s.mask) throw DatasetError("patched evaluation needs masks", {s.id});
  return apply_patch(s.image, s.gt, *patch, cfg.alpha, *s.mask, cfg.placement);
}

}  // namespace

EvaluationReport evaluate(const Dataset& data, const std::optional<Patchd>& patch, const Detector& detector,
                          const EvalConfig& cfg) {
  validate_dataset(data, patch.has_value());
  EvaluationReport report;
  std::vector<ScoredImage> scored;
  scored.reserve(data.size());
  for (const auto& s : data) {
    ImageResult r;
    r.id = s.id;
    r.detections = detector.detect(render(s, patch, cfg));
    r.outcome = classify(r.detections, s.gt, cfg.theta_d);
    report.gt_count += s.gt.size();
    report.tp_count += r.outcome.tp.size();
    report.fp_count += r.outcome.fp.size();
    report.fn_count += r.outcome.fn.size();
    report.matched_gt_count += r.outcome.matched_gt_count(s.gt.size());
    report.detection_count += r.detections.size();
    scored.push_back({r.detections, s.gt});
    report.per_image.push_back(std::move(r));
  }
  report.f_value = f_score(report.tp_count, report.fp_count, report.gt_count);
  report.ap = average_precision(scored, cfg.theta_d);
  return report;
}

std::vector<std::array<int, 2>> uniform_grid(int width, int height, int stride) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  std::vector<std::array<int, 2>> out;
  for (int y = 0; y < height; y += stride)
    for (int x = 0; x < width; x += stride) out.push_back({x, y});
  return out;
}

namespace {

Planed shift_plane(const Planed& p, int dx, int dy, ShiftFill fill, double fill_value) {
  const auto h = static_cast<int>(p.rows());
  const auto w = static_cast<int>(p.cols());
  Planed out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int sx = x - dx, sy = y - dy;
      if (fill == ShiftFill::kWrap) {
        sx = ((sx % w) + w) % w;
        sy = ((sy % h) + h) % h;
        out(y, x) = p(sy, sx);
      } else {
        out(y, x) = (sx >= 0 && sx < w && sy >= 0 && sy < h) ? p(sy, sx) : fill_value;
      }
    }
  return out;
}

}  // namespace

Imaged shift_image(const Imaged& image, int dx, int dy, ShiftFill fill, double fill_value) {
  std::vector<Planed> planes;
  for (int c = 0; c < image.channels(); ++c) planes.push_back(shift_plane(image.channel(c), dx, dy, fill, fill_value));
  return Imaged(std::move(planes));
}

ForegroundMaskd shift_mask(const ForegroundMaskd& mask, int dx, int dy, ShiftFill fill) {
  return {shift_plane(mask.values, dx, dy, fill, 0.0)};
}

UniformDataset make_uniform_dataset(const Dataset& sources, const UniformDatasetSpec& spec,
                                    const Detector& detector) {
  if (spec.stride < 1) throw ConfigError("stride must be >= 1");
  UniformDataset out;
  for (const auto& src : sources) {
    std::vector<Box<double>> faces = src.gt.boxes;
    if (faces.empty())
      for (const auto& d : detector.detect(src.image)) faces.push_back(d.box);
    if (faces.empty()) {
      out.skipped.push_back(src.id);
      continue;
    }
    const auto largest = std::max_element(faces.begin(), faces.end(),
                                          [](const auto& a, const auto& b) { return a.area() < b.area(); });
    const auto c = largest->corners();
    const int fx = static_cast<int>(std::lround(c.x0));
    const int fy = static_cast<int>(std::lround(c.y0));
    for (const auto& pos : uniform_grid(src.image.width(), src.image.height(), spec.stride)) {
      ++out.candidate_count;
      const int dx = pos[0] - fx, dy = pos[1] - fy;
      Sample s;
      s.id = src.id + "@" + std::to_string(pos[0]) + "," + std::to_string(pos[1]);
      s.image = shift_image(src.image, dx, dy, spec.fill, spec.fill_value);
      if (src.mask) s.mask = shift_mask(*src.mask, dx, dy, spec.fill);
      const auto dets = detector.detect(s.image);
      if (dets.empty()) continue;
      s.gt.image_id = s.id;
      for (const auto& d : dets) s.gt.boxes.push_back(d.box);
      s.shift = pos;
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::array<double, 2> reference_corner(const Box<double>& b, Corner corner) {
  const auto c = b.corners();
  return corner == Corner::kTopLeft ? std::array<double, 2>{c.x0, c.y0} : std::array<double, 2>{c.x1, c.y0};
}

void bump(Eigen::ArrayXXi& grid, const std::array<double, 2>& pt, int bin) {
  const auto bx = std::clamp(static_cast<Eigen::Index>(std::floor(pt[0] / bin)), Eigen::Index{0}, grid.cols() - 1);
  const auto by = std::clamp(static_cast<Eigen::Index>(std::floor(pt[1] / bin)), Eigen::Index{0}, grid.rows() - 1);
  ++grid(by, bx);
}

}  // namespace

PositionalGrid positional_heatmaps(const Dataset& manifest, const std::optional<Patchd>& patch,
                                   const Detector& detector, const EvalConfig& cfg, int bin, Corner corner) {
  if (manifest.empty()) throw DomainError("heat-maps need a non-empty manifest");
  if (bin < 1) throw ConfigError("bin size must be >= 1");
  PositionalGrid grid;
  grid.bin = bin;
  grid.corner = corner;
  for (const auto& s : manifest) {
    grid.width = std::max(grid.width, s.image.width());
    grid.height = std::max(grid.height, s.image.height());
  }
  const int cols = (grid.width + bin - 1) / bin;
  const int rows = (grid.height + bin - 1) / bin;
  grid.tp = grid.fn = grid.fp = Eigen::ArrayXXi::Zero(rows, cols);

  const EvaluationReport report = evaluate(manifest, patch, detector, cfg);
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& r = report.per_image[i];
    for (const auto& [j, k] : r.outcome.tp) bump(grid.tp, reference_corner(r.detections[j].box, corner), bin);
    for (std::size_t j : r.outcome.fp) bump(grid.fp, reference_corner(r.detections[j].box, corner), bin);
    for (std::size_t k : r.outcome.fn) bump(grid.fn, reference_corner(manifest[i].gt.boxes[k], corner), bin);
  }
  return grid;
}

std::array<double, 4> quadrant_fractions(const Eigen::ArrayXXi& grid, int bin, int width, int height) {
  std::array<double, 4> mass{};
  const double total = grid.sum();
  if (total == 0) return mass;
  for (Eigen::Index by = 0; by < grid.rows(); ++by)
    for (Eigen::Index bx = 0; bx < grid.cols(); ++bx) {
      const bool right = (bx + 0.5) * bin >= width / 2.0;
      const bool bottom = (by + 0.5) * bin >= height / 2.0;
      mass[static_cast<std::size_t>((bottom ? 2 : 0) + (right ? 1 : 0))] += grid(by, bx);
    }
  for (auto& m : mass) m /= total;
  return mass;
}

Imaged render_heatmap(const Eigen::ArrayXXi& grid, int bin) {
  const double peak = std::max(1, grid.maxCoeff());
  const int w = static_cast<int>(grid.cols()) * bin;
  const int h = static_cast<int>(grid.rows()) * bin;
  Imaged out(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double t = grid(y / bin, x / bin) / peak;
      out.at(x, y, 0) = std::clamp(3.0 * t, 0.0, 1.0);
      out.at(x, y, 1) = std::clamp(3.0 * t - 1.0, 0.0, 1.0);
      out.at(x, y, 2) = std::clamp(3.0 * t - 2.0, 0.0, 1.0);
    }
  return out;
}

void write_grids_csv(std::ostream& out, const PositionalGrid& grid) {
  out << "kind,bin_x,bin_y,x,y,count\n";
  const std::pair<const char*, const Eigen::ArrayXXi*> kinds[] = {{"tp", &grid.tp}, {"fn", &grid.fn}, {"fp", &grid.fp}};
  for (const auto& [name, g] : kinds)
    for (Eigen::Index by = 0; by < g->rows(); ++by)
      for (Eigen::Index bx = 0; bx < g->cols(); ++bx)
        out << name << ',' << bx << ',' << by << ',' << bx * grid.bin << ',' << by * grid.bin << ',' << (*g)(by, bx)
            << '\n';
}

ReportRow make_row(const std::string& dataset, const std::string& method, const std::string& model,
                   const EvaluationReport& report) {
  return {dataset, method, model, report.f_value, report.ap, report.gt_count, report.tp_count, report.fp_count};
}

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << kReportHeader << '\n';
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.method << ',' << r.model << ',';
    out.precision(3);
    out << std::scientific << r.f << ',' << r.ap << ',';
    out << std::defaultfloat;
    out.precision(6);
    out << r.gt << ',' << r.tp << ',' << r.fp << '\n';
  }
}

std::vector<ReportRow> transfer_matrix(std::span<const TransferRun> runs, std::span<const NamedDataset> datasets,
                                       std::span<const Detector* const> detectors, const EvalConfig& cfg) {
  std::vector<ReportRow> rows;
  for (const auto& run : runs)
    for (const auto& ds : datasets) {
      if (ds.data == nullptr) throw DomainError("dataset '" + ds.name + "' is not loaded");
      for (const Detector* det : detectors) {
        const auto report = evaluate(*ds.data, run.patch, *det, cfg);
        rows.push_back(make_row(run.train_dataset + "/" + ds.name, run.method, det->handle().name, report));
      }
    }
  return rows;
}

}  // namespace rapforge
