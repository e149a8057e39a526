#pragma once

// The patch application operator: scale the patch to the largest face, tile it
// (or pin it at a fixed position), and composite it behind the foreground mask.
//
// Scaling and tiling are both linear along each axis, so the whole background
// layer of one channel is   L_y * P * L_x^T   with L = (tile) * (resize).
// The adjoint with respect to the patch is then   L_y^T * dB * L_x.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <variant>

#include "rapforge/errors.hpp"
#include "rapforge/geometry.hpp"
#include "rapforge/image.hpp"

namespace rapforge {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct Patch {
  Image<Scalar> pixels;

  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
  int channels() const { return pixels.channels(); }

  static Patch constant(int w, int h, int channels, Scalar value) {
    return {Image<Scalar>(w, h, channels, value)};
  }
};

template <typename Scalar>
struct ScaledPatch {
  Image<Scalar> pixels;
  double scale{1.0};

  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
};

template <typename Scalar>
struct PatchTile {
  Image<Scalar> pixels;
};

/// 1 = foreground (kept), 0 = background (replaced by the patch layer).
template <typename Scalar>
struct ForegroundMask {
  Plane<Scalar> values;

  int width() const { return static_cast<int>(values.cols()); }
  int height() const { return static_cast<int>(values.rows()); }

  static ForegroundMask constant(int w, int h, Scalar v) { return {Plane<Scalar>::Constant(h, w, v)}; }
};

using Patchd = Patch<double>;
using ForegroundMaskd = ForegroundMask<double>;

/// Patch origin sits at (phase_x, phase_y); the pattern repeats across the whole frame.
struct Tiled {
  int phase_x = 0;
  int phase_y = 0;
};

/// A single untiled copy with its top-left corner at (x, y).
struct FixedAt {
  int x = 0;
  int y = 0;
};

using Placement = std::variant<Tiled, FixedAt>;

struct ScaleInfo {
  double scale{1.0};
  int width{1};
  int height{1};
  std::size_t face_index{0};
};

/// s = sqrt(alpha * area(largest face) / area(patch)); scaled sides rounded, floored at 1.
inline ScaleInfo compute_scale(int patch_w, int patch_h, const GroundTruthSet& gts, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (gts.empty()) throw DomainError("scaling needs at least one ground-truth face");
  if (patch_w < 1 || patch_h < 1) throw DomainError("patch dimensions must be >= 1");
  std::size_t k = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    require_valid(gts.boxes[i]);
    if (gts.boxes[i].area() > gts.boxes[k].area()) k = i;
  }
  const auto& face = gts.boxes[k];
  ScaleInfo info;
  info.face_index = k;
  info.scale = std::sqrt(alpha * face.w * face.h / (double(patch_h) * double(patch_w)));
  info.width = std::max(1, static_cast<int>(std::lround(patch_w * info.scale)));
  info.height = std::max(1, static_cast<int>(std::lround(patch_h * info.scale)));
  return info;
}

/// Bilinear resampling matrix (out x in), half-pixel centers, edge clamped.
/// Equal sizes give the identity.
template <typename Scalar>
Matrix<Scalar> bilinear_resize_matrix(int in, int out) {
  Matrix<Scalar> r = Matrix<Scalar>::Zero(out, in);
  const double ratio = double(in) / double(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, double(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    const double t = src - i0;
    r(o, i0) += Scalar(1.0 - t);
    r(o, i1) += Scalar(t);
  }
  return r;
}

/// Row i selects source index (i - phase) mod period.
template <typename Scalar>
Matrix<Scalar> tile_matrix(int out, int period, int phase = 0) {
  Matrix<Scalar> t = Matrix<Scalar>::Zero(out, period);
  for (int i = 0; i < out; ++i) t(i, ((i - phase) % period + period) % period) = Scalar(1);
  return t;
}

/// Row i selects source index i - offset when it falls inside [0, len).
template <typename Scalar>
Matrix<Scalar> placement_matrix(int out, int len, int offset) {
  Matrix<Scalar> t = Matrix<Scalar>::Zero(out, len);
  for (int i = 0; i < out; ++i) {
    const int src = i - offset;
    if (src >= 0 && src < len) t(i, src) = Scalar(1);
  }
  return t;
}

template <typename Scalar>
ScaledPatch<Scalar> scale_patch(const Patch<Scalar>& patch, const GroundTruthSet& gts, double alpha) {
  const auto info = compute_scale(patch.width(), patch.height(), gts, alpha);
  const Matrix<Scalar> ry = bilinear_resize_matrix<Scalar>(patch.height(), info.height);
  const Matrix<Scalar> rx = bilinear_resize_matrix<Scalar>(patch.width(), info.width);
  std::vector<Plane<Scalar>> planes;
  for (int c = 0; c < patch.channels(); ++c)
    planes.push_back((ry * patch.pixels.channel(c).matrix() * rx.transpose()).array());
  return {Image<Scalar>(std::move(planes)), info.scale};
}

template <typename Scalar>
PatchTile<Scalar> tile_patch(int image_w, int image_h, const ScaledPatch<Scalar>& scaled,
                             int phase_x = 0, int phase_y = 0) {
  if (image_w < 1 || image_h < 1) throw DomainError("image dimensions must be >= 1");
  std::vector<Plane<Scalar>> planes;
  for (int c = 0; c < scaled.pixels.channels(); ++c) {
    const auto& src = scaled.pixels.channel(c);
    Plane<Scalar> out(image_h, image_w);
    for (int y = 0; y < image_h; ++y) {
      const int sy = ((y - phase_y) % scaled.height() + scaled.height()) % scaled.height();
      for (int x = 0; x < image_w; ++x)
        out(y, x) = src(sy, ((x - phase_x) % scaled.width() + scaled.width()) % scaled.width());
    }
    planes.push_back(std::move(out));
  }
  return {Image<Scalar>(std::move(planes))};
}

/// out = mask * foreground + (1 - mask) * background
template <typename Scalar>
Image<Scalar> composite(const Image<Scalar>& foreground, const ForegroundMask<Scalar>& mask,
                        const Image<Scalar>& background) {
  if (!foreground.same_shape(background) || mask.width() != foreground.width() ||
      mask.height() != foreground.height())
    throw DomainError("composite inputs must share height and width");
  std::vector<Plane<Scalar>> planes;
  for (int c = 0; c < foreground.channels(); ++c)
    planes.push_back(mask.values * foreground.channel(c) + (Scalar(1) - mask.values) * background.channel(c));
  return Image<Scalar>(std::move(planes));
}

/// The patch operator bound to one image geometry. Construction precomputes
/// the per-axis linear maps so apply/backward are two small matrix products
/// per channel.
template <typename Scalar>
class PatchApplier {
 public:
  PatchApplier(int image_w, int image_h, int patch_w, int patch_h, const GroundTruthSet& gts,
               double alpha, Placement placement = Tiled{})
      : image_w_(image_w), image_h_(image_h), info_(compute_scale(patch_w, patch_h, gts, alpha)) {
    if (image_w < 1 || image_h < 1) throw DomainError("image dimensions must be >= 1");
    const Matrix<Scalar> ry = bilinear_resize_matrix<Scalar>(patch_h, info_.height);
    const Matrix<Scalar> rx = bilinear_resize_matrix<Scalar>(patch_w, info_.width);
    if (const auto* t = std::get_if<Tiled>(&placement)) {
      ly_ = tile_matrix<Scalar>(image_h, info_.height, t->phase_y) * ry;
      lx_ = tile_matrix<Scalar>(image_w, info_.width, t->phase_x) * rx;
      coverage_ = Plane<Scalar>::Ones(image_h, image_w);
      region_ = Box<double>{t->phase_x + info_.width / 2.0, t->phase_y + info_.height / 2.0,
                            double(info_.width), double(info_.height)};
    } else {
      const auto& f = std::get<FixedAt>(placement);
      const Matrix<Scalar> py = placement_matrix<Scalar>(image_h, info_.height, f.y);
      const Matrix<Scalar> px = placement_matrix<Scalar>(image_w, info_.width, f.x);
      ly_ = py * ry;
      lx_ = px * rx;
      coverage_ = (py.rowwise().sum() * px.rowwise().sum().transpose()).array();
      region_ = Box<double>{f.x + info_.width / 2.0, f.y + info_.height / 2.0, double(info_.width),
                            double(info_.height)};
    }
  }

  const ScaleInfo& scale_info() const { return info_; }
  const Plane<Scalar>& coverage() const { return coverage_; }
  /// One patch copy in image coordinates (the cell at the tiling origin when tiled).
  const Box<double>& patch_region() const { return region_; }

  /// Background layer: patch where covered, original image elsewhere.
  Image<Scalar> background(const Image<Scalar>& image, const Patch<Scalar>& patch) const {
    check(image, patch);
    std::vector<Plane<Scalar>> planes;
    for (int c = 0; c < image.channels(); ++c) {
      const Plane<Scalar> layer = (ly_ * patch.pixels.channel(c).matrix() * lx_.transpose()).array();
      planes.push_back(coverage_ * layer + (Scalar(1) - coverage_) * image.channel(c));
    }
    return Image<Scalar>(std::move(planes));
  }

  Image<Scalar> apply(const Image<Scalar>& image, const ForegroundMask<Scalar>& mask,
                      const Patch<Scalar>& patch) const {
    return composite(image, mask, background(image, patch));
  }

  /// d(loss)/d(patch) given d(loss)/d(output image).
  Patch<Scalar> backward(const Image<Scalar>& d_out, const ForegroundMask<Scalar>& mask) const {
    if (d_out.width() != image_w_ || d_out.height() != image_h_ || mask.width() != image_w_ ||
        mask.height() != image_h_)
      throw DomainError("gradient and mask must match the image geometry");
    const Plane<Scalar> through = (Scalar(1) - mask.values) * coverage_;
    std::vector<Plane<Scalar>> planes;
    for (int c = 0; c < d_out.channels(); ++c)
      planes.push_back((ly_.transpose() * (through * d_out.channel(c)).matrix() * lx_).array());
    return {Image<Scalar>(std::move(planes))};
  }

 private:
  void check(const Image<Scalar>& image, const Patch<Scalar>& patch) const {
    if (image.width() != image_w_ || image.height() != image_h_)
      throw DomainError("image does not match the applier geometry");
    if (patch.channels() != image.channels()) throw DomainError("patch and image channel counts differ");
    if (patch.width() != lx_.cols() || patch.height() != ly_.cols())
      throw DomainError("patch does not match the applier geometry");
  }

  int image_w_;
  int image_h_;
  ScaleInfo info_;
  Matrix<Scalar> ly_;
  Matrix<Scalar> lx_;
  Plane<Scalar> coverage_;
  Box<double> region_;
};

/// G(I, M(I), T(I, S(P, g))) for a precomputed mask.
template <typename Scalar>
Image<Scalar> apply_patch(const Image<Scalar>& image, const GroundTruthSet& gts, const Patch<Scalar>& patch,
                          double alpha, const ForegroundMask<Scalar>& mask, Placement placement = Tiled{}) {
  const PatchApplier<Scalar> applier(image.width(), image.height(), patch.width(), patch.height(), gts, alpha,
                                     placement);
  return applier.apply(image, mask, patch);
}

}  // namespace rapforge
