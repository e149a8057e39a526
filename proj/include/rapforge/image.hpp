#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "rapforge/errors.hpp"

namespace rapforge {

// One channel. Rows are image rows (y), columns are image columns (x), so a
// pixel [x, y] lives at plane(y, x).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Planed = Plane<double>;

template <typename Scalar>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, Scalar fill = Scalar(0))
      : planes_(static_cast<std::size_t>(channels), Plane<Scalar>::Constant(height, width, fill)) {
    if (width < 1 || height < 1 || channels < 1) throw DomainError("image dimensions must be >= 1");
  }
  explicit Image(std::vector<Plane<Scalar>> planes) : planes_(std::move(planes)) {
    if (planes_.empty()) throw DomainError("image needs at least one channel");
    for (const auto& p : planes_)
      if (p.rows() != planes_.front().rows() || p.cols() != planes_.front().cols())
        throw DomainError("image channels must share dimensions");
  }

  int width() const { return planes_.empty() ? 0 : static_cast<int>(planes_.front().cols()); }
  int height() const { return planes_.empty() ? 0 : static_cast<int>(planes_.front().rows()); }
  int channels() const { return static_cast<int>(planes_.size()); }
  bool empty() const { return planes_.empty(); }

  Plane<Scalar>& channel(int c) { return planes_[static_cast<std::size_t>(c)]; }
  const Plane<Scalar>& channel(int c) const { return planes_[static_cast<std::size_t>(c)]; }

  Scalar& at(int x, int y, int c = 0) { return channel(c)(y, x); }
  Scalar at(int x, int y, int c = 0) const { return channel(c)(y, x); }

  bool same_shape(const Image& o) const {
    return width() == o.width() && height() == o.height() && channels() == o.channels();
  }

  /// Channel mean; the toy detector works on this.
  Plane<Scalar> luminance() const {
    Plane<Scalar> out = planes_.front();
    for (std::size_t c = 1; c < planes_.size(); ++c) out += planes_[c];
    return out / Scalar(planes_.size());
  }

  Image& clip(Scalar lo = Scalar(0), Scalar hi = Scalar(1)) {
    for (auto& p : planes_) p = p.max(lo).min(hi);
    return *this;
  }

  Scalar min_value() const {
    Scalar m = planes_.front().minCoeff();
    for (const auto& p : planes_) m = std::min(m, p.minCoeff());
    return m;
  }
  Scalar max_value() const {
    Scalar m = planes_.front().maxCoeff();
    for (const auto& p : planes_) m = std::max(m, p.maxCoeff());
    return m;
  }

  template <typename Other>
  Image<Other> cast() const {
    std::vector<Plane<Other>> out;
    out.reserve(planes_.size());
    for (const auto& p : planes_) out.push_back(p.template cast<Other>());
    return Image<Other>(std::move(out));
  }

  friend bool operator==(const Image& a, const Image& b) {
    if (!a.same_shape(b)) return false;
    for (int c = 0; c < a.channels(); ++c)
      if ((a.channel(c) != b.channel(c)).any()) return false;
    return true;
  }

 private:
  std::vector<Plane<Scalar>> planes_;
};

using Imaged = Image<double>;

}  // namespace rapforge
