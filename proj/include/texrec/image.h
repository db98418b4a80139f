#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace texrec {

/// Dense row-major H x W x C image of doubles, linear light.
///
/// Pixel centers sit at continuous coordinates (x + 0.5, y + 0.5); UV-space
/// maps use the same convention with texel (ix, iy) centered at
/// ((ix + 0.5) / W, (iy + 0.5) / H).
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : h_(height), w_(width), c_(channels),
        data_(static_cast<size_t>(height) * width * channels, fill) {}

  static Image zeros_like(const Image& o) { return Image(o.h_, o.w_, o.c_); }

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  double& at(int y, int x, int c = 0) {
    assert(y >= 0 && y < h_ && x >= 0 && x < w_ && c >= 0 && c < c_);
    return data_[(static_cast<size_t>(y) * w_ + x) * c_ + c];
  }
  double at(int y, int x, int c = 0) const {
    assert(y >= 0 && y < h_ && x >= 0 && x < w_ && c >= 0 && c < c_);
    return data_[(static_cast<size_t>(y) * w_ + x) * c_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Image& o) const {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

  /// Bilinear sample at continuous pixel coordinates (pixel centers at
  /// integer+0.5); clamp addressing at borders. `out` receives channels().
  void sample_bilinear(double x, double y, double* out) const;

  /// Scatter-add `value` (one entry per channel) with bilinear weights
  /// at continuous pixel coordinates; adjoint of sample_bilinear.
  void splat_bilinear(double x, double y, const double* value);

  /// d(sample)/dx and d(sample)/dy at (x, y), one entry per channel.
  void sample_bilinear_grad(double x, double y, double* dsdx, double* dsdy) const;

 private:
  int h_ = 0, w_ = 0, c_ = 0;
  std::vector<double> data_;
};

/// 2x2 average-pool downsample (odd trailing row/col handled by clamping).
Image downsample2(const Image& img);

/// Separable Gaussian blur, kernel radius = ceil(3 sigma).
Image gaussian_blur(const Image& img, double sigma);

/// Gaussian blur normalized by the blurred mask so values never bleed
/// from outside the mask; pixels where the blurred mask is ~0 become 0.
Image masked_blur(const Image& img, const Image& mask, double sigma);

}  // namespace texrec
