#include "texrec/image.h"

#include <algorithm>
#include <cmath>

namespace texrec {

namespace {

inline void bilinear_setup(double x, double y, int w, int h,
                           int& x0, int& x1, int& y0, int& y1,
                           double& fx, double& fy) {
  // Grid values live at pixel centers: continuous coord (i + 0.5) hits
  // sample i exactly.
  const double gx = x - 0.5;
  const double gy = y - 0.5;
  const double fx0 = std::floor(gx);
  const double fy0 = std::floor(gy);
  fx = gx - fx0;
  fy = gy - fy0;
  x0 = std::clamp(static_cast<int>(fx0), 0, w - 1);
  x1 = std::clamp(static_cast<int>(fx0) + 1, 0, w - 1);
  y0 = std::clamp(static_cast<int>(fy0), 0, h - 1);
  y1 = std::clamp(static_cast<int>(fy0) + 1, 0, h - 1);
}

}  // namespace

void Image::sample_bilinear(double x, double y, double* out) const {
  int x0, x1, y0, y1;
  double fx, fy;
  bilinear_setup(x, y, w_, h_, x0, x1, y0, y1, fx, fy);
  const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
  const double w01 = (1 - fx) * fy, w11 = fx * fy;
  for (int c = 0; c < c_; ++c) {
    out[c] = w00 * at(y0, x0, c) + w10 * at(y0, x1, c) +
             w01 * at(y1, x0, c) + w11 * at(y1, x1, c);
  }
}

void Image::splat_bilinear(double x, double y, const double* value) {
  int x0, x1, y0, y1;
  double fx, fy;
  bilinear_setup(x, y, w_, h_, x0, x1, y0, y1, fx, fy);
  const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
  const double w01 = (1 - fx) * fy, w11 = fx * fy;
  for (int c = 0; c < c_; ++c) {
    at(y0, x0, c) += w00 * value[c];
    at(y0, x1, c) += w10 * value[c];
    at(y1, x0, c) += w01 * value[c];
    at(y1, x1, c) += w11 * value[c];
  }
}

void Image::sample_bilinear_grad(double x, double y, double* dsdx, double* dsdy) const {
  int x0, x1, y0, y1;
  double fx, fy;
  bilinear_setup(x, y, w_, h_, x0, x1, y0, y1, fx, fy);
  for (int c = 0; c < c_; ++c) {
    const double v00 = at(y0, x0, c), v10 = at(y0, x1, c);
    const double v01 = at(y1, x0, c), v11 = at(y1, x1, c);
    // Clamped corners make the sample constant past the border; the
    // derivative of the interpolation weights is still well defined.
    dsdx[c] = (1 - fy) * (v10 - v00) + fy * (v11 - v01);
    dsdy[c] = (1 - fx) * (v01 - v00) + fx * (v11 - v10);
  }
}

Image downsample2(const Image& img) {
  const int h = std::max(1, img.height() / 2);
  const int w = std::max(1, img.width() / 2);
  Image out(h, w, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int y0 = 2 * y, x0 = 2 * x;
      const int y1 = std::min(2 * y + 1, img.height() - 1);
      const int x1 = std::min(2 * x + 1, img.width() - 1);
      for (int c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = 0.25 * (img.at(y0, x0, c) + img.at(y0, x1, c) +
                                  img.at(y1, x0, c) + img.at(y1, x1, c));
      }
    }
  }
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma, int& radius) {
  radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  return k;
}

Image convolve_separable(const Image& img, const std::vector<double>& k, int radius) {
  Image tmp = Image::zeros_like(img);
  Image out = Image::zeros_like(img);
  const int h = img.height(), w = img.width(), ch = img.channels();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * img.at(y, std::clamp(x + i, 0, w - 1), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * tmp.at(std::clamp(y + i, 0, h - 1), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  int radius;
  const auto k = gaussian_kernel(sigma, radius);
  return convolve_separable(img, k, radius);
}

Image masked_blur(const Image& img, const Image& mask, double sigma) {
  Image masked = Image::zeros_like(img);
  const int h = img.height(), w = img.width(), ch = img.channels();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        masked.at(y, x, c) = img.at(y, x, c) * mask.at(y, x, 0);

  Image blurred = gaussian_blur(masked, sigma);
  Image mask_blur = gaussian_blur(mask, sigma);
  Image out = Image::zeros_like(img);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = mask_blur.at(y, x, 0);
      if (m < 1e-8) continue;
      for (int c = 0; c < ch; ++c) out.at(y, x, c) = blurred.at(y, x, c) / m;
    }
  return out;
}

}  // namespace texrec
