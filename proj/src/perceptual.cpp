#include "texrec/perceptual.h"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace texrec {

namespace {

// hypot keeps rho(0) exactly zero.
inline double charbonnier(double t, double eps) { return std::hypot(t, eps) - eps; }
inline double charbonnier_grad(double t, double eps) { return t / std::hypot(t, eps); }

}  // namespace

double PyramidCharbonnierDistance::eval(const Image& x, const Image& y) const {
  if (!x.same_shape(y)) throw std::invalid_argument("perceptual: shape mismatch");
  double total = 0.0;
  Image a = x, b = y;
  for (int level = 0; level < levels_; ++level) {
    double level_sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
      level_sum += charbonnier(a.data()[i] - b.data()[i], eps_);
    total += level_sum;
    if (level + 1 < levels_) {
      a = downsample2(a);
      b = downsample2(b);
    }
  }
  return total / levels_;
}

double PyramidCharbonnierDistance::eval_with_grad(const Image& x, const Image& y,
                                                  Image& grad_x) const {
  if (!x.same_shape(y)) throw std::invalid_argument("perceptual: shape mismatch");
  if (!grad_x.same_shape(x)) throw std::invalid_argument("perceptual: grad shape mismatch");

  std::vector<Image> xs{x}, ys{y};
  for (int level = 1; level < levels_; ++level) {
    xs.push_back(downsample2(xs.back()));
    ys.push_back(downsample2(ys.back()));
  }

  double total = 0.0;
  const double scale = 1.0 / levels_;
  // Per-level gradients, then transpose of the average pool chain back to
  // full resolution.
  Image carried;  // gradient flowing down from coarser levels, at level l+1
  for (int level = levels_ - 1; level >= 0; --level) {
    const Image& a = xs[level];
    const Image& b = ys[level];
    Image g(a.height(), a.width(), a.channels());
    double level_sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      const double d = a.data()[i] - b.data()[i];
      level_sum += charbonnier(d, eps_);
      g.data()[i] = scale * charbonnier_grad(d, eps_);
    }
    total += level_sum;

    if (!carried.empty()) {
      // upsample-transpose: each coarse pixel contributed 1/4 of each of
      // its (up to) four sources.
      for (int cy = 0; cy < carried.height(); ++cy)
        for (int cx = 0; cx < carried.width(); ++cx)
          for (int c = 0; c < carried.channels(); ++c) {
            const double v = 0.25 * carried.at(cy, cx, c);
            const int y1 = std::min(2 * cy + 1, a.height() - 1);
            const int x1 = std::min(2 * cx + 1, a.width() - 1);
            g.at(2 * cy, 2 * cx, c) += v;
            g.at(2 * cy, x1, c) += v;
            g.at(y1, 2 * cx, c) += v;
            g.at(y1, x1, c) += v;
          }
    }
    carried = std::move(g);
  }

  for (size_t i = 0; i < grad_x.size(); ++i) grad_x.data()[i] += carried.data()[i];
  return total * scale;
}

const PerceptualDistance& default_perceptual_distance() {
  static const PyramidCharbonnierDistance instance;
  return instance;
}

}  // namespace texrec
