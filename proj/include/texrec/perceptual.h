#pragma once

#include <memory>

#include "texrec/image.h"

namespace texrec {

/// Pluggable image distance used by the texture and mesh refinement
/// losses. Implementations must be non-negative, zero for identical
/// inputs, and differentiable with respect to the first argument.
class PerceptualDistance {
 public:
  virtual ~PerceptualDistance() = default;

  virtual double eval(const Image& x, const Image& y) const = 0;

  /// Returns the distance and accumulates d(distance)/dx into `grad_x`
  /// (same shape as x, pre-initialized by the caller).
  virtual double eval_with_grad(const Image& x, const Image& y, Image& grad_x) const = 0;
};

/// Multi-scale Charbonnier distance over an average-pool image pyramid:
/// sum over pixels of sqrt(d^2 + eps^2) - eps at each level, averaged over
/// levels. A robust stand-in for a pretrained-feature distance.
class PyramidCharbonnierDistance final : public PerceptualDistance {
 public:
  explicit PyramidCharbonnierDistance(int levels = 4, double eps = 1e-3)
      : levels_(levels), eps_(eps) {}

  double eval(const Image& x, const Image& y) const override;
  double eval_with_grad(const Image& x, const Image& y, Image& grad_x) const override;

 private:
  int levels_;
  double eps_;
};

const PerceptualDistance& default_perceptual_distance();

}  // namespace texrec
