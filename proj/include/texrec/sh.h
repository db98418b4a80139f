#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "texrec/image.h"

namespace texrec {

/// Order-2 real spherical-harmonics environment: 9 coefficients per RGB
/// channel in (l, m) lexicographic order
/// (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0), (2,1), (2,2).
struct SHLight {
  Eigen::Matrix<double, 3, 9> coeffs = Eigen::Matrix<double, 3, 9>::Zero();

  SHLight scaled(double s) const {
    SHLight out;
    out.coeffs = coeffs * s;
    return out;
  }

  /// JSON file: {"coefficients": [27 numbers]} channel-major.
  static SHLight load_json(const std::string& path);
  void save_json(const std::string& path) const;
};

/// Real SH basis values at a unit direction, same ordering as SHLight.
std::array<double, 9> sh_basis(const Eigen::Vector3d& n);

/// Irradiance convolution weights per band (pi, 2pi/3, pi/4) expanded to
/// the 9 coefficients.
std::array<double, 9> sh_irradiance_weights();

/// Irradiance for a unit normal, before the non-negativity clamp.
Eigen::Vector3d shade_normal_raw(const Eigen::Vector3d& n, const SHLight& light);

/// Irradiance clamped at zero. Non-unit normals with |n| > 1e-6 are
/// normalized; shorter ones throw std::invalid_argument.
Eigen::Vector3d shade_normal(const Eigen::Vector3d& n, const SHLight& light);

/// Accumulates d(loss)/d(n) given d(loss)/d(irradiance); the clamp gates
/// the gradient per channel. `n` must be unit length.
void shade_normal_backward(const Eigen::Vector3d& n, const SHLight& light,
                           const Eigen::Vector3d& grad_rgb, Eigen::Vector3d& grad_n);

/// Per-pixel shading of a unit-normal image inside the mask, zero outside.
Image shading_image(const Image& normals, const SHLight& light, const Image& mask);

/// image / max(shading, eps) inside the mask, zero outside.
Image albedo_by_division(const Image& image, const Image& shading, const Image& mask,
                         double eps = 1e-4);

/// Combines a "flat" albedo estimate with a shading-consistent one: per
/// pixel the chroma of `a_div` is rescaled to the intensity of `a_pred`,
/// then a masked-median global per-channel scale restores `a_div`'s level.
/// Throws on an empty mask or a degenerate (near-zero median) prediction.
Image consolidate_albedo(const Image& a_pred, const Image& a_div, const Image& mask,
                         double eps = 1e-4);

/// L1 supervision on albedo and normal images inside the mask.
double loss_albedo_normal(const Image& a_p, const Image& a_g, const Image& n_p,
                          const Image& n_g, const Image& mask, double lambda_a,
                          double lambda_n);

/// Baseline albedo predictor: the division albedo low-passed with a masked
/// Gaussian blur. Stands in for a learned predictor so the consolidation
/// path can run end to end.
Image baseline_albedo_prediction(const Image& a_div, const Image& mask, double sigma = 2.0);

}  // namespace texrec
