#include "texrec/sh.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace texrec {

namespace {

// Real SH constants (Ramamoorthi & Hanrahan normalization).
constexpr double kC0 = 0.2820947917738781;   // 1/2 sqrt(1/pi)
constexpr double kC1 = 0.4886025119029199;   // sqrt(3/(4 pi))
constexpr double kC2 = 1.0925484305920792;   // sqrt(15/(4 pi))
constexpr double kC3 = 0.31539156525252005;  // 1/4 sqrt(5/pi)
constexpr double kC4 = 0.5462742152960396;   // 1/4 sqrt(15/pi)

}  // namespace

std::array<double, 9> sh_basis(const Eigen::Vector3d& n) {
  const double x = n.x(), y = n.y(), z = n.z();
  return {kC0,
          kC1 * y,
          kC1 * z,
          kC1 * x,
          kC2 * x * y,
          kC2 * y * z,
          kC3 * (3.0 * z * z - 1.0),
          kC2 * x * z,
          kC4 * (x * x - y * y)};
}

std::array<double, 9> sh_irradiance_weights() {
  const double a0 = M_PI;
  const double a1 = 2.0 * M_PI / 3.0;
  const double a2 = M_PI / 4.0;
  return {a0, a1, a1, a1, a2, a2, a2, a2, a2};
}

Eigen::Vector3d shade_normal_raw(const Eigen::Vector3d& n, const SHLight& light) {
  const auto basis = sh_basis(n);
  const auto w = sh_irradiance_weights();
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  for (int i = 0; i < 9; ++i) {
    const double b = w[i] * basis[i];
    rgb += light.coeffs.col(i) * b;
  }
  return rgb;
}

Eigen::Vector3d shade_normal(const Eigen::Vector3d& n, const SHLight& light) {
  Eigen::Vector3d unit = n;
  const double len = unit.norm();
  if (std::abs(len - 1.0) > 1e-3) {
    if (len <= 1e-6) throw std::invalid_argument("shade_normal: near-zero normal");
    unit /= len;
  }
  return shade_normal_raw(unit, light).cwiseMax(0.0);
}

void shade_normal_backward(const Eigen::Vector3d& n, const SHLight& light,
                           const Eigen::Vector3d& grad_rgb, Eigen::Vector3d& grad_n) {
  const double x = n.x(), y = n.y(), z = n.z();
  const auto w = sh_irradiance_weights();
  // Gradients of the basis polynomials.
  const Eigen::Vector3d db[9] = {
      {0, 0, 0},
      {0, kC1, 0},
      {0, 0, kC1},
      {kC1, 0, 0},
      {kC2 * y, kC2 * x, 0},
      {0, kC2 * z, kC2 * y},
      {0, 0, 6.0 * kC3 * z},
      {kC2 * z, 0, kC2 * x},
      {2.0 * kC4 * x, -2.0 * kC4 * y, 0},
  };
  const Eigen::Vector3d raw = shade_normal_raw(n, light);
  for (int c = 0; c < 3; ++c) {
    if (raw[c] < 0.0) continue;  // clamped channel
    for (int i = 0; i < 9; ++i) grad_n += grad_rgb[c] * light.coeffs(c, i) * w[i] * db[i];
  }
}

Image shading_image(const Image& normals, const SHLight& light, const Image& mask) {
  Image out(normals.height(), normals.width(), 3);
  for (int y = 0; y < normals.height(); ++y)
    for (int x = 0; x < normals.width(); ++x) {
      if (mask.at(y, x, 0) <= 0.0) continue;
      const Eigen::Vector3d n(normals.at(y, x, 0), normals.at(y, x, 1), normals.at(y, x, 2));
      const Eigen::Vector3d e = shade_normal(n, light);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = e[c];
    }
  return out;
}

Image albedo_by_division(const Image& image, const Image& shading, const Image& mask,
                         double eps) {
  if (eps <= 0) throw std::invalid_argument("albedo_by_division: eps must be positive");
  Image out = Image::zeros_like(image);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (mask.at(y, x, 0) <= 0.0) continue;
      for (int c = 0; c < image.channels(); ++c)
        out.at(y, x, c) = image.at(y, x, c) / std::max(shading.at(y, x, c), eps);
    }
  return out;
}

namespace {

// Even counts take the lower middle element so the result is deterministic.
double masked_median(const Image& intensity, const Image& mask) {
  std::vector<double> vals;
  for (int y = 0; y < intensity.height(); ++y)
    for (int x = 0; x < intensity.width(); ++x)
      if (mask.at(y, x, 0) > 0.0) vals.push_back(intensity.at(y, x, 0));
  if (vals.empty()) throw std::invalid_argument("consolidate_albedo: empty mask");
  const size_t mid = (vals.size() - 1) / 2;
  std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
  return vals[mid];
}

Image intensity_of(const Image& rgb) {
  Image out(rgb.height(), rgb.width(), 1);
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x)
      out.at(y, x, 0) = (rgb.at(y, x, 0) + rgb.at(y, x, 1) + rgb.at(y, x, 2)) / 3.0;
  return out;
}

}  // namespace

Image consolidate_albedo(const Image& a_pred, const Image& a_div, const Image& mask,
                         double eps) {
  if (!a_pred.same_shape(a_div)) throw std::invalid_argument("consolidate_albedo: shape mismatch");
  const Image i_pred = intensity_of(a_pred);
  const Image i_div = intensity_of(a_div);

  // Per pixel: chroma from the division albedo, intensity from the
  // prediction.
  Image scaled = Image::zeros_like(a_div);
  for (int y = 0; y < a_div.height(); ++y)
    for (int x = 0; x < a_div.width(); ++x) {
      if (mask.at(y, x, 0) <= 0.0) continue;
      const double ratio = i_pred.at(y, x, 0) / std::max(i_div.at(y, x, 0), eps);
      for (int c = 0; c < 3; ++c) scaled.at(y, x, c) = ratio * a_div.at(y, x, c);
    }

  // Global per-channel scale puts the result back on the division albedo's
  // level, cancelling any scalar factor in the prediction.
  const double med_div = masked_median(i_div, mask);
  const double med_scaled = masked_median(intensity_of(scaled), mask);
  if (med_scaled < eps)
    throw std::invalid_argument("consolidate_albedo: degenerate prediction (median ~ 0)");
  const double scale = med_div / med_scaled;

  Image out = Image::zeros_like(a_div);
  for (int y = 0; y < a_div.height(); ++y)
    for (int x = 0; x < a_div.width(); ++x) {
      if (mask.at(y, x, 0) <= 0.0) continue;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = scale * scaled.at(y, x, c);
    }
  return out;
}

double loss_albedo_normal(const Image& a_p, const Image& a_g, const Image& n_p,
                          const Image& n_g, const Image& mask, double lambda_a,
                          double lambda_n) {
  if (!a_p.same_shape(a_g) || !n_p.same_shape(n_g))
    throw std::invalid_argument("loss_albedo_normal: shape mismatch");
  double la = 0.0, ln = 0.0;
  for (int y = 0; y < a_p.height(); ++y)
    for (int x = 0; x < a_p.width(); ++x) {
      const double m = mask.at(y, x, 0);
      if (m <= 0.0) continue;
      for (int c = 0; c < a_p.channels(); ++c)
        la += std::abs((a_p.at(y, x, c) - a_g.at(y, x, c)) * m);
      for (int c = 0; c < n_p.channels(); ++c)
        ln += std::abs((n_p.at(y, x, c) - n_g.at(y, x, c)) * m);
    }
  return lambda_a * la + lambda_n * ln;
}

Image baseline_albedo_prediction(const Image& a_div, const Image& mask, double sigma) {
  Image blurred = masked_blur(a_div, mask, sigma);
  for (int y = 0; y < blurred.height(); ++y)
    for (int x = 0; x < blurred.width(); ++x)
      if (mask.at(y, x, 0) <= 0.0)
        for (int c = 0; c < blurred.channels(); ++c) blurred.at(y, x, c) = 0.0;
  return blurred;
}

SHLight SHLight::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("light: cannot open " + path);
  nlohmann::json j;
  in >> j;
  const auto& c = j.at("coefficients");
  if (c.size() != 27) throw std::runtime_error("light: expected 27 coefficients in " + path);
  SHLight light;
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < 9; ++i) light.coeffs(ch, i) = c.at(ch * 9 + i).get<double>();
  if (!light.coeffs.allFinite()) throw std::runtime_error("light: non-finite coefficient in " + path);
  return light;
}

void SHLight::save_json(const std::string& path) const {
  nlohmann::ordered_json j;
  std::vector<double> c(27);
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < 9; ++i) c[ch * 9 + i] = coeffs(ch, i);
  j["coefficients"] = c;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("light: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace texrec
