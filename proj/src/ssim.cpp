#include "texrec/ssim.h"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace texrec {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> window_kernel() {
  std::vector<double> k(kWindow);
  double total = 0.0;
  const int r = kWindow / 2;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - r;
    k[i] = std::exp(-0.5 * d * d / (kSigma * kSigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

// 'valid' separable convolution of a single channel.
void convolve_valid(const Image& img, int channel, const std::vector<double>& k,
                    Image& out) {
  const int r = static_cast<int>(k.size()) / 2;
  const int h = img.height(), w = img.width();
  Image tmp(h, w - 2 * r, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w - 2 * r; ++x) {
      double acc = 0.0;
      for (size_t i = 0; i < k.size(); ++i) acc += k[i] * img.at(y, x + static_cast<int>(i), channel);
      tmp.at(y, x, 0) = acc;
    }
  out = Image(h - 2 * r, w - 2 * r, 1);
  for (int y = 0; y < h - 2 * r; ++y)
    for (int x = 0; x < w - 2 * r; ++x) {
      double acc = 0.0;
      for (size_t i = 0; i < k.size(); ++i) acc += k[i] * tmp.at(y + static_cast<int>(i), x, 0);
      out.at(y, x, 0) = acc;
    }
}

struct SsimParts {
  double mean_ssim = 0.0;
  double mean_cs = 0.0;
};

SsimParts ssim_channel(const Image& a, const Image& b, int channel) {
  const auto k = window_kernel();
  const int h = a.height(), w = a.width();

  if (h < kWindow || w < kWindow) {
    // Degenerate size: single global window with uniform weights.
    double ma = 0, mb = 0;
    const int n = h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        ma += a.at(y, x, channel);
        mb += b.at(y, x, channel);
      }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cov = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double da = a.at(y, x, channel) - ma;
        const double db = b.at(y, x, channel) - mb;
        va += da * da;
        vb += db * db;
        cov += da * db;
      }
    va /= n;
    vb /= n;
    cov /= n;
    const double cs = (2 * cov + kC2) / (va + vb + kC2);
    const double l = (2 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
    return {l * cs, cs};
  }

  Image sq_a(h, w, 1), sq_b(h, w, 1), ab(h, w, 1), ca(h, w, 1), cb(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double va = a.at(y, x, channel), vb = b.at(y, x, channel);
      ca.at(y, x, 0) = va;
      cb.at(y, x, 0) = vb;
      sq_a.at(y, x, 0) = va * va;
      sq_b.at(y, x, 0) = vb * vb;
      ab.at(y, x, 0) = va * vb;
    }

  Image mu_a, mu_b, m_sq_a, m_sq_b, m_ab;
  convolve_valid(ca, 0, k, mu_a);
  convolve_valid(cb, 0, k, mu_b);
  convolve_valid(sq_a, 0, k, m_sq_a);
  convolve_valid(sq_b, 0, k, m_sq_b);
  convolve_valid(ab, 0, k, m_ab);

  double sum_ssim = 0.0, sum_cs = 0.0;
  const int vh = mu_a.height(), vw = mu_a.width();
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      const double ma = mu_a.at(y, x, 0), mb = mu_b.at(y, x, 0);
      const double va = m_sq_a.at(y, x, 0) - ma * ma;
      const double vb = m_sq_b.at(y, x, 0) - mb * mb;
      const double cov = m_ab.at(y, x, 0) - ma * mb;
      const double cs = (2 * cov + kC2) / (va + vb + kC2);
      const double l = (2 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
      sum_ssim += l * cs;
      sum_cs += cs;
    }
  const double n = static_cast<double>(vh) * vw;
  return {sum_ssim / n, sum_cs / n};
}

SsimParts ssim_parts(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  SsimParts acc;
  for (int c = 0; c < a.channels(); ++c) {
    const SsimParts p = ssim_channel(a, b, c);
    acc.mean_ssim += p.mean_ssim;
    acc.mean_cs += p.mean_cs;
  }
  acc.mean_ssim /= a.channels();
  acc.mean_cs /= a.channels();
  return acc;
}

}  // namespace

double ssim(const Image& a, const Image& b) { return ssim_parts(a, b).mean_ssim; }

double ms_ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ms_ssim: shape mismatch");
  static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

  // Drop scales the image cannot support, renormalize the weights.
  int scales = 1;
  {
    int h = a.height(), w = a.width();
    while (scales < 5 && h / 2 >= kWindow && w / 2 >= kWindow) {
      ++scales;
      h /= 2;
      w /= 2;
    }
  }
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += kWeights[s];

  Image x = a, y = b;
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const SsimParts p = ssim_parts(x, y);
    const double weight = kWeights[s] / wsum;
    // contrast-structure at every scale, luminance only at the coarsest
    const double term = (s + 1 == scales) ? p.mean_ssim : p.mean_cs;
    result *= std::pow(std::max(term, 0.0), weight);
    if (s + 1 < scales) {
      x = downsample2(x);
      y = downsample2(y);
    }
  }
  return result;
}

}  // namespace texrec
