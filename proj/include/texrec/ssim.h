#pragma once

#include "texrec/image.h"

namespace texrec {

/// Mean SSIM over valid windows (11-tap Gaussian, sigma 1.5, C1/C2
/// stabilizers for unit dynamic range), averaged over channels.
/// Images smaller than the window fall back to a single global window.
double ssim(const Image& a, const Image& b);

inline double dssim(const Image& a, const Image& b) { return 0.5 * (1.0 - ssim(a, b)); }

/// Five-scale MS-SSIM with the standard weights
/// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333); scales that would shrink
/// below the window are dropped and the weights renormalized.
double ms_ssim(const Image& a, const Image& b);

}  // namespace texrec
