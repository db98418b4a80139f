#pragma once

#include <optional>
#include <string>
#include <vector>

#include "texrec/camera.h"
#include "texrec/image.h"
#include "texrec/mesh.h"
#include "texrec/sh.h"

namespace texrec {

struct EvalReport {
  std::vector<double> iou;
  std::vector<double> normal_rmse;
  std::vector<double> ms_ssim;
  double mean_iou = 0.0;
  double mean_rmse = 0.0;
  double mean_ms_ssim = 0.0;
  std::optional<double> texture_rmse;
  std::optional<double> texture_ms_ssim;

  void save_json(const std::string& path) const;
};

/// Rasterizes world-space normal images for predicted and ground-truth
/// meshes and scores silhouette IoU, masked normal RMSE, and MS-SSIM (on
/// normals mapped to [0,1], cropped to the union bounding box). One camera
/// per frame; a single camera may be repeated.
EvalReport eval_meshes(const std::vector<Mesh>& predicted,
                       const std::vector<Mesh>& ground_truth,
                       const std::vector<Camera>& cameras);

/// RMSE and MS-SSIM between textures over texels where `valid` is set.
void eval_texture(const Image& predicted, const Image& ground_truth, const Image& valid,
                  EvalReport& report);

/// Hard-rasterized render of a textured mesh under SH lighting; output is
/// RGBA with alpha = coverage (transparent background).
Image render_novel(const Mesh& mesh, const Image& texture, const SHLight& light,
                   const Camera& camera);

/// render_novel under a substituted environment.
Image relight(const Mesh& mesh, const Image& texture, const SHLight& new_light,
              const Camera& camera);

/// Forward model shared by render_novel and the synthetic generator:
/// per-pixel interpolated-normal shading times bilinear texture sample,
/// composited over `background`; `mask_out` receives hard coverage when
/// non-null.
Image render_textured_hard(const Mesh& mesh, const Camera& camera, const Image& texture,
                           const SHLight& light, const Eigen::Vector3d& background,
                           Image* mask_out = nullptr);

}  // namespace texrec
