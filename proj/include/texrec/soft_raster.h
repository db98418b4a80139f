#pragma once

#include <Eigen/Dense>
#include <vector>

#include "texrec/camera.h"
#include "texrec/image.h"
#include "texrec/mesh.h"
#include "texrec/raster.h"

namespace texrec {

/// Parameters of the differentiable rasterizer. Distances are measured in
/// normalized device coordinates (the image mapped to [-1,1]^2), so sigma
/// has NDC^2 units and gamma scales the [0,1] normalized inverse depth.
struct SoftRasterConfig {
  double sigma = 1e-4;
  double gamma = 1e-4;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  /// Faces whose coverage probability at a pixel falls below this are
  /// dropped from that pixel's aggregation (outside pixels only). Zero
  /// disables pruning; gradient checks run with it disabled.
  double prune_eps = 1e-5;
  double z_near = 0.05;
  double z_far = 20.0;
};

/// Forward result plus the per-pixel aggregation state the backward pass
/// needs (softmax shift, total weight, product of miss probabilities).
struct SoftRasterResult {
  Image color;       // H x W x 3
  Image silhouette;  // H x W x 1, 1 - prod(1 - D_j)
  Image depth;       // softmax-aggregated camera z
  std::vector<int> face_id;
  Image zbar_max;    // per-pixel softmax shift m
  Image weight_sum;  // per-pixel total score T (faces + background)
  Image miss_prod;   // per-pixel prod(1 - D_j)
};

struct SoftRasterGrads {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3d> vertex_colors;
  Image texture;
};

/// SoftRas-style differentiable render. Per-face coverage is
/// sigmoid(sign * d^2 / sigma) of the squared NDC distance to the face
/// boundary; colors are blended with a depth softmax at temperature gamma
/// over contributing faces plus the background. The face color at a pixel
/// is interp(vertex_colors) * texture(interp(uv)); either input may be
/// null, contributing a factor of one. No back-face culling.
SoftRasterResult soft_rasterize(const Mesh& mesh, const Camera& camera,
                                const Image* texture,
                                const std::vector<Eigen::Vector3d>* vertex_colors,
                                const SoftRasterConfig& config);

/// Reverse pass: accumulates d(loss)/d(vertices), d/d(vertex_colors), and
/// d/d(texture) given image-space gradients. `grad_color` and
/// `grad_silhouette` may be empty images to skip a path. Gradient buffers
/// must be pre-sized (vertex grads to vertex count, texture grads to the
/// texture shape) or empty to disable that accumulation.
void soft_rasterize_backward(const Mesh& mesh, const Camera& camera,
                             const Image* texture,
                             const std::vector<Eigen::Vector3d>* vertex_colors,
                             const SoftRasterConfig& config,
                             const SoftRasterResult& fwd, const Image& grad_color,
                             const Image& grad_silhouette, SoftRasterGrads& grads);

}  // namespace texrec
