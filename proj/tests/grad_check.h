#pragma once

// Finite-difference oracle for the differentiable rasterizer, shared by the
// unit tests and the acceptance suite.

#include <Eigen/Dense>
#include <vector>

#include "texrec/camera.h"
#include "texrec/image.h"
#include "texrec/mesh.h"
#include "texrec/rng.h"
#include "texrec/soft_raster.h"
#include "test_util.h"

namespace texrec::testutil {

struct GradScene {
  Mesh mesh;
  std::vector<Eigen::Vector3d> vertex_colors;
  Image texture;
  Camera camera;
  SoftRasterConfig config;
  Image loss_color_weights;  // fixed random projection defining the scalar loss
  Image loss_sil_weights;
};

// Random triangles in front of the camera with random colors and a random
// texture. Pruning is disabled so forward and backward see every face.
// Scene dimensions are in meters at a generous scale so the pinned probe
// step h = 1e-3 stays well inside the smooth regime.
inline GradScene make_grad_scene(Rng& rng, int faces, int resolution) {
  GradScene s;
  s.camera = look_at_z(resolution, resolution, 0.9);
  for (int f = 0; f < faces; ++f) {
    while (true) {
      const int base = s.mesh.vertex_count();
      for (int k = 0; k < 3; ++k) {
        s.mesh.vertices.push_back({rng.uniform(-2.4, 2.4), rng.uniform(-2.4, 2.4),
                                   rng.uniform(6.4, 10.4)});
        // interior of the texture: border-clamped sampling would kink
        s.mesh.uv.push_back({rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)});
      }
      const Eigen::Vector2d q0 = s.camera.project(s.mesh.vertices[base]);
      const Eigen::Vector2d q1 = s.camera.project(s.mesh.vertices[base + 1]);
      const Eigen::Vector2d q2 = s.camera.project(s.mesh.vertices[base + 2]);
      const double area2 =
          std::abs((q1 - q0).x() * (q2 - q0).y() - (q1 - q0).y() * (q2 - q0).x());
      const double perimeter = (q1 - q0).norm() + (q2 - q1).norm() + (q0 - q2).norm();
      // keep faces with a usable footprint and no sliver shapes
      if (area2 > 60.0 && area2 / perimeter > 1.0) break;
      s.mesh.vertices.resize(base);
      s.mesh.uv.resize(base);
    }
    s.mesh.faces.push_back({3 * f, 3 * f + 1, 3 * f + 2});
  }
  for (int i = 0; i < s.mesh.vertex_count(); ++i)
    s.vertex_colors.push_back(
        {rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)});

  // Affine ramp texture: bilinear sampling of an affine grid has no kinks
  // at texel boundaries, so finite differences stay clean while the
  // texture-gradient path is still exercised.
  s.texture = Image(8, 8, 3);
  for (int c = 0; c < 3; ++c) {
    const double a = rng.uniform(0.2, 0.6);
    const double bx = rng.uniform(-0.03, 0.03);
    const double by = rng.uniform(-0.03, 0.03);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) s.texture.at(y, x, c) = a + bx * x + by * y;
  }

  // Softer-than-default sharpness so the h = 1e-3 central differences stay
  // inside the smooth regime; the backward pass itself is h-independent.
  s.config.sigma = 8e-3;
  s.config.gamma = 0.1;
  s.config.z_near = 4.0;
  s.config.z_far = 16.0;
  s.config.prune_eps = 0.0;
  s.config.background = {0.1, 0.1, 0.1};

  s.loss_color_weights = Image(resolution, resolution, 3);
  s.loss_sil_weights = Image(resolution, resolution, 1);
  for (size_t i = 0; i < s.loss_color_weights.size(); ++i)
    s.loss_color_weights.data()[i] = rng.uniform(-1.0, 1.0);
  for (size_t i = 0; i < s.loss_sil_weights.size(); ++i)
    s.loss_sil_weights.data()[i] = rng.uniform(-1.0, 1.0);
  return s;
}

inline double scene_loss(const GradScene& s) {
  const SoftRasterResult out =
      soft_rasterize(s.mesh, s.camera, &s.texture, &s.vertex_colors, s.config);
  double total = 0.0;
  for (size_t i = 0; i < out.color.size(); ++i)
    total += s.loss_color_weights.data()[i] * out.color.data()[i];
  for (size_t i = 0; i < out.silhouette.size(); ++i)
    total += s.loss_sil_weights.data()[i] * out.silhouette.data()[i];
  return total;
}

inline SoftRasterGrads scene_grads(const GradScene& s) {
  const SoftRasterResult out =
      soft_rasterize(s.mesh, s.camera, &s.texture, &s.vertex_colors, s.config);
  SoftRasterGrads grads;
  grads.vertices.assign(s.mesh.vertex_count(), Eigen::Vector3d::Zero());
  grads.vertex_colors.assign(s.mesh.vertex_count(), Eigen::Vector3d::Zero());
  grads.texture = Image::zeros_like(s.texture);
  soft_rasterize_backward(s.mesh, s.camera, &s.texture, &s.vertex_colors, s.config, out,
                          s.loss_color_weights, s.loss_sil_weights, grads);
  return grads;
}

struct GradCheckStats {
  int checked = 0;
  int failed = 0;
  double worst_rel = 0.0;
};

// Central finite differences at step h; a coordinate passes inside 1%
// relative or the absolute floor for small gradients.
inline void check_coordinate(GradScene& s, double* coord, double analytic, double h,
                             GradCheckStats& stats, double rel_tol = 0.01,
                             double abs_floor = 1e-4) {
  const double saved = *coord;
  *coord = saved + h;
  const double up = scene_loss(s);
  *coord = saved - h;
  const double down = scene_loss(s);
  *coord = saved;
  const double fd = (up - down) / (2.0 * h);

  ++stats.checked;
  const double diff = std::abs(fd - analytic);
  const double denom = std::max(std::abs(fd), std::abs(analytic));
  const bool ok =
      (denom < 1e-2 && diff <= abs_floor) || diff <= rel_tol * denom || diff <= abs_floor;
  if (!ok) ++stats.failed;
  if (denom > 1e-2) stats.worst_rel = std::max(stats.worst_rel, diff / denom);
}

// Spot-checks a deterministic subset of vertex / color / texel coordinates.
inline GradCheckStats run_grad_check(GradScene& s, Rng& rng, int n_vertex_coords,
                                     int n_color_coords, int n_texels, double h = 1e-3) {
  GradCheckStats stats;
  const SoftRasterGrads grads = scene_grads(s);
  for (int i = 0; i < n_vertex_coords; ++i) {
    const int v = rng.uniform_int(s.mesh.vertex_count());
    const int c = rng.uniform_int(3);
    check_coordinate(s, &s.mesh.vertices[v][c], grads.vertices[v][c], h, stats);
  }
  for (int i = 0; i < n_color_coords; ++i) {
    const int v = rng.uniform_int(s.mesh.vertex_count());
    const int c = rng.uniform_int(3);
    check_coordinate(s, &s.vertex_colors[v][c], grads.vertex_colors[v][c], h, stats);
  }
  for (int i = 0; i < n_texels; ++i) {
    const size_t t = static_cast<size_t>(rng.uniform_int(static_cast<int>(s.texture.size())));
    check_coordinate(s, &s.texture.data()[t], grads.texture.data()[t], h, stats);
  }
  return stats;
}

}  // namespace texrec::testutil
