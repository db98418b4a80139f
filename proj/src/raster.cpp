#include "texrec/raster.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace texrec {

namespace {

constexpr double kZClip = 1e-6;
constexpr double kAreaEps = 1e-14;

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace

RasterOutput rasterize_hard(const Mesh& mesh, const Camera& camera,
                            const std::vector<double>& attributes, int attr_dim) {
  const int w = camera.width, h = camera.height;
  if (attr_dim > 0 && attributes.size() != mesh.vertices.size() * static_cast<size_t>(attr_dim))
    throw std::invalid_argument("rasterize_hard: attribute size mismatch");

  RasterOutput out;
  out.color = Image(h, w, std::max(attr_dim, 1));
  out.silhouette = Image(h, w, 1);
  out.depth = Image(h, w, 1);
  out.barycentric = Image(h, w, 3);
  out.face_id.assign(static_cast<size_t>(h) * w, -1);

  std::vector<Eigen::Vector2d> proj(mesh.vertices.size());
  std::vector<double> depth(mesh.vertices.size());
  std::vector<char> valid(mesh.vertices.size(), 0);
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Eigen::Vector3d pc = camera.to_camera(mesh.vertices[i]);
    depth[i] = pc.z();
    if (pc.z() > kZClip) {
      proj[i] = camera.project_camera(pc);
      valid[i] = 1;
    }
  }

  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& face = mesh.faces[f];
    if (!valid[face[0]] || !valid[face[1]] || !valid[face[2]]) continue;
    const Eigen::Vector2d q0 = proj[face[0]], q1 = proj[face[1]], q2 = proj[face[2]];
    const double area = cross2(q1 - q0, q2 - q0);
    if (std::abs(area) < kAreaEps) continue;

    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min({q0.x(), q1.x(), q2.x()}) - 0.5)));
    const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(std::max({q0.x(), q1.x(), q2.x()}) - 0.5)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min({q0.y(), q1.y(), q2.y()}) - 0.5)));
    const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(std::max({q0.y(), q1.y(), q2.y()}) - 0.5)));

    const double z0 = depth[face[0]], z1 = depth[face[1]], z2 = depth[face[2]];
    for (int py = y_lo; py <= y_hi; ++py) {
      for (int px = x_lo; px <= x_hi; ++px) {
        const Eigen::Vector2d p(px + 0.5, py + 0.5);
        const double l0 = cross2(q1 - p, q2 - p) / area;
        const double l1 = cross2(q2 - p, q0 - p) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;

        // Perspective-correct weights and depth.
        const double r0 = l0 / z0, r1 = l1 / z1, r2 = l2 / z2;
        const double rsum = r0 + r1 + r2;
        const double z = 1.0 / rsum;
        const size_t idx = static_cast<size_t>(py) * w + px;
        if (out.face_id[idx] >= 0 && out.depth.at(py, px, 0) <= z) continue;

        out.face_id[idx] = f;
        out.depth.at(py, px, 0) = z;
        out.silhouette.at(py, px, 0) = 1.0;
        const double w0 = r0 / rsum, w1 = r1 / rsum, w2 = r2 / rsum;
        out.barycentric.at(py, px, 0) = w0;
        out.barycentric.at(py, px, 1) = w1;
        out.barycentric.at(py, px, 2) = w2;
        if (attr_dim > 0) {
          for (int c = 0; c < attr_dim; ++c) {
            out.color.at(py, px, c) = w0 * attributes[face[0] * attr_dim + c] +
                                      w1 * attributes[face[1] * attr_dim + c] +
                                      w2 * attributes[face[2] * attr_dim + c];
          }
        }
      }
    }
  }
  return out;
}

std::vector<char> visible_vertex_mask(const Mesh& mesh, const Camera& camera,
                                      double depth_tolerance) {
  if (depth_tolerance <= 0)
    throw std::invalid_argument("visible_vertices: depth tolerance must be positive");
  const RasterOutput ras = rasterize_hard(mesh, camera);
  const auto normals = vertex_normals(mesh);
  const Eigen::Vector3d eye = camera.center();

  std::vector<char> visible(mesh.vertices.size(), 0);
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Eigen::Vector3d view = mesh.vertices[i] - eye;
    if (normals[i].dot(view) >= 0.0) continue;  // back-facing
    const Eigen::Vector3d pc = camera.to_camera(mesh.vertices[i]);
    if (pc.z() <= kZClip) continue;
    const Eigen::Vector2d p = camera.project_camera(pc);
    const int px = static_cast<int>(std::floor(p.x()));
    const int py = static_cast<int>(std::floor(p.y()));
    if (px < 0 || px >= camera.width || py < 0 || py >= camera.height) continue;
    // An empty depth-buffer pixel means nothing can occlude the vertex.
    if (ras.face_at(py, px) < 0 || pc.z() <= ras.depth.at(py, px, 0) + depth_tolerance)
      visible[i] = 1;
  }
  return visible;
}

std::vector<int> visible_vertices(const Mesh& mesh, const Camera& camera,
                                  double depth_tolerance) {
  const auto mask = visible_vertex_mask(mesh, camera, depth_tolerance);
  std::vector<int> out;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace texrec
