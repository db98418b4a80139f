#include "texrec/uv_map.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "texrec/raster.h"

namespace texrec {

namespace {

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

constexpr double kZClip = 1e-6;

}  // namespace

Eigen::Vector3d UvLookup::surface_point(int y, int x, const Mesh& mesh) const {
  const int f = face_at(y, x);
  const Eigen::Vector3d& b = bary_at(y, x);
  const auto& fc = mesh.faces[f];
  return b[0] * mesh.vertices[fc[0]] + b[1] * mesh.vertices[fc[1]] + b[2] * mesh.vertices[fc[2]];
}

UvLookup uv_lookup_table(const Mesh& mesh, int uv_resolution) {
  if (uv_resolution <= 0) throw std::invalid_argument("uv_lookup_table: bad resolution");
  UvLookup lut;
  lut.resolution = uv_resolution;
  lut.face.assign(static_cast<size_t>(uv_resolution) * uv_resolution, -1);
  lut.bary.assign(lut.face.size(), Eigen::Vector3d::Zero());

  const double res = uv_resolution;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& fc = mesh.faces[f];
    const Eigen::Vector2d t0 = mesh.uv[fc[0]], t1 = mesh.uv[fc[1]], t2 = mesh.uv[fc[2]];
    const double area = cross2(t1 - t0, t2 - t0);
    if (std::abs(area) < 1e-14) continue;

    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min({t0.x(), t1.x(), t2.x()}) * res - 0.5)));
    const int x_hi = std::min(uv_resolution - 1,
                              static_cast<int>(std::ceil(std::max({t0.x(), t1.x(), t2.x()}) * res - 0.5)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min({t0.y(), t1.y(), t2.y()}) * res - 0.5)));
    const int y_hi = std::min(uv_resolution - 1,
                              static_cast<int>(std::ceil(std::max({t0.y(), t1.y(), t2.y()}) * res - 0.5)));

    for (int ty = y_lo; ty <= y_hi; ++ty)
      for (int tx = x_lo; tx <= x_hi; ++tx) {
        const Eigen::Vector2d p((tx + 0.5) / res, (ty + 0.5) / res);
        const double l0 = cross2(t1 - p, t2 - p) / area;
        const double l1 = cross2(t2 - p, t0 - p) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
        const size_t idx = static_cast<size_t>(ty) * uv_resolution + tx;
        if (lut.face[idx] >= 0) {
          ++lut.overlaps;  // keep the lowest face index
          continue;
        }
        lut.face[idx] = f;
        lut.bary[idx] = {l0, l1, l2};
        ++lut.occupied;
      }
  }

  if (lut.occupied > 0 && lut.overlaps > 0.01 * lut.occupied)
    throw std::runtime_error("uv_lookup_table: overlapping charts exceed 1% of occupied texels");
  return lut;
}

Image image_to_uv(const Image& image, const Mesh& mesh, const Camera& camera,
                  const UvLookup& lookup, Image* valid) {
  const int res = lookup.resolution;
  Image out(res, res, image.channels());
  if (valid) *valid = Image(res, res, 1);
  std::vector<double> sample(image.channels());

  for (int ty = 0; ty < res; ++ty)
    for (int tx = 0; tx < res; ++tx) {
      if (lookup.face_at(ty, tx) < 0) continue;
      const Eigen::Vector3d pos = lookup.surface_point(ty, tx, mesh);
      const Eigen::Vector3d pc = camera.to_camera(pos);
      if (pc.z() <= kZClip) continue;
      const Eigen::Vector2d pix = camera.project_camera(pc);
      if (pix.x() < 0.0 || pix.x() > camera.width || pix.y() < 0.0 || pix.y() > camera.height)
        continue;
      image.sample_bilinear(pix.x(), pix.y(), sample.data());
      for (int c = 0; c < image.channels(); ++c) out.at(ty, tx, c) = sample[c];
      if (valid) valid->at(ty, tx, 0) = 1.0;
    }
  return out;
}

Image visibility_map(const Mesh& mesh, const Camera& camera, const UvLookup& lookup,
                     double tolerance_uv) {
  if (tolerance_uv <= 0) throw std::invalid_argument("visibility_map: tolerance must be positive");

  // Rasterize each vertex's UV as a color; visible surface points carry
  // their own UV, occluded ones show the occluder's.
  std::vector<double> uv_attr(mesh.vertices.size() * 2);
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    uv_attr[2 * i] = mesh.uv[i].x();
    uv_attr[2 * i + 1] = mesh.uv[i].y();
  }
  const RasterOutput ras = rasterize_hard(mesh, camera, uv_attr, 2);

  const int res = lookup.resolution;
  Image vis(res, res, 1);
  double sampled[2];
  for (int ty = 0; ty < res; ++ty)
    for (int tx = 0; tx < res; ++tx) {
      if (lookup.face_at(ty, tx) < 0) continue;
      const Eigen::Vector3d pos = lookup.surface_point(ty, tx, mesh);
      const Eigen::Vector3d pc = camera.to_camera(pos);
      if (pc.z() <= kZClip) continue;
      const Eigen::Vector2d pix = camera.project_camera(pc);
      if (pix.x() < 0.0 || pix.x() > camera.width || pix.y() < 0.0 || pix.y() > camera.height)
        continue;
      ras.color.sample_bilinear(pix.x(), pix.y(), sampled);
      const double own_u = (tx + 0.5) / res;
      const double own_v = (ty + 0.5) / res;
      if (std::abs(sampled[0] - own_u) < tolerance_uv &&
          std::abs(sampled[1] - own_v) < tolerance_uv)
        vis.at(ty, tx, 0) = 1.0;
    }
  return vis;
}

PartialTexture partial_texture(const Image& albedo_image, const Mesh& mesh,
                               const Camera& camera, const UvLookup& lookup,
                               double tolerance_uv) {
  PartialTexture out;
  out.visibility = visibility_map(mesh, camera, lookup, tolerance_uv);
  Image sampled = image_to_uv(albedo_image, mesh, camera, lookup);
  out.albedo = Image(lookup.resolution, lookup.resolution, albedo_image.channels());
  for (int ty = 0; ty < lookup.resolution; ++ty)
    for (int tx = 0; tx < lookup.resolution; ++tx) {
      if (out.visibility.at(ty, tx, 0) <= 0.0) continue;
      for (int c = 0; c < albedo_image.channels(); ++c)
        out.albedo.at(ty, tx, c) = sampled.at(ty, tx, c);
    }
  return out;
}

}  // namespace texrec
